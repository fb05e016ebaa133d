#include "sbp/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sbp/csv.hpp"

namespace sbp {

std::vector<StrategyConfig> ExperimentSpec::strategy_configs(double fraction) const {
  std::vector<StrategyConfig> out;
  for (StrategyKind kind : strategies) {
    StrategyConfig c = strategy;
    c.kind = kind;
    c.fraction = fraction;
    out.push_back(c);
  }
  return out;
}

std::optional<TrainConfig> preset_train_config(std::string_view name) {
  TrainConfig c;
  c.optimizer = OptimizerKind::sgd_momentum;
  c.momentum = 0.9;
  c.weight_decay = 5e-4;
  c.base_batch = 128;
  c.decay_factor = 0.2;
  if (name == "cifar_style") {
    c.nesterov = true;
    c.epochs = 200;
    c.base_lr = 0.1;
    c.schedule = ScheduleKind::step;
    c.milestones = {60, 120, 160};
    return c;
  }
  if (name == "svhn_style") {
    c.nesterov = true;
    c.epochs = 80;
    c.base_lr = 0.01;
    c.schedule = ScheduleKind::cosine;
    c.milestones = {};
    return c;
  }
  if (name == "imagenet32_style") {
    c.nesterov = false;
    c.epochs = 40;
    c.base_lr = 0.01;
    c.schedule = ScheduleKind::step;
    c.milestones = {10, 20, 30};
    return c;
  }
  return std::nullopt;
}

std::vector<std::string> preset_names() { return {"cifar_style", "svhn_style", "imagenet32_style"}; }

namespace {

struct Field {
  std::function<void(ExperimentSpec&, std::string_view)> set;
  std::function<std::string(const ExperimentSpec&)> get;
};

[[noreturn]] void bad_value(std::string_view what) {
  throw ParseError("invalid " + std::string(what));
}

double to_double(std::string_view v) {
  double d = 0;
  if (!csv::parse_double(v, d)) bad_value("number '" + std::string(v) + "'");
  return d;
}

long long to_int(std::string_view v) {
  long long i = 0;
  if (!csv::parse_int(v, i)) bad_value("integer '" + std::string(v) + "'");
  return i;
}

std::uint64_t to_u64(std::string_view v) {
  const long long i = to_int(v);
  if (i < 0) bad_value("seed '" + std::string(v) + "'");
  return static_cast<std::uint64_t>(i);
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value("boolean '" + std::string(v) + "'");
}

std::vector<std::string> to_list(std::string_view v) {
  std::vector<std::string> out;
  if (csv::trim(v).empty()) return out;
  for (auto& item : csv::split_line(v)) {
    if (item.empty()) bad_value("empty list item");
    out.push_back(std::move(item));
  }
  return out;
}

template <typename Parse, typename Opt = std::invoke_result_t<Parse, std::string_view>>
auto to_enum(std::string_view v, Parse parse, std::string_view what) {
  const Opt parsed = parse(v);
  if (!parsed) bad_value(std::string(what) + " '" + std::string(v) + "'");
  return *parsed;
}

std::string fmt(double d) { return csv::format(d); }
std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += f(v[i]);
  }
  return out;
}

const std::vector<std::pair<std::string, Field>>& field_table() {
  using S = ExperimentSpec;
  using V = std::string_view;
  static const std::vector<std::pair<std::string, Field>> table = {
      {"dataset.kind", {[](S& s, V v) { s.dataset.kind = to_enum(v, parse_dataset_kind, "dataset kind"); },
                        [](const S& s) { return std::string(to_string(s.dataset.kind)); }}},
      {"dataset.path", {[](S& s, V v) { s.dataset.path = std::string(v); },
                        [](const S& s) { return s.dataset.path; }}},
      {"dataset.label_column", {[](S& s, V v) { s.dataset.label_column = std::string(v); },
                                [](const S& s) { return s.dataset.label_column; }}},
      {"dataset.feature_columns", {[](S& s, V v) { s.dataset.feature_columns = to_list(v); },
                                   [](const S& s) { return join(s.dataset.feature_columns, [](const std::string& x) { return x; }); }}},
      {"dataset.header", {[](S& s, V v) { s.dataset.header = to_bool(v); },
                          [](const S& s) { return fmt_bool(s.dataset.header); }}},
      {"dataset.split", {[](S& s, V v) { s.dataset.split = to_double(v); },
                         [](const S& s) { return fmt(s.dataset.split); }}},
      {"dataset.split_seed", {[](S& s, V v) { s.dataset.split_seed = to_u64(v); },
                              [](const S& s) { return std::to_string(s.dataset.split_seed); }}},
      {"dataset.n", {[](S& s, V v) { s.dataset.n = to_int(v); },
                     [](const S& s) { return std::to_string(s.dataset.n); }}},
      {"dataset.classes", {[](S& s, V v) { s.dataset.classes = to_int(v); },
                           [](const S& s) { return std::to_string(s.dataset.classes); }}},
      {"dataset.dim", {[](S& s, V v) { s.dataset.dim = to_int(v); },
                       [](const S& s) { return std::to_string(s.dataset.dim); }}},
      {"dataset.separation", {[](S& s, V v) { s.dataset.separation = to_double(v); },
                              [](const S& s) { return fmt(s.dataset.separation); }}},
      {"dataset.noise", {[](S& s, V v) { s.dataset.noise = to_double(v); },
                         [](const S& s) { return fmt(s.dataset.noise); }}},
      {"dataset.seed", {[](S& s, V v) { s.dataset.seed = to_u64(v); },
                        [](const S& s) { return std::to_string(s.dataset.seed); }}},

      {"model.hidden", {[](S& s, V v) {
                          s.model.hidden.clear();
                          for (const auto& w : to_list(v)) s.model.hidden.push_back(to_int(w));
                        },
                        [](const S& s) { return join(s.model.hidden, [](Index w) { return std::to_string(w); }); }}},
      {"model.activation", {[](S& s, V v) { s.model.activation = to_enum(v, parse_activation, "activation"); },
                            [](const S& s) { return std::string(to_string(s.model.activation)); }}},
      {"model.init_seed", {[](S& s, V v) { s.model.init_seed = to_u64(v); },
                           [](const S& s) { return std::to_string(s.model.init_seed); }}},

      {"train.base_batch", {[](S& s, V v) { s.train.base_batch = to_int(v); },
                            [](const S& s) { return std::to_string(s.train.base_batch); }}},
      {"train.batch_mode", {[](S& s, V v) { s.train.batch_mode = to_enum(v, parse_batch_mode, "batch mode"); },
                            [](const S& s) { return std::string(to_string(s.train.batch_mode)); }}},
      {"train.epochs", {[](S& s, V v) { s.train.epochs = to_int(v); },
                        [](const S& s) { return std::to_string(s.train.epochs); }}},
      {"train.optimizer", {[](S& s, V v) { s.train.optimizer = to_enum(v, parse_optimizer, "optimizer"); },
                           [](const S& s) { return std::string(to_string(s.train.optimizer)); }}},
      {"train.momentum", {[](S& s, V v) { s.train.momentum = to_double(v); },
                          [](const S& s) { return fmt(s.train.momentum); }}},
      {"train.nesterov", {[](S& s, V v) { s.train.nesterov = to_bool(v); },
                          [](const S& s) { return fmt_bool(s.train.nesterov); }}},
      {"train.weight_decay", {[](S& s, V v) { s.train.weight_decay = to_double(v); },
                              [](const S& s) { return fmt(s.train.weight_decay); }}},
      {"train.schedule", {[](S& s, V v) { s.train.schedule = to_enum(v, parse_schedule, "schedule"); },
                          [](const S& s) { return std::string(to_string(s.train.schedule)); }}},
      {"train.milestones", {[](S& s, V v) {
                              s.train.milestones.clear();
                              for (const auto& m : to_list(v)) s.train.milestones.push_back(to_double(m));
                            },
                            [](const S& s) { return join(s.train.milestones, fmt); }}},
      {"train.decay_factor", {[](S& s, V v) { s.train.decay_factor = to_double(v); },
                              [](const S& s) { return fmt(s.train.decay_factor); }}},
      {"train.lr", {[](S& s, V v) { s.train.base_lr = to_double(v); },
                    [](const S& s) { return fmt(s.train.base_lr); }}},
      {"train.lr_factor", {[](S& s, V v) { s.train.lr_factor = to_double(v); },
                           [](const S& s) { return fmt(s.train.lr_factor); }}},
      {"train.stretch_schedule", {[](S& s, V v) { s.train.stretch_schedule = to_bool(v); },
                                  [](const S& s) { return fmt_bool(s.train.stretch_schedule); }}},
      {"train.label_noise", {[](S& s, V v) { s.train.label_noise = to_double(v); },
                             [](const S& s) { return fmt(s.train.label_noise); }}},

      {"strategy.kinds", {[](S& s, V v) {
                            s.strategies.clear();
                            for (const auto& k : to_list(v)) s.strategies.push_back(to_enum(k, parse_strategy_kind, "strategy"));
                          },
                          [](const S& s) { return join(s.strategies, [](StrategyKind k) { return std::string(to_string(k)); }); }}},
      {"strategy.cdf_source", {[](S& s, V v) { s.strategy.cdf_source = to_enum(v, parse_cdf_source, "cdf source"); },
                               [](const S& s) { return std::string(to_string(s.strategy.cdf_source)); }}},
      {"strategy.buffer_capacity", {[](S& s, V v) {
                                      const long long c = to_int(v);
                                      if (c < 0) bad_value("buffer capacity");
                                      s.strategy.buffer_capacity = static_cast<std::size_t>(c);
                                    },
                                    [](const S& s) { return std::to_string(s.strategy.buffer_capacity); }}},
      {"strategy.clip_negative", {[](S& s, V v) { s.strategy.clip_negative = to_bool(v); },
                                  [](const S& s) { return fmt_bool(s.strategy.clip_negative); }}},
      {"strategy.pad_to_m", {[](S& s, V v) { s.strategy.pad_to_m = to_bool(v); },
                             [](const S& s) { return fmt_bool(s.strategy.pad_to_m); }}},
      {"strategy.abs_correlation", {[](S& s, V v) { s.strategy.abs_correlation = to_bool(v); },
                                    [](const S& s) { return fmt_bool(s.strategy.abs_correlation); }}},

      {"grid.fractions", {[](S& s, V v) {
                            s.fractions.clear();
                            for (const auto& f : to_list(v)) s.fractions.push_back(to_double(f));
                          },
                          [](const S& s) { return join(s.fractions, fmt); }}},
      {"grid.seeds", {[](S& s, V v) {
                        s.seeds.clear();
                        for (const auto& x : to_list(v)) s.seeds.push_back(to_u64(x));
                      },
                      [](const S& s) { return join(s.seeds, [](std::uint64_t x) { return std::to_string(x); }); }}},

      {"grad_error.num_batches", {[](S& s, V v) { s.grad_error.num_batches = to_int(v); },
                                  [](const S& s) { return std::to_string(s.grad_error.num_batches); }}},
      {"grad_error.batch_size", {[](S& s, V v) { s.grad_error.batch_size = to_int(v); },
                                 [](const S& s) { return std::to_string(s.grad_error.batch_size); }}},
      {"grad_error.subset_size", {[](S& s, V v) { s.grad_error.subset_size = to_int(v); },
                                  [](const S& s) { return std::to_string(s.grad_error.subset_size); }}},
      {"grad_error.checkpoint_epochs", {[](S& s, V v) { s.grad_error.checkpoint_epochs = to_int(v); },
                                        [](const S& s) { return std::to_string(s.grad_error.checkpoint_epochs); }}},

      {"output.dir", {[](S& s, V v) { s.output_dir = std::string(v); },
                      [](const S& s) { return s.output_dir; }}},
  };
  return table;
}

const Field* find_field(std::string_view key) {
  for (const auto& [name, field] : field_table()) {
    if (name == key) return &field;
  }
  return nullptr;
}

void validate_spec(const ExperimentSpec& spec, const std::string& source) {
  auto fail = [&](const std::string& msg) { throw ParseError(source + ": " + msg); };
  if (spec.strategies.empty()) fail("strategy.kinds lists no strategy");
  if (spec.fractions.empty()) fail("grid.fractions lists no fraction");
  if (spec.seeds.empty()) fail("grid.seeds lists no seed");
  for (double f : spec.fractions) {
    if (!(f > 0.0 && f <= 1.0)) fail("grid.fractions entries must lie in (0, 1]");
  }
  for (Index w : spec.model.hidden) {
    if (w < 1) fail("model.hidden widths must be positive");
  }
  try {
    spec.train.validate();
    spec.dataset.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k{"preset"};
    for (const auto& [name, field] : field_table()) k.push_back(name);
    return k;
  }();
  return keys;
}

const std::vector<std::string>& required_config_keys() {
  static const std::vector<std::string> keys{"dataset.kind", "strategy.kinds", "grid.fractions", "grid.seeds"};
  return keys;
}

ExperimentSpec parse_config(std::string_view text, const std::string& source) {
  struct Entry {
    std::string value;
    std::size_t line;
  };
  std::vector<std::pair<std::string, Entry>> entries;
  std::map<std::string, std::size_t> seen;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = csv::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key(csv::trim(line.substr(0, eq)));
    std::string value(csv::trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError(source + ":" + std::to_string(lineno) + ": empty key");
    if (auto it = seen.find(key); it != seen.end()) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                       "' (first set on line " + std::to_string(it->second) + ")");
    }
    if (key != "preset" && !find_field(key)) {
      throw UnknownKey(source + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    seen[key] = lineno;
    entries.push_back({key, {value, lineno}});
  }

  std::vector<std::string> missing;
  for (const auto& req : required_config_keys()) {
    if (!seen.count(req)) missing.push_back(req);
  }
  if (!missing.empty()) {
    std::string msg = source + ": missing required keys:";
    for (const auto& k : missing) msg += " " + k;
    throw ParseError(msg);
  }

  ExperimentSpec spec;
  for (const auto& [key, entry] : entries) {
    if (key != "preset") continue;
    auto preset = preset_train_config(entry.value);
    if (!preset) {
      throw ParseError(source + ":" + std::to_string(entry.line) + ": unknown preset '" + entry.value + "'");
    }
    spec.train = *preset;
  }
  for (const auto& [key, entry] : entries) {
    if (key == "preset") continue;
    try {
      find_field(key)->set(spec, entry.value);
    } catch (const ParseError& e) {
      throw ParseError(source + ":" + std::to_string(entry.line) + ": key '" + key + "': " + e.what());
    }
  }
  validate_spec(spec, source);
  return spec;
}

ExperimentSpec load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

std::string dump_config(const ExperimentSpec& spec) {
  std::string out;
  for (const auto& [name, field] : field_table()) {
    out += name + " = " + field.get(spec) + "\n";
  }
  return out;
}

}  // namespace sbp
