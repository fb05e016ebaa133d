#include "sbp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>

#include "sbp/csv.hpp"
#include "sbp/errors.hpp"
#include "sbp/selection.hpp"

namespace sbp {

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::csv: return "csv";
    case DatasetKind::blobs: return "blobs";
    case DatasetKind::two_moons: return "two_moons";
  }
  return "?";
}

std::optional<DatasetKind> parse_dataset_kind(std::string_view name) {
  if (name == "csv") return DatasetKind::csv;
  if (name == "blobs") return DatasetKind::blobs;
  if (name == "two_moons") return DatasetKind::two_moons;
  return std::nullopt;
}

void DatasetDescriptor::validate() const {
  if (!(split > 0.0 && split < 1.0)) {
    throw BadFraction("dataset split must lie in (0, 1), got " + std::to_string(split));
  }
  if (kind == DatasetKind::csv) {
    if (path.empty()) throw Error("dataset.path is required for csv datasets");
    return;
  }
  if (classes < 1 || dim < 1) throw Error("dataset needs at least one class and one dimension");
  if (n < classes) throw Error("dataset.n must be at least dataset.classes");
  if (kind == DatasetKind::two_moons && classes != 2) {
    throw Error("two_moons datasets have exactly two classes");
  }
}

LabeledRows synth_blobs_rows(const DatasetDescriptor& desc) {
  desc.validate();
  Rng rng = make_rng(desc.seed, 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Index classes = desc.classes;

  DenseMatrix<double> means = DenseMatrix<double>::Zero(classes, desc.dim);
  for (Index c = 0; c < classes; ++c) {
    if (desc.dim == 1) {
      means(c, 0) = desc.separation * (static_cast<double>(c) - 0.5 * static_cast<double>(classes - 1));
    } else {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
      means(c, 0) = desc.separation * std::cos(angle);
      means(c, 1) = desc.separation * std::sin(angle);
    }
  }

  LabeledRows rows;
  rows.num_classes = classes;
  rows.x.resize(desc.n, desc.dim);
  rows.y.resize(desc.n);
  for (Index i = 0; i < desc.n; ++i) {
    const Index c = i % classes;
    rows.y[i] = static_cast<int>(c);
    for (Index d = 0; d < desc.dim; ++d) rows.x(i, d) = means(c, d) + gauss(rng);
  }
  return rows;
}

LabeledRows synth_two_moons_rows(const DatasetDescriptor& desc) {
  desc.validate();
  Rng rng = make_rng(desc.seed, 2);
  std::normal_distribution<double> gauss(0.0, desc.noise);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  LabeledRows rows;
  rows.num_classes = 2;
  rows.x = DenseMatrix<double>::Zero(desc.n, std::max<Index>(desc.dim, 2));
  rows.y.resize(desc.n);
  for (Index i = 0; i < desc.n; ++i) {
    const int c = static_cast<int>(i % 2);
    const double t = angle(rng);
    const double px = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
    const double py = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
    rows.x(i, 0) = px + gauss(rng);
    rows.x(i, 1) = py + gauss(rng);
    rows.y[i] = c;
  }
  return rows;
}

Dataset split_rows(const LabeledRows& rows, double split, std::uint64_t split_seed) {
  const Index n = rows.x.rows();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = make_rng(split_seed, 3);
  std::shuffle(order.begin(), order.end(), rng);
  const Index n_train = std::clamp<Index>(
      static_cast<Index>(std::llround(split * static_cast<double>(n))), 0, n);

  Dataset data;
  data.num_classes = rows.num_classes;
  data.train_x.resize(n_train, rows.x.cols());
  data.test_x.resize(n - n_train, rows.x.cols());
  for (Index a = 0; a < n; ++a) {
    const Index i = order[a];
    if (a < n_train) {
      data.train_x.row(a) = rows.x.row(i);
      data.train_y.push_back(rows.y[i]);
    } else {
      data.test_x.row(a - n_train) = rows.x.row(i);
      data.test_y.push_back(rows.y[i]);
    }
  }
  return data;
}

Dataset synth_blobs(const DatasetDescriptor& desc) {
  return split_rows(synth_blobs_rows(desc), desc.split, desc.split_seed);
}

Dataset synth_two_moons(const DatasetDescriptor& desc) {
  return split_rows(synth_two_moons_rows(desc), desc.split, desc.split_seed);
}

namespace {

std::size_t resolve_column(const csv::Table& table, const std::string& name, bool header) {
  if (header) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it != table.header.end()) return static_cast<std::size_t>(it - table.header.begin());
  }
  long long idx = 0;
  if (csv::parse_int(name, idx) && idx >= 0) return static_cast<std::size_t>(idx);
  throw Error("unknown column '" + name + "'");
}

}  // namespace

Dataset ingest_csv(const DatasetDescriptor& desc) {
  desc.validate();
  const csv::Table table = csv::read_file(desc.path, desc.header);
  if (table.rows.empty()) throw MalformedRow(desc.path + ": no data rows");
  const std::size_t width = desc.header ? table.header.size() : table.rows.front().size();

  const std::size_t label_col = resolve_column(table, desc.label_column, desc.header);
  if (label_col >= width) throw Error("label column index out of range");
  std::vector<std::size_t> feature_cols;
  if (desc.feature_columns.empty()) {
    for (std::size_t c = 0; c < width; ++c) {
      if (c != label_col) feature_cols.push_back(c);
    }
  } else {
    for (const auto& name : desc.feature_columns) {
      const std::size_t c = resolve_column(table, name, desc.header);
      if (c >= width) throw Error("feature column '" + name + "' out of range");
      feature_cols.push_back(c);
    }
  }
  if (feature_cols.empty()) throw Error("csv dataset has no feature columns");

  LabeledRows rows;
  const Index n = static_cast<Index>(table.rows.size());
  rows.x.resize(n, static_cast<Index>(feature_cols.size()));
  rows.y.resize(n);
  int max_label = 0;
  for (Index r = 0; r < n; ++r) {
    const auto& fields = table.rows[r];
    const std::string where = desc.path + ":" + std::to_string(table.line_numbers[r]);
    if (fields.size() != width) {
      throw MalformedRow(where + ": expected " + std::to_string(width) + " fields, got " +
                         std::to_string(fields.size()));
    }
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      double v = 0;
      if (!csv::parse_double(fields[feature_cols[f]], v) || !std::isfinite(v)) {
        throw NonNumericFeature(where + ": feature '" + fields[feature_cols[f]] + "' is not numeric");
      }
      rows.x(r, static_cast<Index>(f)) = v;
    }
    long long label = 0;
    if (!csv::parse_int(fields[label_col], label) || label < 0 ||
        (desc.classes > 0 && label >= desc.classes) || label > 1'000'000) {
      throw LabelOutOfRange(where + ": label '" + fields[label_col] + "' is not a valid class");
    }
    rows.y[r] = static_cast<int>(label);
    max_label = std::max(max_label, rows.y[r]);
  }
  rows.num_classes = desc.classes > 0 ? desc.classes : max_label + 1;

  Dataset data = split_rows(rows, desc.split, desc.split_seed);
  if (data.train_size() == 0) throw Error("csv split left no training rows");

  constexpr double kVarianceGuard = 1e-12;
  const DenseVector<double> mean = data.train_x.colwise().mean().transpose();
  for (Index c = 0; c < data.train_x.cols(); ++c) {
    const double var = (data.train_x.col(c).array() - mean(c)).square().mean();
    const double scale = var < kVarianceGuard ? 1.0 : 1.0 / std::sqrt(var);
    data.train_x.col(c) = (data.train_x.col(c).array() - mean(c)) * scale;
    data.test_x.col(c) = (data.test_x.col(c).array() - mean(c)) * scale;
  }
  return data;
}

Dataset make_dataset(const DatasetDescriptor& desc) {
  switch (desc.kind) {
    case DatasetKind::csv: return ingest_csv(desc);
    case DatasetKind::blobs: return synth_blobs(desc);
    case DatasetKind::two_moons: return synth_two_moons(desc);
  }
  throw Error("unknown dataset kind");
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (Index d = 0; d < data.feature_dim(); ++d) out << 'x' << d << ',';
  out << "label\n";
  auto dump = [&](const DenseMatrix<double>& x, const std::vector<int>& y) {
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index d = 0; d < x.cols(); ++d) out << csv::format(x(i, d)) << ',';
      out << y[i] << '\n';
    }
  };
  dump(data.train_x, data.train_y);
  dump(data.test_x, data.test_y);
}

}  // namespace sbp
