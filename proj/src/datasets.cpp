#include "got/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "got/errors.hpp"

namespace got {

using Rng = std::mt19937_64;

void LabeledDataset::validate() const {
  if (source.rank() != 2 || target.rank() != 2 || source.cols() != dim ||
      target.cols() != dim) {
    throw DimensionError("dataset: point arrays must be [N, " + std::to_string(dim) + "]");
  }
  if (source_labels.size() != source.rows() || source_train.size() != source.rows() ||
      target_labels.size() != target.rows() || target_train.size() != target.rows()) {
    throw DimensionError("dataset: label or split arrays do not match point counts");
  }
  for (int l : source_labels) {
    if (l < 0 || l >= static_cast<int>(num_classes)) {
      throw PreconditionError("dataset: source label out of range");
    }
  }
  for (int l : target_labels) {
    if (l < kUnlabeled || l >= static_cast<int>(num_classes)) {
      throw PreconditionError("dataset: target label out of range");
    }
  }
  auto on_simplex = [&](const std::vector<double>& w) {
    if (w.size() != num_classes) return false;
    double s = 0.0;
    for (double x : w) {
      if (!(x >= 0.0)) return false;
      s += x;
    }
    return std::abs(s - 1.0) < 1e-9;
  };
  if (!on_simplex(alpha) || !on_simplex(beta)) {
    throw PreconditionError("dataset: class weights must lie on the simplex");
  }
}

namespace {

std::vector<std::size_t> filter_rows(const std::vector<int>& labels,
                                     const std::vector<bool>& train, bool want_train,
                                     int cls) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (train[i] == want_train && (cls < 0 || labels[i] == cls)) out.push_back(i);
  }
  return out;
}

void push_point(std::vector<double>& buf, double x, double y) {
  buf.push_back(x);
  buf.push_back(y);
}

}  // namespace

std::vector<std::size_t> LabeledDataset::source_rows(bool train, int cls) const {
  return filter_rows(source_labels, source_train, train, cls);
}

std::vector<std::size_t> LabeledDataset::target_rows(bool train, int cls) const {
  return filter_rows(target_labels, target_train, train, cls);
}

std::vector<std::size_t> LabeledDataset::labeled_target_rows(int cls) const {
  if (cls < 0) throw PreconditionError("labeled_target_rows needs a class index");
  return filter_rows(target_labels, target_train, true, cls);
}

LabeledDataset make_two_moons(const MoonsOptions& o) {
  if (o.n_train_per_class < 1 || o.n_test_per_class < 1) {
    throw PreconditionError("two moons: per-class counts must be >= 1");
  }
  if (!(o.noise_sigma >= 0.0)) throw PreconditionError("two moons: noise must be >= 0");
  LabeledDataset ds;
  ds.dim = 2;
  ds.num_classes = 2;
  ds.alpha = {0.5, 0.5};
  ds.beta = {0.5, 0.5};
  ds.geometry.kind = "moons";
  ds.geometry.rotation_deg = o.rotation_deg;
  ds.geometry.center_x = 0.5;
  ds.geometry.center_y = 0.25;
  ds.geometry.sigma = o.noise_sigma;

  Rng rng(o.seed);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double th = o.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  const double cx = ds.geometry.center_x, cy = ds.geometry.center_y;

  auto draw = [&](std::vector<double>& pts, std::vector<int>& labels,
                  std::vector<bool>& train, bool rotate) {
    for (int cls = 0; cls < 2; ++cls) {
      const std::size_t total = o.n_train_per_class + o.n_test_per_class;
      for (std::size_t k = 0; k < total; ++k) {
        const double t = angle(rng);
        double x = cls == 0 ? std::cos(t) : 1.0 - std::cos(t);
        double y = cls == 0 ? std::sin(t) : 0.5 - std::sin(t);
        x += o.noise_sigma * noise(rng);
        y += o.noise_sigma * noise(rng);
        if (rotate) {
          const double dx = x - cx, dy = y - cy;
          x = cx + c * dx - s * dy;
          y = cy + s * dx + c * dy;
        }
        push_point(pts, x, y);
        labels.push_back(cls);
        train.push_back(k < o.n_train_per_class);
      }
    }
  };
  std::vector<double> src, tgt;
  draw(src, ds.source_labels, ds.source_train, false);
  draw(tgt, ds.target_labels, ds.target_train, true);
  ds.source = Tensor(Shape{ds.source_labels.size(), 2}, std::move(src));
  ds.target = Tensor(Shape{ds.target_labels.size(), 2}, std::move(tgt));
  return ds;
}

LabeledDataset make_gaussian_mixture(const std::vector<double>& source_means,
                                     const std::vector<double>& target_means,
                                     std::size_t dim, std::size_t n_train_per_comp,
                                     std::size_t n_test_per_comp, double sigma,
                                     std::uint64_t seed) {
  if (dim < 1 || source_means.empty() || source_means.size() % dim != 0 ||
      source_means.size() != target_means.size()) {
    throw DimensionError("gaussian mixture: means must be [classes, D] on both sides");
  }
  if (n_train_per_comp < 1 || n_test_per_comp < 1) {
    throw PreconditionError("gaussian mixture: per-component counts must be >= 1");
  }
  if (!(sigma >= 0.0)) throw PreconditionError("gaussian mixture: sigma must be >= 0");
  const std::size_t K = source_means.size() / dim;
  LabeledDataset ds;
  ds.dim = dim;
  ds.num_classes = K;
  ds.alpha.assign(K, 1.0 / static_cast<double>(K));
  ds.beta = ds.alpha;
  ds.geometry.kind = "gaussian_mixture";
  ds.geometry.source_means = source_means;
  ds.geometry.target_means = target_means;
  ds.geometry.sigma = sigma;

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto draw = [&](const std::vector<double>& means, std::vector<int>& labels,
                  std::vector<bool>& train) {
    std::vector<double> pts;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < n_train_per_comp + n_test_per_comp; ++i) {
        for (std::size_t d = 0; d < dim; ++d) {
          pts.push_back(means[k * dim + d] + sigma * noise(rng));
        }
        labels.push_back(static_cast<int>(k));
        train.push_back(i < n_train_per_comp);
      }
    }
    return Tensor(Shape{labels.size(), dim}, std::move(pts));
  };
  ds.source = draw(source_means, ds.source_labels, ds.source_train);
  ds.target = draw(target_means, ds.target_labels, ds.target_train);
  return ds;
}

LabeledDataset make_gaussian_grid(const GridOptions& o) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(o.n_components)));
  if (o.n_components < 1 || side * side != o.n_components) {
    throw PreconditionError("gaussian grid: component count " +
                            std::to_string(o.n_components) + " is not a perfect square");
  }
  std::vector<double> src, tgt;
  const double offset = 0.5 * static_cast<double>(side - 1);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const double x = (static_cast<double>(c) - offset) * o.grid_spacing;
      const double y = (static_cast<double>(r) - offset) * o.grid_spacing;
      push_point(src, x, y);
      push_point(tgt, -y, x);
    }
  }
  LabeledDataset ds = make_gaussian_mixture(src, tgt, 2, o.n_train_per_comp,
                                            o.n_test_per_comp, o.sigma, o.seed);
  ds.geometry.kind = "gaussian_grid";
  return ds;
}

namespace {

void check_simplex(const std::vector<double>& w, std::size_t n, const char* name) {
  if (w.size() != n) {
    throw PreconditionError(std::string(name) + " has " + std::to_string(w.size()) +
                            " entries for " + std::to_string(n) + " classes");
  }
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw PreconditionError(std::string(name) + " has a negative entry");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-9) {
    throw PreconditionError(std::string(name) + " does not sum to 1");
  }
}

// Largest per-class counts with count_n within 1 of w_n * total, each bounded
// by the available class sizes.
std::vector<std::size_t> proportional_counts(const std::vector<double>& w,
                                             const std::vector<std::size_t>& avail) {
  double total = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < w.size(); ++n) {
    if (w[n] > 0.0) total = std::min(total, static_cast<double>(avail[n]) / w[n]);
  }
  const auto N = static_cast<std::size_t>(std::floor(total + 1e-9));
  std::vector<std::size_t> counts(w.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t n = 0; n < w.size(); ++n) {
    const double exact = w[n] * static_cast<double>(N);
    counts[n] = std::min(avail[n], static_cast<std::size_t>(std::floor(exact + 1e-9)));
    assigned += counts[n];
    rema.emplace_back(-(exact - static_cast<double>(counts[n])), n);
  }
  std::sort(rema.begin(), rema.end());
  for (const auto& [r, n] : rema) {
    if (assigned >= N) break;
    if (w[n] > 0.0 && counts[n] < avail[n] && -r > 1e-12) {
      ++counts[n];
      ++assigned;
    }
  }
  return counts;
}

struct Side {
  const Tensor* points;
  const std::vector<int>* labels;
  const std::vector<bool>* train;
};

void subsample_side(const Side& in, const std::vector<double>& w, std::size_t K, Rng& rng,
                    std::vector<double>& pts, std::vector<int>& labels,
                    std::vector<bool>& train) {
  const std::size_t D = in.points->cols();
  for (bool split : {true, false}) {
    std::vector<std::vector<std::size_t>> by_class(K);
    for (std::size_t i = 0; i < in.labels->size(); ++i) {
      const int l = (*in.labels)[i];
      if ((*in.train)[i] != split) continue;
      if (l < 0) throw PreconditionError("set_class_weights must run before partial_labeling");
      by_class[static_cast<std::size_t>(l)].push_back(i);
    }
    std::vector<std::size_t> avail(K);
    for (std::size_t n = 0; n < K; ++n) avail[n] = by_class[n].size();
    const auto counts = proportional_counts(w, avail);
    for (std::size_t n = 0; n < K; ++n) {
      auto rows = by_class[n];
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(counts[n]);
      std::sort(rows.begin(), rows.end());
      for (std::size_t r : rows) {
        for (std::size_t d = 0; d < D; ++d) pts.push_back(in.points->at(r, d));
        labels.push_back(static_cast<int>(n));
        train.push_back(split);
      }
    }
  }
}

}  // namespace

LabeledDataset set_class_weights(const LabeledDataset& ds, const std::vector<double>& alpha,
                                 const std::vector<double>& beta, std::uint64_t seed) {
  check_simplex(alpha, ds.num_classes, "alpha");
  check_simplex(beta, ds.num_classes, "beta");
  Rng rng(seed);
  LabeledDataset out;
  out.dim = ds.dim;
  out.num_classes = ds.num_classes;
  out.alpha = alpha;
  out.beta = beta;
  out.geometry = ds.geometry;
  std::vector<double> sp, tp;
  subsample_side({&ds.source, &ds.source_labels, &ds.source_train}, alpha, ds.num_classes,
                 rng, sp, out.source_labels, out.source_train);
  subsample_side({&ds.target, &ds.target_labels, &ds.target_train}, beta, ds.num_classes,
                 rng, tp, out.target_labels, out.target_train);
  out.source = Tensor(Shape{out.source_labels.size(), ds.dim}, std::move(sp));
  out.target = Tensor(Shape{out.target_labels.size(), ds.dim}, std::move(tp));
  return out;
}

LabeledDataset partial_labeling(const LabeledDataset& ds, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset out = ds;
  for (std::size_t n = 0; n < ds.num_classes; ++n) {
    auto rows = ds.labeled_target_rows(static_cast<int>(n));
    if (rows.empty() && ds.beta.size() == ds.num_classes && ds.beta[n] == 0.0) continue;
    if (rows.size() < k) {
      throw PreconditionError("partial_labeling: class " + std::to_string(n) + " has " +
                              std::to_string(rows.size()) + " labeled target points, need " +
                              std::to_string(k));
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t j = k; j < rows.size(); ++j) out.target_labels[rows[j]] = kUnlabeled;
  }
  return out;
}

std::vector<double> estimate_class_weights(const std::vector<int>& labels,
                                           std::size_t num_classes) {
  std::vector<double> w(num_classes, 0.0);
  double total = 0.0;
  for (int l : labels) {
    if (l < 0) continue;
    if (l >= static_cast<int>(num_classes)) throw PreconditionError("label out of range");
    w[static_cast<std::size_t>(l)] += 1.0;
    total += 1.0;
  }
  if (total == 0.0) throw PreconditionError("no labeled points to estimate class weights");
  for (double& x : w) x /= total;
  return w;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_side(const std::filesystem::path& path, const Tensor& pts,
                const std::vector<int>& labels, const std::vector<bool>& train) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::size_t D = pts.cols();
  for (std::size_t d = 0; d < D; ++d) out << 'f' << d << ',';
  out << "label,split\n";
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    for (std::size_t d = 0; d < D; ++d) out << format_double(pts.at(i, d)) << ',';
    out << labels[i] << ',' << (train[i] ? "train" : "test") << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

struct ParsedSide {
  std::vector<double> points;
  std::vector<int> labels;
  std::vector<bool> train;
  std::size_t dim = 0;
  std::size_t rejected = 0;
};

ParsedSide read_side(const std::filesystem::path& path, const CsvOptions& o) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("CSV " + path.string() + " is empty");
  const auto header = split_line(line);
  std::ptrdiff_t label_col = -1, split_col = -1;
  std::vector<std::size_t> features;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == o.label_column) label_col = static_cast<std::ptrdiff_t>(c);
    else if (header[c] == o.split_column) split_col = static_cast<std::ptrdiff_t>(c);
    else features.push_back(c);
  }
  if (label_col < 0 || split_col < 0) {
    throw ConfigError("CSV " + path.string() + " lacks '" + o.label_column + "' or '" +
                      o.split_column + "' column");
  }
  if (features.empty()) throw ConfigError("CSV " + path.string() + " has no feature columns");

  ParsedSide side;
  side.dim = features.size();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != header.size()) {
      throw ConfigError("malformed CSV row at " + where + ": expected " +
                        std::to_string(header.size()) + " cells, got " +
                        std::to_string(cells.size()));
    }
    std::vector<double> row;
    bool has_nan = false;
    for (std::size_t c : features) {
      const std::string& s = cells[c];
      double v = 0.0;
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError("non-numeric feature '" + s + "' at " + where);
      }
      if (std::isnan(v)) has_nan = true;
      row.push_back(v);
    }
    int label = 0;
    const std::string& ls = cells[static_cast<std::size_t>(label_col)];
    auto lres = std::from_chars(ls.data(), ls.data() + ls.size(), label);
    if (lres.ec != std::errc() || lres.ptr != ls.data() + ls.size() || label < kUnlabeled) {
      throw ConfigError("label must be an integer >= -1 at " + where);
    }
    const std::string& sp = cells[static_cast<std::size_t>(split_col)];
    if (sp != "train" && sp != "test") {
      throw ConfigError("split must be 'train' or 'test' at " + where);
    }
    if (has_nan) {
      ++side.rejected;
      continue;
    }
    side.points.insert(side.points.end(), row.begin(), row.end());
    side.labels.push_back(label);
    side.train.push_back(sp == "train");
  }
  return side;
}

}  // namespace

void save_csv(const LabeledDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_side(dir / "source.csv", ds.source, ds.source_labels, ds.source_train);
  write_side(dir / "target.csv", ds.target, ds.target_labels, ds.target_train);
}

LabeledDataset load_csv_labeled(const std::filesystem::path& source_csv,
                                const std::filesystem::path& target_csv,
                                const CsvOptions& options, CsvLoadReport* report) {
  ParsedSide src = read_side(source_csv, options);
  ParsedSide tgt = read_side(target_csv, options);
  if (src.dim != tgt.dim) throw ConfigError("source and target CSVs differ in feature count");
  if (src.labels.empty() || tgt.labels.empty()) {
    throw ConfigError("CSV dataset has no usable rows");
  }
  for (int l : src.labels) {
    if (l < 0) throw ConfigError("source CSV rows must all be labeled");
  }
  int max_label = 0;
  for (int l : src.labels) max_label = std::max(max_label, l);
  for (int l : tgt.labels) max_label = std::max(max_label, l);

  LabeledDataset ds;
  ds.dim = src.dim;
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  ds.source = Tensor(Shape{src.labels.size(), src.dim}, std::move(src.points));
  ds.target = Tensor(Shape{tgt.labels.size(), tgt.dim}, std::move(tgt.points));
  ds.source_labels = std::move(src.labels);
  ds.source_train = std::move(src.train);
  ds.target_labels = std::move(tgt.labels);
  ds.target_train = std::move(tgt.train);
  ds.alpha = estimate_class_weights(ds.source_labels, ds.num_classes);
  ds.beta = estimate_class_weights(ds.target_labels, ds.num_classes);
  ds.geometry.kind = "csv";
  if (report) {
    report->source_rows = ds.source.rows();
    report->target_rows = ds.target.rows();
    report->source_rejected = src.rejected;
    report->target_rejected = tgt.rejected;
  }
  ds.validate();
  return ds;
}

}  // namespace got
