#include "got/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <sstream>

#include "got/errors.hpp"

namespace got {

OracleKind parse_oracle_kind(const std::string& name) {
  if (name == "moons") return OracleKind::Moons;
  if (name == "gaussian_grid") return OracleKind::GaussianGrid;
  if (name == "nearest_labeled") return OracleKind::NearestLabeled;
  throw ConfigError("unknown oracle classifier '" + name +
                    "' (expected moons, gaussian_grid or nearest_labeled)");
}

std::string oracle_kind_name(OracleKind kind) {
  switch (kind) {
    case OracleKind::Moons: return "moons";
    case OracleKind::GaussianGrid: return "gaussian_grid";
    case OracleKind::NearestLabeled: return "nearest_labeled";
  }
  return "?";
}

OracleKind default_oracle(const LabeledDataset& ds) {
  const auto& k = ds.geometry.kind;
  if (k == "moons") return OracleKind::Moons;
  if (k == "gaussian_grid" || k == "gaussian_mixture") return OracleKind::GaussianGrid;
  return OracleKind::NearestLabeled;
}

namespace {

double dist2(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

// Distance from q to the noiseless source arcs.
double outer_arc_distance(double x, double y) {
  if (y >= 0.0) return std::abs(std::hypot(x, y) - 1.0);
  return std::min(dist2(x, y, 1.0, 0.0), dist2(x, y, -1.0, 0.0));
}

double inner_arc_distance(double x, double y) {
  const double dx = x - 1.0, dy = y - 0.5;
  if (dy <= 0.0) return std::abs(std::hypot(dx, dy) - 1.0);
  return std::min(dist2(x, y, 0.0, 0.5), dist2(x, y, 2.0, 0.5));
}

}  // namespace

std::vector<int> oracle_classify(const Tensor& points, const LabeledDataset& ds,
                                 OracleKind kind) {
  if (points.rank() != 2 || points.cols() != ds.dim) {
    throw DimensionError("oracle_classify: points must be [N, " + std::to_string(ds.dim) + "]");
  }
  const std::size_t N = points.rows(), D = ds.dim;
  std::vector<int> out(N);
  switch (kind) {
    case OracleKind::Moons: {
      if (D != 2) throw PreconditionError("moons classifier needs 2-D points");
      const double th = -ds.geometry.rotation_deg * std::numbers::pi / 180.0;
      const double c = std::cos(th), s = std::sin(th);
      const double cx = ds.geometry.center_x, cy = ds.geometry.center_y;
      for (std::size_t i = 0; i < N; ++i) {
        const double dx = points.at(i, 0) - cx, dy = points.at(i, 1) - cy;
        const double x = cx + c * dx - s * dy, y = cy + s * dx + c * dy;
        out[i] = outer_arc_distance(x, y) <= inner_arc_distance(x, y) ? 0 : 1;
      }
      break;
    }
    case OracleKind::GaussianGrid: {
      const auto& means = ds.geometry.target_means;
      if (means.empty() || means.size() != ds.num_classes * D) {
        throw PreconditionError("nearest-mean classifier needs component means");
      }
      for (std::size_t i = 0; i < N; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < ds.num_classes; ++k) {
          double d = 0.0;
          for (std::size_t j = 0; j < D; ++j) {
            const double diff = points.at(i, j) - means[k * D + j];
            d += diff * diff;
          }
          if (d < best) {
            best = d;
            out[i] = static_cast<int>(k);
          }
        }
      }
      break;
    }
    case OracleKind::NearestLabeled: {
      std::vector<std::size_t> ref;
      for (std::size_t r = 0; r < ds.target.rows(); ++r) {
        if (ds.target_train[r] && ds.target_labels[r] >= 0) ref.push_back(r);
      }
      if (ref.empty()) throw PreconditionError("1-NN classifier needs labeled target points");
      for (std::size_t i = 0; i < N; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int label = std::numeric_limits<int>::max();
        for (std::size_t r : ref) {
          double d = 0.0;
          for (std::size_t j = 0; j < D; ++j) {
            const double diff = points.at(i, j) - ds.target.at(r, j);
            d += diff * diff;
          }
          const int l = ds.target_labels[r];
          if (d < best || (d == best && l < label)) {
            best = d;
            label = l;
          }
        }
        out[i] = label;
      }
      break;
    }
  }
  return out;
}

double energy_distance_sq(const Tensor& A, const Tensor& B) {
  const std::size_t N = A.rows(), M = B.rows(), D = A.cols();
  if (N < 2 || M < 2) throw PreconditionError("energy distance needs at least 2 points per sample");
  if (B.cols() != D) throw DimensionError("energy distance: width mismatch");
  auto d = [D](const Tensor& P, std::size_t i, const Tensor& Q, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < D; ++k) {
      const double diff = P.at(i, k) - Q.at(j, k);
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  double cross = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < M; ++j) cross += d(A, i, B, j);
    for (std::size_t j = i + 1; j < N; ++j) aa += d(A, i, A, j);
  }
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = i + 1; j < M; ++j) bb += d(B, i, B, j);
  }
  const double n = static_cast<double>(N), m = static_cast<double>(M);
  return cross / (n * m) - aa / (n * (n - 1.0)) - bb / (m * (m - 1.0));
}

std::pair<Tensor, std::vector<int>> map_test_points(const TransportMap& T,
                                                    const LabeledDataset& ds,
                                                    std::size_t n_draws, std::uint64_t seed) {
  const auto rows = ds.source_rows(false);
  if (rows.empty()) throw PreconditionError("evaluation needs a nonempty test split");
  const std::size_t draws = T.stochastic() ? std::max<std::size_t>(1, n_draws) : 1;
  const std::size_t D = ds.dim;
  Tensor X(Shape{rows.size() * draws, D});
  std::vector<int> labels;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t j = 0; j < draws; ++j) {
      for (std::size_t d = 0; d < D; ++d) X.at(k * draws + j, d) = ds.source.at(rows[k], d);
      labels.push_back(ds.source_labels[rows[k]]);
    }
  }
  if (!T.stochastic()) return {T.apply(X), std::move(labels)};
  Rng rng(seed);
  const Tensor Z = LatentSampler(T.latent_dim()).sample(X.rows(), rng);
  return {T.apply(X, &Z), std::move(labels)};
}

EvalReport evaluate(const TransportMap& T, const LabeledDataset& ds, const EvalOptions& o) {
  ds.validate();
  const OracleKind kind = o.oracle.value_or(default_oracle(ds));
  const std::size_t draws = T.stochastic() ? std::max<std::size_t>(1, o.n_latent_draws) : 1;
  auto [images, labels] = map_test_points(T, ds, draws, o.seed);
  if (!images.all_finite()) throw NumericalError("transport map produced non-finite images");
  const auto pred = oracle_classify(images, ds, kind);

  EvalReport r;
  r.n_latent_draws = draws;
  const std::size_t K = ds.num_classes;
  r.confusion.assign(K, std::vector<std::size_t>(K, 0));
  std::size_t correct = 0, correct_first = 0, firsts = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto src = static_cast<std::size_t>(labels[i]);
    r.confusion[src][static_cast<std::size_t>(pred[i])] += 1;
    if (pred[i] == labels[i]) ++correct;
    if (i % draws == 0) {
      ++firsts;
      if (pred[i] == labels[i]) ++correct_first;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
  r.accuracy_first_draw = static_cast<double>(correct_first) / static_cast<double>(firsts);

  const auto tgt_rows = ds.target_rows(false);
  const Tensor target_test = take_rows(ds.target, tgt_rows);
  r.energy_overall = (images.rows() >= 2 && target_test.rows() >= 2)
                         ? energy_distance_sq(images, target_test)
                         : std::numeric_limits<double>::quiet_NaN();
  r.energy_per_class.assign(K, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t n = 0; n < K; ++n) {
    std::vector<std::size_t> img_rows, tgt_cls;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == static_cast<int>(n)) img_rows.push_back(i);
    }
    for (std::size_t k = 0; k < tgt_rows.size(); ++k) {
      if (ds.target_labels[tgt_rows[k]] == static_cast<int>(n)) tgt_cls.push_back(k);
    }
    if (img_rows.size() >= 2 && tgt_cls.size() >= 2) {
      r.energy_per_class[n] = energy_distance_sq(take_rows(images, img_rows), take_rows(target_test, tgt_cls));
    }
  }
  return r;
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  out << "source_class";
  for (std::size_t k = 0; k < confusion.size(); ++k) out << ",pred_" << k;
  out << ",energy\n";
  for (std::size_t n = 0; n < confusion.size(); ++n) {
    out << n;
    for (std::size_t c : confusion[n]) out << ',' << c;
    out << ',' << energy_per_class[n] << '\n';
  }
}

std::string EvalReport::summary_json() const {
  auto finite_or_null = [](double x) -> nlohmann::json {
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
  };
  nlohmann::json j;
  j["accuracy"] = accuracy;
  j["accuracy_first_draw"] = accuracy_first_draw;
  j["n_latent_draws"] = n_latent_draws;
  j["energy_overall"] = finite_or_null(energy_overall);
  j["energy_per_class"] = nlohmann::json::array();
  for (double e : energy_per_class) j["energy_per_class"].push_back(finite_or_null(e));
  j["confusion"] = confusion;
  if (eps1_estimate) {
    j["eps1_estimate_diagnostic"] = *eps1_estimate;
    j["eps1_std"] = eps1_std.value_or(0.0);
  }
  return j.dump(2);
}

Eps1Estimate estimate_eps1(Potential& v_hat, TransportMap& T_hat, const LabeledDataset& ds,
                           const TrainConfig& cfg, std::size_t budget, std::uint64_t seed) {
  TrainConfig fresh_cfg = cfg;
  fresh_cfg.seed = seed;
  fresh_cfg.validate();
  Models fresh = Models::init(fresh_cfg, ds.dim);
  BatchSampler sampler(ds, fresh_cfg);
  const std::size_t kz = fresh_cfg.effective_k_z();
  const bool guided = cfg.functional.tag == FunctionalTag::ClassGuided;
  const bool stochastic = fresh.T.stochastic();

  for (std::size_t step = 0; step < budget; ++step) {
    Rng rng(batch_seed(seed, step));
    if (guided) {
      map_step_class_guided(fresh.T, fresh.opt_T, v_hat, sampler.class_batches(rng),
                            cfg.functional.gamma_reg);
    } else {
      const Tensor X = sampler.source_batch(rng, cfg.K_B * cfg.K_X);
      const Tensor Z = sampler.latents(rng, X.rows() * kz);
      map_step_general(fresh.T, fresh.opt_T, v_hat, cfg.functional, X,
                       stochastic ? &Z : nullptr, kz);
    }
  }

  Eps1Estimate est;
  for (std::size_t b = 0; b < 5; ++b) {
    Rng rng(batch_seed(seed ^ 0xE7A1ull, b));
    std::vector<ClassBatch> cb;
    Tensor X, Z;
    if (guided) {
      cb = sampler.class_batches(rng);
    } else {
      X = sampler.source_batch(rng, cfg.K_B * cfg.K_X);
      Z = sampler.latents(rng, X.rows() * kz);
    }
    const Tensor* zp = stochastic ? &Z : nullptr;
    const double hat = map_objective(T_hat, v_hat, cfg.functional, cb, X, zp, kz);
    const double alt = map_objective(fresh.T, v_hat, cfg.functional, cb, X, zp, kz);
    est.per_batch.push_back(hat - alt);
  }
  double s = 0.0;
  for (double x : est.per_batch) s += x;
  est.mean = s / 5.0;
  double var = 0.0;
  for (double x : est.per_batch) var += (x - est.mean) * (x - est.mean);
  est.std = std::sqrt(var / 4.0);
  return est;
}

void write_scatter_svg(const std::filesystem::path& path,
                       const std::vector<ScatterPanel>& panels) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
                                  "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173",
                                  "#3182bd"};
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
  double lo_y = lo_x, hi_y = -lo_x;
  for (const auto& p : panels) {
    if (p.points->cols() < 2) throw DimensionError("scatter plot needs 2-D points");
    for (std::size_t i = 0; i < p.points->rows(); ++i) {
      lo_x = std::min(lo_x, p.points->at(i, 0));
      hi_x = std::max(hi_x, p.points->at(i, 0));
      lo_y = std::min(lo_y, p.points->at(i, 1));
      hi_y = std::max(hi_y, p.points->at(i, 1));
    }
  }
  if (!std::isfinite(lo_x)) lo_x = lo_y = -1.0, hi_x = hi_y = 1.0;
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9}) * 1.05;
  const double mx = 0.5 * (lo_x + hi_x), my = 0.5 * (lo_y + hi_y);
  const double size = 320.0, pad = 30.0;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << panels.size() * (size + pad) + pad << "\" height=\"" << size + 2 * pad << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << std::fixed << std::setprecision(2);
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const double ox = pad + static_cast<double>(k) * (size + pad);
    out << "<g>\n<rect x=\"" << ox << "\" y=\"" << pad << "\" width=\"" << size
        << "\" height=\"" << size << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << ox + size / 2 << "\" y=\"" << pad - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << panels[k].title << "</text>\n";
    const Tensor& P = *panels[k].points;
    for (std::size_t i = 0; i < P.rows(); ++i) {
      const double px = ox + size * (0.5 + (P.at(i, 0) - mx) / span);
      const double py = pad + size * (0.5 - (P.at(i, 1) - my) / span);
      const int l = (*panels[k].labels)[i];
      const char* color = l < 0 ? "#c8c8c8" : palette[static_cast<std::size_t>(l) % 16];
      out << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"1.6\" fill=\"" << color
          << "\"/>\n";
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
}

}  // namespace got
