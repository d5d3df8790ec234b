#include "got/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "got/errors.hpp"

namespace got {

void TrainConfig::validate() const {
  if (!(lr_T > 0.0) || !(lr_v > 0.0)) throw ConfigError("learning rates must be > 0");
  if (K_B < 1 || K_X < 1 || K_Y < 1 || K_Z < 1) throw ConfigError("K_B, K_X, K_Y, K_Z must be >= 1");
  if (hidden_dim < 1 || hidden_layers < 1 || v_hidden_dim < 1 || v_hidden_layers < 1) {
    throw ConfigError("network widths and depths must be >= 1");
  }
  functional.validate();
  const std::size_t kz = effective_k_z();
  if (functional.gamma_reg > 0.0 && kz < 2) {
    throw ConfigError("gamma_reg > 0 needs a stochastic map with K_Z >= 2");
  }
  if (functional.tag == FunctionalTag::GammaWeakQuadratic && kz < 2) {
    throw ConfigError("gamma_weak_quadratic needs a stochastic map with K_Z >= 2");
  }
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iter,L_v,L_T,accuracy,energy_to_target\n";
  out << std::setprecision(17);
  for (const auto& r : series) {
    out << r.iter << ',' << r.L_v << ',' << r.L_T << ',' << r.accuracy << ','
        << r.energy_to_target << '\n';
  }
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Tensor repeat_tensor_rows(const Tensor& x, std::size_t k) {
  if (k == 1) return x;
  const std::size_t R = x.rows(), C = x.cols();
  Tensor out(Shape{R * k, C});
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      std::copy_n(x.data().begin() + r * C, C, out.data().begin() + (r * k + j) * C);
    }
  }
  return out;
}

bool params_finite(const Mlp& mlp) {
  for (const Tensor& p : mlp.parameters()) {
    if (!p.all_finite()) return false;
  }
  return true;
}

Var images(Graph& g, TransportMap& T, Var x_rep, const Tensor* Z, bool trainable) {
  if (T.stochastic()) {
    if (!Z) throw DimensionError("stochastic transport map requires latents");
    return T.forward(x_rep, g.frozen(*Z), trainable);
  }
  if (Z && !Z->empty()) throw DimensionError("deterministic transport map takes no latents");
  return T.forward(x_rep, std::nullopt, trainable);
}

struct Stacked {
  Tensor X;
  Tensor Z;
  Tensor Y;
  std::size_t k_x = 0;
  std::size_t k_z = 1;
};

Stacked stack_batches(const std::vector<ClassBatch>& batches, std::size_t latent_dim) {
  if (batches.empty()) throw PreconditionError("class-guided map step: no class batches");
  Stacked s;
  s.k_x = batches[0].k_x();
  s.k_z = batches[0].k_z;
  const std::size_t k_y = batches[0].k_y();
  std::vector<Tensor> xs, zs, ys;
  for (const ClassBatch& b : batches) {
    b.validate(latent_dim);
    if (b.k_x() != s.k_x || b.k_y() != k_y || b.k_z != s.k_z) {
      throw DimensionError("class batches must share K_X, K_Y and K_Z");
    }
    xs.push_back(repeat_tensor_rows(b.X, s.k_z));
    if (latent_dim > 0) zs.push_back(b.Z);
    ys.push_back(b.Y);
  }
  s.X = concat_rows(xs);
  s.Y = concat_rows(ys);
  if (latent_dim > 0) s.Z = concat_rows(zs);
  return s;
}

}  // namespace

Var map_loss_general(Graph& g, TransportMap& T, Potential& v, const FunctionalKind& functional,
                     const Tensor& X, const Tensor* Z, std::size_t k_z, bool trainable) {
  if (X.rows() == 0) throw PreconditionError("map step: empty batch");
  Var x = g.frozen(X);
  Var t = images(g, T, repeat_rows(x, k_z), Z, trainable);
  Var cost = general_functional(functional, x, t, k_z);
  return sub(cost, mean(v.forward(t, false)));
}

Var map_loss_class_guided(Graph& g, TransportMap& T, Potential& v,
                          const std::vector<ClassBatch>& batches, double gamma_reg,
                          bool trainable) {
  Stacked s = stack_batches(batches, T.latent_dim());
  Var x = g.constant(std::move(s.X));
  Var t = T.stochastic() ? T.forward(x, g.constant(std::move(s.Z)), trainable)
                         : T.forward(x, std::nullopt, trainable);
  Var cost = class_guided_images(t, g.constant(std::move(s.Y)), s.k_x, s.k_z, batches.size());
  if (gamma_reg > 0.0) {
    cost = add(cost, scale(conditional_interaction_energy(t, s.k_z), gamma_reg));
  }
  return sub(cost, mean(v.forward(t, false)));
}

Var potential_loss(Graph& g, Potential& v, const Tensor& images, const Tensor& Y,
                   bool trainable) {
  if (images.rows() == 0 || Y.rows() == 0) throw PreconditionError("potential step: empty batch");
  return sub(mean(v.forward(g.frozen(images), trainable)),
             mean(v.forward(g.frozen(Y), trainable)));
}

Models Models::init(const TrainConfig& cfg, std::size_t data_dim) {
  Models m;
  m.T = TransportMap(data_dim, cfg.latent_dim, cfg.hidden_dim, cfg.hidden_layers,
                     splitmix(cfg.seed ^ 0x5452414E53ull));
  m.v = Potential(data_dim, cfg.v_hidden_dim, cfg.v_hidden_layers,
                  splitmix(cfg.seed ^ 0x504F54454Eull));
  m.opt_T = make_adam_state(m.T.mlp().parameter_ptrs(), AdamOptions{.lr = cfg.lr_T});
  m.opt_v = make_adam_state(m.v.mlp().parameter_ptrs(), AdamOptions{.lr = cfg.lr_v});
  return m;
}

double potential_step(Potential& v, AdamState& opt_v, TransportMap& T, const Tensor& X,
                      const Tensor* Z, std::size_t k_z, const Tensor& Y) {
  if (X.rows() == 0 || Y.rows() == 0) throw PreconditionError("potential step: empty batch");
  const Tensor xr = repeat_tensor_rows(X, k_z);
  const Tensor t = T.stochastic() ? T.apply(xr, Z) : T.apply(xr);
  auto params = v.mlp().parameter_ptrs();
  zero_grads(params);
  Graph g;
  Var loss = potential_loss(g, v, t, Y, true);
  const double value = loss.item();
  g.backward(loss);
  adam_step(params, opt_v);
  return value;
}

double map_step_general(TransportMap& T, AdamState& opt_T, Potential& v,
                        const FunctionalKind& functional, const Tensor& X, const Tensor* Z,
                        std::size_t k_z) {
  auto params = T.mlp().parameter_ptrs();
  zero_grads(params);
  Graph g;
  Var loss = map_loss_general(g, T, v, functional, X, Z, k_z, true);
  const double value = loss.item();
  g.backward(loss);
  adam_step(params, opt_T);
  return value;
}

double map_step_class_guided(TransportMap& T, AdamState& opt_T, Potential& v,
                             const std::vector<ClassBatch>& batches, double gamma_reg) {
  auto params = T.mlp().parameter_ptrs();
  zero_grads(params);
  Graph g;
  Var loss = map_loss_class_guided(g, T, v, batches, gamma_reg, true);
  const double value = loss.item();
  g.backward(loss);
  adam_step(params, opt_T);
  return value;
}

double map_objective(TransportMap& T, Potential& v, const FunctionalKind& functional,
                     const std::vector<ClassBatch>& class_batches, const Tensor& X,
                     const Tensor* Z, std::size_t k_z) {
  Graph g;
  if (functional.tag == FunctionalTag::ClassGuided) {
    return map_loss_class_guided(g, T, v, class_batches, functional.gamma_reg, false).item();
  }
  return map_loss_general(g, T, v, functional, X, Z, k_z, false).item();
}

BatchSampler::BatchSampler(const LabeledDataset& ds, const TrainConfig& cfg)
    : ds_(&ds), cfg_(cfg) {
  ds.validate();
  src_train_ = ds.source_rows(true);
  tgt_train_ = ds.target_rows(true);
  if (src_train_.empty() || tgt_train_.empty()) {
    throw ConfigError("training needs nonempty source and target train splits");
  }
  alpha_ = ds.alpha;
  src_by_class_.resize(ds.num_classes);
  labeled_.resize(ds.num_classes);
  for (std::size_t n = 0; n < ds.num_classes; ++n) {
    src_by_class_[n] = ds.source_rows(true, static_cast<int>(n));
    labeled_[n] = ds.labeled_target_rows(static_cast<int>(n));
  }
  if (cfg.functional.tag == FunctionalTag::ClassGuided) {
    for (std::size_t n = 0; n < ds.num_classes; ++n) {
      if (alpha_[n] <= 0.0) continue;
      if (src_by_class_[n].empty()) {
        throw ConfigError("class " + std::to_string(n) + " has weight " +
                          std::to_string(alpha_[n]) + " but no source train points");
      }
      if (labeled_[n].empty()) {
        throw ConfigError("class " + std::to_string(n) + " has no labeled target samples");
      }
    }
  }
}

Tensor BatchSampler::latents(Rng& rng, std::size_t rows) const {
  if (cfg_.latent_dim == 0) return Tensor();
  return LatentSampler(cfg_.latent_dim).sample(rows, rng);
}

Tensor BatchSampler::source_batch(Rng& rng, std::size_t n) const {
  std::uniform_int_distribution<std::size_t> pick(0, src_train_.size() - 1);
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = src_train_[pick(rng)];
  return take_rows(ds_->source, rows);
}

UnlabeledBatch BatchSampler::unlabeled(Rng& rng) const {
  UnlabeledBatch b;
  const std::size_t nx = cfg_.v_batch > 0 ? cfg_.v_batch : cfg_.K_B * cfg_.K_X;
  const std::size_t ny = cfg_.v_batch > 0 ? cfg_.v_batch : cfg_.K_B * cfg_.K_Y;
  b.X = source_batch(rng, nx);
  b.Z = latents(rng, nx * cfg_.effective_k_z());
  std::uniform_int_distribution<std::size_t> pick(0, tgt_train_.size() - 1);
  std::vector<std::size_t> rows(ny);
  for (auto& r : rows) r = tgt_train_[pick(rng)];
  b.Y = take_rows(ds_->target, rows);
  return b;
}

std::vector<ClassBatch> BatchSampler::class_batches(Rng& rng) const {
  std::discrete_distribution<std::size_t> cls(alpha_.begin(), alpha_.end());
  const std::size_t kz = cfg_.effective_k_z();
  std::vector<ClassBatch> out;
  out.reserve(cfg_.K_B);
  for (std::size_t b = 0; b < cfg_.K_B; ++b) {
    const std::size_t n = cls(rng);
    const auto& src = src_by_class_[n];
    const auto& tgt = labeled_[n];
    std::uniform_int_distribution<std::size_t> ps(0, src.size() - 1), pt(0, tgt.size() - 1);
    std::vector<std::size_t> xr(cfg_.K_X), yr(cfg_.K_Y);
    for (auto& r : xr) r = src[ps(rng)];
    for (auto& r : yr) r = tgt[pt(rng)];
    ClassBatch cb;
    cb.cls = n;
    cb.X = take_rows(ds_->source, xr);
    cb.Y = take_rows(ds_->target, yr);
    cb.Z = latents(rng, cfg_.K_X * kz);
    cb.k_z = kz;
    out.push_back(std::move(cb));
  }
  return out;
}

std::uint64_t batch_seed(std::uint64_t seed, std::size_t iter) {
  return splitmix(splitmix(seed) ^ static_cast<std::uint64_t>(iter));
}

namespace {

std::string plateau_diagnostic(const std::vector<TrainRecord>& series) {
  if (series.size() < 4) return "plateau: too few records for a diagnostic";
  const std::size_t n = series.size();
  const std::size_t q = std::max<std::size_t>(1, n / 4);
  auto avg = [&](std::size_t b, std::size_t e, auto field) {
    double s = 0.0;
    for (std::size_t k = b; k < e; ++k) s += series[k].*field;
    return s / static_cast<double>(e - b);
  };
  const double last = avg(n - q, n, &TrainRecord::L_T);
  const double prev = avg(n - 2 * q, n - q, &TrainRecord::L_T);
  const double rel = std::abs(last - prev) / std::max(1e-12, std::abs(prev));
  std::ostringstream msg;
  msg << "plateau: L_T mean over last quarter " << last << " vs previous " << prev
      << " (relative change " << rel << ")" << (rel < 1e-2 ? ", plateaued" : ", still moving");
  return msg.str();
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const LabeledDataset& data,
                  const TrainOptions& options) {
  cfg.validate();
  TrainResult result{Models::init(cfg, data.dim), {}};
  Models& m = result.models;
  BatchSampler sampler(data, cfg);
  const std::size_t kz = cfg.effective_k_z();
  const bool guided = cfg.functional.tag == FunctionalTag::ClassGuided;
  const std::size_t interval =
      cfg.eval_every > 0 ? cfg.eval_every : std::max<std::size_t>(1, cfg.total_v_iters / 20);

  if (options.out_dir) std::filesystem::create_directories(*options.out_dir);
  auto checkpoint = [&](const std::string& name) {
    const auto path = *options.out_dir / (name + kCheckpointExtension);
    save_checkpoint(path, m.T, m.v, options.checkpoint_metadata);
    result.report.checkpoints.push_back(path);
  };

  double sum_v = 0.0, sum_T = 0.0;
  std::size_t count = 0;
  for (std::size_t iter = 0; iter < cfg.total_v_iters; ++iter) {
    const std::uint64_t bseed = batch_seed(cfg.seed, iter);
    Rng rng(bseed);
    const UnlabeledBatch ub = sampler.unlabeled(rng);
    const double L_v = potential_step(m.v, m.opt_v, m.T, ub.X,
                                      cfg.latent_dim > 0 ? &ub.Z : nullptr, kz, ub.Y);
    double L_T = 0.0;
    for (std::size_t k = 0; k < cfg.K_T; ++k) {
      if (guided) {
        L_T = map_step_class_guided(m.T, m.opt_T, m.v, sampler.class_batches(rng),
                                    cfg.functional.gamma_reg);
      } else {
        const Tensor X = sampler.source_batch(rng, cfg.K_B * cfg.K_X);
        const Tensor Z = sampler.latents(rng, X.rows() * kz);
        L_T = map_step_general(m.T, m.opt_T, m.v, cfg.functional, X,
                               cfg.latent_dim > 0 ? &Z : nullptr, kz);
      }
    }
    if (!std::isfinite(L_v) || !std::isfinite(L_T) || !params_finite(m.T.mlp()) ||
        !params_finite(m.v.mlp())) {
      std::ostringstream msg;
      msg << "non-finite loss or parameters at iteration " << iter << " (batch seed " << bseed
          << ", L_v=" << L_v << ", L_T=" << L_T << ")";
      throw NumericalError(msg.str());
    }
    if (options.progress) options.progress(iter, L_v, L_T);
    sum_v += L_v;
    sum_T += L_T;
    ++count;

    const bool last = iter + 1 == cfg.total_v_iters;
    if ((iter + 1) % interval == 0 || last) {
      TrainRecord rec;
      rec.iter = iter + 1;
      rec.L_v = sum_v / static_cast<double>(count);
      rec.L_T = sum_T / static_cast<double>(count);
      rec.accuracy = std::numeric_limits<double>::quiet_NaN();
      rec.energy_to_target = std::numeric_limits<double>::quiet_NaN();
      if (options.evaluator) {
        std::tie(rec.accuracy, rec.energy_to_target) = options.evaluator(m.T);
      }
      result.report.series.push_back(rec);
      sum_v = sum_T = 0.0;
      count = 0;
    }
    if (options.out_dir && cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0 &&
        !last) {
      checkpoint("iter_" + std::to_string(iter + 1));
    }
  }
  if (options.out_dir) checkpoint("final");
  result.report.diagnostics.push_back(plateau_diagnostic(result.report.series));
  return result;
}

}  // namespace got
