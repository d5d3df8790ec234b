#include "got/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>

#include "got/errors.hpp"
#include "got/functionals.hpp"
#include "got/networks.hpp"
#include "got/trainer.hpp"

namespace got {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> nd(0.0, scale);
  for (double& x : t.buffer()) x = nd(rng);
  return t;
}

using Builder = std::function<GradCheckResult(Rng&, double)>;

std::vector<Tensor*> leaves(std::vector<Tensor>& ts) {
  std::vector<Tensor*> out;
  for (Tensor& t : ts) {
    t.set_requires_grad(true);
    out.push_back(&t);
  }
  return out;
}

constexpr std::size_t kHidden = 8;

// Zero-initialised biases put exact ReLU kinks at the origin (a dead map
// emits exactly 0, which then sits on every kink of v). Random biases move
// the fixtures off that measure-zero set.
void jitter_biases(Mlp& m, Rng& rng) {
  auto params = m.parameter_ptrs();
  std::normal_distribution<double> nd(0.0, 0.1);
  for (std::size_t k = 1; k < params.size(); k += 2) {
    for (double& b : params[k]->buffer()) b = nd(rng);
  }
}

std::vector<ClassBatch> make_batches(Rng& rng, std::size_t count, std::size_t k_x,
                                     std::size_t k_y, std::size_t k_z, std::size_t latent) {
  std::vector<ClassBatch> out;
  for (std::size_t b = 0; b < count; ++b) {
    ClassBatch cb;
    cb.cls = b;
    cb.X = random_tensor({k_x, 2}, rng);
    cb.Y = random_tensor({k_y, 2}, rng);
    cb.Z = latent ? random_tensor({k_x * k_z, latent}, rng) : Tensor();
    cb.k_z = k_z;
    out.push_back(std::move(cb));
  }
  return out;
}

const std::map<std::string, Builder>& registry() {
  static const std::map<std::string, Builder> reg = {
      {"linear_relu",
       [](Rng& rng, double h) {
         Tensor x = random_tensor({5, 3}, rng);
         std::vector<Tensor> p = {random_tensor({3, 4}, rng), random_tensor({4}, rng)};
         auto params = leaves(p);
         return finite_difference_check(
             [&](Graph& g) { return mean(relu(linear(g.frozen(x), g.leaf(p[0]), g.leaf(p[1])))); },
             params, h);
       }},
      {"transport_map",
       [](Rng& rng, double h) {
         TransportMap T(2, 2, kHidden, 2, rng());
         jitter_biases(T.mlp(), rng);
         Tensor x = random_tensor({6, 2}, rng), z = random_tensor({6, 2}, rng);
         return finite_difference_check(
             [&](Graph& g) {
               return mean(square(T.forward(g.frozen(x), g.frozen(z), true)));
             },
             T.mlp().parameter_ptrs(), h);
       }},
      {"potential",
       [](Rng& rng, double h) {
         Potential v(2, kHidden, 2, rng());
         jitter_biases(v.mlp(), rng);
         Tensor y = random_tensor({7, 2}, rng);
         return finite_difference_check(
             [&](Graph& g) { return mean(v.forward(g.frozen(y), true)); },
             v.mlp().parameter_ptrs(), h);
       }},
      {"energy_distance",
       [](Rng& rng, double h) {
         std::vector<Tensor> p = {random_tensor({4, 2}, rng), random_tensor({5, 2}, rng)};
         auto params = leaves(p);
         return finite_difference_check(
             [&](Graph& g) { return energy_distance_sq_estimate(g.leaf(p[0]), g.leaf(p[1])); },
             params, h);
       }},
      {"class_guided_term",
       [](Rng& rng, double h) {
         TransportMap T(2, 2, kHidden, 2, rng());
         jitter_biases(T.mlp(), rng);
         auto batches = make_batches(rng, 1, 3, 2, 2, 2);
         return finite_difference_check(
             [&](Graph& g) { return class_guided_term(g, batches[0], T, true); },
             T.mlp().parameter_ptrs(), h);
       }},
      {"quadratic_cost",
       [](Rng& rng, double h) {
         Tensor x = random_tensor({5, 2}, rng);
         std::vector<Tensor> p = {random_tensor({5, 2}, rng)};
         auto params = leaves(p);
         return finite_difference_check(
             [&](Graph& g) { return quadratic_cost(g.frozen(x), g.leaf(p[0])); }, params, h);
       }},
      {"gamma_weak_quadratic_cost",
       [](Rng& rng, double h) {
         Tensor x = random_tensor({3, 2}, rng);
         std::vector<Tensor> p = {random_tensor({9, 2}, rng)};
         auto params = leaves(p);
         return finite_difference_check(
             [&](Graph& g) { return gamma_weak_quadratic_cost(g.frozen(x), g.leaf(p[0]), 3, 0.7); },
             params, h);
       }},
      {"conditional_interaction_energy",
       [](Rng& rng, double h) {
         std::vector<Tensor> p = {random_tensor({8, 2}, rng)};
         auto params = leaves(p);
         return finite_difference_check(
             [&](Graph& g) { return conditional_interaction_energy(g.leaf(p[0]), 2); }, params,
             h);
       }},
      {"potential_loss",
       [](Rng& rng, double h) {
         Potential v(2, kHidden, 2, rng());
         jitter_biases(v.mlp(), rng);
         Tensor t = random_tensor({6, 2}, rng), y = random_tensor({4, 2}, rng);
         // Any bias whose unit is active on every row shifts both means
         // equally, so its exact derivative is zero and the central difference
         // is pure rounding noise. Those coordinates are held to an absolute
         // bound instead of the relative one.
         auto table = finite_difference_table(
             [&](Graph& g) { return potential_loss(g, v, t, y, true); },
             v.mlp().parameter_ptrs(), h);
         GradCheckResult r;
         bool first = true;
         for (const auto& e : table) {
           double err = relative_error(e.autodiff, e.numeric);
           if (std::abs(e.autodiff) <= 1e-12) {
             err = std::abs(e.numeric) <= 1e-9 ? 0.0 : std::numeric_limits<double>::infinity();
           }
           if (first || err > r.max_rel_err) {
             r = {err, e.param, e.index, e.autodiff, e.numeric};
             first = false;
           }
         }
         return r;
       }},
      {"map_loss_class_guided",
       [](Rng& rng, double h) {
         TransportMap T(2, 2, kHidden, 2, rng());
         jitter_biases(T.mlp(), rng);
         Potential v(2, kHidden, 2, rng());
         jitter_biases(v.mlp(), rng);
         auto batches = make_batches(rng, 3, 2, 2, 2, 2);
         return finite_difference_check(
             [&](Graph& g) { return map_loss_class_guided(g, T, v, batches, 0.1, true); },
             T.mlp().parameter_ptrs(), h);
       }},
      {"map_loss_general",
       [](Rng& rng, double h) {
         TransportMap T(2, 2, kHidden, 2, rng());
         jitter_biases(T.mlp(), rng);
         Potential v(2, kHidden, 2, rng());
         jitter_biases(v.mlp(), rng);
         Tensor x = random_tensor({4, 2}, rng), z = random_tensor({8, 2}, rng);
         FunctionalKind kind{FunctionalTag::GammaWeakQuadratic, 0.5, 0.1};
         return finite_difference_check(
             [&](Graph& g) { return map_loss_general(g, T, v, kind, x, &z, 2, true); },
             T.mlp().parameter_ptrs(), h);
       }},
  };
  return reg;
}

}  // namespace

std::vector<std::string> gradcheck_components() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

GradcheckOutcome run_gradcheck(const std::string& component, std::uint64_t seed, double h,
                               double tol) {
  const auto& reg = registry();
  auto it = reg.find(component);
  if (it == reg.end()) throw ConfigError("unknown gradcheck component '" + component + "'");
  Rng rng(seed);
  GradcheckOutcome out;
  out.component = component;
  out.result = it->second(rng, h);
  out.passed = out.result.max_rel_err <= tol;
  return out;
}

}  // namespace got
