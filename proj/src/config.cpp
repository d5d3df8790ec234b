#include "got/config.hpp"

#include <fstream>
#include <set>

#include "got/errors.hpp"

namespace got {

namespace {

void check_object(const Json& j, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + " must be a JSON object");
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
  check_object(j, ctx);
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + ctx);
  }
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  try {
    if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("");
    }
    out = v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("key '" + std::string(key) + "' in " + ctx + " has the wrong type");
  }
}

std::vector<double> read_vector(const Json& v, const std::string& key, const std::string& ctx) {
  if (!v.is_array()) throw ConfigError("key '" + key + "' in " + ctx + " must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError("key '" + key + "' in " + ctx + " must be numeric");
    out.push_back(x.get<double>());
  }
  return out;
}

// [[x, y], ...] -> row-major flat buffer.
std::vector<double> read_points(const Json& v, const std::string& key, const std::string& ctx,
                                std::size_t& dim) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError("key '" + key + "' in " + ctx + " must be a nonempty array of points");
  }
  std::vector<double> out;
  dim = 0;
  for (const auto& row : v) {
    auto r = read_vector(row, key, ctx);
    if (dim == 0) dim = r.size();
    if (r.size() != dim || dim == 0) {
      throw ConfigError("key '" + key + "' in " + ctx + " has ragged points");
    }
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

DatasetSpec parse_dataset_spec(const Json& j) {
  const std::string ctx = "dataset";
  check_object(j, ctx);
  DatasetSpec d;
  read(j, "kind", d.kind, ctx);
  std::vector<const char*> common = {"kind", "seed", "labeled_per_class", "alpha", "beta"};
  auto allow = [&](std::initializer_list<const char*> extra) {
    std::set<std::string> ok(common.begin(), common.end());
    ok.insert(extra.begin(), extra.end());
    for (const auto& [key, value] : j.items()) {
      if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + ctx);
    }
  };
  read(j, "seed", d.seed, ctx);
  if (d.kind == "moons") {
    allow({"n_train_per_class", "n_test_per_class", "noise_sigma", "rotation_deg"});
    read(j, "n_train_per_class", d.moons.n_train_per_class, ctx);
    read(j, "n_test_per_class", d.moons.n_test_per_class, ctx);
    read(j, "noise_sigma", d.moons.noise_sigma, ctx);
    read(j, "rotation_deg", d.moons.rotation_deg, ctx);
    d.moons.seed = d.seed;
  } else if (d.kind == "gaussian_grid") {
    allow({"n_components", "n_train_per_comp", "n_test_per_comp", "grid_spacing", "sigma"});
    read(j, "n_components", d.grid.n_components, ctx);
    read(j, "n_train_per_comp", d.grid.n_train_per_comp, ctx);
    read(j, "n_test_per_comp", d.grid.n_test_per_comp, ctx);
    read(j, "grid_spacing", d.grid.grid_spacing, ctx);
    read(j, "sigma", d.grid.sigma, ctx);
    d.grid.seed = d.seed;
  } else if (d.kind == "gaussian_mixture") {
    allow({"source_means", "target_means", "n_train_per_comp", "n_test_per_comp", "sigma"});
    if (!j.contains("source_means") || !j.contains("target_means")) {
      throw ConfigError("gaussian_mixture dataset needs source_means and target_means");
    }
    std::size_t ds = 0, dt = 0;
    d.source_means = read_points(j.at("source_means"), "source_means", ctx, ds);
    d.target_means = read_points(j.at("target_means"), "target_means", ctx, dt);
    if (ds != dt || d.source_means.size() != d.target_means.size()) {
      throw ConfigError("source_means and target_means must have the same shape");
    }
    d.mixture_dim = ds;
    read(j, "n_train_per_comp", d.n_train_per_comp, ctx);
    read(j, "n_test_per_comp", d.n_test_per_comp, ctx);
    read(j, "sigma", d.sigma, ctx);
  } else if (d.kind == "csv") {
    allow({"source", "target", "label_column", "split_column"});
    std::string s, t;
    read(j, "source", s, ctx);
    read(j, "target", t, ctx);
    if (s.empty() || t.empty()) throw ConfigError("csv dataset needs 'source' and 'target'");
    d.source_csv = s;
    d.target_csv = t;
    read(j, "label_column", d.csv.label_column, ctx);
    read(j, "split_column", d.csv.split_column, ctx);
    d.labeled_per_class.reset();
  } else {
    throw ConfigError("unknown dataset kind '" + d.kind +
                      "' (expected moons, gaussian_grid, gaussian_mixture or csv)");
  }
  if (j.contains("labeled_per_class")) {
    const Json& v = j.at("labeled_per_class");
    if (v.is_null()) d.labeled_per_class.reset();
    else if (v.is_number_integer() && v.get<long long>() >= 0) d.labeled_per_class = v.get<std::size_t>();
    else throw ConfigError("key 'labeled_per_class' in dataset has the wrong type");
  }
  if (j.contains("alpha")) d.alpha = read_vector(j.at("alpha"), "alpha", ctx);
  if (j.contains("beta")) d.beta = read_vector(j.at("beta"), "beta", ctx);
  if (d.alpha.has_value() != d.beta.has_value()) {
    throw ConfigError("dataset alpha and beta must be given together");
  }
  return d;
}

TrainConfig parse_train_config(const Json& j) {
  const std::string ctx = "train";
  check_keys(j,
             {"lr_T", "lr_v", "K_T", "K_B", "K_X", "K_Y", "K_Z", "iterations", "v_batch", "latent_dim",
              "functional", "gamma", "gamma_reg", "hidden_dim", "hidden_layers",
              "v_hidden_dim", "v_hidden_layers", "seed", "eval_every", "checkpoint_every"},
             ctx);
  TrainConfig c;
  read(j, "lr_T", c.lr_T, ctx);
  read(j, "lr_v", c.lr_v, ctx);
  read(j, "K_T", c.K_T, ctx);
  read(j, "K_B", c.K_B, ctx);
  read(j, "K_X", c.K_X, ctx);
  read(j, "K_Y", c.K_Y, ctx);
  read(j, "K_Z", c.K_Z, ctx);
  read(j, "iterations", c.total_v_iters, ctx);
  read(j, "v_batch", c.v_batch, ctx);
  read(j, "latent_dim", c.latent_dim, ctx);
  std::string functional = functional_name(c.functional.tag);
  read(j, "functional", functional, ctx);
  c.functional.tag = parse_functional(functional);
  read(j, "gamma", c.functional.gamma, ctx);
  read(j, "gamma_reg", c.functional.gamma_reg, ctx);
  read(j, "hidden_dim", c.hidden_dim, ctx);
  read(j, "hidden_layers", c.hidden_layers, ctx);
  read(j, "v_hidden_dim", c.v_hidden_dim, ctx);
  read(j, "v_hidden_layers", c.v_hidden_layers, ctx);
  read(j, "seed", c.seed, ctx);
  read(j, "eval_every", c.eval_every, ctx);
  read(j, "checkpoint_every", c.checkpoint_every, ctx);
  return c;
}

namespace {

EvalOptions parse_eval_options(const Json& j, const std::string& ctx) {
  check_keys(j, {"n_latent_draws", "seed", "oracle"}, ctx);
  EvalOptions o;
  read(j, "n_latent_draws", o.n_latent_draws, ctx);
  read(j, "seed", o.seed, ctx);
  if (j.contains("oracle")) {
    std::string name;
    read(j, "oracle", name, ctx);
    o.oracle = parse_oracle_kind(name);
  }
  return o;
}

}  // namespace

TrainRunConfig parse_train_run(const Json& j) {
  check_keys(j, {"train", "dataset", "eval"}, "train config");
  TrainRunConfig r;
  if (j.contains("train")) r.train = parse_train_config(j.at("train"));
  if (j.contains("dataset")) r.dataset = parse_dataset_spec(j.at("dataset"));
  if (j.contains("eval")) r.eval = parse_eval_options(j.at("eval"), "eval");
  return r;
}

EvalRunConfig parse_eval_run(const Json& j) {
  check_keys(j, {"checkpoint", "dataset", "eval", "eps1_budget", "train"}, "eval config");
  EvalRunConfig r;
  std::string ck;
  read(j, "checkpoint", ck, "eval config");
  r.checkpoint = ck;
  if (j.contains("dataset")) r.dataset = parse_dataset_spec(j.at("dataset"));
  if (j.contains("eval")) r.eval = parse_eval_options(j.at("eval"), "eval");
  read(j, "eps1_budget", r.eps1_budget, "eval config");
  if (j.contains("train")) r.train = parse_train_config(j.at("train"));
  return r;
}

OracleVerifyConfig parse_oracle_verify(const Json& j) {
  const std::string ctx = "oracle-verify config";
  check_keys(j,
             {"instances", "gamma_values", "gamma_reg", "min_classes", "max_classes", "max_nx",
              "max_ny", "min_nx", "min_ny", "dim", "seed", "tol"},
             ctx);
  OracleVerifyConfig c;
  read(j, "instances", c.instances, ctx);
  if (j.contains("gamma_values") && j.contains("gamma_reg")) {
    throw ConfigError("give either 'gamma_values' or 'gamma_reg' in " + ctx);
  }
  if (j.contains("gamma_values")) c.gamma_values = read_vector(j.at("gamma_values"), "gamma_values", ctx);
  if (j.contains("gamma_reg")) {
    double g = 0.0;
    read(j, "gamma_reg", g, ctx);
    c.gamma_values = {g};
  }
  read(j, "min_classes", c.spec.min_classes, ctx);
  read(j, "max_classes", c.spec.max_classes, ctx);
  read(j, "max_nx", c.spec.max_nx, ctx);
  read(j, "max_ny", c.spec.max_ny, ctx);
  read(j, "min_nx", c.spec.min_nx, ctx);
  read(j, "min_ny", c.spec.min_ny, ctx);
  read(j, "dim", c.spec.dim, ctx);
  read(j, "seed", c.seed, ctx);
  read(j, "tol", c.tol, ctx);
  if (c.gamma_values.empty()) throw ConfigError("gamma_values must be nonempty");
  for (double g : c.gamma_values) {
    if (!(g > 0.0)) {
      throw ConfigError(
          "gamma_reg must be > 0: the bound uses beta = gamma_reg as the strong convexity "
          "constant, which is undefined for F_G alone");
    }
  }
  if (c.spec.min_classes < 1 || c.spec.max_classes < c.spec.min_classes) {
    throw ConfigError("invalid class range in " + ctx);
  }
  if (c.spec.max_nx < c.spec.max_classes || c.spec.max_ny < c.spec.max_classes) {
    throw ConfigError("supports must hold at least one point per class in " + ctx);
  }
  if (!(c.tol > 0.0)) throw ConfigError("tol must be > 0");
  return c;
}

GradcheckConfig parse_gradcheck(const Json& j) {
  const std::string ctx = "gradcheck config";
  check_keys(j, {"components", "h", "tol", "seed"}, ctx);
  GradcheckConfig c;
  if (j.contains("components")) {
    const Json& v = j.at("components");
    if (!v.is_array()) throw ConfigError("key 'components' in " + ctx + " must be an array");
    c.components.emplace();
    for (const auto& x : v) {
      if (!x.is_string()) throw ConfigError("key 'components' in " + ctx + " must hold strings");
      c.components->push_back(x.get<std::string>());
    }
  }
  read(j, "h", c.h, ctx);
  read(j, "tol", c.tol, ctx);
  read(j, "seed", c.seed, ctx);
  return c;
}

GenDataConfig parse_gen_data(const Json& j) {
  check_keys(j, {"dataset"}, "gen-data config");
  GenDataConfig c;
  if (j.contains("dataset")) c.dataset = parse_dataset_spec(j.at("dataset"));
  return c;
}

Json to_json(const DatasetSpec& d) {
  Json j;
  j["kind"] = d.kind;
  j["seed"] = d.seed;
  if (d.kind == "moons") {
    j["n_train_per_class"] = d.moons.n_train_per_class;
    j["n_test_per_class"] = d.moons.n_test_per_class;
    j["noise_sigma"] = d.moons.noise_sigma;
    j["rotation_deg"] = d.moons.rotation_deg;
  } else if (d.kind == "gaussian_grid") {
    j["n_components"] = d.grid.n_components;
    j["n_train_per_comp"] = d.grid.n_train_per_comp;
    j["n_test_per_comp"] = d.grid.n_test_per_comp;
    j["grid_spacing"] = d.grid.grid_spacing;
    j["sigma"] = d.grid.sigma;
  } else if (d.kind == "gaussian_mixture") {
    auto points = [&](const std::vector<double>& flat) {
      Json a = Json::array();
      for (std::size_t k = 0; k < flat.size(); k += d.mixture_dim) {
        a.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(k),
                                        flat.begin() + static_cast<std::ptrdiff_t>(k + d.mixture_dim)));
      }
      return a;
    };
    j["source_means"] = points(d.source_means);
    j["target_means"] = points(d.target_means);
    j["n_train_per_comp"] = d.n_train_per_comp;
    j["n_test_per_comp"] = d.n_test_per_comp;
    j["sigma"] = d.sigma;
  } else if (d.kind == "csv") {
    j["source"] = d.source_csv.string();
    j["target"] = d.target_csv.string();
    j["label_column"] = d.csv.label_column;
    j["split_column"] = d.csv.split_column;
  }
  j["labeled_per_class"] = d.labeled_per_class ? Json(*d.labeled_per_class) : Json(nullptr);
  if (d.alpha) j["alpha"] = *d.alpha;
  if (d.beta) j["beta"] = *d.beta;
  return j;
}

Json to_json(const TrainConfig& c) {
  return {{"lr_T", c.lr_T},
          {"lr_v", c.lr_v},
          {"K_T", c.K_T},
          {"K_B", c.K_B},
          {"K_X", c.K_X},
          {"K_Y", c.K_Y},
          {"K_Z", c.K_Z},
          {"iterations", c.total_v_iters},
          {"v_batch", c.v_batch},
          {"latent_dim", c.latent_dim},
          {"functional", functional_name(c.functional.tag)},
          {"gamma", c.functional.gamma},
          {"gamma_reg", c.functional.gamma_reg},
          {"hidden_dim", c.hidden_dim},
          {"hidden_layers", c.hidden_layers},
          {"v_hidden_dim", c.v_hidden_dim},
          {"v_hidden_layers", c.v_hidden_layers},
          {"seed", c.seed},
          {"eval_every", c.eval_every},
          {"checkpoint_every", c.checkpoint_every}};
}

LabeledDataset build_dataset(const DatasetSpec& spec, CsvLoadReport* report) {
  LabeledDataset ds;
  if (spec.kind == "moons") {
    MoonsOptions o = spec.moons;
    o.seed = spec.seed;
    ds = make_two_moons(o);
  } else if (spec.kind == "gaussian_grid") {
    GridOptions o = spec.grid;
    o.seed = spec.seed;
    ds = make_gaussian_grid(o);
  } else if (spec.kind == "gaussian_mixture") {
    ds = make_gaussian_mixture(spec.source_means, spec.target_means, spec.mixture_dim,
                               spec.n_train_per_comp, spec.n_test_per_comp, spec.sigma,
                               spec.seed);
  } else if (spec.kind == "csv") {
    ds = load_csv_labeled(spec.source_csv, spec.target_csv, spec.csv, report);
  } else {
    throw ConfigError("unknown dataset kind '" + spec.kind + "'");
  }
  try {
    if (spec.alpha) ds = set_class_weights(ds, *spec.alpha, *spec.beta, spec.seed + 1);
    if (spec.labeled_per_class) ds = partial_labeling(ds, *spec.labeled_per_class, spec.seed + 2);
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  return ds;
}

}  // namespace got
