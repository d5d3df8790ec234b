#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "got/config.hpp"
#include "got/discrete_oracle.hpp"
#include "got/errors.hpp"
#include "got/gradcheck.hpp"
#include "got/metrics.hpp"
#include "got/trainer.hpp"

namespace fs = std::filesystem;
using got::Json;

namespace {

struct Common {
  std::string config;
  std::string out_dir = "out";
};

Json load_config(const Common& c) {
  if (c.config.empty()) return Json::object();
  return got::read_json_file(c.config);
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("GOT_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw got::ConfigError(std::string("GOT_SEED must be a non-negative integer, got '") + s + "'");
  }
}

// Seeds live in several objects; GOT_SEED overwrites all of them.
void override_seed(Json& j, const std::vector<std::string>& objects, bool top_level) {
  const auto seed = env_seed();
  if (!seed) return;
  if (top_level) j["seed"] = *seed;
  for (const auto& key : objects) {
    if (!j.contains(key)) j[key] = Json::object();
    if (!j[key].is_object()) throw got::ConfigError("key '" + key + "' must be an object");
    j[key]["seed"] = *seed;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_manifest(const fs::path& dir, const std::string& command, const Json& config,
                    std::uint64_t seed) {
  Json m = {{"tool", "got"},
            {"version", got::kToolVersion},
            {"subcommand", command},
            {"seed", seed},
            {"config", config}};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

fs::path prepare_out(const Common& c) {
  fs::path dir(c.out_dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<int> labels_at(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels[r]);
  return out;
}

void write_transfer_svg(const fs::path& path, const got::LabeledDataset& ds,
                        const got::Tensor& images, const std::vector<int>& image_labels,
                        const std::string& title) {
  const auto src_rows = ds.source_rows(false);
  const auto tgt_rows = ds.target_rows(false);
  const got::Tensor src = got::take_rows(ds.source, src_rows);
  const got::Tensor tgt = got::take_rows(ds.target, tgt_rows);
  const auto src_labels = labels_at(ds.source_labels, src_rows);
  const auto tgt_labels = labels_at(ds.target_labels, tgt_rows);
  got::write_scatter_svg(path, {{"source (test)", &src, &src_labels},
                                {title, &images, &image_labels},
                                {"target (test)", &tgt, &tgt_labels}});
}

int cmd_gen_data(const Common& c) {
  Json j = load_config(c);
  override_seed(j, {"dataset"}, false);
  const got::GenDataConfig cfg = got::parse_gen_data(j);
  got::CsvLoadReport report;
  const got::LabeledDataset ds = got::build_dataset(cfg.dataset, &report);
  const fs::path dir = prepare_out(c);
  got::save_csv(ds, dir);
  write_manifest(dir, "gen-data", {{"dataset", got::to_json(cfg.dataset)}}, cfg.dataset.seed);
  std::cout << "wrote " << ds.source.rows() << " source and " << ds.target.rows()
            << " target rows to " << dir.string() << "\n";
  return 0;
}

struct TrainFlags {
  std::string functional;
  std::string dataset;
  std::optional<double> gamma_reg;
};

int cmd_train(const Common& c, const TrainFlags& f) {
  Json j = load_config(c);
  if (!j.contains("train")) j["train"] = Json::object();
  if (!j.contains("dataset")) j["dataset"] = Json::object();
  if (!f.functional.empty()) j["train"]["functional"] = f.functional;
  if (!f.dataset.empty()) j["dataset"]["kind"] = f.dataset;
  if (f.gamma_reg) j["train"]["gamma_reg"] = *f.gamma_reg;
  override_seed(j, {"train", "dataset", "eval"}, false);
  const got::TrainRunConfig cfg = got::parse_train_run(j);
  cfg.train.validate();

  const got::LabeledDataset ds = got::build_dataset(cfg.dataset);
  const fs::path dir = prepare_out(c);
  write_manifest(dir, "train", j, cfg.train.seed);

  got::TrainOptions opts;
  opts.out_dir = dir;
  opts.checkpoint_metadata =
      Json{{"train", got::to_json(cfg.train)}, {"dataset", got::to_json(cfg.dataset)}}.dump();
  opts.evaluator = [&](const got::TransportMap& T) {
    const got::EvalReport r = got::evaluate(T, ds, cfg.eval);
    return std::make_pair(r.accuracy, r.energy_overall);
  };
  const auto start = std::chrono::steady_clock::now();
  const std::size_t every = std::max<std::size_t>(1, cfg.train.total_v_iters / 10);
  opts.progress = [&](std::size_t iter, double L_v, double L_T) {
    if ((iter + 1) % every == 0) {
      std::cerr << "iter " << iter + 1 << "/" << cfg.train.total_v_iters << "  L_v " << L_v
                << "  L_T " << L_T << "\n";
    }
  };
  const got::TrainResult res = got::train(cfg.train, ds, opts);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  res.report.write_csv(dir / "train_report.csv");
  const got::EvalReport ev = got::evaluate(res.models.T, ds, cfg.eval);
  ev.write_csv(dir / "eval_report.csv");
  Json summary = Json::parse(ev.summary_json());
  summary["train_seconds"] = seconds;
  summary["diagnostics"] = res.report.diagnostics;
  summary["functional"] = got::functional_name(cfg.train.functional.tag);
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  const auto [images, labels] = got::map_test_points(res.models.T, ds, 1, cfg.eval.seed);
  write_transfer_svg(dir / "transfer.svg", ds, images, labels,
                     "T(x) " + got::functional_name(cfg.train.functional.tag));
  for (const auto& d : res.report.diagnostics) std::cout << d << "\n";
  std::cout << "accuracy " << ev.accuracy << "  energy " << ev.energy_overall << "  ("
            << std::fixed << std::setprecision(1) << seconds << " s)\n";
  return 0;
}

int cmd_eval(const Common& c) {
  Json j = load_config(c);
  if (!j.contains("checkpoint")) throw got::ConfigError("eval config needs 'checkpoint'");
  const fs::path ckpt_path = j["checkpoint"].is_string()
                                 ? fs::path(j["checkpoint"].get<std::string>())
                                 : fs::path();
  if (ckpt_path.empty() || !fs::is_regular_file(ckpt_path)) {
    throw got::ConfigError("checkpoint not found: '" + ckpt_path.string() + "'");
  }
  got::Checkpoint ckpt = got::load_checkpoint(ckpt_path);
  const Json meta = Json::parse(ckpt.metadata_json);
  // The dataset and training recipe default to the ones stored at train time.
  if (!j.contains("dataset") && meta.contains("dataset")) j["dataset"] = meta["dataset"];
  if (!j.contains("train") && meta.contains("train") && j.contains("eps1_budget") &&
      j["eps1_budget"].is_number() && j["eps1_budget"].get<double>() > 0) {
    j["train"] = meta["train"];
  }
  override_seed(j, {"dataset", "eval"}, false);
  const got::EvalRunConfig cfg = got::parse_eval_run(j);
  const got::LabeledDataset ds = got::build_dataset(cfg.dataset);
  if (ds.dim != ckpt.transport.data_dim()) {
    throw got::ConfigError("checkpoint expects dimension " +
                           std::to_string(ckpt.transport.data_dim()) + ", dataset has " +
                           std::to_string(ds.dim));
  }
  const fs::path dir = prepare_out(c);
  write_manifest(dir, "eval", j, cfg.eval.seed);

  got::EvalReport ev = got::evaluate(ckpt.transport, ds, cfg.eval);
  if (cfg.eps1_budget > 0) {
    if (!cfg.train) throw got::ConfigError("eps1_budget needs a 'train' recipe");
    const got::Eps1Estimate e = got::estimate_eps1(ckpt.potential, ckpt.transport, ds,
                                                   *cfg.train, cfg.eps1_budget, cfg.eval.seed);
    ev.eps1_estimate = e.mean;
    ev.eps1_std = e.std;
  }
  ev.write_csv(dir / "eval_report.csv");
  write_text(dir / "summary.json", Json::parse(ev.summary_json()).dump(2) + "\n");
  const auto [images, labels] = got::map_test_points(ckpt.transport, ds, 1, cfg.eval.seed);
  write_transfer_svg(dir / "transfer.svg", ds, images, labels, "T(x)");
  std::cout << "accuracy " << ev.accuracy << "  energy " << ev.energy_overall << "\n";
  return 0;
}

int cmd_oracle_verify(const Common& c, std::optional<double> gamma_reg) {
  Json j = load_config(c);
  if (gamma_reg) {
    j.erase("gamma_values");
    j["gamma_reg"] = *gamma_reg;
  }
  override_seed(j, {}, true);
  const got::OracleVerifyConfig cfg = got::parse_oracle_verify(j);
  const fs::path dir = prepare_out(c);
  write_manifest(dir, "oracle-verify", j, cfg.seed);

  got::oracle::SolverOptions so;
  so.tol = cfg.tol;
  std::ofstream csv(dir / "gap_report.csv");
  csv << "instance,gamma_reg,nx,ny,classes,v_scale,mix,eps1,eps2,rho,bound,holds\n";
  csv << std::setprecision(17);
  std::size_t held = 0, total = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (double g : cfg.gamma_values) {
    for (std::size_t i = 0; i < cfg.instances; ++i) {
      const got::oracle::VerifyCase v = got::oracle::verify_instance(i, g, cfg.spec, cfg.seed, so);
      csv << v.instance << ',' << v.gamma_reg << ',' << v.nx << ',' << v.ny << ','
          << v.num_classes << ',' << v.v_scale << ',' << v.mix << ',' << v.gap.eps1 << ','
          << v.gap.eps2 << ',' << v.gap.rho << ',' << v.gap.bound << ','
          << (v.gap.holds ? "true" : "false") << '\n';
      held += v.gap.holds ? 1 : 0;
      ++total;
      worst_margin = std::min(worst_margin, v.gap.bound + got::oracle::kBoundSlack - v.gap.rho);
    }
  }
  csv.close();
  const Json summary = {{"cases", total}, {"held", held}, {"worst_margin", worst_margin}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << held << "/" << total << " cases satisfy the bound (worst margin " << worst_margin
            << ")\n";
  return held == total ? 0 : 1;
}

int cmd_gradcheck(const Common& c) {
  Json j = load_config(c);
  override_seed(j, {}, true);
  const got::GradcheckConfig cfg = got::parse_gradcheck(j);
  const fs::path dir = prepare_out(c);
  write_manifest(dir, "gradcheck", j, cfg.seed);
  const auto names = cfg.components ? *cfg.components : got::gradcheck_components();

  std::ofstream csv(dir / "gradcheck.csv");
  csv << "component,max_rel_err,autodiff,numeric,passed\n" << std::setprecision(17);
  bool ok = true;
  for (const auto& name : names) {
    const got::GradcheckOutcome o = got::run_gradcheck(name, cfg.seed, cfg.h, cfg.tol);
    csv << name << ',' << o.result.max_rel_err << ',' << o.result.autodiff << ','
        << o.result.numeric << ',' << (o.passed ? "true" : "false") << '\n';
    std::cout << std::left << std::setw(34) << name << std::setw(14) << o.result.max_rel_err
              << (o.passed ? "pass" : "FAIL") << "\n";
    ok = ok && o.passed;
  }
  if (names.empty()) std::cout << "no components requested\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural optimal transport with general cost functionals"};
  app.set_version_flag("--version", got::kToolVersion);
  app.require_subcommand(1);

  auto add_common = [](CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out-dir", c.out_dir, "directory for every output")->capture_default_str();
  };

  Common gen_c, train_c, eval_c, oracle_c, grad_c;
  TrainFlags flags;
  std::optional<double> oracle_gamma;

  auto* gen = app.add_subcommand("gen-data", "generate a dataset and write it as CSV");
  add_common(gen, gen_c);
  auto* tr = app.add_subcommand("train", "train a transport map and potential");
  add_common(tr, train_c);
  tr->add_option("--functional", flags.functional,
                 "class_guided | quadratic | gamma_weak_quadratic");
  tr->add_option("--dataset", flags.dataset, "moons | gaussian_grid | gaussian_mixture | csv");
  tr->add_option("--gamma-reg", flags.gamma_reg, "weight of the interaction-energy regularizer");
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(ev, eval_c);
  auto* ov = app.add_subcommand("oracle-verify", "check the duality-gap bound on random instances");
  add_common(ov, oracle_c);
  ov->add_option("--gamma-reg", oracle_gamma, "single regularizer weight");
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every loss");
  add_common(gc, grad_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(gen_c);
    if (*tr) return cmd_train(train_c, flags);
    if (*ev) return cmd_eval(eval_c);
    if (*ov) return cmd_oracle_verify(oracle_c, oracle_gamma);
    if (*gc) return cmd_gradcheck(grad_c);
  } catch (const got::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const got::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
