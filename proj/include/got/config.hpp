#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "got/datasets.hpp"
#include "got/discrete_oracle.hpp"
#include "got/metrics.hpp"
#include "got/trainer.hpp"

namespace got {

using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Dataset recipe: a generator (or CSV pair) followed by optional class
/// reweighting and partial labeling.
struct DatasetSpec {
  std::string kind = "moons";  // moons | gaussian_grid | gaussian_mixture | csv
  MoonsOptions moons;
  GridOptions grid;
  std::vector<double> source_means;  // gaussian_mixture, [classes, D] row-major
  std::vector<double> target_means;
  std::size_t mixture_dim = 2;
  std::size_t n_train_per_comp = 1000;
  std::size_t n_test_per_comp = 200;
  double sigma = 0.1;
  std::filesystem::path source_csv;
  std::filesystem::path target_csv;
  CsvOptions csv;
  std::optional<std::size_t> labeled_per_class = 10;
  std::optional<std::vector<double>> alpha;
  std::optional<std::vector<double>> beta;
  std::uint64_t seed = 0;
};

struct TrainRunConfig {
  TrainConfig train;
  DatasetSpec dataset;
  EvalOptions eval;
};

struct EvalRunConfig {
  std::filesystem::path checkpoint;
  DatasetSpec dataset;
  EvalOptions eval;
  std::size_t eps1_budget = 0;  // 0: skip the diagnostic
  std::optional<TrainConfig> train;  // recipe for the eps1 diagnostic
};

struct OracleVerifyConfig {
  std::size_t instances = 100;
  std::vector<double> gamma_values = {0.1, 1.0};
  oracle::InstanceSpec spec;
  std::uint64_t seed = 0;
  double tol = 1e-10;
};

struct GradcheckConfig {
  std::optional<std::vector<std::string>> components;  // absent: every component
  double h = 1e-5;
  double tol = 1e-4;
  std::uint64_t seed = 0;
};

struct GenDataConfig {
  DatasetSpec dataset;
};

// Strict parsers: unknown keys and wrongly typed values raise ConfigError
// naming the offending key.
DatasetSpec parse_dataset_spec(const Json& j);
TrainConfig parse_train_config(const Json& j);
TrainRunConfig parse_train_run(const Json& j);
EvalRunConfig parse_eval_run(const Json& j);
OracleVerifyConfig parse_oracle_verify(const Json& j);
GradcheckConfig parse_gradcheck(const Json& j);
GenDataConfig parse_gen_data(const Json& j);

Json to_json(const DatasetSpec& d);
Json to_json(const TrainConfig& c);

Json read_json_file(const std::filesystem::path& path);

LabeledDataset build_dataset(const DatasetSpec& spec, CsvLoadReport* report = nullptr);

}  // namespace got
