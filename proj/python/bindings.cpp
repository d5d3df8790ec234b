#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "got/config.hpp"
#include "got/discrete_oracle.hpp"
#include "got/errors.hpp"
#include "got/gradcheck.hpp"
#include "got/metrics.hpp"
#include "got/networks.hpp"
#include "got/trainer.hpp"

namespace py = pybind11;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

got::Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw got::DimensionError("expected a 2-d array");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return got::Tensor({r, c}, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const got::Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.buffer().begin(), t.buffer().end(), out.mutable_data());
  return out;
}

py::array_t<int> to_labels(const std::vector<int>& v) {
  py::array_t<int> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<bool> to_mask(const std::vector<bool>& v) {
  py::array_t<bool> out(static_cast<py::ssize_t>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out.mutable_data()[i] = v[i];
  return out;
}

py::dict dataset_dict(const got::LabeledDataset& ds) {
  py::dict d;
  d["source"] = to_array(ds.source);
  d["source_labels"] = to_labels(ds.source_labels);
  d["source_train"] = to_mask(ds.source_train);
  d["target"] = to_array(ds.target);
  d["target_labels"] = to_labels(ds.target_labels);
  d["target_train"] = to_mask(ds.target_train);
  d["num_classes"] = ds.num_classes;
  return d;
}

got::Json parse_json(const std::string& s) {
  try {
    return got::Json::parse(s);
  } catch (const got::Json::exception& e) {
    throw got::ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_got, m) {
  m.doc() = "Neural optimal transport with general cost functionals";

  py::register_exception<got::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<got::DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<got::PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<got::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<got::ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  m.attr("__version__") = got::kToolVersion;

  py::class_<got::TransportMap>(m, "TransportMap")
      .def(py::init<std::size_t, std::size_t, std::size_t, std::size_t, std::uint64_t>(),
           py::arg("data_dim"), py::arg("latent_dim") = 0, py::arg("hidden_dim") = 128,
           py::arg("hidden_layers") = 2, py::arg("seed") = 0)
      .def_property_readonly("data_dim", &got::TransportMap::data_dim)
      .def_property_readonly("latent_dim", &got::TransportMap::latent_dim)
      .def(
          "__call__",
          [](const got::TransportMap& T, const Array& x, std::optional<Array> z) {
            const got::Tensor xt = to_tensor(x);
            if (!z) return to_array(T.apply(xt));
            const got::Tensor zt = to_tensor(*z);
            return to_array(T.apply(xt, &zt));
          },
          py::arg("x"), py::arg("z") = py::none());

  m.def(
      "load_checkpoint",
      [](const std::string& path) {
        got::Checkpoint c = got::load_checkpoint(path);
        return py::make_tuple(std::move(c.transport), c.metadata_json);
      },
      py::arg("path"), "Returns (TransportMap, metadata JSON string).");

  m.def(
      "make_dataset",
      [](const std::string& spec_json) {
        return dataset_dict(got::build_dataset(got::parse_dataset_spec(parse_json(spec_json))));
      },
      py::arg("spec_json"), "Builds a dataset from a JSON recipe (the 'dataset' config block).");

  m.def(
      "energy_distance_sq",
      [](const Array& a, const Array& b) { return got::energy_distance_sq(to_tensor(a), to_tensor(b)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "train",
      [](const std::string& config_json) {
        const got::TrainRunConfig cfg = got::parse_train_run(parse_json(config_json));
        cfg.train.validate();
        const got::LabeledDataset ds = got::build_dataset(cfg.dataset);
        got::TrainResult res;
        {
          py::gil_scoped_release release;
          res = got::train(cfg.train, ds);
        }
        const got::EvalReport ev = got::evaluate(res.models.T, ds, cfg.eval);
        py::dict out;
        out["accuracy"] = ev.accuracy;
        out["energy"] = ev.energy_overall;
        std::vector<double> lv, lt;
        for (const auto& r : res.report.series) {
          lv.push_back(r.L_v);
          lt.push_back(r.L_T);
        }
        out["L_v"] = lv;
        out["L_T"] = lt;
        out["transport"] = std::move(res.models.T);
        return out;
      },
      py::arg("config_json"), "Trains from a JSON run config and evaluates on the test split.");

  m.def("gradcheck_components", &got::gradcheck_components);
  m.def(
      "gradcheck",
      [](const std::string& name, std::uint64_t seed) {
        const got::GradcheckOutcome o = got::run_gradcheck(name, seed);
        return py::make_tuple(o.passed, o.result.max_rel_err);
      },
      py::arg("component"), py::arg("seed") = 0, "Returns (passed, max relative error).");

  m.def(
      "verify_instance",
      [](std::size_t instance, double gamma_reg, std::uint64_t seed) {
        const got::oracle::VerifyCase v =
            got::oracle::verify_instance(instance, gamma_reg, got::oracle::InstanceSpec{}, seed);
        py::dict d;
        d["eps1"] = v.gap.eps1;
        d["eps2"] = v.gap.eps2;
        d["rho"] = v.gap.rho;
        d["bound"] = v.gap.bound;
        d["holds"] = v.gap.holds;
        return d;
      },
      py::arg("instance"), py::arg("gamma_reg"), py::arg("seed") = 0);
}
