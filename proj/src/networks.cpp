#include "got/networks.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "got/errors.hpp"

namespace got {

using nlohmann::json;

void MlpConfig::validate() const {
  if (in_dim < 1 || hidden_dim < 1 || out_dim < 1 || hidden_layers < 1) {
    throw ConfigError("MLP dimensions must be >= 1 with at least one hidden layer");
  }
}

Mlp::Mlp(const MlpConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  std::size_t fan_in = config_.in_dim;
  for (std::size_t layer = 0; layer <= config_.hidden_layers; ++layer) {
    const std::size_t fan_out =
        layer == config_.hidden_layers ? config_.out_dim : config_.hidden_dim;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uni(-bound, bound);
    Tensor W(Shape{fan_in, fan_out});
    for (double& w : W.buffer()) w = uni(rng);
    W.set_requires_grad(true);
    Tensor b(Shape{fan_out});
    b.set_requires_grad(true);
    params_.push_back(std::move(W));
    params_.push_back(std::move(b));
    fan_in = fan_out;
  }
}

std::vector<Tensor*> Mlp::parameter_ptrs() {
  std::vector<Tensor*> out;
  for (Tensor& p : params_) out.push_back(&p);
  return out;
}

Var Mlp::forward(Var x, bool trainable) {
  if (x.value().rank() != 2 || x.value().cols() != config_.in_dim) {
    throw DimensionError("MLP expects input width " + std::to_string(config_.in_dim) +
                         ", got " + shape_string(x.value().shape()));
  }
  Graph& g = x.graph();
  Var h = x;
  const std::size_t layers = params_.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    Var W = trainable ? g.leaf(params_[2 * l]) : g.frozen(params_[2 * l]);
    Var b = trainable ? g.leaf(params_[2 * l + 1]) : g.frozen(params_[2 * l + 1]);
    h = linear(h, W, b);
    if (l + 1 < layers) h = relu(h);
  }
  return h;
}

TransportMap::TransportMap(std::size_t data_dim, std::size_t latent_dim,
                           std::size_t hidden_dim, std::size_t hidden_layers,
                           std::uint64_t seed)
    : data_dim_(data_dim),
      latent_dim_(latent_dim),
      mlp_(MlpConfig{data_dim + latent_dim, hidden_dim, hidden_layers, data_dim}, seed) {}

TransportMap::TransportMap(std::size_t data_dim, std::size_t latent_dim, Mlp mlp)
    : data_dim_(data_dim), latent_dim_(latent_dim), mlp_(std::move(mlp)) {
  const auto& c = mlp_.config();
  if (c.in_dim != data_dim + latent_dim || c.out_dim != data_dim) {
    throw DimensionError("transport MLP must map D+Z -> D");
  }
}

Var TransportMap::forward(Var x, std::optional<Var> z, bool trainable) {
  if (x.value().rank() != 2 || x.value().cols() != data_dim_) {
    throw DimensionError("transport map expects width " + std::to_string(data_dim_) +
                         ", got " + shape_string(x.value().shape()));
  }
  if (latent_dim_ == 0) {
    if (z) throw DimensionError("deterministic transport map does not accept a latent");
    return mlp_.forward(x, trainable);
  }
  if (!z) throw DimensionError("stochastic transport map requires a latent batch");
  const Tensor& zv = z->value();
  if (zv.rank() != 2 || zv.cols() != latent_dim_ || zv.rows() != x.value().rows()) {
    throw DimensionError("latent batch must be [" + std::to_string(x.value().rows()) +
                         "," + std::to_string(latent_dim_) + "], got " +
                         shape_string(zv.shape()));
  }
  return mlp_.forward(concat_cols(x, *z), trainable);
}

Tensor TransportMap::apply(const Tensor& x, const Tensor* z) const {
  Graph g;
  auto& self = const_cast<TransportMap&>(*this);
  Var xv = g.frozen(x);
  std::optional<Var> zv;
  if (z) zv = g.frozen(*z);
  Tensor out = self.forward(xv, zv, false).value();
  return out;
}

Potential::Potential(std::size_t data_dim, std::size_t hidden_dim,
                     std::size_t hidden_layers, std::uint64_t seed)
    : mlp_(MlpConfig{data_dim, hidden_dim, hidden_layers, 1}, seed) {}

Potential::Potential(Mlp mlp) : mlp_(std::move(mlp)) {
  if (mlp_.config().out_dim != 1) throw DimensionError("potential must have scalar output");
}

Var Potential::forward(Var y, bool trainable) { return mlp_.forward(y, trainable); }

Tensor Potential::apply(const Tensor& y) const {
  Graph g;
  auto& self = const_cast<Potential&>(*this);
  return self.forward(g.frozen(y), false).value();
}

Tensor LatentSampler::sample(std::size_t n, Rng& rng) const {
  Tensor z(Shape{n, dim_});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : z.buffer()) v = normal(rng);
  return z;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written in native order");

json mlp_json(const MlpConfig& c) {
  return {{"in_dim", c.in_dim},
          {"hidden_dim", c.hidden_dim},
          {"hidden_layers", c.hidden_layers},
          {"out_dim", c.out_dim}};
}

MlpConfig mlp_from_json(const json& j) {
  MlpConfig c;
  c.in_dim = j.at("in_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.hidden_layers = j.at("hidden_layers").get<std::size_t>();
  c.out_dim = j.at("out_dim").get<std::size_t>();
  c.validate();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TransportMap& transport,
                     const Potential& potential, const std::string& metadata_json) {
  json header;
  header["version"] = kCheckpointVersion;
  header["cfg"] = {{"data_dim", transport.data_dim()},
                   {"latent_dim", transport.latent_dim()},
                   {"transport", mlp_json(transport.mlp().config())},
                   {"potential", mlp_json(potential.mlp().config())}};
  header["metadata"] = json::parse(metadata_json);

  std::vector<const Tensor*> order;
  json manifest = json::array();
  std::size_t offset = 0;
  auto add = [&](const std::string& prefix, const Mlp& mlp) {
    const auto& ps = mlp.parameters();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const std::string name =
          prefix + "." + std::to_string(k / 2) + (k % 2 == 0 ? ".weight" : ".bias");
      const std::size_t bytes = ps[k].size() * sizeof(double);
      manifest.push_back({{"name", name}, {"shape", ps[k].shape()},
                          {"offset", offset}, {"bytes", bytes}});
      offset += bytes;
      order.push_back(&ps[k]);
    }
  };
  add("transport", transport.mlp());
  add("potential", potential.mlp());
  header["tensors"] = manifest;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  const std::string line = header.dump();
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.put('\n');
  for (const Tensor* t : order) {
    out.write(reinterpret_cast<const char*>(t->data().data()),
              static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string line;
  std::getline(in, line);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed checkpoint header: " + std::string(e.what()));
  }
  if (header.value("version", 0) != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  const std::vector<char> payload((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

  const auto& cfg = header.at("cfg");
  const auto data_dim = cfg.at("data_dim").get<std::size_t>();
  const auto latent_dim = cfg.at("latent_dim").get<std::size_t>();
  Mlp tmlp(mlp_from_json(cfg.at("transport")), 0);
  Mlp vmlp(mlp_from_json(cfg.at("potential")), 0);

  std::vector<Tensor*> order;
  for (Tensor& t : tmlp.parameters()) order.push_back(&t);
  for (Tensor& t : vmlp.parameters()) order.push_back(&t);
  const auto& manifest = header.at("tensors");
  if (manifest.size() != order.size()) {
    throw std::runtime_error("checkpoint manifest does not match configuration");
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& entry = manifest[k];
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto bytes = entry.at("bytes").get<std::size_t>();
    if (shape != order[k]->shape() || bytes != order[k]->size() * sizeof(double) ||
        offset + bytes > payload.size()) {
      throw std::runtime_error("checkpoint tensor " +
                               entry.value("name", std::to_string(k)) + " is inconsistent");
    }
    std::memcpy(order[k]->data().data(), payload.data() + offset, bytes);
  }

  Checkpoint ck{TransportMap(data_dim, latent_dim, std::move(tmlp)),
                Potential(std::move(vmlp)), header.value("metadata", json::object()).dump()};
  return ck;
}

}  // namespace got
