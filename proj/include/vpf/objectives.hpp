// Copyright 2026 The vpf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Encoder/decoder model zoo and the variational cost functions.
//
//   total = mean KL(p(y|x) || N(0, I)) + multiplier * mean NLL + delta * MMD
//
// The NLL is of x (reconstruction) or t (prediction) under a decoder that
// sees y and, when condition_decoder_on_s is set, the one-hot S.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"
#include "vpf/autodiff.hpp"
#include "vpf/data.hpp"
#include "vpf/distributions.hpp"
#include "vpf/error.hpp"
#include "vpf/nn.hpp"
#include "vpf/rng.hpp"

namespace vpf::model {

using nlohmann::json;

enum class Objective { kReconstruction, kPrediction };

struct ModelConfig {
  std::string kind = "custom";
  Objective objective = Objective::kReconstruction;
  bool condition_decoder_on_s = true;
  bool condition_encoder_on_s = false;
  double multiplier = 1.0;  // gamma, beta or eta^-1
  double mmd_weight = 0.0;  // delta
  std::size_t representation_dim = 2;
  std::size_t hidden_width = 100;
  std::size_t mc_samples = 1;
  std::size_t mmd_features = 500;
  double mmd_gamma = 1.0;
  double initial_log_sigma = -1.0;

  void validate() const {
    if (!(multiplier > 0.0) || !std::isfinite(multiplier)) throw ConfigError("multiplier must be positive");
    if (!(mmd_weight >= 0.0) || !std::isfinite(mmd_weight)) throw ConfigError("mmd_weight must be >= 0");
    if (representation_dim == 0) throw ConfigError("representation_dim must be >= 1");
    if (hidden_width == 0) throw ConfigError("hidden_width must be >= 1");
    if (mc_samples == 0) throw ConfigError("mc_samples must be >= 1");
    if (mmd_weight > 0.0 && (mmd_features == 0 || !(mmd_gamma > 0.0))) {
      throw ConfigError("mmd_features and mmd_gamma must be positive when mmd_weight > 0");
    }
  }

  json to_json() const {
    return {{"kind", kind},
            {"objective", objective == Objective::kReconstruction ? "reconstruction" : "prediction"},
            {"condition_decoder_on_s", condition_decoder_on_s},
            {"condition_encoder_on_s", condition_encoder_on_s},
            {"multiplier", multiplier},
            {"mmd_weight", mmd_weight},
            {"representation_dim", representation_dim},
            {"hidden_width", hidden_width},
            {"mc_samples", mc_samples},
            {"mmd_features", mmd_features},
            {"mmd_gamma", mmd_gamma},
            {"initial_log_sigma", initial_log_sigma}};
  }
};

// Members of the zoo. Each fixes the conditioning flags; the multiplier is
// gamma (CPF), beta (CFB) or eta^-1 (baselines).
inline ModelConfig cpf(double gamma) {
  ModelConfig c;
  c.kind = "cpf";
  c.objective = Objective::kReconstruction;
  c.condition_decoder_on_s = true;
  c.multiplier = gamma;
  return c;
}

inline ModelConfig cfb(double beta) {
  ModelConfig c = cpf(beta);
  c.kind = "cfb";
  c.objective = Objective::kPrediction;
  return c;
}

inline ModelConfig beta_vae(double eta_inv) {
  ModelConfig c = cpf(eta_inv);
  c.kind = "beta_vae";
  c.condition_decoder_on_s = false;
  return c;
}

inline ModelConfig vib(double eta_inv) {
  ModelConfig c = cfb(eta_inv);
  c.kind = "vib";
  c.condition_decoder_on_s = false;
  return c;
}

inline ModelConfig ppvae(double eta_inv) {
  ModelConfig c = cpf(eta_inv);
  c.kind = "ppvae";
  c.condition_encoder_on_s = true;
  return c;
}

inline ModelConfig vfae(double delta) {
  ModelConfig c = ppvae(1.0);
  c.kind = "vfae";
  c.mmd_weight = delta;
  return c;
}

inline ModelConfig config_for(const std::string& kind, double multiplier) {
  if (kind == "cpf") return cpf(multiplier);
  if (kind == "cfb") return cfb(multiplier);
  if (kind == "beta_vae") return beta_vae(multiplier);
  if (kind == "vib") return vib(multiplier);
  if (kind == "ppvae") return ppvae(multiplier);
  if (kind == "vfae") return vfae(multiplier);
  throw ConfigError("unknown model kind '" + kind + "' (expected cpf, cfb, beta_vae, vib, ppvae or vfae)");
}

// Builds a config from JSON. `kind` selects the zoo defaults, explicit
// fields override them. For vfae the multiplier field is delta.
inline ModelConfig config_from_json(const json& j) {
  try {
    const std::string kind = j.value("kind", std::string("cpf"));
    ModelConfig c = kind == "custom" ? ModelConfig{} : config_for(kind, j.value("multiplier", 1.0));
    if (j.contains("objective")) {
      const auto o = j.at("objective").get<std::string>();
      if (o != "reconstruction" && o != "prediction") throw ConfigError("objective must be reconstruction or prediction");
      c.objective = o == "reconstruction" ? Objective::kReconstruction : Objective::kPrediction;
    }
    c.condition_decoder_on_s = j.value("condition_decoder_on_s", c.condition_decoder_on_s);
    c.condition_encoder_on_s = j.value("condition_encoder_on_s", c.condition_encoder_on_s);
    if (kind != "vfae") c.multiplier = j.value("multiplier", c.multiplier);
    c.mmd_weight = j.value("mmd_weight", c.mmd_weight);
    c.representation_dim = j.value("representation_dim", c.representation_dim);
    c.hidden_width = j.value("hidden_width", c.hidden_width);
    c.mc_samples = j.value("mc_samples", c.mc_samples);
    c.mmd_features = j.value("mmd_features", c.mmd_features);
    c.mmd_gamma = j.value("mmd_gamma", c.mmd_gamma);
    c.initial_log_sigma = j.value("initial_log_sigma", c.initial_log_sigma);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

// Random Fourier features z(y) = sqrt(2/D) cos(W^T y + b) of the RBF kernel
// k(u, v) = exp(-gamma |u - v|^2): W ~ N(0, 2 gamma I), b ~ U[0, 2 pi).
struct RandomFeatures {
  ad::Tensor w;  // d x D
  ad::Tensor b;  // D

  static RandomFeatures draw(std::size_t d, std::size_t features, double gamma, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(d * features), b(features);
    const double sd = std::sqrt(2.0 * gamma);
    for (double& v : w) v = rng.normal(0.0, sd);
    for (double& v : b) v = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return {ad::Tensor::from({d, features}, std::move(w)), ad::Tensor::from({features}, std::move(b))};
  }

  std::size_t count() const { return b.numel(); }

  ad::Tensor map(const ad::Tensor& y) const {
    return ad::cos(ad::matmul(y, w) + b) * std::sqrt(2.0 / static_cast<double>(count()));
  }

  // |mean z(y0) - mean z(y1)|^2
  ad::Tensor mmd(const ad::Tensor& y0, const ad::Tensor& y1) const {
    if (y0.dim() != 2 || y1.dim() != 2 || y0.rows() == 0 || y1.rows() == 0) {
      throw ContractError("mmd_rks: both groups must be non-empty matrices");
    }
    ad::Tensor mean0 = ad::matmul(ad::Tensor::full({1, y0.rows()}, 1.0 / static_cast<double>(y0.rows())), map(y0));
    ad::Tensor mean1 = ad::matmul(ad::Tensor::full({1, y1.rows()}, 1.0 / static_cast<double>(y1.rows())), map(y1));
    return ad::sum(ad::square(mean0 - mean1));
  }
};

inline ad::Tensor mmd_rks(const ad::Tensor& y0, const ad::Tensor& y1, std::size_t features, double gamma,
                          std::uint64_t seed) {
  if (y0.dim() != 2 || y1.dim() != 2 || y0.cols() != y1.cols()) {
    throw DimensionError("mmd_rks: groups " + ad::to_string(y0.shape()) + " and " + ad::to_string(y1.shape()));
  }
  return RandomFeatures::draw(y0.cols(), features, gamma, seed).mmd(y0, y1);
}

// Encoder mu(x [, s]) with a global log-sigma, and decoder q(. | y [, s]).
class ModelGraph {
 public:
  ModelGraph(ModelConfig config, std::shared_ptr<const data::Schema> schema, std::uint64_t seed)
      : config_(std::move(config)), schema_(std::move(schema)), seed_(seed) {
    config_.validate();
    if (!schema_ || schema_->features.empty()) throw ConfigError("build_model: empty schema");
    if (config_.objective == Objective::kPrediction && !schema_->task) {
      throw ConfigError("build_model: prediction objective needs a task column in schema " + schema_->name);
    }
    layout_ = config_.objective == Objective::kReconstruction ? schema_->reconstruction_layout()
                                                              : schema_->prediction_layout();
    const std::size_t ns = schema_->sensitive_levels();
    const std::size_t d = config_.representation_dim, h = config_.hidden_width;
    Rng rng(seed);
    encoder_ = nn::Mlp(schema_->encoded_width() + (config_.condition_encoder_on_s ? ns : 0), {h}, d,
                       nn::Activation::kRelu, rng);
    decoder_ = nn::Mlp(d + (config_.condition_decoder_on_s ? ns : 0), {h}, layout_.output_width(),
                       nn::Activation::kRelu, rng);
    log_sigma_ = ad::Tensor::parameter({}, {config_.initial_log_sigma});
    encoder_.register_into(params_, "encoder");
    params_.add("encoder.log_sigma", log_sigma_);
    decoder_.register_into(params_, "decoder");
    if (layout_.gaussian_count() > 0) {
      log_variance_ = ad::Tensor::parameter({layout_.gaussian_count()},
                                            std::vector<double>(layout_.gaussian_count(), 0.0));
      params_.add("decoder.log_variance", log_variance_);
    }
    if (config_.mmd_weight > 0.0) {
      features_ = RandomFeatures::draw(d, config_.mmd_features, config_.mmd_gamma, Rng(seed).fork());
    }
  }

  ModelGraph(const ModelGraph&) = delete;
  ModelGraph& operator=(const ModelGraph&) = delete;
  ModelGraph(ModelGraph&&) = default;
  ModelGraph& operator=(ModelGraph&&) = default;

  // p(y | x) when condition_encoder_on_s is false; S is not read at all then.
  dist::GaussianHead encode(const ad::Tensor& x, const ad::Tensor& s_onehot) const {
    ad::Tensor in = config_.condition_encoder_on_s ? ad::concat_last(x, s_onehot) : x;
    return {encoder_(in), log_sigma_};
  }

  dist::DecoderHead decode(const ad::Tensor& y, const ad::Tensor& s_onehot) const {
    ad::Tensor in = config_.condition_decoder_on_s ? ad::concat_last(y, s_onehot) : y;
    return {decoder_(in), log_variance_, &layout_};
  }

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const data::Schema& schema() const { return *schema_; }
  std::shared_ptr<const data::Schema> schema_ptr() const { return schema_; }
  std::uint64_t seed() const { return seed_; }
  const dist::HeadLayout& head_layout() const { return layout_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  const RandomFeatures& random_features() const { return features_; }

 private:
  ModelConfig config_;
  std::shared_ptr<const data::Schema> schema_;
  std::uint64_t seed_ = 0;
  dist::HeadLayout layout_;
  nn::Mlp encoder_, decoder_;
  ad::Tensor log_sigma_, log_variance_;
  nn::ParameterSet params_;
  RandomFeatures features_;
};

inline ModelGraph build_model(const ModelConfig& config, std::shared_ptr<const data::Schema> schema,
                              std::uint64_t seed) {
  return ModelGraph(config, std::move(schema), seed);
}

struct LossBreakdown {
  double kl = 0.0;
  double recon = 0.0;  // reconstruction or prediction NLL
  double mmd = 0.0;
  double total = 0.0;
  ad::Tensor objective;  // differentiable total
};

namespace detail {

inline void require_finite_term(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + term + " term in the loss");
}

// Mean over groups s >= 1 of MMD(group 0, group s); groups absent from the
// batch are skipped. With binary S this is MMD between the two sub-batches.
inline ad::Tensor batch_mmd(const RandomFeatures& rf, const ad::Tensor& y, const std::vector<int>& s,
                            std::size_t levels) {
  std::vector<std::vector<std::size_t>> groups(levels);
  for (std::size_t i = 0; i < s.size(); ++i) groups[static_cast<std::size_t>(s[i])].push_back(i);
  ad::Tensor acc;
  std::size_t pairs = 0;
  if (groups[0].empty()) return ad::Tensor::scalar(0.0);
  ad::Tensor y0 = ad::take_rows(y, groups[0]);
  for (std::size_t g = 1; g < levels; ++g) {
    if (groups[g].empty()) continue;
    ad::Tensor term = rf.mmd(y0, ad::take_rows(y, groups[g]));
    acc = acc.defined() ? acc + term : term;
    ++pairs;
  }
  if (pairs == 0) return ad::Tensor::scalar(0.0);
  return pairs == 1 ? acc : acc / static_cast<double>(pairs);
}

}  // namespace detail

inline LossBreakdown variational_loss(const ModelGraph& model, const data::Batch& batch, dist::NoiseSource& noise) {
  const ModelConfig& cfg = model.config();
  if (batch.x.cols() != model.schema().encoded_width()) {
    throw SchemaError("variational_loss: batch width " + std::to_string(batch.x.cols()) + " does not match schema " +
                      std::to_string(model.schema().encoded_width()));
  }
  const bool predict = cfg.objective == Objective::kPrediction;
  if (predict && !batch.task.defined()) throw SchemaError("variational_loss: batch has no task labels");
  const ad::Tensor& target = predict ? batch.task : batch.targets;

  dist::GaussianHead head = model.encode(batch.x, batch.s_onehot);
  ad::Tensor kl = ad::mean(dist::gaussian_kl_to_standard(head));
  ad::Tensor recon, mmd;
  for (std::size_t m = 0; m < cfg.mc_samples; ++m) {
    ad::Tensor y = dist::reparam_sample(head, noise);
    ad::Tensor r = ad::mean(dist::nll(model.decode(y, batch.s_onehot), target));
    recon = recon.defined() ? recon + r : r;
    if (cfg.mmd_weight > 0.0) {
      ad::Tensor d = detail::batch_mmd(model.random_features(), y, batch.s, model.schema().sensitive_levels());
      mmd = mmd.defined() ? mmd + d : d;
    }
  }
  if (cfg.mc_samples > 1) {
    recon = recon / static_cast<double>(cfg.mc_samples);
    if (mmd.defined()) mmd = mmd / static_cast<double>(cfg.mc_samples);
  }
  LossBreakdown out;
  out.kl = kl.item();
  out.recon = recon.item();
  out.mmd = mmd.defined() ? mmd.item() : 0.0;
  detail::require_finite_term(out.kl, "kl");
  detail::require_finite_term(out.recon, predict ? "prediction" : "reconstruction");
  detail::require_finite_term(out.mmd, "mmd");
  out.objective = kl + recon * cfg.multiplier;
  if (mmd.defined()) out.objective = out.objective + mmd * cfg.mmd_weight;
  out.total = out.objective.item();
  detail::require_finite_term(out.total, "total");
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints.
//
// <path>       little-endian binary:
//                "VPFCKPT1"  u32 version (1)  u32 count
//                count x { u32 name_len, name bytes, u32 ndim, ndim x u64 dim,
//                          numel x f64 }
// <path>.json  {"config": ..., "schema_hash": "<16 hex>", "seed": n,
//               "schema": ...}

inline constexpr char kCheckpointMagic[8] = {'V', 'P', 'F', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) {
    std::memcpy(&bits, &v, sizeof(T));
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::string& path) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw SchemaError(path + ": truncated checkpoint");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  if constexpr (std::is_floating_point_v<T>) {
    T v;
    std::memcpy(&v, &bits, sizeof(T));
    return v;
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace detail

inline void save_checkpoint(const ModelGraph& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& [name, t] : model.parameters()) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    for (std::size_t d : t.shape()) detail::put_le<std::uint64_t>(out, d);
    for (double v : t.values()) detail::put_le<double>(out, v);
  }
  if (!out) throw IoError("write failed: " + path);
  std::ofstream meta(path + ".json");
  if (!meta) throw IoError("cannot write " + path + ".json");
  json j = {{"config", model.config().to_json()},
            {"schema_hash", data::hex64(model.schema().hash())},
            {"seed", model.seed()},
            {"schema", model.schema().to_json()}};
  meta << j.dump(2) << '\n';
}

// Rebuilds the model from the sidecar and overwrites its parameters. When
// `schema` is given its hash must match the recorded one.
inline ModelGraph load_checkpoint(const std::string& path, std::shared_ptr<const data::Schema> schema = nullptr) {
  const json meta = data::read_json_file(path + ".json");
  if (!schema) schema = std::make_shared<const data::Schema>(data::schema_from_json(meta.at("schema")));
  if (data::hex64(schema->hash()) != meta.at("schema_hash").get<std::string>()) {
    throw SchemaError(path + ": checkpoint was trained on a different schema");
  }
  ModelGraph model(config_from_json(meta.at("config")), schema, meta.at("seed").get<std::uint64_t>());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw SchemaError(path + ": not a checkpoint file");
  }
  if (detail::get_le<std::uint32_t>(in, path) != kCheckpointVersion) {
    throw SchemaError(path + ": unsupported checkpoint version");
  }
  const auto count = detail::get_le<std::uint32_t>(in, path);
  if (count != model.parameters().size()) throw SchemaError(path + ": parameter count mismatch");
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = detail::get_le<std::uint32_t>(in, path);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw SchemaError(path + ": truncated checkpoint");
    ad::Tensor& t = model.parameters().get(name);
    const auto ndim = detail::get_le<std::uint32_t>(in, path);
    ad::Shape shape;
    for (std::uint32_t i = 0; i < ndim; ++i) shape.push_back(detail::get_le<std::uint64_t>(in, path));
    if (shape != t.shape()) throw SchemaError(path + ": shape mismatch for " + name);
    auto values = t.mutable_values();
    for (double& v : values) v = detail::get_le<double>(in, path);
  }
  return model;
}

}  // namespace vpf::model
