// Copyright 2026 The riskgate Authors.
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

#include "riskgate/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "riskgate/errors.hpp"

namespace riskgate {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace param {
std::string EncoderWeight(std::size_t layer) {
  return "encoder." + std::to_string(layer) + ".weight";
}
std::string EncoderBias(std::size_t layer) {
  return "encoder." + std::to_string(layer) + ".bias";
}
}  // namespace param

bool IsSexBranchParam(const std::string& name) { return name.rfind("sex.", 0) == 0; }

void ModelConfig::Validate() const {
  if (feature_bins == 0 || channels == 0 || encoder_layers == 0 ||
      attention_dim == 0 || embedding_dim == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (encoder_kernel % 2 == 0 || gate_kernel % 2 == 0) {
    throw std::invalid_argument("convolution widths must be odd");
  }
  if (num_speakers < 1) throw std::invalid_argument("need at least one speaker");
  if (!(aam_scale > 0.0)) throw std::invalid_argument("aam_scale must be positive");
}

Model::Model(ModelConfig config, ParamMap params)
    : config_(std::move(config)), params_(std::move(params)) {}

namespace {

Tensor Gaussian(const Shape& shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(shape);
  for (double& v : t.storage()) v = dist(rng);
  return t;
}

}  // namespace

Model Model::Initialize(const ModelConfig& config, std::uint64_t seed) {
  config.Validate();
  std::mt19937_64 rng(seed);
  ParamMap p;
  const std::size_t c = config.channels;
  std::size_t in_ch = config.feature_bins;
  for (std::size_t l = 0; l < config.encoder_layers; ++l) {
    const double fan_in = static_cast<double>(in_ch * config.encoder_kernel);
    p[param::EncoderWeight(l)] =
        Gaussian({c, in_ch, config.encoder_kernel}, std::sqrt(2.0 / fan_in), rng);
    p[param::EncoderBias(l)] = Tensor({c}, 0.0);
    in_ch = c;
  }
  p[param::kGateKernel] = Gaussian({c, config.gate_kernel}, 0.01, rng);
  p[param::kGateBias] = Tensor({c}, 0.0);

  const std::size_t a = config.attention_dim, d = config.embedding_dim;
  for (const char* prefix : {"id", "sex"}) {
    const std::string pre(prefix);
    p[pre + ".attn.weight"] = Gaussian({a, c}, 1.0 / std::sqrt(double(c)), rng);
    p[pre + ".attn.bias"] = Tensor({a}, 0.0);
    p[pre + ".attn.context"] = Gaussian({a}, 1.0 / std::sqrt(double(a)), rng);
    p[pre + ".embed.weight"] =
        Gaussian({2 * c, d}, 1.0 / std::sqrt(double(2 * c)), rng);
    p[pre + ".embed.bias"] = Tensor({d}, 0.0);
  }
  p[param::kSexHeadWeight] = Gaussian({d, 2}, 1.0 / std::sqrt(double(d)), rng);
  p[param::kSexHeadBias] = Tensor({2}, 0.0);
  p[param::kAdvHeadWeight] = Gaussian({d, 2}, 1.0 / std::sqrt(double(d)), rng);
  p[param::kAdvHeadBias] = Tensor({2}, 0.0);
  p[param::kSpeakerHead] = Gaussian({config.num_speakers, d}, 1.0, rng);

  Model model(config, std::move(p));
  model.NormalizeSpeakerRows();
  return model;
}

const Tensor& Model::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw InputError("missing parameter '" + name + "'");
  return it->second;
}

void Model::NormalizeSpeakerRows() {
  Tensor& w = params_.at(param::kSpeakerHead);
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < cols; ++c) ss += w.at(r, c) * w.at(r, c);
    const double norm = std::sqrt(ss);
    if (norm > 0.0) {
      for (std::size_t c = 0; c < cols; ++c) w.at(r, c) /= norm;
    }
  }
}

BoundModel::BoundModel(const Model& model, bool trainable)
    : config_(&model.config()) {
  for (const auto& [name, tensor] : model.params()) {
    vars_.emplace(name, trainable ? ad::Param(tensor) : ad::Constant(tensor));
  }
}

BoundModel::BoundModel(const ModelConfig& config, std::map<std::string, ad::Var> vars)
    : config_(&config), vars_(std::move(vars)) {}

const ad::Var& BoundModel::var(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw InputError("missing parameter '" + name + "'");
  return it->second;
}

std::vector<ConvLayerVars> BoundModel::EncoderLayers() const {
  std::vector<ConvLayerVars> layers;
  for (std::size_t l = 0; l < config_->encoder_layers; ++l) {
    layers.push_back({var(param::EncoderWeight(l)), var(param::EncoderBias(l)),
                      config_->encoder_activation});
  }
  return layers;
}

AttentionVars BoundModel::IdentityAttention() const {
  return {var(param::kIdAttnWeight), var(param::kIdAttnBias),
          var(param::kIdAttnContext)};
}

AttentionVars BoundModel::SexAttention() const {
  return {var(param::kSexAttnWeight), var(param::kSexAttnBias),
          var(param::kSexAttnContext)};
}

HeadVars BoundModel::Heads() const {
  return {var(param::kSpeakerHead), var(param::kSexHeadWeight),
          var(param::kSexHeadBias), var(param::kAdvHeadWeight),
          var(param::kAdvHeadBias)};
}

namespace {

ad::Var GatedFeatures(const BoundModel& model, const ad::Var& x, GateMask* mask_out,
                      ad::Var* features_out) {
  const auto layers = model.EncoderLayers();
  ad::Var u = Encode(x, layers);
  GateMask mask = ComputeMask(u, model.var(param::kGateKernel),
                              model.var(param::kGateBias));
  if (mask_out) *mask_out = mask;
  if (features_out) *features_out = u;
  return u;
}

}  // namespace

ForwardPass Forward(const BoundModel& model, const ad::Var& x) {
  ForwardPass out;
  GatedFeatures(model, x, &out.mask, &out.features);
  out.routed = Route(out.features, out.mask);
  const PoolResult id_pool = AttentiveStatsPool(out.routed.identity,
                                                model.IdentityAttention());
  out.z_id = Embed(id_pool.pooled, model.var(param::kIdEmbedWeight),
                   model.var(param::kIdEmbedBias));
  const PoolResult sex_pool = AttentiveStatsPool(out.routed.sex, model.SexAttention());
  out.z_sex = Embed(sex_pool.pooled, model.var(param::kSexEmbedWeight),
                    model.var(param::kSexEmbedBias));
  return out;
}

ad::Var IdentityEmbeddings(const BoundModel& model, const ad::Var& x) {
  GateMask mask;
  ad::Var u = GatedFeatures(model, x, &mask, nullptr);
  ad::Var identity = Route(u, mask).identity;
  const PoolResult pool = AttentiveStatsPool(identity, model.IdentityAttention());
  return Embed(pool.pooled, model.var(param::kIdEmbedWeight),
               model.var(param::kIdEmbedBias));
}

namespace {

// Constant-only view holding just the parameters the verification path reads.
Model VerificationView(const Model& model) {
  ParamMap kept;
  for (const auto& [name, tensor] : model.params()) {
    if (!IsSexBranchParam(name)) kept.emplace(name, tensor);
  }
  return Model(model.config(), std::move(kept));
}

}  // namespace

Tensor GateMaskFor(const Model& model, const Tensor& x) {
  const BoundModel bound(model, /*trainable=*/false);
  GateMask mask;
  GatedFeatures(bound, ad::Constant(x), &mask, nullptr);
  return mask.mask.value();
}

std::vector<Embedding> ComputeIdentityEmbeddings(const Model& model,
                                                 const Tensor& x) {
  const Model view = VerificationView(model);
  const BoundModel bound(view, /*trainable=*/false);
  const Tensor z = IdentityEmbeddings(bound, ad::Constant(x)).value();
  const std::size_t batch = z.dim(0), dim = z.dim(1);
  std::vector<Embedding> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    out[b].branch = Branch::kIdentity;
    out[b].values.assign(z.values().begin() + b * dim,
                         z.values().begin() + (b + 1) * dim);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'R', 'G', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void WritePod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void WriteString(std::ostream& out, const std::string& s) {
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T ReadPod(std::istream& in, const std::string& what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw InputError("checkpoint truncated while reading " + what);
  return value;
}

std::string ReadString(std::istream& in, const std::string& what) {
  const auto size = ReadPod<std::uint32_t>(in, what);
  if (size > (1u << 20)) throw InputError("checkpoint string too long: " + what);
  std::string s(size, '\0');
  in.read(s.data(), size);
  if (!in) throw InputError("checkpoint truncated while reading " + what);
  return s;
}

std::map<std::string, std::string> ConfigToMeta(const ModelConfig& c) {
  auto num = [](auto v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
  };
  return {
      {"feature_bins", num(c.feature_bins)},
      {"channels", num(c.channels)},
      {"encoder_layers", num(c.encoder_layers)},
      {"encoder_kernel", num(c.encoder_kernel)},
      {"encoder_activation",
       c.encoder_activation == Activation::kRelu ? "relu" : "linear"},
      {"gate_kernel", num(c.gate_kernel)},
      {"attention_dim", num(c.attention_dim)},
      {"embedding_dim", num(c.embedding_dim)},
      {"num_speakers", num(c.num_speakers)},
      {"aam_scale", num(c.aam_scale)},
      {"aam_margin", num(c.aam_margin)},
  };
}

ModelConfig MetaToConfig(const std::map<std::string, std::string>& meta) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw InputError("checkpoint missing metadata '" + key + "'");
    return it->second;
  };
  auto size = [&](const std::string& key) {
    return static_cast<std::size_t>(std::stoull(get(key)));
  };
  ModelConfig c;
  try {
    c.feature_bins = size("feature_bins");
    c.channels = size("channels");
    c.encoder_layers = size("encoder_layers");
    c.encoder_kernel = size("encoder_kernel");
    c.encoder_activation =
        get("encoder_activation") == "relu" ? Activation::kRelu : Activation::kLinear;
    c.gate_kernel = size("gate_kernel");
    c.attention_dim = size("attention_dim");
    c.embedding_dim = size("embedding_dim");
    c.num_speakers = size("num_speakers");
    c.aam_scale = std::stod(get("aam_scale"));
    c.aam_margin = std::stod(get("aam_margin"));
  } catch (const std::logic_error&) {
    throw InputError("checkpoint metadata is not numeric");
  }
  return c;
}

}  // namespace

void SaveCheckpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  WritePod<std::uint32_t>(out, kCheckpointVersion);
  const auto meta = ConfigToMeta(model.config());
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [key, value] : meta) {
    WriteString(out, key);
    WriteString(out, value);
  }
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& [name, tensor] : model.params()) {
    WriteString(out, name);
    WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t extent : tensor.shape()) {
      WritePod<std::uint64_t>(out, static_cast<std::uint64_t>(extent));
    }
    out.write(reinterpret_cast<const char*>(tensor.values().data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  }
  if (!out) throw InputError("failed writing checkpoint " + path.string());
}

Model LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw InputError(path.string() + " is not a checkpoint (bad magic)");
  }
  const auto version = ReadPod<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  }
  std::map<std::string, std::string> meta;
  const auto n_meta = ReadPod<std::uint32_t>(in, "metadata count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = ReadString(in, "metadata key");
    meta[key] = ReadString(in, "metadata value");
  }
  ParamMap params;
  const auto n_tensors = ReadPod<std::uint32_t>(in, "tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = ReadString(in, "tensor name");
    const auto rank = ReadPod<std::uint32_t>(in, "rank of " + name);
    if (rank == 0 || rank > 8) throw InputError("bad rank for tensor " + name);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(static_cast<std::size_t>(ReadPod<std::uint64_t>(in, "extent")));
    }
    std::vector<double> values(NumElements(shape));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw InputError("checkpoint truncated in tensor " + name);
    try {
      params.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
    } catch (const ShapeError& e) {
      throw InputError(std::string("bad tensor in checkpoint: ") + e.what());
    }
  }
  return Model(MetaToConfig(meta), std::move(params));
}

}  // namespace riskgate
