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

#pragma once

// Parameter container and forward wiring: encoder -> gate -> identity and
// sex branches -> heads.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "riskgate/autodiff.hpp"
#include "riskgate/branches.hpp"
#include "riskgate/gate.hpp"
#include "riskgate/objectives.hpp"

namespace riskgate {

struct ModelConfig {
  std::size_t feature_bins = 16;    // F
  std::size_t channels = 32;        // C
  std::size_t encoder_layers = 3;
  std::size_t encoder_kernel = 3;
  Activation encoder_activation = Activation::kRelu;
  std::size_t gate_kernel = 5;
  std::size_t attention_dim = 16;
  std::size_t embedding_dim = 16;   // D
  std::size_t num_speakers = 2;
  double aam_scale = 30.0;
  double aam_margin = 0.2;

  void Validate() const;
};

using ParamMap = std::map<std::string, Tensor>;

// Parameter names by role. Everything under "sex." belongs to the training-
// only branch and is never read on the verification path.
namespace param {
std::string EncoderWeight(std::size_t layer);
std::string EncoderBias(std::size_t layer);
inline constexpr const char* kGateKernel = "gate.kernel";
inline constexpr const char* kGateBias = "gate.bias";
inline constexpr const char* kIdAttnWeight = "id.attn.weight";
inline constexpr const char* kIdAttnBias = "id.attn.bias";
inline constexpr const char* kIdAttnContext = "id.attn.context";
inline constexpr const char* kIdEmbedWeight = "id.embed.weight";
inline constexpr const char* kIdEmbedBias = "id.embed.bias";
inline constexpr const char* kSexAttnWeight = "sex.attn.weight";
inline constexpr const char* kSexAttnBias = "sex.attn.bias";
inline constexpr const char* kSexAttnContext = "sex.attn.context";
inline constexpr const char* kSexEmbedWeight = "sex.embed.weight";
inline constexpr const char* kSexEmbedBias = "sex.embed.bias";
inline constexpr const char* kSexHeadWeight = "sex.head.weight";
inline constexpr const char* kSexHeadBias = "sex.head.bias";
inline constexpr const char* kSpeakerHead = "head.speaker";
inline constexpr const char* kAdvHeadWeight = "head.adv.weight";
inline constexpr const char* kAdvHeadBias = "head.adv.bias";
}  // namespace param

// True for parameters that only the sex branch reads.
bool IsSexBranchParam(const std::string& name);

class Model {
 public:
  Model() = default;
  Model(ModelConfig config, ParamMap params);

  // Seeded initialization. The gate starts neutral: kernel near zero and
  // bias zero, so the initial mask is ~0.5 everywhere.
  static Model Initialize(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ParamMap& params() const { return params_; }
  ParamMap& mutable_params() { return params_; }
  const Tensor& param(const std::string& name) const;

  // Rescales every speaker-class row to unit norm.
  void NormalizeSpeakerRows();

 private:
  ModelConfig config_;
  ParamMap params_;
};

// One differentiable view of the parameters for a single forward/backward.
class BoundModel {
 public:
  // With trainable=false every parameter is a constant and no graph is kept.
  explicit BoundModel(const Model& model, bool trainable = true);
  // Wraps caller-owned variables; `config` must outlive this object.
  BoundModel(const ModelConfig& config, std::map<std::string, ad::Var> vars);

  const ModelConfig& config() const { return *config_; }
  const ad::Var& var(const std::string& name) const;
  const std::map<std::string, ad::Var>& vars() const { return vars_; }

  std::vector<ConvLayerVars> EncoderLayers() const;
  AttentionVars IdentityAttention() const;
  AttentionVars SexAttention() const;
  HeadVars Heads() const;

 private:
  const ModelConfig* config_;
  std::map<std::string, ad::Var> vars_;
};

struct ForwardPass {
  ad::Var features;  // U
  GateMask mask;
  RoutedFeatures routed;
  ad::Var z_id;
  ad::Var z_sex;
};

// Full training-time forward over x [B, F, T].
ForwardPass Forward(const BoundModel& model, const ad::Var& x);

// Verification path: encoder, gate and identity branch only.
ad::Var IdentityEmbeddings(const BoundModel& model, const ad::Var& x);

// Gate mask for x [B, F, T] (encoder + gate only).
Tensor GateMaskFor(const Model& model, const Tensor& x);

// Batched verification embeddings without building gradient buffers.
std::vector<Embedding> ComputeIdentityEmbeddings(const Model& model,
                                                 const Tensor& x);

// ---------------------------------------------------------------------------
// Checkpoints (layout documented in docs/formats.md).
// ---------------------------------------------------------------------------
void SaveCheckpoint(const Model& model, const std::filesystem::path& path);
Model LoadCheckpoint(const std::filesystem::path& path);

}  // namespace riskgate
