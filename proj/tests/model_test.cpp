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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "riskgate/errors.hpp"
#include "riskgate/synthdata.hpp"

namespace riskgate {
namespace {

namespace fs = std::filesystem;

ModelConfig SmallConfig() {
  ModelConfig c;
  c.feature_bins = 6;
  c.channels = 8;
  c.encoder_layers = 2;
  c.attention_dim = 4;
  c.embedding_dim = 5;
  c.num_speakers = 4;
  return c;
}

Tensor RandomBatch(std::size_t b, std::size_t f, std::size_t t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Tensor x({b, f, t});
  for (double& v : x.storage()) v = normal(rng);
  return x;
}

TEST(ModelTest, InitializationIsSeeded) {
  const Model a = Model::Initialize(SmallConfig(), 5);
  const Model b = Model::Initialize(SmallConfig(), 5);
  const Model c = Model::Initialize(SmallConfig(), 6);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_NE(a.params(), c.params());
}

TEST(ModelTest, FreshGateIsNeutral) {
  const Model m = Model::Initialize(SmallConfig(), 1);
  const Tensor mask = GateMaskFor(m, RandomBatch(3, 6, 10, 2));
  EXPECT_EQ(mask.shape(), (Shape{3, 8, 10}));
  for (double a : mask.values()) EXPECT_NEAR(a, 0.5, 0.05);
}

TEST(ModelTest, ForwardShapes) {
  const Model m = Model::Initialize(SmallConfig(), 1);
  const BoundModel bound(m);
  const ForwardPass fp = Forward(bound, ad::Constant(RandomBatch(3, 6, 10, 2)));
  EXPECT_EQ(fp.z_id.value().shape(), (Shape{3, 5}));
  EXPECT_EQ(fp.z_sex.value().shape(), (Shape{3, 5}));
  EXPECT_EQ(fp.mask.mask.value().shape(), (Shape{3, 8, 10}));
}

TEST(ModelTest, VerificationPathIgnoresSexBranch) {
  Model m = Model::Initialize(SmallConfig(), 1);
  const Tensor x = RandomBatch(4, 6, 10, 3);
  const auto before = ComputeIdentityEmbeddings(m, x);
  std::size_t touched = 0;
  for (auto& [name, tensor] : m.mutable_params()) {
    if (!IsSexBranchParam(name)) continue;
    for (double& v : tensor.storage()) v = v * 3.0 + 1.0;
    ++touched;
  }
  EXPECT_GE(touched, 7u);
  const auto after = ComputeIdentityEmbeddings(m, x);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i].values, after[i].values);
  }
}

TEST(ModelTest, BatchedEmbeddingsMatchGraphPath) {
  const Model m = Model::Initialize(SmallConfig(), 1);
  const Tensor x = RandomBatch(2, 6, 10, 4);
  const auto fast = ComputeIdentityEmbeddings(m, x);
  const Tensor graph = IdentityEmbeddings(BoundModel(m), ad::Constant(x)).value();
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t d = 0; d < 5; ++d) EXPECT_EQ(fast[b].values[d], graph.at(b, d));
  }
}

TEST(ModelTest, SpeakerRowsNormalized) {
  Model m = Model::Initialize(SmallConfig(), 1);
  m.NormalizeSpeakerRows();
  const Tensor& w = m.param(param::kSpeakerHead);
  for (std::size_t r = 0; r < w.dim(0); ++r) {
    double norm = 0.0;
    for (std::size_t c = 0; c < w.dim(1); ++c) norm += w.at(r, c) * w.at(r, c);
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-12);
  }
}

TEST(CheckpointTest, RoundTripIsBitwise) {
  const fs::path path = fs::temp_directory_path() / "riskgate_model_test.ckpt";
  const Model m = Model::Initialize(SmallConfig(), 9);
  SaveCheckpoint(m, path);
  const Model loaded = LoadCheckpoint(path);
  EXPECT_EQ(loaded.params(), m.params());
  EXPECT_EQ(loaded.config().channels, 8u);
  EXPECT_EQ(loaded.config().num_speakers, 4u);
  EXPECT_EQ(loaded.config().aam_margin, m.config().aam_margin);
  fs::remove(path);
}

TEST(CheckpointTest, TruncatedFileIsInputError) {
  const fs::path path = fs::temp_directory_path() / "riskgate_model_trunc.ckpt";
  SaveCheckpoint(Model::Initialize(SmallConfig(), 9), path);
  fs::resize_file(path, fs::file_size(path) / 2);
  EXPECT_THROW(LoadCheckpoint(path), InputError);
  fs::remove(path);
  EXPECT_THROW(LoadCheckpoint(path), InputError);
}

TEST(ModelConfigTest, RejectsDegenerateShapes) {
  ModelConfig c = SmallConfig();
  c.channels = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = SmallConfig();
  c.gate_kernel = 4;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
}

}  // namespace
}  // namespace riskgate
