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

#include "riskgate/synthdata.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "riskgate/errors.hpp"
#include "riskgate/score_io.hpp"

namespace riskgate {

namespace {

std::string SpeakerId(std::size_t speaker) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%04zu", speaker);
  return buf;
}

std::string UtteranceId(std::size_t speaker, const char* split, std::size_t index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "spk%04zu-%s%03zu", speaker, split, index);
  return buf;
}

std::size_t Uniform(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

void CorpusSpec::Validate() const {
  if (speakers_per_group < 1 || train_utterances_per_speaker < 1 ||
      eval_utterances_per_speaker < 1 || frames < 1 || feature_bins < 1) {
    throw std::invalid_argument("corpus counts must be >= 1");
  }
  if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be >= 0");
  if (!(identity_scale >= 0.0) || !(noise_scale >= 0.0) || !(f_identity_ratio >= 0.0)) {
    throw std::invalid_argument("corpus scales must be >= 0");
  }
}

Corpus GenerateCorpus(const CorpusSpec& spec) {
  spec.Validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t f_bins = spec.feature_bins, frames = spec.frames;

  std::vector<double> offset(f_bins);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : offset) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
  } while (norm == 0.0);
  for (double& v : offset) v /= norm;

  Corpus corpus;
  corpus.spec = spec;
  corpus.num_speakers = 2 * spec.speakers_per_group;
  std::vector<std::vector<double>> prototypes(corpus.num_speakers,
                                              std::vector<double>(f_bins));
  // Speakers [0, S) are group M, [S, 2S) group F.
  auto group_of = [&](std::size_t s) {
    return s < spec.speakers_per_group ? Group::kM : Group::kF;
  };
  for (std::size_t s = 0; s < corpus.num_speakers; ++s) {
    const double scale = spec.identity_scale *
                         (group_of(s) == Group::kF ? spec.f_identity_ratio : 1.0);
    for (double& v : prototypes[s]) v = scale * normal(rng);
  }

  auto make_utterance = [&](std::size_t s, const char* split, std::size_t index) {
    Utterance u;
    u.id = UtteranceId(s, split, index);
    u.speaker = s;
    u.group = group_of(s);
    const double sign = u.group == Group::kM ? 0.5 : -0.5;
    u.features = Tensor({f_bins, frames});
    for (std::size_t f = 0; f < f_bins; ++f) {
      const double mean = prototypes[s][f] + sign * spec.kappa * offset[f];
      for (std::size_t t = 0; t < frames; ++t) {
        u.features.at(f, t) = mean + spec.noise_scale * normal(rng);
      }
    }
    return u;
  };

  for (std::size_t s = 0; s < corpus.num_speakers; ++s) {
    for (std::size_t i = 0; i < spec.train_utterances_per_speaker; ++i) {
      corpus.train.push_back(make_utterance(s, "tr", i));
    }
    for (std::size_t i = 0; i < spec.eval_utterances_per_speaker; ++i) {
      corpus.eval.push_back(make_utterance(s, "ev", i));
    }
  }

  const std::size_t per_spk = spec.eval_utterances_per_speaker;
  auto eval_utt = [&](std::size_t s, std::size_t i) -> const Utterance& {
    return corpus.eval[s * per_spk + i];
  };
  auto add_trial = [&](const Utterance& a, const Utterance& b, bool mated) {
    TrialRecord t;
    t.enroll_id = a.id;
    t.test_id = b.id;
    t.mated = mated;
    t.group_enroll = a.group;
    t.group_test = b.group;
    corpus.trials.push_back(std::move(t));
  };

  const std::size_t per_group = spec.speakers_per_group;
  for (std::size_t s = 0; s < corpus.num_speakers; ++s) {
    const std::size_t group_base = group_of(s) == Group::kM ? 0 : per_group;
    const std::size_t other_base = group_of(s) == Group::kM ? per_group : 0;
    if (per_spk >= 2) {
      for (std::size_t k = 0; k < spec.mated_trials_per_speaker; ++k) {
        const std::size_t i = Uniform(rng, per_spk);
        std::size_t j = Uniform(rng, per_spk - 1);
        if (j >= i) ++j;
        add_trial(eval_utt(s, i), eval_utt(s, j), true);
      }
    }
    if (per_group >= 2) {
      for (std::size_t k = 0; k < spec.same_group_nonmated_per_speaker; ++k) {
        std::size_t other = group_base + Uniform(rng, per_group - 1);
        if (other >= s) ++other;
        add_trial(eval_utt(s, Uniform(rng, per_spk)),
                  eval_utt(other, Uniform(rng, per_spk)), false);
      }
    }
    for (std::size_t k = 0; k < spec.cross_group_nonmated_per_speaker; ++k) {
      const std::size_t other = other_base + Uniform(rng, per_group);
      add_trial(eval_utt(s, Uniform(rng, per_spk)),
                eval_utt(other, Uniform(rng, per_spk)), false);
    }
  }
  return corpus;
}

double ShortcutSeverity(const Corpus& corpus) {
  const std::size_t f_bins = corpus.spec.feature_bins;
  struct Sample {
    std::vector<double> mean;
    Group group;
    std::size_t fold;
  };
  std::vector<Sample> samples;
  const std::size_t per_group = corpus.spec.speakers_per_group;
  for (const auto* split : {&corpus.train, &corpus.eval}) {
    for (const Utterance& u : *split) {
      Sample s;
      s.group = u.group;
      s.fold = (u.speaker % per_group) % 2;
      s.mean.assign(f_bins, 0.0);
      const std::size_t frames = u.features.dim(1);
      for (std::size_t f = 0; f < f_bins; ++f) {
        for (std::size_t t = 0; t < frames; ++t) s.mean[f] += u.features.at(f, t);
        s.mean[f] /= static_cast<double>(frames);
      }
      samples.push_back(std::move(s));
    }
  }

  double accuracy_sum = 0.0;
  int folds_scored = 0;
  for (std::size_t fit_fold = 0; fit_fold < 2; ++fit_fold) {
    std::vector<double> centroid[2] = {std::vector<double>(f_bins, 0.0),
                                       std::vector<double>(f_bins, 0.0)};
    std::size_t count[2] = {0, 0};
    for (const Sample& s : samples) {
      if (s.fold != fit_fold) continue;
      const std::size_t g = GroupIndex(s.group);
      for (std::size_t f = 0; f < f_bins; ++f) centroid[g][f] += s.mean[f];
      ++count[g];
    }
    if (count[0] == 0 || count[1] == 0) continue;
    for (std::size_t g = 0; g < 2; ++g) {
      for (double& v : centroid[g]) v /= static_cast<double>(count[g]);
    }
    std::size_t correct = 0, total = 0;
    for (const Sample& s : samples) {
      if (s.fold == fit_fold) continue;
      double d[2] = {0.0, 0.0};
      for (std::size_t g = 0; g < 2; ++g) {
        for (std::size_t f = 0; f < f_bins; ++f) {
          const double diff = s.mean[f] - centroid[g][f];
          d[g] += diff * diff;
        }
      }
      const Group predicted = d[0] <= d[1] ? Group::kM : Group::kF;
      correct += predicted == s.group ? 1 : 0;
      ++total;
    }
    if (total == 0) continue;
    accuracy_sum += static_cast<double>(correct) / static_cast<double>(total);
    ++folds_scored;
  }
  // With a single speaker per group there is no disjoint split to score.
  return folds_scored == 0 ? 0.5 : accuracy_sum / folds_scored;
}

Tensor StackFeatures(const std::vector<const Utterance*>& utterances) {
  if (utterances.empty()) throw std::invalid_argument("empty batch");
  const Shape& s = utterances.front()->features.shape();
  Tensor batch({utterances.size(), s[0], s[1]});
  const std::size_t stride = s[0] * s[1];
  for (std::size_t b = 0; b < utterances.size(); ++b) {
    RequireSameShape(utterances[b]->features, utterances.front()->features,
                     "stack_features");
    std::copy(utterances[b]->features.values().begin(),
              utterances[b]->features.values().end(),
              batch.storage().begin() + static_cast<std::ptrdiff_t>(b * stride));
  }
  return batch;
}

namespace {

constexpr char kFeatureMagic[8] = {'R', 'G', 'F', 'E', 'A', 'T', '0', '1'};
static_assert(std::endian::native == std::endian::little);

}  // namespace

void WriteFeatureFile(const std::filesystem::path& path, const Tensor& features) {
  RequireRank(features, 2, "feature file");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  const std::uint64_t dims[2] = {features.dim(0), features.dim(1)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(features.values().data()),
            static_cast<std::streamsize>(features.size() * sizeof(double)));
  if (!out) throw InputError("failed writing " + path.string());
}

Tensor ReadFeatureFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open feature file " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0) {
    throw InputError(path.string() + " is not a feature file (bad magic)");
  }
  std::uint64_t dims[2];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || dims[0] == 0 || dims[1] == 0 || dims[0] > (1u << 16) ||
      dims[1] > (1u << 24)) {
    throw InputError(path.string() + ": bad feature header");
  }
  std::vector<double> values(dims[0] * dims[1]);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw InputError(path.string() + ": truncated feature data");
  Tensor t({dims[0], dims[1]}, std::move(values));
  if (!t.AllFinite()) throw InputError(path.string() + ": non-finite features");
  return t;
}

void ExportCorpus(const Corpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  for (const auto& [name, split] :
       {std::pair{"train_manifest.tsv", &corpus.train},
        std::pair{"eval_manifest.tsv", &corpus.eval}}) {
    std::ofstream manifest(dir / name);
    if (!manifest) throw InputError("cannot write manifest in " + dir.string());
    manifest << "utt_id\tspeaker_id\tgroup\tpath\n";
    for (const Utterance& u : *split) {
      const fs::path rel = fs::path("features") / (u.id + ".bin");
      WriteFeatureFile(dir / rel, u.features);
      manifest << u.id << '\t' << SpeakerId(u.speaker) << '\t' << GroupName(u.group)
               << '\t' << rel.generic_string() << '\n';
    }
  }
  std::ofstream trials(dir / "trials.csv");
  if (!trials) throw InputError("cannot write trial list in " + dir.string());
  WriteTrialList(trials, corpus.trials);
}

}  // namespace riskgate
