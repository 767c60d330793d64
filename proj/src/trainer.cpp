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

#include "riskgate/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "riskgate/errors.hpp"
#include "riskgate/score_io.hpp"

namespace riskgate {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void TrainConfig::Validate() const {
  weights.Validate();
  corpus.Validate();
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0,1)");
  }
  if (batch_size < 2 * weights.min_per_group || batch_size < 2) {
    throw std::invalid_argument(
        "batch_size must be at least 2 * min_per_group so both groups fit");
  }
  if (steps == 0) throw std::invalid_argument("steps must be >= 1");
  if (eval_interval == 0) throw std::invalid_argument("eval_interval must be >= 1");
}

namespace {

struct ConfigKey {
  const char* name;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

double ParseReal(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("not a real number: '" + s + "'");
  }
  return v;
}

std::uint64_t ParseCount(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a nonnegative integer: '" + s + "'");
  }
  return v;
}

template <typename Field>
ConfigKey RealKey(const char* name, Field field) {
  return {name,
          [field](TrainConfig& c, const std::string& v) { field(c) = ParseReal(v); },
          [field](const TrainConfig& c) {
            return FormatDouble(field(const_cast<TrainConfig&>(c)));
          }};
}

template <typename Field>
ConfigKey CountKey(const char* name, Field field) {
  return {name,
          [field](TrainConfig& c, const std::string& v) {
            field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(
                ParseCount(v));
          },
          [field](const TrainConfig& c) {
            return std::to_string(field(const_cast<TrainConfig&>(c)));
          }};
}

#define RG_REAL(key, expr) RealKey(key, [](TrainConfig& c) -> double& { return expr; })
#define RG_COUNT(key, expr) \
  CountKey(key, [](TrainConfig& c) -> auto& { return expr; })

const std::vector<ConfigKey>& Keys() {
  static const std::vector<ConfigKey> keys = {
      RG_COUNT("seed", c.seed),
      RG_COUNT("steps", c.steps),
      RG_COUNT("batch_size", c.batch_size),
      RG_REAL("learning_rate", c.learning_rate),
      RG_REAL("momentum", c.momentum),
      RG_COUNT("eval_interval", c.eval_interval),
      RG_REAL("lambda_sex", c.weights.lambda_sex),
      RG_REAL("lambda_adv", c.weights.lambda_adv),
      RG_REAL("lambda_decor", c.weights.lambda_decor),
      RG_REAL("lambda_cap", c.weights.lambda_cap),
      RG_REAL("lambda_sat", c.weights.lambda_sat),
      RG_REAL("lambda_rex", c.weights.lambda_rex),
      RG_REAL("gamma", c.weights.gamma),
      RG_REAL("rho_id", c.weights.rho_id),
      RG_COUNT("min_per_group", c.weights.min_per_group),
      RG_COUNT("channels", c.model.channels),
      RG_COUNT("encoder_layers", c.model.encoder_layers),
      RG_COUNT("encoder_kernel", c.model.encoder_kernel),
      RG_COUNT("gate_kernel", c.model.gate_kernel),
      RG_COUNT("attention_dim", c.model.attention_dim),
      RG_COUNT("embedding_dim", c.model.embedding_dim),
      RG_REAL("aam_scale", c.model.aam_scale),
      RG_REAL("aam_margin", c.model.aam_margin),
      RG_COUNT("corpus_speakers_per_group", c.corpus.speakers_per_group),
      RG_COUNT("corpus_train_utterances", c.corpus.train_utterances_per_speaker),
      RG_COUNT("corpus_eval_utterances", c.corpus.eval_utterances_per_speaker),
      RG_COUNT("corpus_frames", c.corpus.frames),
      RG_COUNT("corpus_feature_bins", c.corpus.feature_bins),
      RG_REAL("corpus_kappa", c.corpus.kappa),
      RG_REAL("corpus_identity_scale", c.corpus.identity_scale),
      RG_REAL("corpus_f_identity_ratio", c.corpus.f_identity_ratio),
      RG_REAL("corpus_noise_scale", c.corpus.noise_scale),
      RG_COUNT("corpus_seed", c.corpus.seed),
      RG_COUNT("corpus_mated_trials", c.corpus.mated_trials_per_speaker),
      RG_COUNT("corpus_same_group_nonmated", c.corpus.same_group_nonmated_per_speaker),
      RG_COUNT("corpus_cross_group_nonmated", c.corpus.cross_group_nonmated_per_speaker),
  };
  return keys;
}

#undef RG_REAL
#undef RG_COUNT

std::string TrimCopy(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::vector<std::string> TrainConfigKeys() {
  std::vector<std::string> out;
  for (const ConfigKey& k : Keys()) out.emplace_back(k.name);
  return out;
}

TrainConfig ParseTrainConfig(std::istream& in, const std::string& source,
                             TrainConfig base) {
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = TrimCopy(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw InputError(where + ": expected 'key = value'");
    const std::string key = TrimCopy(line.substr(0, eq));
    const std::string value = TrimCopy(line.substr(eq + 1));
    const auto& keys = Keys();
    auto it = std::find_if(keys.begin(), keys.end(),
                           [&](const ConfigKey& k) { return key == k.name; });
    if (it == keys.end()) throw InputError(where + ": unknown config key '" + key + "'");
    try {
      it->set(base, value);
    } catch (const std::invalid_argument& e) {
      throw InputError(where + ": bad value for '" + key + "': " + e.what());
    }
  }
  try {
    base.Validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(source + ": " + e.what());
  }
  return base;
}

TrainConfig ReadTrainConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  return ParseTrainConfig(in, path.string());
}

void WriteTrainConfig(std::ostream& out, const TrainConfig& config) {
  for (const ConfigKey& k : Keys()) out << k.name << " = " << k.get(config) << '\n';
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

BatchStream::BatchStream(const std::vector<Utterance>& utterances,
                         std::size_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), rng_(seed) {
  if (utterances.empty()) throw std::invalid_argument("batch stream: empty corpus");
  if (batch_size == 0) throw std::invalid_argument("batch stream: batch_size 0");
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    members_[GroupIndex(utterances[i].group)].push_back(i);
  }
  single_group_ = members_[0].empty() || members_[1].empty();
  if (single_group_) {
    std::cerr << "warning: training corpus has a single proxy group; the "
                 "risk-equalization penalty will stay disabled\n";
  }
}

std::size_t BatchStream::Draw(std::size_t group) {
  auto& order = order_[group];
  if (cursor_[group] == order.size()) {
    order = members_[group];
    std::shuffle(order.begin(), order.end(), rng_);
    cursor_[group] = 0;
  }
  return order[cursor_[group]++];
}

std::vector<std::size_t> BatchStream::Next() {
  std::vector<std::size_t> batch;
  batch.reserve(batch_size_);
  if (single_group_) {
    const std::size_t g = members_[0].empty() ? 1 : 0;
    for (std::size_t i = 0; i < batch_size_; ++i) batch.push_back(Draw(g));
    return batch;
  }
  const std::size_t from_m = (batch_size_ + 1) / 2;
  for (std::size_t i = 0; i < from_m; ++i) batch.push_back(Draw(0));
  for (std::size_t i = from_m; i < batch_size_; ++i) batch.push_back(Draw(1));
  return batch;
}

// ---------------------------------------------------------------------------
// Logging
// ---------------------------------------------------------------------------

namespace {

void AddRisks(nlohmann::ordered_json& j, const RiskStats& r) {
  j["risk_m"] = r.group_count[0] ? nlohmann::ordered_json(r.group_risk[0]) : nullptr;
  j["risk_f"] = r.group_count[1] ? nlohmann::ordered_json(r.group_risk[1]) : nullptr;
}

}  // namespace

std::string StepRecordJson(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["type"] = "step";
  j["step"] = r.step;
  j["l_spk"] = r.loss.spk;
  j["l_sex"] = r.loss.sex;
  j["l_adv"] = r.loss.adv;
  j["l_decor"] = r.loss.decor;
  j["l_cap"] = r.loss.cap;
  j["l_sat"] = r.loss.sat;
  j["l_rex"] = r.loss.rex;
  j["total"] = r.loss.total;
  j["rex_applied"] = r.rex.applicable;
  return j.dump();
}

std::string EvalRecordJson(const EvalRecord& r) {
  nlohmann::ordered_json j;
  j["type"] = "eval";
  j["step"] = r.step;
  j["eer"] = r.report.eer.eer;
  j["min_dcf"] = r.report.min_dcf.normalized;
  j["tau"] = r.report.operating_point.threshold;
  if (r.report.garbe) {
    j["garbe"] = r.report.garbe->garbe;
  } else {
    j["garbe"] = nullptr;
  }
  AddRisks(j, r.risks);
  if (r.risks.group_count[0] && r.risks.group_count[1]) {
    j["risk_gap"] = std::abs(r.risks.group_risk[0] - r.risks.group_risk[1]);
  } else {
    j["risk_gap"] = nullptr;
  }
  return j.dump();
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

EvalResult Evaluate(const Model& model, const Corpus& corpus,
                    const FairnessConfig& fairness) {
  std::vector<const Utterance*> utts;
  for (const Utterance& u : corpus.eval) utts.push_back(&u);
  const Tensor x = StackFeatures(utts);
  const std::vector<Embedding> emb = ComputeIdentityEmbeddings(model, x);

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < utts.size(); ++i) index.emplace(utts[i]->id, i);

  EvalResult out;
  out.scored_trials = corpus.trials;
  for (TrialRecord& t : out.scored_trials) {
    const auto a = index.find(t.enroll_id);
    const auto b = index.find(t.test_id);
    if (a == index.end() || b == index.end()) {
      throw InputError("trial references unknown utterance " + t.enroll_id + "/" +
                       t.test_id);
    }
    t.score = CosineScore(emb[a->second], emb[b->second]);
  }
  out.report = ComputeFairnessReport(out.scored_trials, fairness);

  // Held-out closed-set speaker risk per proxy group.
  std::vector<std::size_t> speakers;
  std::vector<Group> groups;
  Tensor z({utts.size(), emb.front().values.size()});
  for (std::size_t i = 0; i < utts.size(); ++i) {
    speakers.push_back(utts[i]->speaker);
    groups.push_back(utts[i]->group);
    std::copy(emb[i].values.begin(), emb[i].values.end(),
              z.storage().begin() + static_cast<std::ptrdiff_t>(i * z.dim(1)));
  }
  const SpeakerLoss spk =
      SpkLoss(ad::Constant(z), speakers, ad::Constant(model.param(param::kSpeakerHead)),
              model.config().aam_scale, model.config().aam_margin);
  out.risks = ComputeRiskStats(spk.per_sample.value().values(), groups, 1);
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

DivergenceError::DivergenceError(std::size_t step, const std::string& detail)
    : NumericalError("training diverged at step " + std::to_string(step) + ": " +
                     detail),
      step_(step) {}

namespace {

void WriteReport(const FairnessReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << ReportToJson(report).dump(2) << '\n';
}

std::string CheckpointName(std::size_t step) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "checkpoint_step%06zu.ckpt", step);
  return buf;
}

}  // namespace

TrainResult Train(const TrainConfig& config, const Corpus& corpus,
                  const TrainOptions& options) {
  config.Validate();
  ModelConfig model_config = config.model;
  model_config.feature_bins = corpus.spec.feature_bins;
  model_config.num_speakers = corpus.num_speakers;

  std::ofstream log_file;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    log_file.open(*options.out_dir / "run_log.jsonl", std::ios::trunc);
    if (!log_file) throw InputError("cannot write run log in " + options.out_dir->string());
  }
  auto emit = [&](const std::string& line) {
    if (log_file.is_open()) log_file << line << '\n';
    if (options.log_stream) *options.log_stream << line << '\n';
  };

  TrainResult result;
  result.model = Model::Initialize(model_config, config.seed);
  Model& model = result.model;
  BatchStream batches(corpus.train, config.batch_size, config.seed ^ 0x9e3779b97f4a7c15ULL);

  std::map<std::string, Tensor> velocity;
  for (const auto& [name, t] : model.params()) velocity.emplace(name, Tensor(t.shape(), 0.0));

  auto evaluate = [&](std::size_t step) {
    EvalResult ev = Evaluate(model, corpus);
    EvalRecord rec{step, ev.report, ev.risks};
    emit(EvalRecordJson(rec));
    result.log.evals.push_back(std::move(rec));
    return ev;
  };

  for (std::size_t step = 1; step <= config.steps; ++step) {
    const std::vector<std::size_t> idx = batches.Next();
    std::vector<const Utterance*> utts;
    std::vector<std::size_t> speakers;
    std::vector<Group> groups;
    for (std::size_t i : idx) {
      utts.push_back(&corpus.train[i]);
      speakers.push_back(corpus.train[i].speaker);
      groups.push_back(corpus.train[i].group);
    }

    StepRecord rec;
    rec.step = step;
    try {
      const BoundModel bound(model);
      const ForwardPass fwd = Forward(bound, ad::Constant(StackFeatures(utts)));
      ObjectiveInputs in;
      in.mask = fwd.mask;
      in.z_id = fwd.z_id;
      in.z_sex = fwd.z_sex;
      in.speakers = speakers;
      in.groups = groups;
      in.heads = bound.Heads();
      in.aam_scale = model_config.aam_scale;
      in.aam_margin = model_config.aam_margin;
      const TotalLoss loss = ComputeTotalLoss(in, config.weights);
      if (!std::isfinite(loss.breakdown.total)) {
        throw DivergenceError(step, "total loss is not finite");
      }
      ad::Backward(loss.total);
      rec.loss = loss.breakdown;
      rec.rex = loss.rex;

      for (auto& [name, value] : model.mutable_params()) {
        const Tensor& g = bound.var(name).grad();
        Tensor& v = velocity.at(name);
        for (std::size_t i = 0; i < value.size(); ++i) {
          v[i] = config.momentum * v[i] + g[i];
          value[i] -= config.learning_rate * v[i];
        }
        if (!value.AllFinite()) throw DivergenceError(step, "parameter " + name + " not finite");
      }
      model.NormalizeSpeakerRows();
    } catch (const DivergenceError&) {
      throw;
    } catch (const NumericalError& e) {
      throw DivergenceError(step, e.what());
    }

    emit(StepRecordJson(rec));
    result.log.steps.push_back(std::move(rec));

    if (step % config.eval_interval == 0 && step != config.steps) {
      evaluate(step);
      if (options.out_dir) SaveCheckpoint(model, *options.out_dir / CheckpointName(step));
    }
  }

  result.final_eval = evaluate(config.steps);
  if (options.out_dir) {
    SaveCheckpoint(model, *options.out_dir / CheckpointName(config.steps));
    SaveCheckpoint(model, *options.out_dir / "checkpoint_final.ckpt");
    WriteReport(result.final_eval.report, *options.out_dir / "final_report.json");
  }
  return result;
}

TrainResult Train(const TrainConfig& config, const TrainOptions& options) {
  return Train(config, GenerateCorpus(config.corpus), options);
}

}  // namespace riskgate
