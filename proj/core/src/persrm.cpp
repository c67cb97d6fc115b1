#include "pad/persrm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json_util.hpp"
#include "pad/error.hpp"
#include "pad/rng.hpp"

namespace pad {

using detail::json;

PreferenceSchema::PreferenceSchema(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i)
    for (std::size_t j = i + 1; j < names_.size(); ++j)
      if (names_[i] == names_[j]) throw Error(ErrorCode::kBadArgument, "duplicate preference name " + names_[i]);
}

std::size_t PreferenceSchema::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(ErrorCode::kUnknownDimension, name);
  return static_cast<std::size_t>(it - names_.begin());
}

PreferenceDescriptor PreferenceDescriptor::from_names(const PreferenceSchema& schema,
                                                      std::span<const std::string> active) {
  PreferenceDescriptor p = none(schema.size());
  for (const std::string& name : active) p.intensity[schema.index_of(name)] = 1.0;
  return p;
}

bool PreferenceDescriptor::empty() const {
  return std::all_of(intensity.begin(), intensity.end(), [](double v) { return v == 0.0; });
}

std::vector<std::size_t> PreferenceDescriptor::active() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < intensity.size(); ++i)
    if (intensity[i] != 0.0) out.push_back(i);
  return out;
}

PreferenceHead PreferenceHead::identity(std::size_t m) {
  PreferenceHead h{Matrix(m, m), true};
  for (std::size_t i = 0; i < m; ++i) h.matrix(i, i) = 1.0;
  return h;
}

PersRM PersRM::from_reference(const FactoredLM& reference, std::size_t pref_dims, double beta) {
  PersRM model{reference.trainable_copy(), clone_frozen(reference),
               PreferenceHead::zeros(pref_dims, reference.dims()), beta, TrainingStage::kFresh};
  validate(model);
  return model;
}

void validate(const PersRM& model) {
  if (model.backbone.dims() != model.reference.dims() || model.head.output_dims() != model.backbone.dims())
    throw Error(ErrorCode::kDimMismatch, "backbone, reference and head must agree on d");
  if (model.backbone.order() != model.reference.order() || !(model.backbone.vocab() == model.reference.vocab()))
    throw Error(ErrorCode::kShapeMismatch, "backbone and reference must share vocabulary and order");
  if (!model.reference.frozen()) throw Error(ErrorCode::kBadArgument, "reference must be frozen");
  if (!(model.beta > 0.0) || !std::isfinite(model.beta)) throw Error(ErrorCode::kBadArgument, "beta must be > 0");
}

PreferenceWeights encode_preference(const PreferenceHead& head, const PreferenceDescriptor& p) {
  if (p.size() != head.input_dims())
    throw Error(ErrorCode::kDimMismatch, "descriptor has " + std::to_string(p.size()) + " dims, head expects " +
                                             std::to_string(head.input_dims()));
  PreferenceWeights out{std::vector<double>(head.output_dims(), 0.0)};
  for (std::size_t i = 0; i < head.input_dims(); ++i) {
    if (p.intensity[i] == 0.0) continue;
    for (std::size_t j = 0; j < head.output_dims(); ++j) out.w[j] += head.matrix(i, j) * p.intensity[i];
  }
  return out;
}

Matrix log_ratio_table(const PersRM& model, const State& s) {
  const LogProbMatrix theta = factored_logprobs(model.backbone, s);
  const LogProbMatrix ref = factored_logprobs(model.reference, s);
  Matrix out = theta.values;
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] -= ref.values.data()[i];
  return out;
}

namespace {

void check_token(const PersRM& model, TokenId a) {
  if (!model.backbone.vocab().contains(a)) throw Error(ErrorCode::kBadToken, "token " + std::to_string(a));
}

void check_weights(const PersRM& model, const PreferenceWeights& w) {
  if (w.size() != model.dims()) throw Error(ErrorCode::kDimMismatch, "weights do not match d");
}

// Backbone and reference log-probs per context, computed once per pass.
class LogProbCache {
 public:
  explicit LogProbCache(const PersRM& model) : model_(model) {}

  struct Entry {
    LogProbMatrix theta;
    LogProbMatrix ref;
  };

  // The map node owns the key, so references stay valid for the cache's lifetime.
  const std::pair<const Context, Entry>& at(const Context& ctx) {
    auto it = entries_.find(ctx);
    if (it == entries_.end())
      it = entries_.emplace(ctx, Entry{model_.backbone.logprobs(ctx), model_.reference.logprobs(ctx)}).first;
    return *it;
  }

 private:
  const PersRM& model_;
  std::map<Context, Entry> entries_;
};

struct StepCache {
  const Context* ctx;
  TokenId token;
  const Matrix* theta_logprob;  // d x |V|, owned by the LogProbCache
};

}  // namespace

FeatureVector token_feature(const PersRM& model, const State& s, TokenId a) {
  check_token(model, a);
  const Matrix ratio = log_ratio_table(model, s);
  FeatureVector out{std::vector<double>(model.dims())};
  for (std::size_t j = 0; j < model.dims(); ++j) out.phi[j] = model.beta * ratio(j, a);
  return out;
}

double token_reward(const PersRM& model, const PreferenceWeights& w, const State& s, TokenId a) {
  check_weights(model, w);
  return dot(w.w, token_feature(model, s, a).phi);
}

FeatureVector sequence_feature_score(const PersRM& model, const TokenSeq& prompt, const TokenSeq& response) {
  if (response.empty()) throw Error(ErrorCode::kBadArgument, "sequence score of an empty response");
  const std::size_t d = model.dims();
  FeatureVector out{std::vector<double>(d, 0.0)};
  const Vocab& vocab = model.backbone.vocab();
  for (std::size_t t = 0; t < response.size(); ++t) {
    check_token(model, response[t]);
    const Context ctx = context_of(vocab, model.backbone.order(), prompt, response, t);
    const LogProbMatrix theta = model.backbone.logprobs(ctx);
    const LogProbMatrix ref = model.reference.logprobs(ctx);
    for (std::size_t j = 0; j < d; ++j)
      out.phi[j] += model.beta * (theta.values(j, response[t]) - ref.values(j, response[t]));
  }
  return out;
}

std::vector<double> implicit_q_offsets(const PersRM& model, const PreferenceWeights& w, const TokenSeq& prompt,
                                       const TokenSeq& response) {
  check_weights(model, w);
  std::vector<double> out;
  out.reserve(response.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < response.size(); ++t) {
    acc += token_reward(model, w, prefix_state(prompt, response, t), response[t]);
    out.push_back(acc);
  }
  return out;
}

double bt_probability(double r_chosen, double r_rejected) { return sigmoid(r_chosen - r_rejected); }

namespace {

PreferenceWeights pair_weights(const PersRM& model, const PreferencePair& pair, WeightSource source) {
  switch (source) {
    case WeightSource::kHead:
      return encode_preference(model.head, pair.pref);
    case WeightSource::kFixedOnes:
      return {std::vector<double>(model.dims(), 1.0)};
    case WeightSource::kFixedUnit:
      if (pair.pref.size() != model.dims())
        throw Error(ErrorCode::kDimMismatch, "unit stage-1 weights need preference dims == d");
      return {pair.pref.intensity};
  }
  throw Error(ErrorCode::kBadArgument, "unknown weight source");
}

void check_pair(const PreferencePair& pair) {
  if (pair.chosen.empty() || pair.rejected.empty()) throw Error(ErrorCode::kBadArgument, "empty response in pair");
  if (pair.chosen == pair.rejected) throw Error(ErrorCode::kBadArgument, "chosen equals rejected");
}

// Feature score plus the per-step backbone distributions needed for gradients.
FeatureVector score_with_cache(const PersRM& model, const TokenSeq& prompt, const TokenSeq& response,
                               LogProbCache& lp, std::vector<StepCache>* steps) {
  const std::size_t d = model.dims();
  FeatureVector out{std::vector<double>(d, 0.0)};
  const Vocab& vocab = model.backbone.vocab();
  for (std::size_t t = 0; t < response.size(); ++t) {
    const TokenId a = response[t];
    check_token(model, a);
    const Context ctx = context_of(vocab, model.backbone.order(), prompt, response, t);
    const auto& [key, entry] = lp.at(ctx);
    for (std::size_t j = 0; j < d; ++j)
      out.phi[j] += model.beta * (entry.theta.values(j, a) - entry.ref.values(j, a));
    if (steps) steps->push_back({&key, a, &entry.theta.values});
  }
  return out;
}

std::vector<double> difference(const FeatureVector& a, const FeatureVector& b) {
  std::vector<double> out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a.phi[j] - b.phi[j];
  return out;
}

double pair_margin_cached(const PersRM& model, const PreferencePair& pair, WeightSource source, LogProbCache& lp) {
  check_pair(pair);
  const PreferenceWeights w = pair_weights(model, pair, source);
  const auto delta = difference(score_with_cache(model, pair.prompt, pair.chosen, lp, nullptr),
                                score_with_cache(model, pair.prompt, pair.rejected, lp, nullptr));
  return dot(w.w, delta);
}

}  // namespace

double pair_margin(const PersRM& model, const PreferencePair& pair, WeightSource source) {
  LogProbCache lp(model);
  return pair_margin_cached(model, pair, source, lp);
}

double persrm_loss(const PersRM& model, std::span<const PreferencePair> batch, WeightSource source) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyBatch, "persrm_loss");
  LogProbCache lp(model);
  double acc = 0.0;
  for (const PreferencePair& pair : batch) acc += log_sigmoid(pair_margin_cached(model, pair, source, lp));
  return -acc / static_cast<double>(batch.size());
}

Gradient persrm_grad(const PersRM& model, std::span<const PreferencePair> batch, ParamBlock wrt,
                     WeightSource source) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyBatch, "persrm_grad");
  if (wrt == ParamBlock::kReference) throw Error(ErrorCode::kFrozenParameters, "the reference model is frozen");
  if (wrt == ParamBlock::kBackbone && model.backbone.frozen())
    throw Error(ErrorCode::kFrozenParameters, "the backbone is frozen");
  if (wrt == ParamBlock::kHead && !model.head.trainable)
    throw Error(ErrorCode::kFrozenParameters, "the preference head is frozen");

  const std::size_t d = model.dims();
  const std::size_t v = model.backbone.vocab().size();
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  Gradient g;
  g.block = wrt;
  if (wrt == ParamBlock::kHead) g.head = Matrix(model.head.input_dims(), d);

  LogProbCache lp(model);
  std::vector<StepCache> chosen_cache, rejected_cache;
  for (const PreferencePair& pair : batch) {
    check_pair(pair);
    const PreferenceWeights w = pair_weights(model, pair, source);
    chosen_cache.clear();
    rejected_cache.clear();
    std::vector<StepCache>* cc = wrt == ParamBlock::kBackbone ? &chosen_cache : nullptr;
    std::vector<StepCache>* rc = wrt == ParamBlock::kBackbone ? &rejected_cache : nullptr;
    const auto delta = difference(score_with_cache(model, pair.prompt, pair.chosen, lp, cc),
                                  score_with_cache(model, pair.prompt, pair.rejected, lp, rc));
    const double margin = dot(w.w, delta);
    // dL/dmargin for L = -mean log sigmoid(margin).
    const double coef = -sigmoid(-margin) * inv_n;
    if (coef == 0.0) continue;

    if (wrt == ParamBlock::kHead) {
      for (std::size_t i = 0; i < model.head.input_dims(); ++i) {
        const double vi = pair.pref.intensity[i];
        if (vi == 0.0) continue;
        for (std::size_t j = 0; j < d; ++j) g.head(i, j) += coef * vi * delta[j];
      }
      continue;
    }

    // d log_softmax(z)_a / dz_b = [a == b] - softmax(z)_b
    auto accumulate = [&](const std::vector<StepCache>& steps, double sign) {
      for (const StepCache& step : steps) {
        auto [it, _] = g.backbone.try_emplace(*step.ctx, d, v, 0.0);
        Matrix& gm = it->second;
        const Matrix& logprob = *step.theta_logprob;
        for (std::size_t j = 0; j < d; ++j) {
          const double scale = sign * coef * w.w[j] * model.beta;
          if (scale == 0.0) continue;
          for (std::size_t b = 0; b < v; ++b) gm(j, b) -= scale * std::exp(logprob(j, b));
          gm(j, step.token) += scale;
        }
      }
    };
    accumulate(chosen_cache, 1.0);
    accumulate(rejected_cache, -1.0);
  }
  return g;
}

namespace {

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (batch_size == 0 || batch_size >= n) return {order};
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return out;
}

template <typename Step, typename EpochEnd>
void run_epochs(std::span<const PreferencePair> data, const TrainConfig& cfg, Step&& step, EpochEnd&& epoch_end) {
  Rng rng(cfg.seed);
  std::vector<PreferencePair> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (const auto& idx : epoch_batches(data.size(), cfg.batch_size, rng)) {
      if (idx.size() == data.size()) {
        step(data);
        continue;
      }
      batch.clear();
      for (std::size_t i : idx) batch.push_back(data[i]);
      step(std::span<const PreferencePair>(batch));
    }
    epoch_end(epoch);
  }
}

void check_train_config(const TrainConfig& cfg, std::span<const PreferencePair> data) {
  if (data.empty()) throw Error(ErrorCode::kEmptyBatch, "training data is empty");
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw Error(ErrorCode::kBadArgument, "learning rate must be > 0");
  if (cfg.stage1_weights == WeightSource::kHead)
    throw Error(ErrorCode::kBadArgument, "stage 1 must fix w_p; the head is frozen");
}

}  // namespace

TrainResult train_stage1(PersRM model, std::span<const PreferencePair> data, const TrainConfig& cfg) {
  check_train_config(cfg, data);
  validate(model);
  if (model.backbone.frozen()) throw Error(ErrorCode::kFrozenParameters, "stage 1 needs a trainable backbone");

  TrainResult result{std::move(model), {}};
  PersRM& m = result.model;
  m.head.trainable = false;
  result.history.push_back({1, 0, persrm_loss(m, data, cfg.stage1_weights)});
  run_epochs(
      data, cfg,
      [&](std::span<const PreferencePair> batch) {
        const Gradient g = persrm_grad(m, batch, ParamBlock::kBackbone, cfg.stage1_weights);
        for (const auto& [ctx, gm] : g.backbone) {
          Matrix& logits = m.backbone.mutable_logits(ctx);
          for (std::size_t i = 0; i < gm.data().size(); ++i) logits.data()[i] -= cfg.lr * gm.data()[i];
        }
      },
      [&](std::size_t epoch) { result.history.push_back({1, epoch, persrm_loss(m, data, cfg.stage1_weights)}); });
  m.head.trainable = true;
  m.stage = TrainingStage::kBackbone;
  return result;
}

TrainResult train_stage2(PersRM model, std::span<const PreferencePair> data, const TrainConfig& cfg) {
  check_train_config(cfg, data);
  validate(model);
  if (model.stage == TrainingStage::kFresh)
    throw Error(ErrorCode::kStageOrder, "stage 2 requires a backbone trained by stage 1");
  TrainResult result{std::move(model), {}};
  PersRM& m = result.model;
  m.backbone.freeze();
  m.head.trainable = true;
  result.history.push_back({2, 0, persrm_loss(m, data, WeightSource::kHead)});
  run_epochs(
      data, cfg,
      [&](std::span<const PreferencePair> batch) {
        const Gradient g = persrm_grad(m, batch, ParamBlock::kHead, WeightSource::kHead);
        for (std::size_t i = 0; i < g.head.data().size(); ++i) m.head.matrix.data()[i] -= cfg.lr * g.head.data()[i];
      },
      [&](std::size_t epoch) { result.history.push_back({2, epoch, persrm_loss(m, data, WeightSource::kHead)}); });
  m.stage = TrainingStage::kHead;
  return result;
}

std::string to_checkpoint(const PersRM& model) {
  const Matrix& h = model.head.matrix;
  json j = {{"schema", "pad.persrm"},
            {"schema_version", kCheckpointSchemaVersion},
            {"beta", model.beta},
            {"stage", static_cast<int>(model.stage)},
            {"head", {{"rows", h.rows()}, {"cols", h.cols()}, {"trainable", model.head.trainable}, {"values", h.data()}}},
            {"backbone", detail::factored_to_json_value(model.backbone)},
            {"reference", detail::factored_to_json_value(model.reference)}};
  return j.dump() + "\n";
}

PersRM persrm_from_checkpoint(const std::string& text) {
  const json j = detail::parse_json(text, "persrm checkpoint");
  detail::expect_schema(j, "pad.persrm", kCheckpointSchemaVersion);
  PersRM model = detail::guarded("persrm checkpoint", [&] {
    const json& hj = j.at("head");
    PreferenceHead head{Matrix(hj.at("rows").get<std::size_t>(), hj.at("cols").get<std::size_t>()),
                        hj.at("trainable").get<bool>()};
    const auto values = hj.at("values").get<std::vector<double>>();
    if (values.size() != head.matrix.data().size()) throw Error(ErrorCode::kShapeMismatch, "head values");
    head.matrix.data() = values;
    const int stage = j.at("stage").get<int>();
    if (stage < 0 || stage > 2) throw Error(ErrorCode::kSchemaMismatch, "unknown training stage");
    return PersRM{detail::factored_from_json_value(j.at("backbone")),
                  detail::factored_from_json_value(j.at("reference")), std::move(head), j.at("beta").get<double>(),
                  static_cast<TrainingStage>(stage)};
  });
  validate(model);
  return model;
}

}  // namespace pad
