#include "pad/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pad/error.hpp"

namespace pad {

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kGreedy: return "greedy";
    case Strategy::kStochastic: return "stochastic";
    case Strategy::kBestOfK: return "best_of_k";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "greedy") return Strategy::kGreedy;
  if (name == "stochastic") return Strategy::kStochastic;
  if (name == "best_of_k") return Strategy::kBestOfK;
  throw Error(ErrorCode::kBadArgument, "unknown strategy '" + name + "'");
}

std::string best_of_k_score_name(BestOfKScore s) {
  return s == BestOfKScore::kSum ? "sum" : "mean";
}

BestOfKScore parse_best_of_k_score(const std::string& name) {
  if (name == "mean") return BestOfKScore::kMean;
  if (name == "sum") return BestOfKScore::kSum;
  throw Error(ErrorCode::kBadArgument, "unknown best-of-k score '" + name + "'");
}

void validate(const DecodeConfig& cfg, const Vocab& vocab) {
  if (!(cfg.beta >= 0.0) || !std::isfinite(cfg.beta)) throw Error(ErrorCode::kBadArgument, "beta must be >= 0");
  if (cfg.k < 1 || cfg.k > vocab.size()) throw Error(ErrorCode::kBadArgument, "k must be in [1, |V|]");
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature))
    throw Error(ErrorCode::kBadArgument, "temperature must be > 0");
}

namespace {

void require_open(const Vocab& vocab, const State& s) {
  if (is_terminal(vocab, s)) throw Error(ErrorCode::kTerminalState, "decoding from a terminal state");
}

// Indices of the k largest values, ordered by value desc then index asc.
std::vector<TokenId> top_k(const std::vector<double>& values, std::size_t k) {
  std::vector<TokenId> ids(values.size());
  std::iota(ids.begin(), ids.end(), TokenId{0});
  auto better = [&](TokenId a, TokenId b) { return values[a] > values[b] || (values[a] == values[b] && a < b); };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), better);
  ids.resize(k);
  return ids;
}

TokenId argmax_lowest(const std::vector<double>& values) {
  TokenId best = 0;
  for (TokenId a = 1; a < values.size(); ++a)
    if (values[a] > values[best]) best = a;
  return best;
}

TokenSeq clip_prompt(const TokenSeq& prompt, std::size_t max_prompt_len) {
  if (prompt.size() <= max_prompt_len) return prompt;
  return TokenSeq(prompt.end() - static_cast<std::ptrdiff_t>(max_prompt_len), prompt.end());
}

std::vector<double> tempered(const std::vector<double>& logits, double temperature) {
  std::vector<double> scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
  const double z = log_sum_exp(scaled);
  for (double& x : scaled) x = std::exp(x - z);
  return scaled;
}

}  // namespace

std::vector<ScoredCandidate> combined_scores(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w,
                                             const State& s, double beta, std::size_t k) {
  const Vocab& vocab = lm.vocab();
  require_open(vocab, s);
  if (k < 1 || k > vocab.size()) throw Error(ErrorCode::kBadArgument, "k must be in [1, |V|]");
  if (w.size() != model.dims()) throw Error(ErrorCode::kDimMismatch, "weights do not match d");

  const std::vector<double> base = lm_logprobs(lm, s);
  const Matrix ratio = log_ratio_table(model, s);
  std::vector<ScoredCandidate> out;
  out.reserve(k);
  for (TokenId a : top_k(base, k)) {
    double g = 0.0;
    for (std::size_t j = 0; j < model.dims(); ++j) g += w.w[j] * ratio(j, a);
    g *= beta;
    out.push_back({a, base[a], g, g + base[a]});
  }
  return out;
}

TokenId greedy_choice(const std::vector<ScoredCandidate>& candidates) {
  if (candidates.empty()) throw Error(ErrorCode::kBadArgument, "no candidates");
  const ScoredCandidate* best = &candidates.front();
  for (const ScoredCandidate& c : candidates)
    if (c.combined > best->combined || (c.combined == best->combined && c.token < best->token)) best = &c;
  return best->token;
}

std::vector<double> candidate_probabilities(const std::vector<ScoredCandidate>& candidates, double temperature) {
  std::vector<double> combined(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) combined[i] = candidates[i].combined;
  return tempered(combined, temperature);
}

TokenId pad_greedy_step(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w, const State& s,
                        double beta, std::size_t k) {
  return greedy_choice(combined_scores(lm, model, w, s, beta, k));
}

TokenId pad_stochastic_step(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w, const State& s,
                            double beta, std::size_t k, double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::kBadArgument, "temperature must be > 0");
  const auto candidates = combined_scores(lm, model, w, s, beta, k);
  return candidates[rng.categorical(candidate_probabilities(candidates, temperature))].token;
}

TokenId oracle_argmax(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w, const State& s,
                      double beta) {
  require_open(lm.vocab(), s);
  if (w.size() != model.dims()) throw Error(ErrorCode::kDimMismatch, "weights do not match d");
  const std::vector<double> base = lm_logprobs(lm, s);
  const Matrix ratio = log_ratio_table(model, s);
  // Unnormalized PAD policy pi_LM(a|s) * exp(beta * w . ratio), probability domain.
  std::vector<double> weight(base.size());
  for (TokenId a = 0; a < base.size(); ++a) {
    double g = 0.0;
    for (std::size_t j = 0; j < model.dims(); ++j) g += w.w[j] * ratio(j, a);
    weight[a] = std::exp(base[a]) * std::exp(beta * g);
  }
  return argmax_lowest(weight);
}

Trajectory base_greedy_generate(const NGramLM& lm, const TokenSeq& prompt, std::size_t max_new_tokens,
                                std::size_t max_prompt_len) {
  State s{clip_prompt(prompt, max_prompt_len), {}};
  validate_state(lm.vocab(), s);
  while (!is_terminal(lm.vocab(), s, max_new_tokens))
    s = transition(lm.vocab(), s, argmax_lowest(lm_logprobs(lm, s)), max_new_tokens);
  return to_trajectory(lm.vocab(), s);
}

Trajectory base_sample_generate(const NGramLM& lm, const TokenSeq& prompt, std::size_t max_new_tokens,
                                double temperature, Rng& rng, std::size_t max_prompt_len) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::kBadArgument, "temperature must be > 0");
  State s{clip_prompt(prompt, max_prompt_len), {}};
  validate_state(lm.vocab(), s);
  while (!is_terminal(lm.vocab(), s, max_new_tokens)) {
    const auto probs = tempered(lm_logprobs(lm, s), temperature);
    s = transition(lm.vocab(), s, static_cast<TokenId>(rng.categorical(probs)), max_new_tokens);
  }
  return to_trajectory(lm.vocab(), s);
}

DecodeResult pad_best_of_k(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w,
                           const TokenSeq& prompt, const DecodeConfig& cfg) {
  validate(cfg, lm.vocab());
  if (w.size() != model.dims()) throw Error(ErrorCode::kDimMismatch, "weights do not match d");
  Rng rng(cfg.seed);
  const double scale = cfg.beta / model.beta;
  DecodeResult result;
  std::size_t best = 0;
  std::vector<Trajectory> samples;
  samples.reserve(cfg.k);
  for (std::size_t i = 0; i < cfg.k; ++i) {
    samples.push_back(base_sample_generate(lm, prompt, cfg.max_new_tokens, cfg.temperature, rng, cfg.max_prompt_len));
    const Trajectory& t = samples.back();
    double score = 0.0;
    if (!t.response.empty()) {
      score = scale * dot(w.w, sequence_feature_score(model, t.prompt, t.response).phi);
      if (cfg.best_of_k_score == BestOfKScore::kMean) score /= static_cast<double>(t.response.size());
    }
    result.trace.best_of_k.push_back({t.response, score});
    if (score > result.trace.best_of_k[best].score) best = i;
  }
  result.trajectory = samples[best];
  return result;
}

DecodeResult pad_generate_with_weights(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w,
                                       const TokenSeq& prompt, const DecodeConfig& cfg) {
  validate(cfg, lm.vocab());
  if (cfg.strategy == Strategy::kBestOfK) return pad_best_of_k(lm, model, w, prompt, cfg);

  const Vocab& vocab = lm.vocab();
  Rng rng(cfg.seed);
  DecodeResult result;
  State s{clip_prompt(prompt, cfg.max_prompt_len), {}};
  validate_state(vocab, s);
  while (!is_terminal(vocab, s, cfg.max_new_tokens)) {
    auto candidates = combined_scores(lm, model, w, s, cfg.beta, cfg.k);
    TokenId chosen;
    if (cfg.strategy == Strategy::kGreedy) {
      chosen = greedy_choice(candidates);
    } else {
      chosen = candidates[rng.categorical(candidate_probabilities(candidates, cfg.temperature))].token;
    }
    if (cfg.trace) {
      StepTrace step{s.prompt.size() + s.generated.size(), std::move(candidates), chosen, 0, false};
      step.oracle = oracle_argmax(lm, model, w, s, cfg.beta);
      step.oracle_outside_topk = std::none_of(step.candidates.begin(), step.candidates.end(),
                                              [&](const ScoredCandidate& c) { return c.token == step.oracle; });
      result.trace.steps.push_back(std::move(step));
    }
    s = transition(vocab, s, chosen, cfg.max_new_tokens);
  }
  result.trajectory = to_trajectory(vocab, s);
  return result;
}

DecodeResult pad_generate(const NGramLM& lm, const PersRM& model, const PreferenceDescriptor& p,
                          const TokenSeq& prompt, const DecodeConfig& cfg) {
  return pad_generate_with_weights(lm, model, encode_preference(model.head, p), prompt, cfg);
}

}  // namespace pad
