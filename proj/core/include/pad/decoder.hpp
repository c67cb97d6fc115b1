#pragma once

// Guided decoding. At each step the base model's top-k tokens are re-ranked by
//   combined(a) = log pi_LM(a|s) + beta * w_p . (log pi_theta(a|s) - log pi_ref(a|s))
// which orders candidates exactly like pi_LM(a|s) * exp(beta * w_p . ratio).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pad/mdp.hpp"
#include "pad/persrm.hpp"
#include "pad/rng.hpp"
#include "pad/toylm.hpp"

namespace pad {

enum class Strategy { kGreedy, kStochastic, kBestOfK };

std::string strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);  // throws kBadArgument

// How best-of-k ranks its samples: w . sequence score divided by the
// response length, or the plain sum. The sum favours long responses.
enum class BestOfKScore { kMean, kSum };

std::string best_of_k_score_name(BestOfKScore s);
BestOfKScore parse_best_of_k_score(const std::string& name);  // throws kBadArgument

struct DecodeConfig {
  double beta = 1.0;
  std::size_t k = 10;
  Strategy strategy = Strategy::kGreedy;
  double temperature = 0.7;
  std::size_t max_prompt_len = 2048;
  std::size_t max_new_tokens = 128;
  std::uint64_t seed = 0;
  bool trace = false;
  BestOfKScore best_of_k_score = BestOfKScore::kMean;
};

void validate(const DecodeConfig& cfg, const Vocab& vocab);

struct ScoredCandidate {
  TokenId token = 0;
  double base_logprob = 0.0;
  double guidance = 0.0;
  double combined = 0.0;  // guidance + base_logprob
};

/// Top-k by base log-prob (ties: lowest id), each scored with guidance.
std::vector<ScoredCandidate> combined_scores(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w,
                                             const State& s, double beta, std::size_t k);

TokenId pad_greedy_step(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w, const State& s,
                        double beta, std::size_t k);

TokenId pad_stochastic_step(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w, const State& s,
                            double beta, std::size_t k, double temperature, Rng& rng);

// Argmax of combined (ties: lowest id); exposed for trace consumers.
TokenId greedy_choice(const std::vector<ScoredCandidate>& candidates);

// softmax(combined / temperature) over the candidate list.
std::vector<double> candidate_probabilities(const std::vector<ScoredCandidate>& candidates, double temperature);

/// Exhaustive argmax of pi_LM(a|s) * exp(beta * w . ratio) over the vocabulary.
TokenId oracle_argmax(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w, const State& s,
                      double beta);

// Plain base-model decoding, no reward model involved.
Trajectory base_greedy_generate(const NGramLM& lm, const TokenSeq& prompt, std::size_t max_new_tokens,
                                std::size_t max_prompt_len = 2048);
Trajectory base_sample_generate(const NGramLM& lm, const TokenSeq& prompt, std::size_t max_new_tokens,
                                double temperature, Rng& rng, std::size_t max_prompt_len = 2048);

struct StepTrace {
  std::size_t state_len = 0;
  std::vector<ScoredCandidate> candidates;
  TokenId chosen = 0;
  TokenId oracle = 0;
  bool oracle_outside_topk = false;
};

struct ScoredResponse {
  TokenSeq response;
  double score = 0.0;
};

struct DecodeTrace {
  std::vector<StepTrace> steps;
  std::vector<ScoredResponse> best_of_k;  // every sampled response, best-of-k only
};

struct DecodeResult {
  Trajectory trajectory;
  DecodeTrace trace;
};

/// Best-of-k: k temperature samples from the base model, kept by the
/// configured w . sequence score; ties keep the earliest sample.
DecodeResult pad_best_of_k(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w,
                           const TokenSeq& prompt, const DecodeConfig& cfg);

/// Full generation loop with the configured strategy.
DecodeResult pad_generate(const NGramLM& lm, const PersRM& model, const PreferenceDescriptor& p,
                          const TokenSeq& prompt, const DecodeConfig& cfg);

// Same loop with explicit weights (bypasses the head).
DecodeResult pad_generate_with_weights(const NGramLM& lm, const PersRM& model, const PreferenceWeights& w,
                                       const TokenSeq& prompt, const DecodeConfig& cfg);

}  // namespace pad
