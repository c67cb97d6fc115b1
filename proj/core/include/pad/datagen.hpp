#pragma once

// Synthetic style-marked corpora with known ground truth and preference pairs
// built from them.
//
// Prompts and neutral tokens follow a fixed random successor chain so the base model has
// real structure. At every position the generator either emits the chain's
// next neutral token, a marker of dimension j (weight boost * u_j for a
// per-sequence intensity u_j), or, with probability noise_rate, a uniform
// non-EOS token.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pad/evalkit.hpp"
#include "pad/mdp.hpp"
#include "pad/persrm.hpp"

namespace pad {

struct CorpusSpec {
  std::size_t vocab_size = 64;
  std::vector<std::string> dim_names = {"polite", "verbose", "markerful"};
  std::size_t marker_set_size = 8;
  std::size_t num_prompts = 300;
  std::size_t responses_per_prompt = 8;
  std::size_t min_prompt_len = 2, max_prompt_len = 4;
  std::size_t min_len = 10, max_len = 20;  // response tokens before EOS
  double intensity_max = 1.0;  // u_j ~ U[0, intensity_max]
  double marker_boost = 1.0;
  double noise_rate = 0.1;
  std::size_t branching = 2;  // successors per neutral token
  std::uint64_t seed = 1;
};

void validate(const CorpusSpec& spec);

/// The fixed world a spec induces: vocabulary, marker sets and chain.
struct SyntheticWorld {
  Vocab vocab;
  StyleOracle oracle;
  std::vector<TokenId> neutral;                     // non-marker, non-EOS
  std::vector<std::vector<TokenId>> successors;     // indexed by token id
};

SyntheticWorld make_world(const CorpusSpec& spec);

std::vector<Trajectory> gen_corpus(const CorpusSpec& spec);

// Marker frequency per dimension when every intensity is zero.
double base_marker_rate(const CorpusSpec& spec);

// Fresh prompts drawn like corpus prompts but from a separate seed stream.
std::vector<TokenSeq> gen_prompts(const CorpusSpec& spec, std::size_t count, std::uint64_t stream);

struct PairSpec {
  std::size_t pairs_per_preference = 150;
  double margin_threshold = 0.2;
  // Each entry is one preference given by active dimension names.
  std::vector<std::vector<std::string>> preferences = {{"polite"}, {"verbose"}, {"markerful"}};
  std::size_t max_attempts_factor = 50;
  std::uint64_t seed = 2;
};

void validate(const PairSpec& spec);

/// Pairs share a prompt; the weighted oracle margin clears the threshold.
std::vector<PreferencePair> gen_pref_pairs(const std::vector<Trajectory>& corpus, const StyleOracle& oracle,
                                           const PairSpec& spec);

// Independent re-check of the margin postcondition; returns violating indices.
std::vector<std::size_t> margin_violations(const std::vector<PreferencePair>& pairs, const StyleOracle& oracle,
                                           double threshold);

std::string render_prompt(const std::string& principles, const std::string& instruction);

struct RenderedPrompt {
  std::string principles;
  std::string instruction;
};

RenderedPrompt parse_prompt(const std::string& text);  // throws kParse

}  // namespace pad
