#include "pad/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "pad/error.hpp"
#include "pad/rng.hpp"

namespace pad {

namespace {

constexpr std::uint64_t kWorldStream = 0;
constexpr std::uint64_t kCorpusStream = 1;
constexpr std::uint64_t kPromptStreamBase = 100;

constexpr const char* kGuidelines =
    "[Guidelines] Your task is to generate response by considering the following principle.\n";
constexpr const char* kPrinciplesTag = "[Principles] ";
constexpr const char* kInstructionTag = "\n[Instruction] ";

std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

TokenSeq draw_prompt(const CorpusSpec& spec, const SyntheticWorld& world, Rng& rng) {
  // A walk along the neutral chain, so prompts are in-distribution for the base model.
  TokenSeq prompt(between(rng, spec.min_prompt_len, spec.max_prompt_len));
  prompt[0] = world.neutral[rng.below(world.neutral.size())];
  for (std::size_t i = 1; i < prompt.size(); ++i) {
    const auto& next = world.successors[prompt[i - 1]];
    prompt[i] = next[rng.below(next.size())];
  }
  return prompt;
}

}  // namespace

void validate(const CorpusSpec& spec) {
  const std::size_t m = spec.dim_names.size();
  if (spec.vocab_size < 4) throw Error(ErrorCode::kBadSpec, "vocab_size must be >= 4");
  if (m == 0 || spec.marker_set_size == 0) throw Error(ErrorCode::kBadSpec, "need dimensions with markers");
  // Markers, EOS and at least `branching` neutral tokens must fit.
  if (m * spec.marker_set_size + 1 + std::max<std::size_t>(spec.branching, 2) > spec.vocab_size)
    throw Error(ErrorCode::kBadSpec, "marker sets leave too few neutral tokens");
  if (spec.branching < 1) throw Error(ErrorCode::kBadSpec, "branching must be >= 1");
  if (spec.min_prompt_len < 1 || spec.min_prompt_len > spec.max_prompt_len)
    throw Error(ErrorCode::kBadSpec, "prompt length range");
  if (spec.min_len < 1 || spec.min_len > spec.max_len) throw Error(ErrorCode::kBadSpec, "response length range");
  if (spec.num_prompts == 0 || spec.responses_per_prompt == 0) throw Error(ErrorCode::kBadSpec, "empty corpus");
  if (!(spec.intensity_max >= 0.0) || !(spec.marker_boost >= 0.0)) throw Error(ErrorCode::kBadSpec, "negative intensity");
  if (!(spec.noise_rate >= 0.0 && spec.noise_rate <= 1.0)) throw Error(ErrorCode::kBadSpec, "noise_rate in [0, 1]");
  PreferenceSchema names(spec.dim_names);  // rejects duplicates
}

SyntheticWorld make_world(const CorpusSpec& spec) {
  validate(spec);
  Rng rng(Rng::derive(spec.seed, kWorldStream));
  const TokenId eos = static_cast<TokenId>(spec.vocab_size - 1);
  std::vector<TokenId> pool(spec.vocab_size - 1);
  std::iota(pool.begin(), pool.end(), TokenId{0});
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);

  const std::size_t m = spec.dim_names.size();
  std::vector<std::vector<TokenId>> markers(m);
  std::vector<std::string> display(spec.vocab_size);
  std::size_t next = 0;
  for (std::size_t d = 0; d < m; ++d)
    for (std::size_t k = 0; k < spec.marker_set_size; ++k) markers[d].push_back(pool[next++]);
  std::vector<TokenId> neutral(pool.begin() + static_cast<std::ptrdiff_t>(next), pool.end());
  std::sort(neutral.begin(), neutral.end());

  for (std::size_t d = 0; d < m; ++d) {
    std::sort(markers[d].begin(), markers[d].end());
    for (std::size_t k = 0; k < markers[d].size(); ++k) display[markers[d][k]] = spec.dim_names[d] + std::to_string(k);
  }
  for (std::size_t k = 0; k < neutral.size(); ++k) display[neutral[k]] = "w" + std::to_string(k);
  display[eos] = "<eos>";

  std::vector<std::vector<TokenId>> successors(spec.vocab_size);
  for (TokenId t : neutral) {
    std::vector<TokenId> options = neutral;
    for (std::size_t i = 0; i < spec.branching; ++i) {
      std::swap(options[i], options[i + rng.below(options.size() - i)]);
      successors[t].push_back(options[i]);
    }
  }
  return SyntheticWorld{Vocab(spec.vocab_size, eos, std::move(display)), StyleOracle(spec.dim_names, markers),
                        std::move(neutral), std::move(successors)};
}

std::vector<Trajectory> gen_corpus(const CorpusSpec& spec) {
  const SyntheticWorld world = make_world(spec);
  Rng rng(Rng::derive(spec.seed, kCorpusStream));
  const std::size_t m = spec.dim_names.size();
  const TokenId eos = world.vocab.eos_id();
  std::vector<Trajectory> corpus;
  corpus.reserve(spec.num_prompts * spec.responses_per_prompt);
  std::vector<double> weights(m + 1);
  for (std::size_t p = 0; p < spec.num_prompts; ++p) {
    const TokenSeq prompt = draw_prompt(spec, world, rng);
    for (std::size_t r = 0; r < spec.responses_per_prompt; ++r) {
      weights[0] = 1.0;
      for (std::size_t d = 0; d < m; ++d) weights[d + 1] = spec.marker_boost * rng.uniform(0.0, spec.intensity_max);
      const std::size_t len = between(rng, spec.min_len, spec.max_len);
      TokenId chain = prompt.back();
      TokenSeq response;
      response.reserve(len + 1);
      for (std::size_t i = 0; i < len; ++i) {
        TokenId tok;
        if (rng.uniform() < spec.noise_rate) {
          tok = static_cast<TokenId>(rng.below(spec.vocab_size - 1));
        } else {
          const std::size_t choice = rng.categorical(weights);
          if (choice == 0) {
            const auto& next = world.successors[chain];
            tok = next[rng.below(next.size())];
          } else {
            const auto& set = world.oracle.marker_sets()[choice - 1];
            tok = set[rng.below(set.size())];
          }
        }
        if (!world.successors[tok].empty()) chain = tok;
        response.push_back(tok);
      }
      response.push_back(eos);
      corpus.push_back({prompt, std::move(response), true});
    }
  }
  return corpus;
}

double base_marker_rate(const CorpusSpec& spec) {
  return spec.noise_rate * static_cast<double>(spec.marker_set_size) / static_cast<double>(spec.vocab_size - 1);
}

std::vector<TokenSeq> gen_prompts(const CorpusSpec& spec, std::size_t count, std::uint64_t stream) {
  const SyntheticWorld world = make_world(spec);
  Rng rng(Rng::derive(spec.seed, kPromptStreamBase + stream));
  std::vector<TokenSeq> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw_prompt(spec, world, rng));
  return out;
}

void validate(const PairSpec& spec) {
  if (!(spec.margin_threshold > 0.0)) throw Error(ErrorCode::kBadSpec, "margin threshold must be > 0");
  if (spec.preferences.empty()) throw Error(ErrorCode::kBadSpec, "no preferences to sample");
  for (const auto& p : spec.preferences)
    if (p.empty()) throw Error(ErrorCode::kBadSpec, "a sampled preference must activate a dimension");
}

std::vector<PreferencePair> gen_pref_pairs(const std::vector<Trajectory>& corpus, const StyleOracle& oracle,
                                           const PairSpec& spec) {
  validate(spec);
  // Responses grouped by prompt, in first-appearance order.
  std::map<TokenSeq, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto [it, inserted] = group_of.try_emplace(corpus[i].prompt, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  std::vector<std::size_t> usable;
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (groups[g].size() >= 2) usable.push_back(g);
  if (usable.empty()) throw Error(ErrorCode::kInsufficientData, "no prompt has two responses");

  const PreferenceSchema schema(oracle.names());
  Rng rng(spec.seed);
  std::vector<PreferencePair> pairs;
  for (const auto& names : spec.preferences) {
    const PreferenceDescriptor pref = PreferenceDescriptor::from_names(schema, names);
    const std::size_t budget = spec.max_attempts_factor * std::max<std::size_t>(spec.pairs_per_preference, 1);
    std::size_t made = 0;
    for (std::size_t attempt = 0; attempt < budget && made < spec.pairs_per_preference; ++attempt) {
      const auto& members = groups[usable[rng.below(usable.size())]];
      const std::size_t i = rng.below(members.size());
      std::size_t j = rng.below(members.size() - 1);
      if (j >= i) ++j;
      const Trajectory& a = corpus[members[i]];
      const Trajectory& b = corpus[members[j]];
      if (a.response == b.response) continue;
      const double margin = oracle.weighted_score(a.response, pref.intensity) -
                            oracle.weighted_score(b.response, pref.intensity);
      if (margin == 0.0 || std::abs(margin) < spec.margin_threshold) continue;
      const bool a_wins = margin > 0.0;
      pairs.push_back({a.prompt, a_wins ? a.response : b.response, a_wins ? b.response : a.response, pref});
      ++made;
    }
    if (made < spec.pairs_per_preference)
      throw Error(ErrorCode::kInsufficientData, "only " + std::to_string(made) + " of " +
                                                    std::to_string(spec.pairs_per_preference) + " pairs reachable");
  }
  return pairs;
}

std::vector<std::size_t> margin_violations(const std::vector<PreferencePair>& pairs, const StyleOracle& oracle,
                                           double threshold) {
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const double margin =
        oracle.weighted_score(p.chosen, p.pref.intensity) - oracle.weighted_score(p.rejected, p.pref.intensity);
    if (!(margin >= threshold)) bad.push_back(i);
  }
  return bad;
}

std::string render_prompt(const std::string& principles, const std::string& instruction) {
  return std::string(kGuidelines) + kPrinciplesTag + principles + kInstructionTag + instruction;
}

RenderedPrompt parse_prompt(const std::string& text) {
  const std::string head = std::string(kGuidelines) + kPrinciplesTag;
  if (text.compare(0, head.size(), head) != 0) throw Error(ErrorCode::kParse, "missing guidelines header");
  const std::size_t split = text.find(kInstructionTag, head.size());
  if (split == std::string::npos) throw Error(ErrorCode::kParse, "missing instruction tag");
  return {text.substr(head.size(), split - head.size()),
          text.substr(split + std::char_traits<char>::length(kInstructionTag))};
}

}  // namespace pad
