#pragma once

// Seeded random models and states for property checks, the verification
// battery and benchmarks.

#include <cstddef>

#include "pad/mdp.hpp"
#include "pad/persrm.hpp"
#include "pad/rng.hpp"
#include "pad/toylm.hpp"

namespace pad {

// Random counts in [0, max_count] for every context over the vocabulary
// (padding included), so no context falls back to uniform.
NGramLM random_ngram(const Vocab& vocab, std::size_t order, double alpha, Rng& rng, std::uint64_t max_count = 5);

// Backbone and reference get independent N(0, scale^2) logits at every
// context; the head is N(0, 1).
PersRM random_persrm(const Vocab& vocab, std::size_t order, std::size_t dims, std::size_t pref_dims, double beta,
                     Rng& rng, double scale = 1.0);

// Prompt of 1..max_prompt tokens and 0..max_generated generated tokens, no EOS.
State random_state(const Vocab& vocab, Rng& rng, std::size_t max_prompt = 4, std::size_t max_generated = 4);

// Response of length 1..max_len; the last token may be EOS.
TokenSeq random_response(const Vocab& vocab, Rng& rng, std::size_t max_len);

}  // namespace pad
