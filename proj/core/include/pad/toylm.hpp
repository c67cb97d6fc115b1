#pragma once

// Desk-scale language models. NGramLM is the count-based base model that
// proposes tokens; FactoredLM holds d independent softmax heads over the same
// tabular contexts and backs both the trainable reward backbone and its
// frozen reference.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pad/matrix.hpp"
#include "pad/mdp.hpp"

namespace pad {

// Last (order - 1) tokens of prompt ++ generated, left-padded with
// padding_token(vocab) when the history is shorter.
using Context = std::vector<TokenId>;

inline TokenId padding_token(const Vocab& vocab) { return static_cast<TokenId>(vocab.size()); }

Context context_of(const Vocab& vocab, std::size_t order, const State& s);
Context context_of(const Vocab& vocab, std::size_t order, const TokenSeq& prompt, const TokenSeq& response,
                   std::size_t t);

class NGramLM {
 public:
  NGramLM(Vocab vocab, std::size_t order, double alpha);

  const Vocab& vocab() const noexcept { return vocab_; }
  std::size_t order() const noexcept { return order_; }
  double alpha() const noexcept { return alpha_; }

  void add_count(const Context& ctx, TokenId next, std::uint64_t n = 1);
  std::uint64_t count(const Context& ctx, TokenId next) const;
  std::uint64_t total(const Context& ctx) const;

  // Laplace-smoothed log distribution over the vocabulary at ctx.
  std::vector<double> logprobs(const Context& ctx) const;

  const std::map<Context, std::vector<std::uint64_t>>& counts() const noexcept { return counts_; }

  bool operator==(const NGramLM&) const = default;

 private:
  Vocab vocab_;
  std::size_t order_;
  double alpha_;
  std::map<Context, std::vector<std::uint64_t>> counts_;
};

/// Counts every (context, next) occurrence over each response, EOS included.
NGramLM train_ngram(const Vocab& vocab, std::span<const Trajectory> corpus, std::size_t order, double alpha);

std::vector<double> lm_logprobs(const NGramLM& lm, const State& s);

/// d x |V| per-dimension conditional log-probabilities at one state.
struct LogProbMatrix {
  Matrix values;

  std::size_t dims() const noexcept { return values.rows(); }
};

class FactoredLM {
 public:
  FactoredLM(Vocab vocab, std::size_t order, std::size_t dims);

  // Every head starts as a copy of lm's log distribution at each counted
  // context. Contexts absent from lm stay at zero logits, which is uniform,
  // matching lm's pure-smoothing answer there.
  static FactoredLM from_ngram(const NGramLM& lm, std::size_t dims);

  const Vocab& vocab() const noexcept { return vocab_; }
  std::size_t order() const noexcept { return order_; }
  std::size_t dims() const noexcept { return dims_; }
  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }

  // Same parameters with the frozen flag cleared.
  FactoredLM trainable_copy() const {
    FactoredLM copy = *this;
    copy.frozen_ = false;
    return copy;
  }

  Context context(const State& s) const { return context_of(vocab_, order_, s); }

  // nullptr when the context has never been materialized (all-zero logits).
  const Matrix* find_logits(const Context& ctx) const;

  // Materializes zero logits on first use. Throws kFrozenParameters if frozen.
  Matrix& mutable_logits(const Context& ctx);

  LogProbMatrix logprobs(const Context& ctx) const;

  const std::map<Context, Matrix>& table() const noexcept { return table_; }

  bool operator==(const FactoredLM&) const = default;

 private:
  Vocab vocab_;
  std::size_t order_;
  std::size_t dims_;
  bool frozen_ = false;
  std::map<Context, Matrix> table_;
};

LogProbMatrix factored_logprobs(const FactoredLM& f, const State& s);

/// Deep copy flagged immutable.
FactoredLM clone_frozen(const FactoredLM& f);

// Checkpoint text (JSON). Loading reproduces outputs bit-exactly.
inline constexpr int kCheckpointSchemaVersion = 1;

std::string to_checkpoint(const NGramLM& lm);
std::string to_checkpoint(const FactoredLM& f);
NGramLM ngram_from_checkpoint(const std::string& text);
FactoredLM factored_from_checkpoint(const std::string& text);

}  // namespace pad
