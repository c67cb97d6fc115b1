#pragma once

// Token-level MDP primitives: a state is the prompt plus everything generated
// so far, an action is one vocabulary token, and the transition appends it.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pad {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr std::size_t kNoLengthCap = std::numeric_limits<std::size_t>::max();

/// Dense vocabulary 0..size-1 with a distinguished end-of-sequence token.
class Vocab {
 public:
  Vocab(std::size_t size, TokenId eos_id, std::vector<std::string> display = {});

  std::size_t size() const noexcept { return size_; }
  TokenId eos_id() const noexcept { return eos_id_; }
  bool contains(TokenId t) const noexcept { return t < size_; }

  // Display string for t; falls back to "<id>" when no map was given.
  std::string render(TokenId t) const;
  std::string render(const TokenSeq& seq) const;
  const std::vector<std::string>& display() const noexcept { return display_; }

  bool operator==(const Vocab&) const = default;

 private:
  std::size_t size_;
  TokenId eos_id_;
  std::vector<std::string> display_;
};

struct State {
  TokenSeq prompt;
  TokenSeq generated;

  bool operator==(const State&) const = default;
};

struct Trajectory {
  TokenSeq prompt;
  TokenSeq response;
  bool terminated = false;  // ended by EOS rather than the length cap

  bool operator==(const Trajectory&) const = default;
};

// Throws kBadToken / kTerminalState / kBadArgument on invalid input.
void validate_state(const Vocab& vocab, const State& s);
void validate_trajectory(const Vocab& vocab, const Trajectory& t, std::size_t max_len = kNoLengthCap);

bool is_terminal(const Vocab& vocab, const State& s, std::size_t max_len = kNoLengthCap);

/// Pure append transition s' = (s, a).
State transition(const Vocab& vocab, const State& s, TokenId a, std::size_t max_len = kNoLengthCap);

// State s_t = (x, y_1..y_{t-1}) for step t in [0, y.size()].
State prefix_state(const TokenSeq& prompt, const TokenSeq& response, std::size_t t);

Trajectory to_trajectory(const Vocab& vocab, const State& s);

}  // namespace pad
