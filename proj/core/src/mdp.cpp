#include "pad/mdp.hpp"

#include "pad/error.hpp"

namespace pad {

Vocab::Vocab(std::size_t size, TokenId eos_id, std::vector<std::string> display)
    : size_(size), eos_id_(eos_id), display_(std::move(display)) {
  if (size_ < 2) throw Error(ErrorCode::kBadVocab, "vocabulary needs at least 2 tokens");
  if (eos_id_ >= size_) throw Error(ErrorCode::kBadVocab, "eos id out of range");
  if (!display_.empty() && display_.size() != size_)
    throw Error(ErrorCode::kBadVocab, "display map size does not match vocabulary");
}

std::string Vocab::render(TokenId t) const {
  if (t < display_.size()) return display_[t];
  if (t == eos_id_) return "<eos>";
  return "<" + std::to_string(t) + ">";
}

std::string Vocab::render(const TokenSeq& seq) const {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += render(seq[i]);
  }
  return out;
}

namespace {

void check_tokens(const Vocab& vocab, const TokenSeq& seq, const char* what) {
  for (TokenId t : seq)
    if (!vocab.contains(t)) throw Error(ErrorCode::kBadToken, std::string(what) + " token " + std::to_string(t));
}

}  // namespace

void validate_state(const Vocab& vocab, const State& s) {
  check_tokens(vocab, s.prompt, "prompt");
  check_tokens(vocab, s.generated, "generated");
  for (std::size_t i = 0; i + 1 < s.generated.size(); ++i)
    if (s.generated[i] == vocab.eos_id())
      throw Error(ErrorCode::kTerminalState, "eos before the final generated position");
}

void validate_trajectory(const Vocab& vocab, const Trajectory& t, std::size_t max_len) {
  validate_state(vocab, State{t.prompt, t.response});
  if (t.response.size() > max_len) throw Error(ErrorCode::kBadArgument, "response longer than the length cap");
  if (t.terminated && (t.response.empty() || t.response.back() != vocab.eos_id()))
    throw Error(ErrorCode::kBadArgument, "terminated trajectory must end with eos");
}

bool is_terminal(const Vocab& vocab, const State& s, std::size_t max_len) {
  if (!s.generated.empty() && s.generated.back() == vocab.eos_id()) return true;
  return s.generated.size() >= max_len;
}

State transition(const Vocab& vocab, const State& s, TokenId a, std::size_t max_len) {
  if (!vocab.contains(a)) throw Error(ErrorCode::kBadToken, "action " + std::to_string(a));
  if (is_terminal(vocab, s, max_len)) throw Error(ErrorCode::kTerminalState, "transition from a terminal state");
  State next = s;
  next.generated.push_back(a);
  return next;
}

State prefix_state(const TokenSeq& prompt, const TokenSeq& response, std::size_t t) {
  return State{prompt, TokenSeq(response.begin(), response.begin() + static_cast<std::ptrdiff_t>(t))};
}

Trajectory to_trajectory(const Vocab& vocab, const State& s) {
  const bool ended = !s.generated.empty() && s.generated.back() == vocab.eos_id();
  return Trajectory{s.prompt, s.generated, ended};
}

}  // namespace pad
