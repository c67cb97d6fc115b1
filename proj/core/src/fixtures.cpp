#include "pad/fixtures.hpp"

namespace pad {

namespace {

// All contexts of the given width over vocabulary + padding, in odometer order.
template <typename F>
void for_each_context(const Vocab& vocab, std::size_t width, F&& f) {
  const TokenId base = static_cast<TokenId>(vocab.size() + 1);
  Context ctx(width, 0);
  while (true) {
    f(ctx);
    std::size_t i = 0;
    while (i < width && ++ctx[i] == base) ctx[i++] = 0;
    if (i == width) return;
  }
}

TokenId non_eos(const Vocab& vocab, Rng& rng) {
  TokenId t = static_cast<TokenId>(rng.below(vocab.size() - 1));
  return t >= vocab.eos_id() ? t + 1 : t;
}

}  // namespace

NGramLM random_ngram(const Vocab& vocab, std::size_t order, double alpha, Rng& rng, std::uint64_t max_count) {
  NGramLM lm(vocab, order, alpha);
  for_each_context(vocab, order - 1, [&](const Context& ctx) {
    for (TokenId a = 0; a < vocab.size(); ++a) {
      const std::uint64_t n = rng.below(max_count + 1);
      if (n) lm.add_count(ctx, a, n);
    }
    // Guarantee the context exists even if every draw was zero.
    if (lm.total(ctx) == 0) lm.add_count(ctx, static_cast<TokenId>(rng.below(vocab.size())));
  });
  return lm;
}

PersRM random_persrm(const Vocab& vocab, std::size_t order, std::size_t dims, std::size_t pref_dims, double beta,
                     Rng& rng, double scale) {
  FactoredLM backbone(vocab, order, dims);
  FactoredLM reference(vocab, order, dims);
  for_each_context(vocab, order - 1, [&](const Context& ctx) {
    for (double& x : backbone.mutable_logits(ctx).data()) x = scale * rng.normal();
    for (double& x : reference.mutable_logits(ctx).data()) x = scale * rng.normal();
  });
  reference.freeze();
  PreferenceHead head = PreferenceHead::zeros(pref_dims, dims);
  for (double& x : head.matrix.data()) x = rng.normal();
  PersRM model{std::move(backbone), std::move(reference), std::move(head), beta, TrainingStage::kFresh};
  validate(model);
  return model;
}

State random_state(const Vocab& vocab, Rng& rng, std::size_t max_prompt, std::size_t max_generated) {
  State s;
  s.prompt.resize(1 + rng.below(max_prompt));
  for (TokenId& t : s.prompt) t = non_eos(vocab, rng);
  s.generated.resize(rng.below(max_generated + 1));
  for (TokenId& t : s.generated) t = non_eos(vocab, rng);
  return s;
}

TokenSeq random_response(const Vocab& vocab, Rng& rng, std::size_t max_len) {
  TokenSeq y(1 + rng.below(max_len));
  for (TokenId& t : y) t = non_eos(vocab, rng);
  if (rng.uniform() < 0.5) y.back() = vocab.eos_id();
  return y;
}

}  // namespace pad
