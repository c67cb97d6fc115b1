#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "pad/datagen.hpp"
#include "pad/decoder.hpp"
#include "pad/fixtures.hpp"
#include "support.hpp"

using namespace pad;

namespace {

struct Random {
  Vocab vocab;
  NGramLM lm;
  PersRM model;
  State s;
  PreferenceWeights w;
};

Random random_setup(Rng& rng, std::size_t v = 12, std::size_t d = 3) {
  const Vocab vocab(v, static_cast<TokenId>(v - 1));
  const std::size_t order = 1 + rng.below(3);
  Random r{vocab, random_ngram(vocab, order, 0.5, rng), random_persrm(vocab, order, d, d, 1.0, rng),
           random_state(vocab, rng), PreferenceWeights{std::vector<double>(d)}};
  for (auto& x : r.w.w) x = rng.normal();
  return r;
}

// Independent scorer: every token, exact formula, sorted by (combined desc, id asc).
std::vector<TokenId> oracle_ranking(const Random& r, double beta) {
  const auto ctx_lm = oracle::context_at(r.vocab.size(), r.lm.order(), r.s.prompt, r.s.generated, r.s.generated.size());
  const auto ctx_m = r.model.backbone.context(r.s);
  std::vector<double> counts(r.vocab.size());
  double total = 0.0;
  for (TokenId a = 0; a < r.vocab.size(); ++a) {
    counts[a] = static_cast<double>(r.lm.count(ctx_lm, a)) + r.lm.alpha();
    total += counts[a];
  }
  std::vector<std::pair<double, TokenId>> scored;
  for (TokenId a = 0; a < r.vocab.size(); ++a) {
    double g = 0.0;
    for (std::size_t j = 0; j < r.model.dims(); ++j)
      g += r.w.w[j] * (oracle::naive_log_softmax(oracle::row_logits(r.model.backbone, ctx_m, j), a) -
                       oracle::naive_log_softmax(oracle::row_logits(r.model.reference, ctx_m, j), a));
    scored.emplace_back(counts[a] / total * std::exp(beta * g), a);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  std::vector<TokenId> out;
  for (const auto& [unused, a] : scored) out.push_back(a);
  return out;
}

struct Trained {
  CorpusSpec spec;
  SyntheticWorld world;
  NGramLM lm;
  PersRM model;
  std::vector<TokenSeq> prompts;
};

const Trained& trained() {
  static const Trained t = [] {
    CorpusSpec spec;
    spec.num_prompts = 150;
    const SyntheticWorld world = make_world(spec);
    const auto corpus = gen_corpus(spec);
    PairSpec ps;
    ps.pairs_per_preference = 80;
    const auto pairs = gen_pref_pairs(corpus, world.oracle, ps);
    const NGramLM lm = train_ngram(world.vocab, corpus, 3, 0.5);
    const NGramLM uni = train_ngram(world.vocab, corpus, 1, 0.5);
    PersRM model = PersRM::from_reference(FactoredLM::from_ngram(uni, 3), 3, 1.0);
    model = train_stage1(model, pairs, TrainConfig{}).model;
    model = train_stage2(model, pairs, TrainConfig{}).model;
    return Trained{spec, world, lm, model, gen_prompts(spec, 200, 1)};
  }();
  return t;
}

}  // namespace

TEST_CASE("strategy names") {
  for (Strategy s : {Strategy::kGreedy, Strategy::kStochastic, Strategy::kBestOfK})
    CHECK(parse_strategy(strategy_name(s)) == s);
  CHECK(code_of([] { parse_strategy("beam"); }) == ErrorCode::kBadArgument);
}

TEST_CASE("decode config defaults and validation") {
  const DecodeConfig cfg;
  CHECK(cfg.beta == 1.0);
  CHECK(cfg.k == 10);
  CHECK(cfg.temperature == 0.7);
  CHECK(cfg.max_prompt_len == 2048);
  CHECK(cfg.max_new_tokens == 128);
  const Vocab v(12, 11);
  validate(cfg, v);
  DecodeConfig bad = cfg;
  bad.k = 13;
  CHECK(code_of([&] { validate(bad, v); }) == ErrorCode::kBadArgument);
  bad = cfg;
  bad.k = 0;
  CHECK(code_of([&] { validate(bad, v); }) == ErrorCode::kBadArgument);
  bad = cfg;
  bad.beta = -0.1;
  CHECK(code_of([&] { validate(bad, v); }) == ErrorCode::kBadArgument);
  bad = cfg;
  bad.temperature = 0.0;
  CHECK(code_of([&] { validate(bad, v); }) == ErrorCode::kBadArgument);
}

TEST_CASE("combined_scores worked example") {
  const Vocab v(3, 2);
  NGramLM lm(v, 1, 1.0);
  lm.add_count({}, 0, 1);
  lm.add_count({}, 2, 1);
  const double base0 = std::log(2.0 / 5.0);
  // Reference rows are uniform. A backbone row (x, 0, 0) gives token 0 the
  // log-ratio r when e^x = 2q / (1 - q) with q = e^r / 3.
  PersRM model = PersRM::from_reference(FactoredLM(v, 1, 2), 2, 1.0);
  const auto logit_for = [](double r) {
    const double q = std::exp(r) / 3.0;
    return std::log(2.0 * q / (1.0 - q));
  };
  Matrix& logits = model.backbone.mutable_logits({});
  logits(0, 0) = logit_for(0.2);
  logits(1, 0) = logit_for(-0.1);
  const State s{{1}, {}};
  const Matrix ratio = log_ratio_table(model, s);
  CHECK(ratio(0, 0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(ratio(1, 0) == doctest::Approx(-0.1).epsilon(1e-12));

  const auto c = combined_scores(lm, model, PreferenceWeights{{1.0, 0.0}}, s, 1.0, 3);
  REQUIRE(c.size() == 3);
  CHECK(c[0].token == 0);  // ties with token 2, lower id first
  CHECK(c[1].token == 2);
  CHECK(c[0].base_logprob == doctest::Approx(base0).epsilon(1e-14));
  CHECK(c[0].guidance == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(c[0].combined == doctest::Approx(base0 + 0.2).epsilon(1e-12));
  // Base -1.0 with the same log-ratios.
  CHECK(-1.0 + 1.0 * (1.0 * ratio(0, 0) + 0.0 * ratio(1, 0)) == doctest::Approx(-0.8).epsilon(1e-12));
}

TEST_CASE("combined_scores properties on random models") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Random r = random_setup(rng, 2 + rng.below(15));
    const std::size_t k = 1 + rng.below(r.vocab.size());
    const double beta = rng.uniform(0.0, 2.0);
    const auto c = combined_scores(r.lm, r.model, r.w, r.s, beta, k);
    REQUIRE(c.size() == k);
    const auto base = lm_logprobs(r.lm, r.s);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(c[i].combined == c[i].guidance + c[i].base_logprob);
      CHECK(c[i].base_logprob == base[c[i].token]);
    }
    // Candidate pool is the base top-k with lowest-id tie-break.
    for (std::size_t i = 0; i < k; ++i)
      for (TokenId a = 0; a < r.vocab.size(); ++a) {
        const bool in = std::any_of(c.begin(), c.end(), [&](const ScoredCandidate& x) { return x.token == a; });
        if (!in) {
          const bool outranked = base[a] < c[i].base_logprob || (base[a] == c[i].base_logprob && a > c[i].token);
          CHECK(outranked);
        }
      }

    const auto zero = combined_scores(r.lm, r.model, PreferenceWeights{std::vector<double>(3, 0.0)}, r.s, beta, k);
    for (const auto& x : zero) CHECK(x.combined == x.base_logprob);

    // Ordering by combined equals ordering by pi_LM * exp(beta * guidance/beta).
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const double pi = std::exp(c[i].base_logprob) * std::exp(c[i].guidance);
        const double pj = std::exp(c[j].base_logprob) * std::exp(c[j].guidance);
        if (c[i].combined > c[j].combined + 1e-12) CHECK(pi > pj);
      }
  }
}

TEST_CASE("monotone guidance along a basis direction") {
  Rng rng(12);
  Random r = random_setup(rng);
  const auto ratio = log_ratio_table(r.model, r.s);
  for (std::size_t j = 0; j < 3; ++j) {
    PreferenceWeights more = r.w;
    more.w[j] += 0.5;
    const auto a = combined_scores(r.lm, r.model, r.w, r.s, 1.0, 12);
    const auto b = combined_scores(r.lm, r.model, more, r.s, 1.0, 12);
    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(a[i].token == b[i].token);
      CHECK(a[i].base_logprob == b[i].base_logprob);
      if (ratio(j, a[i].token) > 0.0) CHECK(b[i].guidance > a[i].guidance);
    }
  }
}

TEST_CASE("greedy step with the full vocabulary equals the exhaustive oracle") {
  Rng rng(13);
  std::size_t agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Random r = random_setup(rng, 2 + rng.below(19), 1 + rng.below(4));
    const double beta = rng.uniform(0.0, 2.0);
    const TokenId greedy = pad_greedy_step(r.lm, r.model, r.w, r.s, beta, r.vocab.size());
    const TokenId oracle = oracle_argmax(r.lm, r.model, r.w, r.s, beta);
    if (greedy == oracle) ++agree;
    CHECK(oracle == oracle_ranking(r, beta).front());
  }
  CHECK(agree == 1000);
}

TEST_CASE("full ranking by combined matches the exhaustive ranking") {
  Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    Random r = random_setup(rng, 2 + rng.below(10));
    auto c = combined_scores(r.lm, r.model, r.w, r.s, 1.0, r.vocab.size());
    std::stable_sort(c.begin(), c.end(), [](const auto& x, const auto& y) {
      return x.combined > y.combined || (x.combined == y.combined && x.token < y.token);
    });
    const auto expected = oracle_ranking(r, 1.0);
    std::vector<TokenId> got;
    for (const auto& x : c) got.push_back(x.token);
    CHECK(got == expected);
  }
}

TEST_CASE("greedy step special cases") {
  Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    Random r = random_setup(rng);
    const auto probs = lm_logprobs(r.lm, r.s);
    const TokenId base_greedy =
        static_cast<TokenId>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    CHECK(pad_greedy_step(r.lm, r.model, r.w, r.s, 0.0, 5) == base_greedy);
    CHECK(pad_greedy_step(r.lm, r.model, r.w, r.s, 1.0, 1) == base_greedy);

    PersRM same = r.model;
    same.backbone = same.reference.trainable_copy();
    CHECK(pad_greedy_step(r.lm, same, r.w, r.s, rng.uniform(0.0, 5.0), 12) == base_greedy);

    const double c = rng.uniform(0.1, 10.0);
    PreferenceWeights scaled = r.w;
    for (auto& x : scaled.w) x *= c;
    CHECK(oracle_argmax(r.lm, r.model, scaled, r.s, 1.0 / c) == oracle_argmax(r.lm, r.model, r.w, r.s, 1.0));
  }
}

TEST_CASE("uniform base model leaves the guidance argmax") {
  Rng rng(16);
  const Vocab v(10, 9);
  const NGramLM uniform(v, 2, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const PersRM model = random_persrm(v, 2, 3, 3, 1.0, rng);
    const State s = random_state(v, rng);
    PreferenceWeights w{{rng.normal(), rng.normal(), rng.normal()}};
    const Matrix ratio = log_ratio_table(model, s);
    std::vector<double> g(v.size(), 0.0);
    for (TokenId a = 0; a < v.size(); ++a)
      for (std::size_t j = 0; j < 3; ++j) g[a] += w.w[j] * ratio(j, a);
    const auto best = static_cast<TokenId>(std::max_element(g.begin(), g.end()) - g.begin());
    CHECK(oracle_argmax(uniform, model, w, s, 1.0) == best);
  }
}

TEST_CASE("terminal states are refused") {
  Rng rng(17);
  Random r = random_setup(rng);
  const State done{{0, 1}, {r.vocab.eos_id()}};
  CHECK(code_of([&] { combined_scores(r.lm, r.model, r.w, done, 1.0, 3); }) == ErrorCode::kTerminalState);
  CHECK(code_of([&] { pad_greedy_step(r.lm, r.model, r.w, done, 1.0, 3); }) == ErrorCode::kTerminalState);
  CHECK(code_of([&] { pad_stochastic_step(r.lm, r.model, r.w, done, 1.0, 3, 0.7, rng); }) ==
        ErrorCode::kTerminalState);
  CHECK(code_of([&] { oracle_argmax(r.lm, r.model, r.w, done, 1.0); }) == ErrorCode::kTerminalState);
  CHECK(code_of([&] { combined_scores(r.lm, r.model, r.w, r.s, 1.0, 13); }) == ErrorCode::kBadArgument);
}

TEST_CASE("stochastic step frequencies match the softmax within 3 sigma") {
  Rng rng(18);
  Random r = random_setup(rng);
  const std::size_t k = 6;
  const double temperature = 0.7;
  const auto c = combined_scores(r.lm, r.model, r.w, r.s, 1.0, k);
  // Softmax recomputed without max subtraction.
  std::vector<double> p(k);
  double z = 0.0;
  for (std::size_t i = 0; i < k; ++i) z += std::exp(c[i].combined / temperature);
  for (std::size_t i = 0; i < k; ++i) p[i] = std::exp(c[i].combined / temperature) / z;
  const auto lib = candidate_probabilities(c, temperature);
  for (std::size_t i = 0; i < k; ++i) CHECK(lib[i] == doctest::Approx(p[i]).epsilon(1e-12));

  constexpr std::size_t n = 100000;
  std::vector<std::size_t> counts(r.vocab.size(), 0);
  Rng draws(99);
  for (std::size_t i = 0; i < n; ++i) ++counts[pad_stochastic_step(r.lm, r.model, r.w, r.s, 1.0, k, temperature, draws)];
  for (std::size_t i = 0; i < k; ++i) {
    const double expected = static_cast<double>(n) * p[i];
    const double sigma = std::sqrt(static_cast<double>(n) * p[i] * (1.0 - p[i]));
    CHECK(std::abs(static_cast<double>(counts[c[i].token]) - expected) <= 3.0 * sigma);
    counts[c[i].token] = 0;
  }
  for (std::size_t x : counts) CHECK(x == 0);  // nothing outside the candidate list
}

TEST_CASE("stochastic step concentrates as temperature vanishes") {
  Rng rng(19);
  Random r = random_setup(rng);
  const TokenId greedy = pad_greedy_step(r.lm, r.model, r.w, r.s, 1.0, 10);
  Rng draws(5);
  std::size_t same = 0;
  for (int i = 0; i < 10000; ++i)
    if (pad_stochastic_step(r.lm, r.model, r.w, r.s, 1.0, 10, 1e-6, draws) == greedy) ++same;
  CHECK(same == 10000);

  const TokenId only = combined_scores(r.lm, r.model, r.w, r.s, 1.0, 1).front().token;
  for (int i = 0; i < 100; ++i) CHECK(pad_stochastic_step(r.lm, r.model, r.w, r.s, 1.0, 1, 2.0, draws) == only);
}

TEST_CASE("pad_generate loop contracts") {
  const Trained& t = trained();
  const PreferenceSchema schema(t.spec.dim_names);
  const std::vector<std::string> polite{"polite"};
  const auto p = PreferenceDescriptor::from_names(schema, polite);
  DecodeConfig cfg;
  cfg.max_new_tokens = 32;

  SUBCASE("zero budget gives an empty response") {
    DecodeConfig zero = cfg;
    zero.max_new_tokens = 0;
    const auto r = pad_generate(t.lm, t.model, p, t.prompts[0], zero);
    CHECK(r.trajectory.response.empty());
    CHECK(r.trajectory.prompt == t.prompts[0]);
  }
  SUBCASE("beta zero reproduces base greedy") {
    DecodeConfig b0 = cfg;
    b0.beta = 0.0;
    for (std::size_t i = 0; i < 20; ++i)
      CHECK(pad_generate(t.lm, t.model, p, t.prompts[i], b0).trajectory ==
            base_greedy_generate(t.lm, t.prompts[i], cfg.max_new_tokens));
  }
  SUBCASE("greedy and stochastic decoding are reproducible") {
    for (Strategy s : {Strategy::kGreedy, Strategy::kStochastic, Strategy::kBestOfK}) {
      DecodeConfig c = cfg;
      c.strategy = s;
      c.seed = 77;
      c.trace = true;
      const auto a = pad_generate(t.lm, t.model, p, t.prompts[3], c);
      const auto b = pad_generate(t.lm, t.model, p, t.prompts[3], c);
      CHECK(a.trajectory == b.trajectory);
      CHECK(a.trace.steps.size() == b.trace.steps.size());
    }
  }
  SUBCASE("trace records every step") {
    DecodeConfig c = cfg;
    c.trace = true;
    const auto r = pad_generate(t.lm, t.model, p, t.prompts[1], c);
    REQUIRE(r.trace.steps.size() == r.trajectory.response.size());
    for (std::size_t i = 0; i < r.trace.steps.size(); ++i) {
      const StepTrace& step = r.trace.steps[i];
      CHECK(step.state_len == t.prompts[1].size() + i);
      CHECK(step.candidates.size() == c.k);
      CHECK(step.chosen == r.trajectory.response[i]);
      CHECK(step.chosen == greedy_choice(step.candidates));
      const bool inside = std::any_of(step.candidates.begin(), step.candidates.end(),
                                      [&](const ScoredCandidate& x) { return x.token == step.oracle; });
      CHECK(step.oracle_outside_topk == !inside);
      if (inside) CHECK(step.chosen == step.oracle);
    }
    CHECK(r.trajectory.terminated == (r.trajectory.response.back() == t.world.vocab.eos_id()));
  }
  SUBCASE("prompts are clipped to their most recent tokens") {
    DecodeConfig c = cfg;
    c.max_prompt_len = 1;
    TokenSeq long_prompt = t.prompts[2];
    const auto r = pad_generate(t.lm, t.model, p, long_prompt, c);
    CHECK(r.trajectory.prompt == TokenSeq{long_prompt.back()});
  }
}

TEST_CASE("best-of-k contracts") {
  const Trained& t = trained();
  DecodeConfig cfg;
  cfg.strategy = Strategy::kBestOfK;
  cfg.max_new_tokens = 24;
  cfg.seed = 3;
  const PreferenceWeights e0{{1.0, 0.0, 0.0}};

  SUBCASE("k = 1 is a plain base sample") {
    DecodeConfig one = cfg;
    one.k = 1;
    Rng rng(one.seed);
    const auto r = pad_best_of_k(t.lm, t.model, e0, t.prompts[0], one);
    CHECK(r.trajectory == base_sample_generate(t.lm, t.prompts[0], one.max_new_tokens, one.temperature, rng));
  }
  SUBCASE("returned response has the maximal score") {
    for (BestOfKScore mode : {BestOfKScore::kMean, BestOfKScore::kSum}) {
      DecodeConfig c = cfg;
      c.best_of_k_score = mode;
      const auto r = pad_best_of_k(t.lm, t.model, e0, t.prompts[0], c);
      REQUIRE(r.trace.best_of_k.size() == c.k);
      double best = -1e300;
      for (const auto& s : r.trace.best_of_k) best = std::max(best, s.score);
      const auto first = std::find_if(r.trace.best_of_k.begin(), r.trace.best_of_k.end(),
                                      [&](const ScoredResponse& s) { return s.score == best; });
      CHECK(first->response == r.trajectory.response);
      const auto score = oracle::naive_sequence_score(t.model, r.trajectory.prompt, r.trajectory.response);
      const double length = mode == BestOfKScore::kMean ? static_cast<double>(r.trajectory.response.size()) : 1.0;
      CHECK(best == doctest::Approx(score[0] / length).epsilon(1e-10));
    }
  }
  SUBCASE("score mode names") {
    CHECK(DecodeConfig{}.best_of_k_score == BestOfKScore::kMean);
    for (BestOfKScore m : {BestOfKScore::kMean, BestOfKScore::kSum})
      CHECK(parse_best_of_k_score(best_of_k_score_name(m)) == m);
    CHECK(code_of([] { parse_best_of_k_score("max"); }) == ErrorCode::kBadArgument);
  }
  SUBCASE("chosen response beats the sample median on the oracle") {
    for (std::size_t j = 0; j < 3; ++j) {
      PreferenceWeights w{{0.0, 0.0, 0.0}};
      w.w[j] = 1.0;
      std::size_t ok = 0;
      for (std::size_t trial = 0; trial < 200; ++trial) {
        DecodeConfig c = cfg;
        c.seed = Rng::derive(1000 + j, trial);
        const auto r = pad_best_of_k(t.lm, t.model, w, t.prompts[trial], c);
        std::vector<double> scores;
        for (const auto& s : r.trace.best_of_k) scores.push_back(t.world.oracle.score(s.response, j));
        std::sort(scores.begin(), scores.end());
        const double median = 0.5 * (scores[(scores.size() - 1) / 2] + scores[scores.size() / 2]);
        if (t.world.oracle.score(r.trajectory.response, j) >= median) ++ok;
      }
      INFO("dimension " << j << ": " << ok << " of 200");
      CHECK(ok >= 190);
    }
  }
}
