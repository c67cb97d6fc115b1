#include <benchmark/benchmark.h>

#include "pad/decoder.hpp"
#include "pad/fixtures.hpp"
#include "pad/theory.hpp"

using namespace pad;

namespace {

struct Setup {
  Vocab vocab;
  NGramLM lm;
  PersRM model;
  State state;
  PreferenceWeights w;
};

Setup make_setup(std::size_t v, std::size_t d) {
  Rng rng(17);
  Vocab vocab(v, static_cast<TokenId>(v - 1));
  NGramLM lm = random_ngram(vocab, 3, 0.5, rng);
  PersRM model = random_persrm(vocab, 2, d, d, 1.0, rng);
  State state = random_state(vocab, rng, 8, 8);
  PreferenceWeights w{std::vector<double>(d, 0.5)};
  return {vocab, std::move(lm), std::move(model), std::move(state), std::move(w)};
}

void BM_CombinedScores(benchmark::State& st) {
  const Setup s = make_setup(static_cast<std::size_t>(st.range(0)), 3);
  for (auto _ : st) benchmark::DoNotOptimize(combined_scores(s.lm, s.model, s.w, s.state, 1.0, 10));
}
BENCHMARK(BM_CombinedScores)->Arg(16)->Arg(64)->Arg(256);

void BM_GreedyStep(benchmark::State& st) {
  const Setup s = make_setup(static_cast<std::size_t>(st.range(0)), 3);
  for (auto _ : st) benchmark::DoNotOptimize(pad_greedy_step(s.lm, s.model, s.w, s.state, 1.0, 10));
}
BENCHMARK(BM_GreedyStep)->Arg(16)->Arg(64)->Arg(256);

void BM_PersRMLossAndGrad(benchmark::State& st) {
  Rng rng(29);
  const std::size_t v = 32, d = 3;
  const Vocab vocab(v, static_cast<TokenId>(v - 1));
  const PersRM model = random_persrm(vocab, 2, d, d, 1.0, rng);
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < st.range(0); ++i) {
    PreferencePair p{random_state(vocab, rng, 4, 0).prompt, random_response(vocab, rng, 16),
                     random_response(vocab, rng, 16), PreferenceDescriptor::none(d)};
    while (p.rejected == p.chosen) p.rejected = random_response(vocab, rng, 16);
    p.pref.intensity[static_cast<std::size_t>(i) % d] = 1.0;
    pairs.push_back(std::move(p));
  }
  for (auto _ : st) {
    benchmark::DoNotOptimize(persrm_loss(model, pairs));
    benchmark::DoNotOptimize(persrm_grad(model, pairs, ParamBlock::kBackbone));
    benchmark::DoNotOptimize(persrm_grad(model, pairs, ParamBlock::kHead));
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_PersRMLossAndGrad)->Arg(64)->Arg(512);

void BM_SuccessorFeatures(benchmark::State& st) {
  Rng rng(41);
  InstanceSpec spec;
  spec.min_states = spec.max_states = static_cast<std::size_t>(st.range(0));
  spec.min_horizon = spec.max_horizon = 6;
  spec.stochastic = true;
  const TabularMDP m = random_mdp(rng, spec);
  const PolicyTable pi = random_policy(m, rng);
  for (auto _ : st) benchmark::DoNotOptimize(successor_features(m, pi));
}
BENCHMARK(BM_SuccessorFeatures)->Arg(5)->Arg(50);

void BM_TransferBoundCheck(benchmark::State& st) {
  Rng rng(53);
  const TabularMDP m = random_mdp(rng);
  std::vector<PreferenceWeights> train{random_weights(m.dims, rng), random_weights(m.dims, rng)};
  const PreferenceWeights test = random_weights(m.dims, rng);
  for (auto _ : st) benchmark::DoNotOptimize(theorem1_check(m, train, test));
}
BENCHMARK(BM_TransferBoundCheck);

}  // namespace

BENCHMARK_MAIN();
