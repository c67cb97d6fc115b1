// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: pad_acceptance [out_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "pad/evalkit.hpp"
#include "pad/fixtures.hpp"
#include "pad/records.hpp"
#include "pad/theory.hpp"
#include "pipeline.hpp"

using namespace pad;
using namespace pad::cli;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

PreferenceWeights normal_weights(std::size_t d, Rng& rng) {
  PreferenceWeights w{std::vector<double>(d)};
  for (auto& x : w.w) x = rng.normal();
  return w;
}

Verdict decoding_equivalence() {
  const auto start = Clock::now();
  std::size_t agree = 0;
  Rng rng(101);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t v = 2 + rng.below(19);
    const Vocab vocab(v, static_cast<TokenId>(v - 1));
    const std::size_t order = 1 + rng.below(3), d = 1 + rng.below(4);
    const NGramLM lm = random_ngram(vocab, order, 0.5, rng);
    const PersRM model = random_persrm(vocab, order, d, d, 1.0, rng);
    const State s = random_state(vocab, rng);
    const PreferenceWeights w = normal_weights(d, rng);
    const double beta = rng.uniform(0.0, 2.0);
    if (pad_greedy_step(lm, model, w, s, beta, v) == oracle_argmax(lm, model, w, s, beta)) ++agree;
  }
  const double secs = seconds_since(start);
  return {agree == 1000 && secs < 10.0,
          std::to_string(agree) + "/1000 agree in " + fmt("%.3f", secs) + " s (limit 10 s)"};
}

Verdict telescoping() {
  Rng rng(202);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Vocab vocab(8 + rng.below(8), 0);
    const std::size_t d = 1 + rng.below(4);
    const PersRM model = random_persrm(vocab, 1 + rng.below(3), d, d, rng.uniform(0.1, 2.0), rng);
    const TokenSeq x = random_state(vocab, rng, 4, 0).prompt;
    const TokenSeq y = random_response(vocab, rng, 12);
    const PreferenceWeights w = normal_weights(d, rng);
    double cumulative = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
      cumulative += token_reward(model, w, prefix_state(x, y, t), y[t]);
      const TokenSeq prefix(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(t + 1));
      worst = std::max(worst, std::abs(cumulative - dot(w.w, sequence_feature_score(model, x, prefix).phi)));
    }
  }
  return {worst <= 1e-9, "200 trajectories, max abs error " + fmt("%.3g", worst) + " (limit 1e-9)"};
}

Verdict gradients() {
  // Relative error with magnitudes below 1e-5 compared on an absolute scale.
  const auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-5}); };
  const auto central = [](const std::function<double()>& f, double& p) {
    const double saved = p;
    p = saved + 1e-6;
    const double up = f();
    p = saved - 1e-6;
    const double down = f();
    p = saved;
    return (up - down) / 2e-6;
  };
  Rng rng(303);
  const Vocab vocab(12, 11);
  PersRM model = random_persrm(vocab, 2, 3, 3, 1.0, rng, 0.5);
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 8; ++i) {
    PreferencePair p{random_state(vocab, rng, 3, 0).prompt, random_response(vocab, rng, 6), {},
                     PreferenceDescriptor::none(3)};
    do p.rejected = random_response(vocab, rng, 6);
    while (p.rejected == p.chosen);
    for (auto& v : p.pref.intensity) v = rng.uniform(-1.0, 1.0);
    pairs.push_back(p);
  }
  const auto loss = [&] { return persrm_loss(model, pairs); };
  double worst_b = 0.0, worst_h = 0.0;
  std::size_t params = 0;
  const Gradient gb = persrm_grad(model, pairs, ParamBlock::kBackbone);
  for (const auto& [ctx, unused] : model.backbone.table()) {
    Matrix& logits = model.backbone.mutable_logits(ctx);
    const auto it = gb.backbone.find(ctx);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t a = 0; a < 12; ++a, ++params)
        worst_b = std::max(worst_b, rel(it == gb.backbone.end() ? 0.0 : it->second(j, a), central(loss, logits(j, a))));
  }
  const Gradient gh = persrm_grad(model, pairs, ParamBlock::kHead);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j, ++params)
      worst_h = std::max(worst_h, rel(gh.head(i, j), central(loss, model.head.matrix(i, j))));
  return {worst_b <= 1e-4 && worst_h <= 1e-4, std::to_string(params) + " parameters, worst relative error backbone " +
                                                  fmt("%.3g", worst_b) + ", head " + fmt("%.3g", worst_h) +
                                                  " (limit 1e-4)"};
}

Verdict successor_features_check() {
  Rng rng(505);
  double residual = 0.0, q = 0.0;
  for (int i = 0; i < 200; ++i) {
    InstanceSpec spec;
    spec.stochastic = i % 2 == 1;
    const TabularMDP m = random_mdp(rng, spec);
    const PolicyTable pi = random_policy(m, rng);
    const SFTable sf = successor_features(m, pi);
    residual = std::max(residual, sf_bellman_residual(m, pi, sf));
    const PreferenceWeights w = random_weights(m.dims, rng);
    const QTable a = q_from_sf(sf, w), b = evaluate_policy(m, pi, w);
    for (std::size_t t = 0; t < m.horizon; ++t)
      for (std::size_t s = 0; s < m.n_states; ++s)
        for (std::size_t x = 0; x < m.n_actions; ++x)
          q = std::max(q, std::abs(a.values[t][s][x] - b.values[t][s][x]));
  }
  return {residual <= 1e-9 && q <= 1e-9, "200 MDPs, Bellman residual " + fmt("%.3g", residual) +
                                             ", |w.psi - Q| " + fmt("%.3g", q) + " (limit 1e-9)"};
}

Verdict transfer_bound_audit() {
  Rng rng(606);
  std::size_t classical = 0, tight_violations = 0;
  for (int i = 0; i < 500; ++i) {
    InstanceSpec spec;
    spec.stochastic = rng.below(2) == 1;
    const TabularMDP m = random_mdp(rng, spec);
    std::vector<PreferenceWeights> train(1 + rng.below(3));
    for (auto& w : train) w = random_weights(m.dims, rng);
    const BoundReport r = theorem1_check(m, train, random_weights(m.dims, rng));
    if (r.classical_holds) ++classical;
    if (!r.tight_holds) ++tight_violations;
  }
  return {classical == 500, "factor-2 bound held on " + std::to_string(classical) +
                                "/500; factor-1 bound violated on " + std::to_string(tight_violations) +
                                "/500 (informational)"};
}

Verdict metric_fidelity() {
  bool ok = diversity({5, 5, 5, 5, 5}) == 1.0 / 24.0;
  Rng rng(909);
  for (int i = 0; i < 100; ++i) {
    TokenSeq y(5);
    std::vector<TokenId> pool(50);
    for (TokenId t = 0; t < 50; ++t) pool[t] = t;
    for (std::size_t k = 0; k < 5; ++k) {
      std::swap(pool[k], pool[k + rng.below(50 - k)]);
      y[k] = pool[k];
    }
    ok = ok && diversity(y) == 1.0;
  }

  Rng draws(990);
  const Vocab vocab(12, 11);
  const NGramLM lm = random_ngram(vocab, 2, 0.5, draws);
  const PersRM model = random_persrm(vocab, 2, 3, 3, 1.0, draws);
  const State s = random_state(vocab, draws);
  const PreferenceWeights w = normal_weights(3, draws);
  const auto candidates = combined_scores(lm, model, w, s, 1.0, 10);
  const double temperature = 0.7;
  double z = 0.0;
  for (const auto& c : candidates) z += std::exp(c.combined / temperature);
  std::vector<std::size_t> counts(vocab.size(), 0);
  constexpr std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) ++counts[pad_stochastic_step(lm, model, w, s, 1.0, 10, temperature, draws)];
  double worst_sigmas = 0.0, chi2 = 0.0;
  for (const auto& c : candidates) {
    const double p = std::exp(c.combined / temperature) / z;
    const double sigma = std::sqrt(n * p * (1.0 - p));
    const double dev = static_cast<double>(counts[c.token]) - n * p;
    worst_sigmas = std::max(worst_sigmas, std::abs(dev) / sigma);
    chi2 += dev * dev / (n * p);
  }
  const bool freq_ok = worst_sigmas <= 3.0;
  return {ok && freq_ok, std::string("diversity 1/24 and all-distinct 1.0 ") + (ok ? "exact" : "MISMATCH") +
                             "; stochastic step worst deviation " + fmt("%.2f", worst_sigmas) +
                             " sigma over 1e5 draws (limit 3), chi2 " + fmt("%.1f", chi2) + " on " +
                             std::to_string(candidates.size() - 1) + " dof"};
}

// ---- end-to-end pipeline -------------------------------------------------

std::vector<Trajectory> generations(const fs::path& p) {
  return read_trajectories(read_file(p), "pad.generations").trajectories;
}

struct Pipeline {
  RunConfig cfg;
  double seconds = 0.0;
  fs::path base;
  std::vector<fs::path> single;  // one per dimension
  fs::path combo, beta0, wzero;
};

Pipeline run_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  Pipeline p{config_from_json(nlohmann::json::object())};
  p.cfg.out_dir = dir;
  std::ostringstream sink;
  const auto start = Clock::now();
  cmd_gen_data(p.cfg, sink);
  cmd_train(p.cfg, TrainStage::kAll, sink);
  DecodeRequest base;
  base.base_only = true;
  base.label = "base";
  p.base = cmd_decode(p.cfg, base, sink).generations;
  for (const auto& dim : p.cfg.corpus.dim_names) {
    DecodeRequest req;
    req.preference = {dim};
    req.label = dim;
    p.single.push_back(cmd_decode(p.cfg, req, sink).generations);
  }
  DecodeRequest combo;
  combo.preference = {p.cfg.corpus.dim_names[0], p.cfg.corpus.dim_names[1]};
  combo.label = "combo";
  combo.trace = true;
  p.combo = cmd_decode(p.cfg, combo, sink).generations;
  DecodeRequest beta0;
  beta0.preference = {p.cfg.corpus.dim_names[0]};
  beta0.beta = 0.0;
  beta0.label = "beta0";
  p.beta0 = cmd_decode(p.cfg, beta0, sink).generations;
  DecodeRequest wzero;  // empty preference: w = head^T 0 = 0
  wzero.label = "wzero";
  p.wzero = cmd_decode(p.cfg, wzero, sink).generations;
  EvalRequest eval{p.single[0], p.base, {p.cfg.corpus.dim_names[0]}, "dim0"};
  cmd_eval(p.cfg, eval, sink);
  cmd_sweep(p.cfg, SweepRequest{"beta", {}, {p.cfg.corpus.dim_names[0]}}, sink);
  cmd_sweep(p.cfg, SweepRequest{"k", {}, {p.cfg.corpus.dim_names[0]}}, sink);
  VerifyRequest verify;
  cmd_verify(p.cfg, verify, sink);
  p.seconds = seconds_since(start);
  return p;
}

Verdict reduction(const Pipeline& p) {
  const std::string base = read_file(p.base);
  const bool beta0 = read_file(p.beta0) == base, wzero = read_file(p.wzero) == base;
  const std::size_t n = generations(p.base).size();
  return {beta0 && wzero && n == 100, "beta=0 " + std::string(beta0 ? "identical" : "DIFFERS") + ", w=0 " +
                                          (wzero ? "identical" : "DIFFERS") + " to base greedy on " +
                                          std::to_string(n) + " prompts"};
}

Verdict steering(const Pipeline& p) {
  const SyntheticWorld world = world_of(p.cfg);
  const auto base = generations(p.base);
  bool ok = p.seconds <= 300.0;
  std::string detail;
  for (std::size_t j = 0; j < p.single.size(); ++j) {
    const auto guided = generations(p.single[j]);
    std::size_t better = 0;
    for (std::size_t i = 0; i < base.size(); ++i)
      if (world.oracle.score(guided[i].response, j) > world.oracle.score(base[i].response, j)) ++better;
    const double rate = static_cast<double>(better) / static_cast<double>(base.size());
    ok = ok && rate >= 0.9;
    detail += p.cfg.corpus.dim_names[j] + " " + fmt("%.2f", rate) + ", ";
  }
  return {ok, detail + "limit 0.90; pipeline " + fmt("%.1f", p.seconds) + " s (limit 300 s)"};
}

Verdict generalization(const Pipeline& p) {
  const SyntheticWorld world = world_of(p.cfg);
  bool unseen = true;
  for (const auto& pref : p.cfg.pairs.preferences)
    if (pref.size() > 1) unseen = false;
  const auto base = generations(p.base), combo = generations(p.combo);
  std::size_t both = 0;
  for (std::size_t i = 0; i < base.size(); ++i)
    if (world.oracle.score(combo[i].response, 0) > world.oracle.score(base[i].response, 0) &&
        world.oracle.score(combo[i].response, 1) > world.oracle.score(base[i].response, 1))
      ++both;
  const double rate = static_cast<double>(both) / static_cast<double>(base.size());
  return {unseen && rate >= 0.7, "{" + p.cfg.corpus.dim_names[0] + ", " + p.cfg.corpus.dim_names[1] +
                                     "} improves both dims on " + fmt("%.2f", rate) + " of prompts (limit 0.70)" +
                                     (unseen ? "" : "; combination appears in training pairs")};
}

Verdict reproducibility(const Pipeline& first, const fs::path& dir) {
  const Pipeline second = run_pipeline(dir);
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::directory_iterator(first.cfg.out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("timing_", 0) == 0) continue;  // wall-clock, reported only
    ++compared;
    const fs::path other = second.cfg.out_dir / name;
    if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) differing.push_back(name);
  }
  const RunPaths paths{first.cfg.out_dir};
  const std::string rm = read_file(paths.persrm());
  const std::string lm = read_file(paths.base_lm());
  const PersRM model = persrm_from_checkpoint(rm);
  const NGramLM ngram = ngram_from_checkpoint(lm);
  const bool round_trip = persrm_from_checkpoint(to_checkpoint(model)) == model &&
                          to_checkpoint(persrm_from_checkpoint(to_checkpoint(model))) == to_checkpoint(model) &&
                          to_checkpoint(ngram_from_checkpoint(to_checkpoint(ngram))) == to_checkpoint(ngram) &&
                          ngram_from_checkpoint(to_checkpoint(ngram)) == ngram;
  std::string detail = std::to_string(compared - differing.size()) + "/" + std::to_string(compared) +
                       " artifacts byte-identical on re-run; checkpoint round trip " +
                       (round_trip ? "bit-stable" : "UNSTABLE");
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty() && compared > 0 && round_trip, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_run");
  bool all = true;
  const auto report = [&](int id, const char* name, const Verdict& o) {
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << "  " << name << ": " << o.detail << std::endl;
  };
  const auto guarded = [&](int id, const char* name, const std::function<Verdict()>& f) {
    try {
      report(id, name, f());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, "decoding equivalence", decoding_equivalence);
  guarded(2, "telescoping identity", telescoping);
  guarded(3, "gradient correctness", gradients);

  std::optional<Pipeline> run;
  std::string pipeline_error;
  try {
    run = run_pipeline(out / "run_a");
  } catch (const std::exception& e) {
    pipeline_error = std::string("pipeline failed: ") + e.what();
  }
  const auto with_run = [&](const std::function<Verdict(const Pipeline&)>& f) {
    return [&, f] { return run ? f(*run) : Verdict{false, pipeline_error}; };
  };

  guarded(4, "reduction sanity", with_run(reduction));
  guarded(5, "successor features", successor_features_check);
  guarded(6, "transfer bound audit", transfer_bound_audit);
  guarded(7, "steering efficacy", with_run(steering));
  guarded(8, "generalization to an unseen combination", with_run(generalization));
  guarded(9, "metric fidelity", metric_fidelity);
  guarded(10, "reproducibility", with_run([&](const Pipeline& p) { return reproducibility(p, out / "run_b"); }));
  std::cout << (all ? "all acceptance criteria passed" : "acceptance criteria FAILED") << std::endl;
  return all ? 0 : 1;
}
