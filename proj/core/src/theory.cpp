#include "pad/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pad/error.hpp"

namespace pad {

double TabularMDP::phi_max() const {
  double best = 0.0;
  for (const auto& per_state : features)
    for (const auto& phi : per_state) best = std::max(best, std::sqrt(dot(phi, phi)));
  return best;
}

void validate(const TabularMDP& mdp) {
  if (mdp.n_states == 0 || mdp.n_actions == 0) throw Error(ErrorCode::kBadSpec, "empty MDP");
  if (mdp.horizon < 1) throw Error(ErrorCode::kBadSpec, "horizon must be >= 1");
  if (mdp.transitions.size() != mdp.n_states || mdp.features.size() != mdp.n_states)
    throw Error(ErrorCode::kShapeMismatch, "per-state tables");
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (mdp.transitions[s].size() != mdp.n_actions || mdp.features[s].size() != mdp.n_actions)
      throw Error(ErrorCode::kShapeMismatch, "per-action tables");
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      double mass = 0.0;
      for (const Outcome& o : mdp.transitions[s][a]) {
        if (o.next >= mdp.n_states) throw Error(ErrorCode::kBadSpec, "transition out of range");
        if (!(o.prob >= 0.0)) throw Error(ErrorCode::kBadSpec, "negative transition probability");
        mass += o.prob;
      }
      if (std::abs(mass - 1.0) > 1e-12) throw Error(ErrorCode::kBadSpec, "transition row does not sum to 1");
      const auto& phi = mdp.features[s][a];
      if (phi.size() != mdp.dims) throw Error(ErrorCode::kDimMismatch, "feature width");
      for (double x : phi)
        if (!std::isfinite(x)) throw Error(ErrorCode::kBadSpec, "non-finite feature");
    }
  }
}

namespace {

void check_policy(const TabularMDP& mdp, const PolicyTable& pi) {
  if (pi.actions.size() != mdp.horizon) throw Error(ErrorCode::kShapeMismatch, "policy horizon");
  for (const auto& row : pi.actions) {
    if (row.size() != mdp.n_states) throw Error(ErrorCode::kShapeMismatch, "policy states");
    for (std::size_t a : row)
      if (a >= mdp.n_actions) throw Error(ErrorCode::kBadArgument, "policy action out of range");
  }
}

QTable empty_q(const TabularMDP& mdp) {
  return {std::vector(mdp.horizon, std::vector(mdp.n_states, std::vector<double>(mdp.n_actions, 0.0)))};
}

double reward(const TabularMDP& mdp, const PreferenceWeights& w, std::size_t s, std::size_t a) {
  return dot(w.w, mdp.features[s][a]);
}

}  // namespace

SFTable successor_features(const TabularMDP& mdp, const PolicyTable& pi) {
  validate(mdp);
  check_policy(mdp, pi);
  const std::size_t T = mdp.horizon;
  SFTable sf{std::vector(T, std::vector(mdp.n_states, std::vector(mdp.n_actions, std::vector<double>(mdp.dims))))};
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        auto& psi = sf.psi[t][s][a];
        psi = mdp.features[s][a];
        if (t + 1 == T) continue;
        for (const Outcome& o : mdp.transitions[s][a]) {
          const auto& next = sf.psi[t + 1][o.next][pi.actions[t + 1][o.next]];
          for (std::size_t j = 0; j < mdp.dims; ++j) psi[j] += o.prob * next[j];
        }
      }
    }
  }
  return sf;
}

QTable q_from_sf(const SFTable& sf, const PreferenceWeights& w) {
  QTable q;
  q.values.resize(sf.psi.size());
  for (std::size_t t = 0; t < sf.psi.size(); ++t) {
    q.values[t].resize(sf.psi[t].size());
    for (std::size_t s = 0; s < sf.psi[t].size(); ++s) {
      q.values[t][s].resize(sf.psi[t][s].size());
      for (std::size_t a = 0; a < sf.psi[t][s].size(); ++a) {
        const auto& psi = sf.psi[t][s][a];
        if (psi.size() != w.size()) throw Error(ErrorCode::kDimMismatch, "weights do not match psi");
        q.values[t][s][a] = dot(w.w, psi);
      }
    }
  }
  return q;
}

QTable optimal_q(const TabularMDP& mdp, const PreferenceWeights& w) {
  validate(mdp);
  if (w.size() != mdp.dims) throw Error(ErrorCode::kDimMismatch, "weights do not match phi");
  QTable q = empty_q(mdp);
  const std::size_t T = mdp.horizon;
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        double v = reward(mdp, w, s, a);
        if (t + 1 < T)
          for (const Outcome& o : mdp.transitions[s][a]) {
            const auto& row = q.values[t + 1][o.next];
            v += o.prob * *std::max_element(row.begin(), row.end());
          }
        q.values[t][s][a] = v;
      }
    }
  }
  return q;
}

QTable evaluate_policy(const TabularMDP& mdp, const PolicyTable& pi, const PreferenceWeights& w) {
  validate(mdp);
  check_policy(mdp, pi);
  if (w.size() != mdp.dims) throw Error(ErrorCode::kDimMismatch, "weights do not match phi");
  QTable q = empty_q(mdp);
  const std::size_t T = mdp.horizon;
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        double v = reward(mdp, w, s, a);
        if (t + 1 < T)
          for (const Outcome& o : mdp.transitions[s][a]) v += o.prob * q.values[t + 1][o.next][pi.actions[t + 1][o.next]];
        q.values[t][s][a] = v;
      }
    }
  }
  return q;
}

PolicyTable greedy_policy(const QTable& q) { return gpi_policy(std::span<const QTable>(&q, 1)); }

PolicyTable gpi_policy(std::span<const QTable> q_list) {
  if (q_list.empty()) throw Error(ErrorCode::kBadArgument, "gpi_policy needs at least one Q table");
  const QTable& first = q_list.front();
  for (const QTable& q : q_list) {
    if (q.values.size() != first.values.size()) throw Error(ErrorCode::kShapeMismatch, "Q horizon");
    for (std::size_t t = 0; t < q.values.size(); ++t) {
      if (q.values[t].size() != first.values[t].size()) throw Error(ErrorCode::kShapeMismatch, "Q states");
      for (std::size_t s = 0; s < q.values[t].size(); ++s)
        if (q.values[t][s].size() != first.values[t][s].size()) throw Error(ErrorCode::kShapeMismatch, "Q actions");
    }
  }
  PolicyTable pi;
  pi.actions.resize(first.values.size());
  for (std::size_t t = 0; t < first.values.size(); ++t) {
    pi.actions[t].resize(first.values[t].size());
    for (std::size_t s = 0; s < first.values[t].size(); ++s) {
      std::size_t best_a = 0;
      double best_v = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < first.values[t][s].size(); ++a) {
        double v = -std::numeric_limits<double>::infinity();
        for (const QTable& q : q_list) v = std::max(v, q.values[t][s][a]);
        if (v > best_v) {
          best_v = v;
          best_a = a;
        }
      }
      pi.actions[t][s] = best_a;
    }
  }
  return pi;
}

double sf_bellman_residual(const TabularMDP& mdp, const PolicyTable& pi, const SFTable& sf) {
  double worst = 0.0;
  const std::size_t T = mdp.horizon;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < mdp.n_states; ++s)
      for (std::size_t a = 0; a < mdp.n_actions; ++a)
        for (std::size_t j = 0; j < mdp.dims; ++j) {
          double target = mdp.features[s][a][j];
          if (t + 1 < T)
            for (const Outcome& o : mdp.transitions[s][a])
              target += o.prob * sf.psi[t + 1][o.next][pi.actions[t + 1][o.next]][j];
          worst = std::max(worst, std::abs(sf.psi[t][s][a][j] - target));
        }
  return worst;
}

BoundReport theorem1_check(const TabularMDP& mdp, std::span<const PreferenceWeights> train_ws,
                           const PreferenceWeights& test_w, double tolerance) {
  if (train_ws.empty()) throw Error(ErrorCode::kBadArgument, "theorem1_check needs a training preference");
  validate(mdp);

  // Evaluate each training task's optimal policy on the new preference via
  // its successor features, then act greedily on the pointwise max.
  std::vector<QTable> transferred;
  transferred.reserve(train_ws.size());
  double min_dist = std::numeric_limits<double>::infinity();
  for (const PreferenceWeights& w : train_ws) {
    if (w.size() != mdp.dims) throw Error(ErrorCode::kDimMismatch, "training weights do not match phi");
    const PolicyTable pi = greedy_policy(optimal_q(mdp, w));
    transferred.push_back(q_from_sf(successor_features(mdp, pi), test_w));
    double d2 = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) d2 += (test_w.w[j] - w.w[j]) * (test_w.w[j] - w.w[j]);
    min_dist = std::min(min_dist, std::sqrt(d2));
  }
  const PolicyTable gpi = gpi_policy(transferred);
  const QTable q_gpi = evaluate_policy(mdp, gpi, test_w);
  const QTable q_star = optimal_q(mdp, test_w);

  BoundReport r;
  r.max_gap = -std::numeric_limits<double>::infinity();
  r.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double gap = q_star.values[0][s][a] - q_gpi.values[0][s][a];
      r.max_gap = std::max(r.max_gap, gap);
      r.min_gap = std::min(r.min_gap, gap);
    }
  r.phi_max = mdp.phi_max();
  r.min_w_distance = min_dist;
  r.tight_bound = static_cast<double>(mdp.horizon) * r.phi_max * min_dist;
  r.classical_bound = 2.0 * r.tight_bound;
  r.tight_holds = r.max_gap <= r.tight_bound + tolerance;
  r.classical_holds = r.max_gap <= r.classical_bound + tolerance;
  return r;
}

namespace {

std::size_t draw_between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

}  // namespace

TabularMDP random_mdp(Rng& rng, const InstanceSpec& spec) {
  TabularMDP mdp;
  mdp.n_states = draw_between(rng, spec.min_states, spec.max_states);
  mdp.n_actions = draw_between(rng, spec.min_actions, spec.max_actions);
  mdp.horizon = draw_between(rng, spec.min_horizon, spec.max_horizon);
  mdp.dims = draw_between(rng, spec.min_dims, spec.max_dims);
  mdp.transitions.assign(mdp.n_states, std::vector<std::vector<Outcome>>(mdp.n_actions));
  mdp.features.assign(mdp.n_states, std::vector<std::vector<double>>(mdp.n_actions));
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      if (spec.stochastic) {
        std::vector<double> w(mdp.n_states);
        double total = 0.0;
        for (double& x : w) total += (x = rng.uniform() + 1e-3);
        for (std::size_t n = 0; n < mdp.n_states; ++n) mdp.transitions[s][a].push_back({n, w[n] / total});
        // Absorb rounding so each row sums to 1 exactly enough for validate().
        double mass = 0.0;
        for (const Outcome& o : mdp.transitions[s][a]) mass += o.prob;
        mdp.transitions[s][a].back().prob += 1.0 - mass;
      } else {
        mdp.transitions[s][a].push_back({static_cast<std::size_t>(rng.below(mdp.n_states)), 1.0});
      }
      auto& phi = mdp.features[s][a];
      phi.resize(mdp.dims);
      for (double& x : phi) x = rng.uniform(-1.0, 1.0);
    }
  return mdp;
}

PolicyTable random_policy(const TabularMDP& mdp, Rng& rng) {
  PolicyTable pi;
  pi.actions.assign(mdp.horizon, std::vector<std::size_t>(mdp.n_states));
  for (auto& row : pi.actions)
    for (auto& a : row) a = static_cast<std::size_t>(rng.below(mdp.n_actions));
  return pi;
}

PreferenceWeights random_weights(std::size_t dims, Rng& rng) {
  PreferenceWeights w{std::vector<double>(dims)};
  for (double& x : w.w) x = rng.uniform(-1.0, 1.0);
  return w;
}

}  // namespace pad
