#pragma once

// Finite-horizon tabular machinery for successor features and the GPI
// transfer bound. Timesteps run 1..T; arrays are indexed by t - 1.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pad/persrm.hpp"
#include "pad/rng.hpp"

namespace pad {

struct Outcome {
  std::size_t next = 0;
  double prob = 1.0;
};

struct TabularMDP {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::size_t dims = 0;
  std::size_t horizon = 1;
  // transitions[s][a] lists successor distribution; one entry when deterministic.
  std::vector<std::vector<std::vector<Outcome>>> transitions;
  // features[s][a] has `dims` entries.
  std::vector<std::vector<std::vector<double>>> features;

  double phi_max() const;  // max Euclidean norm of phi
};

void validate(const TabularMDP& mdp);

// actions[t][s]
struct PolicyTable {
  std::vector<std::vector<std::size_t>> actions;
};

// values[t][s][a]
struct QTable {
  std::vector<std::vector<std::vector<double>>> values;
};

// psi[t][s][a] is a d-vector.
struct SFTable {
  std::vector<std::vector<std::vector<std::vector<double>>>> psi;
};

SFTable successor_features(const TabularMDP& mdp, const PolicyTable& pi);
QTable q_from_sf(const SFTable& sf, const PreferenceWeights& w);
QTable optimal_q(const TabularMDP& mdp, const PreferenceWeights& w);

// Scalar policy evaluation under reward w . phi, with no successor features.
QTable evaluate_policy(const TabularMDP& mdp, const PolicyTable& pi, const PreferenceWeights& w);

PolicyTable greedy_policy(const QTable& q);
PolicyTable gpi_policy(std::span<const QTable> q_list);

// Largest |psi_t - (phi + E psi_{t+1})| over all entries.
double sf_bellman_residual(const TabularMDP& mdp, const PolicyTable& pi, const SFTable& sf);

struct BoundReport {
  std::uint64_t seed = 0;
  double max_gap = 0.0;
  double min_gap = 0.0;
  double phi_max = 0.0;
  double min_w_distance = 0.0;
  double tight_bound = 0.0;      // T * phi_max * min_j ||w - w_j||
  double classical_bound = 0.0;  // 2 * tight_bound
  bool tight_holds = true;
  bool classical_holds = true;
};

/// Gap between the optimal Q of test_w and the Q of the GPI policy built from
/// the optimal policies of train_ws, at t = 1, against both bounds.
BoundReport theorem1_check(const TabularMDP& mdp, std::span<const PreferenceWeights> train_ws,
                           const PreferenceWeights& test_w, double tolerance = 1e-9);

struct InstanceSpec {
  std::size_t min_states = 2, max_states = 5;
  std::size_t min_actions = 2, max_actions = 4;
  std::size_t min_horizon = 2, max_horizon = 6;
  std::size_t min_dims = 2, max_dims = 4;
  bool stochastic = false;
};

TabularMDP random_mdp(Rng& rng, const InstanceSpec& spec = {});
PolicyTable random_policy(const TabularMDP& mdp, Rng& rng);
PreferenceWeights random_weights(std::size_t dims, Rng& rng);

}  // namespace pad
