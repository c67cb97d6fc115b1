#pragma once

// Personalized reward model: preference encoding, token/sequence level
// personalized rewards and the two-stage Bradley-Terry training.
//
// Token features are phi(s, a) = beta * (log pi_theta(a|s) - log pi_ref(a|s)),
// one entry per factored head, and the personalized reward is w_p . phi.
// The state-value offset V*(p, s_1) cancels both in the pairwise loss and in
// per-step argmax decoding, so it is never stored.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pad/matrix.hpp"
#include "pad/mdp.hpp"
#include "pad/toylm.hpp"

namespace pad {

/// Ordered names of the m preference dimensions of an experiment.
class PreferenceSchema {
 public:
  explicit PreferenceSchema(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  // Throws kUnknownDimension.
  std::size_t index_of(const std::string& name) const;

  bool operator==(const PreferenceSchema&) const = default;

 private:
  std::vector<std::string> names_;
};

/// Multi-hot over the m dimensions; a non-zero entry marks an active
/// dimension and carries its signed intensity in [-1, 1].
struct PreferenceDescriptor {
  std::vector<double> intensity;

  static PreferenceDescriptor none(std::size_t m) { return {std::vector<double>(m, 0.0)}; }
  static PreferenceDescriptor from_names(const PreferenceSchema& schema, std::span<const std::string> active);

  std::size_t size() const noexcept { return intensity.size(); }
  bool empty() const;
  std::vector<std::size_t> active() const;

  bool operator==(const PreferenceDescriptor&) const = default;
};

struct PreferenceWeights {
  std::vector<double> w;

  std::size_t size() const noexcept { return w.size(); }
};

struct FeatureVector {
  std::vector<double> phi;

  std::size_t size() const noexcept { return phi.size(); }
};

/// Linear value head: w_p = matrix^T * multihot(p), matrix is m x d.
struct PreferenceHead {
  Matrix matrix;
  bool trainable = true;

  static PreferenceHead zeros(std::size_t m, std::size_t d) { return {Matrix(m, d), true}; }
  static PreferenceHead identity(std::size_t m);

  std::size_t input_dims() const noexcept { return matrix.rows(); }
  std::size_t output_dims() const noexcept { return matrix.cols(); }

  bool operator==(const PreferenceHead&) const = default;
};

struct PreferencePair {
  TokenSeq prompt;
  TokenSeq chosen;
  TokenSeq rejected;
  PreferenceDescriptor pref;

  bool operator==(const PreferencePair&) const = default;
};

// Stage reached by training: 0 fresh, 1 backbone trained, 2 head trained.
enum class TrainingStage : int { kFresh = 0, kBackbone = 1, kHead = 2 };

struct PersRM {
  FactoredLM backbone;
  FactoredLM reference;
  PreferenceHead head;
  double beta = 1.0;
  TrainingStage stage = TrainingStage::kFresh;

  // backbone <- reference <- base distribution, head zero-initialized.
  static PersRM from_reference(const FactoredLM& reference, std::size_t pref_dims, double beta);

  std::size_t dims() const noexcept { return backbone.dims(); }

  bool operator==(const PersRM&) const = default;
};

// Throws kDimMismatch unless backbone, reference and head agree on d.
void validate(const PersRM& model);

PreferenceWeights encode_preference(const PreferenceHead& head, const PreferenceDescriptor& p);

// Unscaled per-head log-ratios log pi_theta(a|s) - log pi_ref(a|s) for every
// token at s, as a d x |V| matrix. Shared by feature and decoding code.
Matrix log_ratio_table(const PersRM& model, const State& s);

FeatureVector token_feature(const PersRM& model, const State& s, TokenId a);
double token_reward(const PersRM& model, const PreferenceWeights& w, const State& s, TokenId a);

/// Sum of token features along y (the implicit-Q cumulative log-ratio).
FeatureVector sequence_feature_score(const PersRM& model, const TokenSeq& prompt, const TokenSeq& response);

// w . (cumulative feature through step t) for t = 1..|y|, i.e. the implicit
// Q*(p, s_t, a_t) - V*(p, s_1) at every step of the trajectory.
std::vector<double> implicit_q_offsets(const PersRM& model, const PreferenceWeights& w, const TokenSeq& prompt,
                                       const TokenSeq& response);

/// Bradley-Terry preference probability sigma(r_w - r_l).
double bt_probability(double r_chosen, double r_rejected);

// Source of w_p inside the loss: the head (stage 2, inference) or a vector
// fixed per pair (stage 1).
enum class WeightSource { kHead, kFixedOnes, kFixedUnit };

double persrm_loss(const PersRM& model, std::span<const PreferencePair> batch,
                   WeightSource source = WeightSource::kHead);

// Pairwise margin w_p . (score(y_w) - score(y_l)) of one pair.
double pair_margin(const PersRM& model, const PreferencePair& pair, WeightSource source = WeightSource::kHead);

enum class ParamBlock { kBackbone, kHead, kReference };

struct Gradient {
  ParamBlock block = ParamBlock::kBackbone;
  std::map<Context, Matrix> backbone;  // d x |V| per context, kBackbone only
  Matrix head;                         // m x d, kHead only
};

/// Analytic gradient of persrm_loss with respect to one parameter block.
Gradient persrm_grad(const PersRM& model, std::span<const PreferencePair> batch, ParamBlock wrt,
                     WeightSource source = WeightSource::kHead);

struct TrainConfig {
  double lr = 5.0;
  std::size_t epochs = 20;
  std::size_t batch_size = 0;  // 0: full batch
  std::uint64_t seed = 0;
  // How stage 1 fixes w_p. kFixedUnit uses the descriptor's multi-hot, which
  // is the basis vector e_j for a single-dimension preference.
  WeightSource stage1_weights = WeightSource::kFixedUnit;
};

struct LossRecord {
  int stage = 1;
  std::size_t epoch = 0;  // 0 is the loss before any update
  double loss = 0.0;
};

struct TrainResult {
  PersRM model;
  std::vector<LossRecord> history;
};

/// Stage 1: head frozen, w_p fixed, backbone trained. Requires a trainable backbone.
TrainResult train_stage1(PersRM model, std::span<const PreferencePair> data, const TrainConfig& cfg);

/// Stage 2: backbone frozen, only the head is trained. Requires stage 1.
TrainResult train_stage2(PersRM model, std::span<const PreferencePair> data, const TrainConfig& cfg);

// Checkpoint bundling backbone, reference, head, beta and stage.
std::string to_checkpoint(const PersRM& model);
PersRM persrm_from_checkpoint(const std::string& text);

}  // namespace pad
