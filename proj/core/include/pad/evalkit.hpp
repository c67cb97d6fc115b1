#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pad/mdp.hpp"

namespace pad {

/// prod_{n=2..4} unique_n / total_n. Sequences shorter than 4 score 0.
double diversity(const TokenSeq& y);

/// Synthetic per-dimension scorer: fraction of tokens drawn from the
/// dimension's marker set.
class StyleOracle {
 public:
  StyleOracle(std::vector<std::string> names, std::vector<std::vector<TokenId>> marker_sets);

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<std::vector<TokenId>>& marker_sets() const noexcept { return markers_; }
  std::size_t dim_index(const std::string& name) const;  // throws kUnknownDimension

  bool is_marker(std::size_t dim, TokenId t) const;
  double score(const TokenSeq& y, std::size_t dim) const;

  // Intensity-weighted mean over active dimensions:
  //   sum_j v_j * score_j / sum_j |v_j|, 0 when nothing is active.
  double weighted_score(const TokenSeq& y, std::span<const double> intensity) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<TokenId>> markers_;
  std::vector<std::vector<bool>> lookup_;
};

double style_score(const StyleOracle& oracle, const TokenSeq& y, const std::string& dim);

struct EvalReport {
  std::vector<std::string> dims;     // dimensions judged
  std::vector<double> mean_score_a;  // per dimension
  std::vector<double> mean_score_b;
  double diversity_a = 0.0;
  double diversity_b = 0.0;
  double win_rate = 0.0;  // for a
  std::size_t wins = 0, ties = 0, losses = 0, count = 0;
};

/// Paired comparison by prompt: a wins iff its mean active-dimension style
/// score is strictly higher; ties count half.
EvalReport compare_runs(std::span<const Trajectory> a, std::span<const Trajectory> b, const StyleOracle& oracle,
                        std::span<const std::string> dims);

// Tab-separated per-dimension table and a one-line JSON summary.
std::string report_table(const EvalReport& r);
std::string report_summary_json(const EvalReport& r);

}  // namespace pad
