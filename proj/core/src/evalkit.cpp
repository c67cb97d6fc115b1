#include "pad/evalkit.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "pad/error.hpp"

namespace pad {

double diversity(const TokenSeq& y) {
  if (y.size() < 4) return 0.0;
  double product = 1.0;
  for (std::size_t n = 2; n <= 4; ++n) {
    std::set<TokenSeq> unique;
    const std::size_t total = y.size() - n + 1;
    for (std::size_t i = 0; i < total; ++i)
      unique.emplace(y.begin() + static_cast<std::ptrdiff_t>(i), y.begin() + static_cast<std::ptrdiff_t>(i + n));
    product *= static_cast<double>(unique.size()) / static_cast<double>(total);
  }
  return product;
}

StyleOracle::StyleOracle(std::vector<std::string> names, std::vector<std::vector<TokenId>> marker_sets)
    : names_(std::move(names)), markers_(std::move(marker_sets)) {
  if (names_.size() != markers_.size()) throw Error(ErrorCode::kShapeMismatch, "one marker set per dimension");
  lookup_.resize(markers_.size());
  for (std::size_t d = 0; d < markers_.size(); ++d) {
    std::sort(markers_[d].begin(), markers_[d].end());
    for (TokenId t : markers_[d]) {
      if (lookup_[d].size() <= t) lookup_[d].resize(t + 1, false);
      lookup_[d][t] = true;
    }
  }
}

std::size_t StyleOracle::dim_index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(ErrorCode::kUnknownDimension, name);
  return static_cast<std::size_t>(it - names_.begin());
}

bool StyleOracle::is_marker(std::size_t dim, TokenId t) const {
  const auto& table = lookup_.at(dim);
  return t < table.size() && table[t];
}

double StyleOracle::score(const TokenSeq& y, std::size_t dim) const {
  if (dim >= markers_.size()) throw Error(ErrorCode::kUnknownDimension, "dimension index " + std::to_string(dim));
  if (y.empty()) return 0.0;
  std::size_t hits = 0;
  for (TokenId t : y) hits += is_marker(dim, t) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

double StyleOracle::weighted_score(const TokenSeq& y, std::span<const double> intensity) const {
  if (intensity.size() != markers_.size()) throw Error(ErrorCode::kDimMismatch, "intensity width");
  double num = 0.0, den = 0.0;
  for (std::size_t d = 0; d < intensity.size(); ++d) {
    if (intensity[d] == 0.0) continue;
    num += intensity[d] * score(y, d);
    den += std::abs(intensity[d]);
  }
  return den == 0.0 ? 0.0 : num / den;
}

double style_score(const StyleOracle& oracle, const TokenSeq& y, const std::string& dim) {
  return oracle.score(y, oracle.dim_index(dim));
}

EvalReport compare_runs(std::span<const Trajectory> a, std::span<const Trajectory> b, const StyleOracle& oracle,
                        std::span<const std::string> dims) {
  if (a.size() != b.size())
    throw Error(ErrorCode::kLengthMismatch,
                "runs have " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + " trajectories");
  if (dims.empty()) throw Error(ErrorCode::kBadArgument, "compare_runs needs at least one dimension");
  std::vector<std::size_t> idx;
  for (const std::string& d : dims) idx.push_back(oracle.dim_index(d));

  EvalReport r;
  r.dims.assign(dims.begin(), dims.end());
  r.mean_score_a.assign(dims.size(), 0.0);
  r.mean_score_b.assign(dims.size(), 0.0);
  r.count = a.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].prompt != b[i].prompt) throw Error(ErrorCode::kLengthMismatch, "runs are not paired by prompt");
    double sa = 0.0, sb = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double x = oracle.score(a[i].response, idx[k]);
      const double y = oracle.score(b[i].response, idx[k]);
      r.mean_score_a[k] += x;
      r.mean_score_b[k] += y;
      sa += x;
      sb += y;
    }
    if (sa > sb) ++r.wins;
    else if (sa < sb) ++r.losses;
    else ++r.ties;
    r.diversity_a += diversity(a[i].response);
    r.diversity_b += diversity(b[i].response);
  }
  if (r.count > 0) {
    const double n = static_cast<double>(r.count);
    for (double& x : r.mean_score_a) x /= n;
    for (double& x : r.mean_score_b) x /= n;
    r.diversity_a /= n;
    r.diversity_b /= n;
    r.win_rate = (static_cast<double>(r.wins) + 0.5 * static_cast<double>(r.ties)) / n;
  } else {
    r.win_rate = 0.5;
  }
  return r;
}

namespace {

std::string num(double x) {
  // Shortest round-trip text, same as the JSON writer uses.
  return detail::json(x).dump();
}

}  // namespace

std::string report_table(const EvalReport& r) {
  std::ostringstream os;
  os << "metric\trun_a\trun_b\n";
  for (std::size_t k = 0; k < r.dims.size(); ++k)
    os << "style:" << r.dims[k] << '\t' << num(r.mean_score_a[k]) << '\t' << num(r.mean_score_b[k]) << '\n';
  os << "diversity\t" << num(r.diversity_a) << '\t' << num(r.diversity_b) << '\n';
  os << "win_rate\t" << num(r.win_rate) << '\t' << num(1.0 - r.win_rate) << '\n';
  return os.str();
}

std::string report_summary_json(const EvalReport& r) {
  detail::json j = {{"dims", r.dims},
                    {"mean_score_a", r.mean_score_a},
                    {"mean_score_b", r.mean_score_b},
                    {"diversity_a", r.diversity_a},
                    {"diversity_b", r.diversity_b},
                    {"win_rate", r.win_rate},
                    {"wins", r.wins},
                    {"ties", r.ties},
                    {"losses", r.losses},
                    {"count", r.count}};
  return j.dump();
}

}  // namespace pad
