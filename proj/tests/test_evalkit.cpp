#include <doctest.h>

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "oracles.hpp"
#include "pad/evalkit.hpp"
#include "pad/rng.hpp"
#include "support.hpp"

using namespace pad;

namespace {

StyleOracle small_oracle() { return StyleOracle({"polite", "verbose"}, {{1, 2}, {3}}); }

std::vector<Trajectory> random_run(Rng& rng, std::size_t n, const std::vector<TokenSeq>& prompts) {
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < n; ++i) {
    TokenSeq y(1 + rng.below(12));
    for (auto& t : y) t = static_cast<TokenId>(rng.below(8));
    out.push_back({prompts[i], y, false});
  }
  return out;
}

}  // namespace

TEST_CASE("diversity") {
  CHECK(diversity({1, 2, 3, 4, 5}) == 1.0);
  CHECK(diversity({7, 7, 7, 7, 7}) == 1.0 / 24.0);
  CHECK(diversity({}) == 0.0);
  CHECK(diversity({1, 2, 3}) == 0.0);
  CHECK(diversity({1, 2, 3, 4}) == 1.0);

  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSeq y(50);
    for (auto& t : y) t = static_cast<TokenId>(rng.below(1 + rng.below(6) + 1));
    const double d = diversity(y);
    CHECK(d == oracle::recount_diversity(y));
    CHECK(d > 0.0);
    CHECK(d <= 1.0);
  }
  TokenSeq distinct(20);
  std::iota(distinct.begin(), distinct.end(), TokenId{0});
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = distinct.size(); i > 1; --i) std::swap(distinct[i - 1], distinct[rng.below(i)]);
    CHECK(diversity(distinct) == 1.0);
  }
}

TEST_CASE("style_score") {
  const StyleOracle o = small_oracle();
  CHECK(style_score(o, {1, 2, 1, 1}, "polite") == 1.0);
  CHECK(style_score(o, {0, 4, 5}, "polite") == 0.0);
  CHECK(style_score(o, {}, "polite") == 0.0);
  // Hand count: polite markers at positions 0, 3, 7; verbose at 2 and 9.
  const TokenSeq y{1, 0, 3, 2, 5, 6, 0, 1, 4, 3};
  CHECK(style_score(o, y, "polite") == 3.0 / 10.0);
  CHECK(style_score(o, y, "verbose") == 2.0 / 10.0);
  CHECK(code_of([&] { style_score(o, y, "humor"); }) == ErrorCode::kUnknownDimension);

  // Repeating a sequence keeps the marker fraction.
  TokenSeq twice = y;
  twice.insert(twice.end(), y.begin(), y.end());
  CHECK(style_score(o, twice, "polite") == style_score(o, y, "polite"));

  const std::vector<double> both{1.0, -0.5};
  CHECK(o.weighted_score(y, both) == doctest::Approx((0.3 - 0.5 * 0.2) / 1.5));
  const std::vector<double> none{0.0, 0.0};
  CHECK(o.weighted_score(y, none) == 0.0);
}

TEST_CASE("compare_runs") {
  const StyleOracle o = small_oracle();
  const std::vector<std::string> dims{"polite", "verbose"};
  Rng rng(2);
  std::vector<TokenSeq> prompts;
  for (int i = 0; i < 40; ++i) prompts.push_back({static_cast<TokenId>(i % 5)});
  const auto a = random_run(rng, 40, prompts), b = random_run(rng, 40, prompts);

  SUBCASE("self comparison is all ties") {
    const auto r = compare_runs(a, a, o, dims);
    CHECK(r.win_rate == 0.5);
    CHECK(r.ties == 40);
  }
  SUBCASE("strict domination wins everything") {
    auto strong = a;
    for (auto& t : strong) t.response = {1, 3, 1, 3};
    auto weak = a;
    for (auto& t : weak) t.response = {0, 4, 5, 6};
    CHECK(compare_runs(strong, weak, o, dims).win_rate == 1.0);
    CHECK(compare_runs(weak, strong, o, dims).win_rate == 0.0);
  }
  SUBCASE("swapping the runs complements the win rate") {
    const auto ab = compare_runs(a, b, o, dims), ba = compare_runs(b, a, o, dims);
    CHECK(ab.win_rate + ba.win_rate == 1.0);
    CHECK(ab.wins == ba.losses);
  }
  SUBCASE("report matches a recomputation from raw trajectories") {
    const auto r = compare_runs(a, b, o, dims);
    std::size_t wins = 0, ties = 0;
    std::vector<double> ma(2, 0.0), mb(2, 0.0);
    double da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double sa = 0.0, sb = 0.0;
      for (std::size_t k = 0; k < 2; ++k) {
        const double x = o.score(a[i].response, k), y = o.score(b[i].response, k);
        ma[k] += x;
        mb[k] += y;
        sa += x;
        sb += y;
      }
      wins += sa > sb;
      ties += sa == sb;
      da += oracle::recount_diversity(a[i].response);
      db += oracle::recount_diversity(b[i].response);
    }
    CHECK(r.wins == wins);
    CHECK(r.ties == ties);
    CHECK(r.wins + r.ties + r.losses == r.count);
    CHECK(r.win_rate == doctest::Approx((wins + 0.5 * ties) / 40.0).epsilon(1e-15));
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(r.mean_score_a[k] == doctest::Approx(ma[k] / 40.0).epsilon(1e-14));
      CHECK(r.mean_score_b[k] == doctest::Approx(mb[k] / 40.0).epsilon(1e-14));
    }
    CHECK(r.diversity_a == doctest::Approx(da / 40.0).epsilon(1e-14));
    CHECK(r.diversity_b == doctest::Approx(db / 40.0).epsilon(1e-14));

    const auto j = nlohmann::json::parse(report_summary_json(r));
    CHECK(j.at("win_rate").get<double>() == r.win_rate);
    CHECK(j.at("wins").get<std::size_t>() == r.wins);
    const std::string table = report_table(r);
    CHECK(table.rfind("metric\trun_a\trun_b\n", 0) == 0);
    CHECK(table.find("style:polite\t") != std::string::npos);
    CHECK(table.find("win_rate\t") != std::string::npos);
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);
  }
  SUBCASE("errors") {
    const std::vector<Trajectory> shorter(a.begin(), a.end() - 1);
    CHECK(code_of([&] { compare_runs(a, shorter, o, dims); }) == ErrorCode::kLengthMismatch);
    auto shuffled = b;
    std::swap(shuffled[0], shuffled[1]);
    CHECK(code_of([&] { compare_runs(a, shuffled, o, dims); }) == ErrorCode::kLengthMismatch);
    const std::vector<std::string> unknown{"humor"};
    CHECK(code_of([&] { compare_runs(a, b, o, unknown); }) == ErrorCode::kUnknownDimension);
  }
}
