#include "pad/toylm.hpp"

#include <cmath>

#include "json_util.hpp"
#include "pad/error.hpp"

namespace pad {

using detail::json;

Context context_of(const Vocab& vocab, std::size_t order, const TokenSeq& prompt, const TokenSeq& response,
                   std::size_t t) {
  const std::size_t width = order - 1;
  Context ctx(width, padding_token(vocab));
  // History is prompt ++ response[0:t]; fill the context from its tail.
  std::size_t filled = 0;
  for (std::size_t i = t; i > 0 && filled < width; --i, ++filled) ctx[width - 1 - filled] = response[i - 1];
  for (std::size_t i = prompt.size(); i > 0 && filled < width; --i, ++filled) ctx[width - 1 - filled] = prompt[i - 1];
  return ctx;
}

Context context_of(const Vocab& vocab, std::size_t order, const State& s) {
  return context_of(vocab, order, s.prompt, s.generated, s.generated.size());
}

// ---------------------------------------------------------------- NGramLM

NGramLM::NGramLM(Vocab vocab, std::size_t order, double alpha)
    : vocab_(std::move(vocab)), order_(order), alpha_(alpha) {
  if (order_ < 1) throw Error(ErrorCode::kBadArgument, "n-gram order must be >= 1");
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw Error(ErrorCode::kBadArgument, "alpha must be > 0");
}

void NGramLM::add_count(const Context& ctx, TokenId next, std::uint64_t n) {
  if (ctx.size() != order_ - 1) throw Error(ErrorCode::kShapeMismatch, "context width");
  if (!vocab_.contains(next)) throw Error(ErrorCode::kBadToken, "n-gram target " + std::to_string(next));
  auto [it, inserted] = counts_.try_emplace(ctx);
  if (inserted) it->second.assign(vocab_.size() + 1, 0);  // last slot holds the context total
  it->second[next] += n;
  it->second.back() += n;
}

std::uint64_t NGramLM::count(const Context& ctx, TokenId next) const {
  auto it = counts_.find(ctx);
  return it == counts_.end() ? 0 : it->second[next];
}

std::uint64_t NGramLM::total(const Context& ctx) const {
  auto it = counts_.find(ctx);
  return it == counts_.end() ? 0 : it->second.back();
}

std::vector<double> NGramLM::logprobs(const Context& ctx) const {
  const std::size_t v = vocab_.size();
  std::vector<double> out(v);
  auto it = counts_.find(ctx);
  if (it == counts_.end()) {
    const double uniform = -std::log(static_cast<double>(v));
    std::fill(out.begin(), out.end(), uniform);
    return out;
  }
  const auto& row = it->second;
  const double log_denom = std::log(static_cast<double>(row.back()) + static_cast<double>(v) * alpha_);
  for (std::size_t a = 0; a < v; ++a) out[a] = std::log(static_cast<double>(row[a]) + alpha_) - log_denom;
  return out;
}

NGramLM train_ngram(const Vocab& vocab, std::span<const Trajectory> corpus, std::size_t order, double alpha) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "train_ngram needs at least one sequence");
  NGramLM lm(vocab, order, alpha);
  for (const Trajectory& t : corpus) {
    validate_state(vocab, State{t.prompt, t.response});
    for (std::size_t i = 0; i < t.response.size(); ++i)
      lm.add_count(context_of(vocab, order, t.prompt, t.response, i), t.response[i]);
  }
  return lm;
}

std::vector<double> lm_logprobs(const NGramLM& lm, const State& s) {
  return lm.logprobs(context_of(lm.vocab(), lm.order(), s));
}

// ------------------------------------------------------------- FactoredLM

FactoredLM::FactoredLM(Vocab vocab, std::size_t order, std::size_t dims)
    : vocab_(std::move(vocab)), order_(order), dims_(dims) {
  if (order_ < 1) throw Error(ErrorCode::kBadArgument, "factored order must be >= 1");
  if (dims_ < 1) throw Error(ErrorCode::kBadArgument, "factored model needs d >= 1");
}

FactoredLM FactoredLM::from_ngram(const NGramLM& lm, std::size_t dims) {
  FactoredLM f(lm.vocab(), lm.order(), dims);
  for (const auto& [ctx, _] : lm.counts()) {
    const std::vector<double> lp = lm.logprobs(ctx);
    Matrix m(dims, lm.vocab().size());
    for (std::size_t j = 0; j < dims; ++j) std::copy(lp.begin(), lp.end(), m.row(j).begin());
    f.table_.emplace(ctx, std::move(m));
  }
  return f;
}

const Matrix* FactoredLM::find_logits(const Context& ctx) const {
  auto it = table_.find(ctx);
  return it == table_.end() ? nullptr : &it->second;
}

Matrix& FactoredLM::mutable_logits(const Context& ctx) {
  if (frozen_) throw Error(ErrorCode::kFrozenParameters, "factored model is frozen");
  if (ctx.size() != order_ - 1) throw Error(ErrorCode::kShapeMismatch, "context width");
  auto [it, _] = table_.try_emplace(ctx, dims_, vocab_.size(), 0.0);
  return it->second;
}

LogProbMatrix FactoredLM::logprobs(const Context& ctx) const {
  LogProbMatrix out{Matrix(dims_, vocab_.size())};
  if (const Matrix* logits = find_logits(ctx)) {
    for (std::size_t j = 0; j < dims_; ++j) log_softmax(logits->row(j), out.values.row(j));
  } else {
    std::fill(out.values.data().begin(), out.values.data().end(), -std::log(static_cast<double>(vocab_.size())));
  }
  return out;
}

LogProbMatrix factored_logprobs(const FactoredLM& f, const State& s) { return f.logprobs(f.context(s)); }

FactoredLM clone_frozen(const FactoredLM& f) {
  FactoredLM copy = f;
  copy.freeze();
  return copy;
}

// ------------------------------------------------------------ checkpoints

std::string to_checkpoint(const NGramLM& lm) {
  json table = json::array();
  for (const auto& [ctx, row] : lm.counts()) {
    json sparse = json::array();
    for (std::size_t a = 0; a + 1 < row.size(); ++a)
      if (row[a]) sparse.push_back({a, row[a]});
    table.push_back({{"context", ctx}, {"counts", std::move(sparse)}});
  }
  json j = {{"schema", "pad.ngram"},
            {"schema_version", kCheckpointSchemaVersion},
            {"vocab", detail::vocab_to_json(lm.vocab())},
            {"order", lm.order()},
            {"alpha", lm.alpha()},
            {"table", std::move(table)}};
  return j.dump() + "\n";
}

NGramLM ngram_from_checkpoint(const std::string& text) {
  const json j = detail::parse_json(text, "n-gram checkpoint");
  detail::expect_schema(j, "pad.ngram", kCheckpointSchemaVersion);
  return detail::guarded("n-gram checkpoint", [&] {
    NGramLM lm(detail::vocab_from_json(j.at("vocab")), j.at("order").get<std::size_t>(), j.at("alpha").get<double>());
    for (const json& e : j.at("table")) {
      const auto ctx = e.at("context").get<Context>();
      for (const json& c : e.at("counts")) lm.add_count(ctx, c.at(0).get<TokenId>(), c.at(1).get<std::uint64_t>());
    }
    return lm;
  });
}

namespace {

json factored_json(const FactoredLM& f) {
  json table = json::array();
  for (const auto& [ctx, m] : f.table()) {
    json rows = json::array();
    for (std::size_t j = 0; j < m.rows(); ++j) rows.push_back(std::vector<double>(m.row(j).begin(), m.row(j).end()));
    table.push_back({{"context", ctx}, {"logits", std::move(rows)}});
  }
  return {{"schema", "pad.factored"},
          {"schema_version", kCheckpointSchemaVersion},
          {"vocab", detail::vocab_to_json(f.vocab())},
          {"order", f.order()},
          {"dims", f.dims()},
          {"frozen", f.frozen()},
          {"table", std::move(table)}};
}

FactoredLM factored_from_json(const json& j) {
  detail::expect_schema(j, "pad.factored", kCheckpointSchemaVersion);
  return detail::guarded("factored checkpoint", [&] {
    FactoredLM f(detail::vocab_from_json(j.at("vocab")), j.at("order").get<std::size_t>(),
                 j.at("dims").get<std::size_t>());
    for (const json& e : j.at("table")) {
      Matrix& m = f.mutable_logits(e.at("context").get<Context>());
      const json& rows = e.at("logits");
      if (rows.size() != f.dims()) throw Error(ErrorCode::kShapeMismatch, "logit rows != dims");
      for (std::size_t r = 0; r < f.dims(); ++r) {
        const auto values = rows.at(r).get<std::vector<double>>();
        if (values.size() != f.vocab().size()) throw Error(ErrorCode::kShapeMismatch, "logit row width != |V|");
        std::copy(values.begin(), values.end(), m.row(r).begin());
      }
    }
    if (j.at("frozen").get<bool>()) f.freeze();
    return f;
  });
}

}  // namespace

std::string to_checkpoint(const FactoredLM& f) { return factored_json(f).dump() + "\n"; }

FactoredLM factored_from_checkpoint(const std::string& text) {
  return factored_from_json(detail::parse_json(text, "factored checkpoint"));
}

namespace detail {
// Used by the PersRM bundle.
json factored_to_json_value(const FactoredLM& f) { return factored_json(f); }
FactoredLM factored_from_json_value(const json& j) { return factored_from_json(j); }
}  // namespace detail

}  // namespace pad
