#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "pad/records.hpp"
#include "pad/rng.hpp"
#include "pipeline.hpp"

namespace pad::cli {

using nlohmann::json;

namespace {

enum Section : std::uint64_t { kCorpusStream = 1, kPairsStream = 2, kTrainStream = 3, kDecodeStream = 4 };

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

void read_range(const json& j, const char* key, std::size_t& lo, std::size_t& hi, const std::string& where) {
  std::vector<std::size_t> range;
  read(j, key, range, where);
  if (!j.contains(key)) return;
  if (range.size() != 2) throw ConfigError(where + "." + key + ": expected [min, max]");
  lo = range[0];
  hi = range[1];
}

std::string weights_name(WeightSource s) {
  switch (s) {
    case WeightSource::kFixedOnes:
      return "ones";
    case WeightSource::kFixedUnit:
      return "unit";
    case WeightSource::kHead:
      break;
  }
  throw ConfigError("stage-1 weights cannot come from the head");
}

WeightSource parse_weights(const std::string& name) {
  if (name == "ones") return WeightSource::kFixedOnes;
  if (name == "unit") return WeightSource::kFixedUnit;
  throw ConfigError("train.stage1_weights: expected \"unit\" or \"ones\", got \"" + name + "\"");
}

}  // namespace

std::uint64_t RunConfig::corpus_seed() const { return Rng::derive(seed, kCorpusStream); }
std::uint64_t RunConfig::pairs_seed() const { return Rng::derive(seed, kPairsStream); }
std::uint64_t RunConfig::train_seed() const { return Rng::derive(seed, kTrainStream); }
std::uint64_t RunConfig::decode_seed() const { return Rng::derive(seed, kDecodeStream); }

json RunConfig::to_json() const {
  return {
      {"seed", seed},
      {"paths", {{"out_dir", out_dir.string()}}},
      {"corpus",
       {{"vocab_size", corpus.vocab_size},
        {"dims", corpus.dim_names},
        {"marker_set_size", corpus.marker_set_size},
        {"num_prompts", corpus.num_prompts},
        {"responses_per_prompt", corpus.responses_per_prompt},
        {"prompt_len", {corpus.min_prompt_len, corpus.max_prompt_len}},
        {"response_len", {corpus.min_len, corpus.max_len}},
        {"intensity_max", corpus.intensity_max},
        {"marker_boost", corpus.marker_boost},
        {"noise_rate", corpus.noise_rate},
        {"branching", corpus.branching}}},
      {"pairs",
       {{"pairs_per_preference", pairs.pairs_per_preference},
        {"margin_threshold", pairs.margin_threshold},
        {"preferences", pairs.preferences},
        {"max_attempts_factor", pairs.max_attempts_factor}}},
      {"model",
       {{"order", model.order}, {"factored_order", model.factored_order}, {"alpha", model.alpha}, {"beta", model.beta}}},
      {"train",
       {{"lr", train.lr},
        {"epochs_stage1", train.epochs_stage1},
        {"epochs_stage2", train.epochs_stage2},
        {"batch_size", train.batch_size},
        {"stage1_weights", weights_name(train.stage1_weights)}}},
      {"decode",
       {{"beta", decode.beta},
        {"k", decode.k},
        {"strategy", strategy_name(decode.strategy)},
        {"temperature", decode.temperature},
        {"max_prompt_len", decode.max_prompt_len},
        {"max_new_tokens", decode.max_new_tokens},
        {"best_of_k_score", best_of_k_score_name(decode.best_of_k_score)}}},
      {"eval",
       {{"heldout_prompts", eval.heldout_prompts},
        {"sweep_betas", eval.sweep_betas},
        {"sweep_ks", eval.sweep_ks},
        {"verify_instances", eval.verify_instances}}},
  };
}

std::string RunConfig::hash() const {
  json j = to_json();
  j.erase("paths");
  return fnv1a_hex(j.dump());
}

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  cfg.decode.max_new_tokens = 32;
  check_keys(j, "config", {"seed", "paths", "corpus", "pairs", "model", "train", "decode", "eval"});
  read(j, "seed", cfg.seed, "config");

  if (j.contains("paths")) {
    const json& p = j.at("paths");
    check_keys(p, "paths", {"out_dir"});
    std::string dir = cfg.out_dir.string();
    read(p, "out_dir", dir, "paths");
    cfg.out_dir = dir;
  }
  if (j.contains("corpus")) {
    const json& c = j.at("corpus");
    check_keys(c, "corpus",
               {"vocab_size", "dims", "marker_set_size", "num_prompts", "responses_per_prompt", "prompt_len",
                "response_len", "intensity_max", "marker_boost", "noise_rate", "branching"});
    read(c, "vocab_size", cfg.corpus.vocab_size, "corpus");
    read(c, "dims", cfg.corpus.dim_names, "corpus");
    read(c, "marker_set_size", cfg.corpus.marker_set_size, "corpus");
    read(c, "num_prompts", cfg.corpus.num_prompts, "corpus");
    read(c, "responses_per_prompt", cfg.corpus.responses_per_prompt, "corpus");
    read_range(c, "prompt_len", cfg.corpus.min_prompt_len, cfg.corpus.max_prompt_len, "corpus");
    read_range(c, "response_len", cfg.corpus.min_len, cfg.corpus.max_len, "corpus");
    read(c, "intensity_max", cfg.corpus.intensity_max, "corpus");
    read(c, "marker_boost", cfg.corpus.marker_boost, "corpus");
    read(c, "noise_rate", cfg.corpus.noise_rate, "corpus");
    read(c, "branching", cfg.corpus.branching, "corpus");
  }
  if (j.contains("pairs")) {
    const json& p = j.at("pairs");
    check_keys(p, "pairs", {"pairs_per_preference", "margin_threshold", "preferences", "max_attempts_factor"});
    read(p, "pairs_per_preference", cfg.pairs.pairs_per_preference, "pairs");
    read(p, "margin_threshold", cfg.pairs.margin_threshold, "pairs");
    read(p, "preferences", cfg.pairs.preferences, "pairs");
    read(p, "max_attempts_factor", cfg.pairs.max_attempts_factor, "pairs");
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model", {"order", "factored_order", "alpha", "beta"});
    read(m, "order", cfg.model.order, "model");
    read(m, "factored_order", cfg.model.factored_order, "model");
    read(m, "alpha", cfg.model.alpha, "model");
    read(m, "beta", cfg.model.beta, "model");
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train", {"lr", "epochs_stage1", "epochs_stage2", "batch_size", "stage1_weights"});
    read(t, "lr", cfg.train.lr, "train");
    read(t, "epochs_stage1", cfg.train.epochs_stage1, "train");
    read(t, "epochs_stage2", cfg.train.epochs_stage2, "train");
    read(t, "batch_size", cfg.train.batch_size, "train");
    std::string weights = weights_name(cfg.train.stage1_weights);
    read(t, "stage1_weights", weights, "train");
    cfg.train.stage1_weights = parse_weights(weights);
  }
  if (j.contains("decode")) {
    const json& d = j.at("decode");
    check_keys(d, "decode",
               {"beta", "k", "strategy", "temperature", "max_prompt_len", "max_new_tokens", "best_of_k_score"});
    read(d, "beta", cfg.decode.beta, "decode");
    read(d, "k", cfg.decode.k, "decode");
    std::string strategy = strategy_name(cfg.decode.strategy);
    read(d, "strategy", strategy, "decode");
    try {
      cfg.decode.strategy = parse_strategy(strategy);
    } catch (const Error& e) {
      throw ConfigError(std::string("decode.strategy: ") + e.what());
    }
    read(d, "temperature", cfg.decode.temperature, "decode");
    read(d, "max_prompt_len", cfg.decode.max_prompt_len, "decode");
    read(d, "max_new_tokens", cfg.decode.max_new_tokens, "decode");
    std::string bok = best_of_k_score_name(cfg.decode.best_of_k_score);
    read(d, "best_of_k_score", bok, "decode");
    try {
      cfg.decode.best_of_k_score = parse_best_of_k_score(bok);
    } catch (const Error& e) {
      throw ConfigError(std::string("decode.best_of_k_score: ") + e.what());
    }
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, "eval", {"heldout_prompts", "sweep_betas", "sweep_ks", "verify_instances"});
    read(e, "heldout_prompts", cfg.eval.heldout_prompts, "eval");
    read(e, "sweep_betas", cfg.eval.sweep_betas, "eval");
    read(e, "sweep_ks", cfg.eval.sweep_ks, "eval");
    read(e, "verify_instances", cfg.eval.verify_instances, "eval");
  }

  cfg.corpus.seed = cfg.corpus_seed();
  cfg.pairs.seed = cfg.pairs_seed();
  cfg.decode.seed = cfg.decode_seed();
  try {
    validate(cfg.corpus);
    validate(cfg.pairs);
    validate(cfg.decode, make_world(cfg.corpus).vocab);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (cfg.model.order < 1 || cfg.model.factored_order < 1) throw ConfigError("model: orders must be >= 1");
  if (!(cfg.model.alpha > 0.0)) throw ConfigError("model.alpha must be > 0");
  if (!(cfg.model.beta > 0.0)) throw ConfigError("model.beta must be > 0");
  if (!(cfg.train.lr > 0.0)) throw ConfigError("train.lr must be > 0");
  for (const auto& pref : cfg.pairs.preferences)
    for (const auto& name : pref)
      if (std::find(cfg.corpus.dim_names.begin(), cfg.corpus.dim_names.end(), name) == cfg.corpus.dim_names.end())
        throw ConfigError("pairs.preferences: unknown dimension '" + name + "'");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* dir = std::getenv("PAD_OUT_DIR"); dir && *dir) cfg.out_dir = dir;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  if (ec) throw IoError("cannot create " + p.parent_path().string() + ": " + ec.message());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << content;
  out.flush();
  if (!out) throw IoError("write failed: " + p.string());
}

}  // namespace pad::cli
