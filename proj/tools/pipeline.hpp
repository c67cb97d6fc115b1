#pragma once

// Command implementations behind the `pad` CLI. Each command reads the run
// config, consumes and produces files under out_dir, and reports through the
// given streams. All artifacts except timing files are reproducible
// byte-for-byte from (config, seed).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pad/datagen.hpp"
#include "pad/error.hpp"
#include "pad/decoder.hpp"
#include "pad/evalkit.hpp"
#include "pad/persrm.hpp"

namespace pad::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigError = 2,
  kIoError = 3,
  kVerificationFailed = 4,
  kDataError = 5,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelSettings {
  std::size_t order = 3;           // base n-gram
  std::size_t factored_order = 1;  // reward backbone / reference
  double alpha = 0.5;
  double beta = 1.0;
};

struct TrainSettings {
  double lr = 5.0;
  std::size_t epochs_stage1 = 20;
  std::size_t epochs_stage2 = 20;
  std::size_t batch_size = 0;
  WeightSource stage1_weights = WeightSource::kFixedUnit;
};

struct EvalSettings {
  std::size_t heldout_prompts = 100;
  std::vector<double> sweep_betas = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<std::size_t> sweep_ks = {1, 2, 5, 10, 20};
  std::size_t verify_instances = 500;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::filesystem::path out_dir = "pad_run";
  CorpusSpec corpus;
  PairSpec pairs;
  ModelSettings model;
  TrainSettings train;
  DecodeConfig decode;
  EvalSettings eval;

  // Sub-seeds are derived from `seed` so one number pins the whole run.
  std::uint64_t corpus_seed() const;
  std::uint64_t pairs_seed() const;
  std::uint64_t train_seed() const;
  std::uint64_t decode_seed() const;
  static constexpr std::uint64_t kHeldoutPromptStream = 1;

  nlohmann::json to_json() const;
  std::string hash() const;  // FNV-1a of the canonical dump, out_dir excluded
};

RunConfig config_from_json(const nlohmann::json& j);  // throws ConfigError
RunConfig load_config(const std::filesystem::path& path);
// PAD_OUT_DIR, when set, replaces paths.out_dir.
void apply_env_overrides(RunConfig& cfg);

// Names of files under out_dir.
struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path corpus() const { return dir / "corpus.jsonl"; }
  std::filesystem::path pairs() const { return dir / "pairs.jsonl"; }
  std::filesystem::path prompts() const { return dir / "prompts.jsonl"; }
  std::filesystem::path base_lm() const { return dir / "base_lm.json"; }
  std::filesystem::path persrm() const { return dir / "persrm.json"; }
  std::filesystem::path train_log() const { return dir / "train_log.tsv"; }
  std::filesystem::path verify_report() const { return dir / "verify_report.jsonl"; }
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

struct GenDataSummary {
  std::size_t sequences = 0;
  std::size_t pairs = 0;
  std::size_t prompts = 0;
};
GenDataSummary cmd_gen_data(const RunConfig& cfg, std::ostream& out);

enum class TrainStage { kOne, kTwo, kAll };
TrainStage parse_train_stage(const std::string& s);

struct TrainSummary {
  std::vector<LossRecord> history;
  TrainingStage stage = TrainingStage::kFresh;
};
TrainSummary cmd_train(const RunConfig& cfg, TrainStage stage, std::ostream& out);

// Train-log rows ("stage\tepoch\tloss"), header lines skipped.
std::vector<LossRecord> read_train_log(const std::filesystem::path& p);

struct DecodeRequest {
  std::filesystem::path prompt_file;           // defaults to the held-out prompts
  std::vector<std::string> preference;         // dimension names; empty = none
  std::optional<double> beta;
  std::optional<std::size_t> k;
  std::optional<std::string> strategy;
  std::optional<double> temperature;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_new_tokens;
  std::optional<std::string> best_of_k_score;
  bool base_only = false;
  bool trace = false;
  std::string label = "run";
  std::filesystem::path output;  // defaults to out_dir/generations_<label>.jsonl
};

struct DecodeSummary {
  std::filesystem::path generations;
  std::filesystem::path trace;  // empty when tracing is off
  std::size_t prompts = 0;
  double seconds = 0.0;
  double seconds_per_step = 0.0;
};
DecodeSummary cmd_decode(const RunConfig& cfg, const DecodeRequest& req, std::ostream& out);

struct EvalRequest {
  std::filesystem::path run_a, run_b;
  std::vector<std::string> dims;  // default: every dimension
  std::string label = "report";
};
EvalReport cmd_eval(const RunConfig& cfg, const EvalRequest& req, std::ostream& out);

struct SweepRequest {
  std::string parameter;  // "beta" or "k"
  std::vector<double> values;  // default from config
  std::vector<std::string> preference;
};
std::filesystem::path cmd_sweep(const RunConfig& cfg, const SweepRequest& req, std::ostream& out);

struct VerifyRequest {
  std::optional<std::size_t> instances;
  std::optional<std::uint64_t> seed;
};

struct CheckResult {
  std::string name;
  bool asserted = true;  // false: informational only
  bool passed = true;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0;
  std::string detail;
};

struct VerifySummary {
  std::vector<CheckResult> checks;
  std::size_t instances = 0;
  std::size_t tight_bound_violations = 0;
  bool ok() const;
};
VerifySummary cmd_verify(const RunConfig& cfg, const VerifyRequest& req, std::ostream& out);

// Shared by decode and sweep.
SyntheticWorld world_of(const RunConfig& cfg);
PreferenceSchema schema_of(const RunConfig& cfg);

}  // namespace pad::cli
