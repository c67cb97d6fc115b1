// pad: data generation, two-stage reward training, guided decoding,
// evaluation and theory verification driven by one JSON config.

#include <iostream>

#include <CLI11.hpp>

#include "pad/error.hpp"
#include "pipeline.hpp"

namespace {

using namespace pad::cli;

std::vector<std::string> split_names(const std::vector<std::string>& raw) {
  std::vector<std::string> names;
  for (const auto& item : raw) {
    std::size_t start = 0;
    while (start <= item.size()) {
      const std::size_t comma = item.find(',', start);
      const std::string name = item.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!name.empty()) names.push_back(name);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return names;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized decoding-time alignment on a synthetic token world"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON run config; built-in defaults when omitted")
      ->check(CLI::ExistingFile);
  std::string out_dir;
  app.add_option("-o,--out-dir", out_dir, "Output directory (overrides paths.out_dir and PAD_OUT_DIR)");

  auto* gen = app.add_subcommand("gen-data", "Write corpus, preference pairs and held-out prompts");

  auto* train = app.add_subcommand("train", "Train the reward model (stage 1 backbone, stage 2 head)");
  std::string stage = "all";
  train->add_option("--stage", stage, "1, 2 or all")->capture_default_str();

  auto* decode = app.add_subcommand("decode", "Generate responses for a prompt file");
  DecodeRequest dreq;
  std::vector<std::string> pref_raw;
  std::string prompt_file, output_file;
  decode->add_option("--prompts", prompt_file, "Prompt file (default: held-out prompts of the run)");
  decode->add_option("--pref", pref_raw, "Active preference dimensions, comma separated or repeated");
  decode->add_option("--beta", dreq.beta, "Guidance weight (config default 1.0)");
  decode->add_option("--k", dreq.k, "Candidate count (config default 10)");
  decode->add_option("--strategy", dreq.strategy, "greedy, stochastic or best_of_k");
  decode->add_option("--temperature", dreq.temperature, "Sampling temperature (config default 0.7)");
  decode->add_option("--seed", dreq.seed, "Decode seed (default derived from the run seed)");
  decode->add_option("--max-new-tokens", dreq.max_new_tokens, "Response length cap (config default 32)");
  decode->add_option("--best-of-k-score", dreq.best_of_k_score, "mean or sum (config default mean)")
      ->check(CLI::IsMember({"mean", "sum"}));
  decode->add_flag("--base-only", dreq.base_only, "Decode with the base model alone");
  decode->add_flag("--trace", dreq.trace, "Write per-step candidate traces");
  decode->add_option("--label", dreq.label, "Run label used in output file names")->capture_default_str();
  decode->add_option("--output", output_file, "Generation file (default: <out>/generations_<label>.jsonl)");

  auto* eval = app.add_subcommand("eval", "Compare two generation files, or sweep beta / k");
  EvalRequest ereq;
  SweepRequest sreq;
  std::string run_a, run_b, sweep;
  std::vector<std::string> dims_raw, eval_pref_raw;
  eval->add_option("run_a", run_a, "Generation file of run A");
  eval->add_option("run_b", run_b, "Generation file of run B");
  eval->add_option("--dims", dims_raw, "Dimensions judged (default: all)");
  eval->add_option("--label", ereq.label, "Report label")->capture_default_str();
  eval->add_option("--sweep", sweep, "Sensitivity sweep over beta or k instead of a comparison")
      ->check(CLI::IsMember({"beta", "k"}));
  eval->add_option("--values", sreq.values, "Sweep values (default: eval.sweep_betas / eval.sweep_ks)");
  eval->add_option("--pref", eval_pref_raw, "Preference for the sweep (default: first dimension)");

  auto* verify = app.add_subcommand("verify", "Run the property battery and the bound audit");
  VerifyRequest vreq;
  verify->add_option("--instances", vreq.instances, "Tabular instances for the bound audit (config default 500)");
  verify->add_option("--seed", vreq.seed, "Battery seed (default: run seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    RunConfig cfg = config_path.empty() ? config_from_json(nlohmann::json::object()) : load_config(config_path);
    apply_env_overrides(cfg);
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    if (*gen) {
      cmd_gen_data(cfg, std::cout);
    } else if (*train) {
      cmd_train(cfg, parse_train_stage(stage), std::cout);
    } else if (*decode) {
      dreq.preference = split_names(pref_raw);
      dreq.prompt_file = prompt_file;
      dreq.output = output_file;
      cmd_decode(cfg, dreq, std::cout);
    } else if (*eval) {
      if (!sweep.empty()) {
        sreq.parameter = sweep;
        sreq.preference = split_names(eval_pref_raw);
        cmd_sweep(cfg, sreq, std::cout);
      } else {
        if (run_a.empty() || run_b.empty()) {
          std::cerr << "eval needs run_a and run_b, or --sweep\n";
          return kUsage;
        }
        ereq.run_a = run_a;
        ereq.run_b = run_b;
        ereq.dims = split_names(dims_raw);
        cmd_eval(cfg, ereq, std::cout);
      }
    } else if (*verify) {
      if (!cmd_verify(cfg, vreq, std::cout).ok()) return kVerificationFailed;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const pad::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}
