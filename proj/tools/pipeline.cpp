#include "pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "pad/records.hpp"
#include "pad/toylm.hpp"

namespace pad::cli {

using nlohmann::json;

namespace {

constexpr const char* kGenerationsSchema = "pad.generations";
constexpr const char* kPromptsSchema = "pad.prompts";
constexpr const char* kCorpusSchema = "pad.corpus";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RecordHeader header_for(const RunConfig& cfg, const std::string& schema, std::uint64_t seed) {
  return RecordHeader{schema, kRecordSchemaVersion, seed, cfg.hash()};
}

// One comment line carrying the artifact triple, for tab-separated outputs.
std::string comment_header(const RunConfig& cfg, const std::string& schema, std::uint64_t seed) {
  return "# " + header_line(header_for(cfg, schema, seed)) + "\n";
}

// Adds the run triple to a checkpoint document; readers ignore it.
std::string stamp_checkpoint(const std::string& text, const RunConfig& cfg, std::uint64_t seed) {
  json j = json::parse(text);
  j["run"] = {{"seed", seed}, {"config_hash", cfg.hash()}};
  return j.dump() + "\n";
}

void require_file(const std::filesystem::path& p, const char* what) {
  if (!std::filesystem::exists(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

std::vector<TokenSeq> load_prompts(const std::filesystem::path& p) {
  require_file(p, "prompt file");
  std::vector<TokenSeq> prompts;
  for (auto& t : read_trajectories(read_file(p), kPromptsSchema).trajectories) prompts.push_back(std::move(t.prompt));
  return prompts;
}

std::vector<Trajectory> load_generations(const std::filesystem::path& p) {
  require_file(p, "generation file");
  return read_trajectories(read_file(p), kGenerationsSchema).trajectories;
}

struct Models {
  NGramLM lm;
  PersRM rm;
};

Models load_models(const RunPaths& paths) {
  require_file(paths.base_lm(), "base model checkpoint");
  require_file(paths.persrm(), "reward model checkpoint");
  return {ngram_from_checkpoint(read_file(paths.base_lm())), persrm_from_checkpoint(read_file(paths.persrm()))};
}

PreferenceDescriptor descriptor_of(const RunConfig& cfg, const std::vector<std::string>& names) {
  const PreferenceSchema schema = schema_of(cfg);
  if (names.empty()) return PreferenceDescriptor::none(schema.size());
  return PreferenceDescriptor::from_names(schema, names);
}

json preference_json(const RunConfig& cfg, const PreferenceDescriptor& p) {
  json j = json::object();
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.intensity[i] != 0.0) j[cfg.corpus.dim_names[i]] = p.intensity[i];
  return j;
}

json candidate_json(const ScoredCandidate& c) {
  return {{"token", c.token}, {"base_logprob", c.base_logprob}, {"guidance", c.guidance}, {"combined", c.combined}};
}

Trajectory base_generate(const NGramLM& lm, const TokenSeq& prompt, const DecodeConfig& dc, std::uint64_t seed) {
  if (dc.strategy == Strategy::kGreedy)
    return base_greedy_generate(lm, prompt, dc.max_new_tokens, dc.max_prompt_len);
  Rng rng(seed);
  return base_sample_generate(lm, prompt, dc.max_new_tokens, dc.temperature, rng, dc.max_prompt_len);
}

std::vector<LossRecord> parse_log(const std::string& text) {
  std::vector<LossRecord> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("stage", 0) == 0) continue;
    LossRecord r;
    std::istringstream fields(line);
    std::string stage, epoch, loss;
    if (!std::getline(fields, stage, '\t') || !std::getline(fields, epoch, '\t') || !std::getline(fields, loss, '\t'))
      throw Error(ErrorCode::kParse, "train log row: " + line);
    try {
      r.stage = std::stoi(stage);
      r.epoch = std::stoull(epoch);
      r.loss = std::stod(loss);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, "train log row: " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

std::string format_log(const RunConfig& cfg, const std::vector<LossRecord>& rows) {
  std::string out = comment_header(cfg, "pad.train_log", cfg.train_seed()) + "stage\tepoch\tloss\n";
  for (const auto& r : rows) out += std::to_string(r.stage) + "\t" + std::to_string(r.epoch) + "\t" + num(r.loss) + "\n";
  return out;
}

TrainConfig stage_config(const RunConfig& cfg, int stage) {
  TrainConfig tc;
  tc.lr = cfg.train.lr;
  tc.epochs = stage == 1 ? cfg.train.epochs_stage1 : cfg.train.epochs_stage2;
  tc.batch_size = cfg.train.batch_size;
  tc.seed = Rng::derive(cfg.train_seed(), static_cast<std::uint64_t>(stage));
  tc.stage1_weights = cfg.train.stage1_weights;
  return tc;
}

double mean_score(const StyleOracle& oracle, const std::vector<Trajectory>& runs, std::size_t dim) {
  if (runs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& t : runs) total += oracle.score(t.response, dim);
  return total / static_cast<double>(runs.size());
}

}  // namespace

SyntheticWorld world_of(const RunConfig& cfg) { return make_world(cfg.corpus); }

PreferenceSchema schema_of(const RunConfig& cfg) { return PreferenceSchema(cfg.corpus.dim_names); }

GenDataSummary cmd_gen_data(const RunConfig& cfg, std::ostream& out) {
  const RunPaths paths{cfg.out_dir};
  const SyntheticWorld world = world_of(cfg);
  const auto corpus = gen_corpus(cfg.corpus);
  const auto pairs = gen_pref_pairs(corpus, world.oracle, cfg.pairs);
  const auto prompts = gen_prompts(cfg.corpus, cfg.eval.heldout_prompts, RunConfig::kHeldoutPromptStream);

  std::vector<Trajectory> prompt_records;
  for (const auto& p : prompts) prompt_records.push_back({p, {}, false});

  write_file(paths.corpus(), write_trajectories(header_for(cfg, kCorpusSchema, cfg.corpus_seed()), corpus, kCorpusSchema));
  write_file(paths.pairs(), write_pairs(header_for(cfg, "pad.pairs", cfg.pairs_seed()), pairs, schema_of(cfg)));
  write_file(paths.prompts(),
             write_trajectories(header_for(cfg, kPromptsSchema, cfg.corpus_seed()), prompt_records, kPromptsSchema));

  out << "corpus sequences: " << corpus.size() << "\n"
      << "preference pairs: " << pairs.size() << "\n"
      << "held-out prompts: " << prompts.size() << "\n"
      << "written to " << paths.dir.string() << "\n";
  return {corpus.size(), pairs.size(), prompts.size()};
}

TrainStage parse_train_stage(const std::string& s) {
  if (s == "1") return TrainStage::kOne;
  if (s == "2") return TrainStage::kTwo;
  if (s == "all") return TrainStage::kAll;
  throw ConfigError("--stage must be 1, 2 or all");
}

std::vector<LossRecord> read_train_log(const std::filesystem::path& p) { return parse_log(read_file(p)); }

TrainSummary cmd_train(const RunConfig& cfg, TrainStage stage, std::ostream& out) {
  const RunPaths paths{cfg.out_dir};
  require_file(paths.pairs(), "pair file");
  const PreferenceSchema schema = schema_of(cfg);
  const auto pairs = read_pairs(read_file(paths.pairs()), schema).pairs;
  if (pairs.empty()) throw Error(ErrorCode::kEmptyBatch, "pair file has no records");

  std::vector<LossRecord> history;
  PersRM model = [&] {
    if (stage == TrainStage::kTwo) {
      // Without a stage-1 checkpoint the model is fresh and stage 2 refuses it.
      if (std::filesystem::exists(paths.persrm())) {
        if (std::filesystem::exists(paths.train_log()))
          for (const auto& r : read_train_log(paths.train_log()))
            if (r.stage == 1) history.push_back(r);
        return persrm_from_checkpoint(read_file(paths.persrm()));
      }
      const SyntheticWorld world = world_of(cfg);
      return PersRM::from_reference(FactoredLM(world.vocab, cfg.model.factored_order, schema.size()), schema.size(),
                                    cfg.model.beta);
    }
    require_file(paths.corpus(), "corpus file");
    const auto corpus = read_trajectories(read_file(paths.corpus()), kCorpusSchema).trajectories;
    const SyntheticWorld world = world_of(cfg);
    const NGramLM base = train_ngram(world.vocab, corpus, cfg.model.order, cfg.model.alpha);
    write_file(paths.base_lm(), stamp_checkpoint(to_checkpoint(base), cfg, cfg.corpus_seed()));
    const NGramLM ref_counts = train_ngram(world.vocab, corpus, cfg.model.factored_order, cfg.model.alpha);
    return PersRM::from_reference(FactoredLM::from_ngram(ref_counts, schema.size()), schema.size(), cfg.model.beta);
  }();

  if (stage == TrainStage::kOne || stage == TrainStage::kAll) {
    auto result = train_stage1(std::move(model), pairs, stage_config(cfg, 1));
    model = std::move(result.model);
    history.insert(history.end(), result.history.begin(), result.history.end());
    out << "stage 1: loss " << num(result.history.front().loss) << " -> " << num(result.history.back().loss) << "\n";
  }
  if (stage == TrainStage::kTwo || stage == TrainStage::kAll) {
    auto result = train_stage2(std::move(model), pairs, stage_config(cfg, 2));
    model = std::move(result.model);
    history.insert(history.end(), result.history.begin(), result.history.end());
    out << "stage 2: loss " << num(result.history.front().loss) << " -> " << num(result.history.back().loss) << "\n";
  }

  write_file(paths.persrm(), stamp_checkpoint(to_checkpoint(model), cfg, cfg.train_seed()));
  write_file(paths.train_log(), format_log(cfg, history));
  out << "checkpoint: " << paths.persrm().string() << "\n";
  return {std::move(history), model.stage};
}

DecodeSummary cmd_decode(const RunConfig& cfg, const DecodeRequest& req, std::ostream& out) {
  const RunPaths paths{cfg.out_dir};
  DecodeConfig dc = cfg.decode;
  if (req.beta) dc.beta = *req.beta;
  if (req.k) dc.k = *req.k;
  if (req.strategy) dc.strategy = parse_strategy(*req.strategy);
  if (req.temperature) dc.temperature = *req.temperature;
  if (req.seed) dc.seed = *req.seed;
  if (req.max_new_tokens) dc.max_new_tokens = *req.max_new_tokens;
  if (req.best_of_k_score) dc.best_of_k_score = parse_best_of_k_score(*req.best_of_k_score);
  dc.trace = req.trace;

  const PreferenceDescriptor pref = descriptor_of(cfg, req.preference);
  const auto prompts = load_prompts(req.prompt_file.empty() ? paths.prompts() : req.prompt_file);
  require_file(paths.base_lm(), "base model checkpoint");
  const NGramLM lm = ngram_from_checkpoint(read_file(paths.base_lm()));
  validate(dc, lm.vocab());
  std::optional<PersRM> rm;
  if (!req.base_only) {
    require_file(paths.persrm(), "reward model checkpoint");
    rm = persrm_from_checkpoint(read_file(paths.persrm()));
  }

  json trace_header = {{"schema", "pad.trace"},
                       {"schema_version", kRecordSchemaVersion},
                       {"seed", dc.seed},
                       {"config_hash", cfg.hash()},
                       {"beta", dc.beta},
                       {"k", dc.k},
                       {"strategy", strategy_name(dc.strategy)},
                       {"temperature", dc.temperature},
                       {"best_of_k_score", best_of_k_score_name(dc.best_of_k_score)},
                       {"base_only", req.base_only},
                       {"preference", preference_json(cfg, pref)}};
  std::string trace_text = trace_header.dump() + "\n";

  std::vector<Trajectory> generations;
  std::size_t steps = 0;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    DecodeConfig pc = dc;
    pc.seed = Rng::derive(dc.seed, i);
    if (req.base_only) {
      generations.push_back(base_generate(lm, prompts[i], pc, pc.seed));
      steps += generations.back().response.size();
      continue;
    }
    DecodeResult r = pad_generate(lm, *rm, pref, prompts[i], pc);
    steps += r.trajectory.response.size();
    if (dc.trace) {
      for (const auto& st : r.trace.steps) {
        json cands = json::array();
        for (const auto& c : st.candidates) cands.push_back(candidate_json(c));
        json rec = {{"prompt_index", i},          {"state_len", st.state_len}, {"candidates", std::move(cands)},
                    {"chosen", st.chosen},        {"oracle", st.oracle},
                    {"oracle_outside_topk", st.oracle_outside_topk}};
        trace_text += rec.dump() + "\n";
      }
      if (!r.trace.best_of_k.empty()) {
        json scored = json::array();
        for (const auto& s : r.trace.best_of_k) scored.push_back({{"response", s.response}, {"score", s.score}});
        json rec = {{"prompt_index", i}, {"best_of_k", std::move(scored)}};
        trace_text += rec.dump() + "\n";
      }
    }
    generations.push_back(std::move(r.trajectory));
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  DecodeSummary summary;
  summary.generations = req.output.empty() ? paths.dir / ("generations_" + req.label + ".jsonl") : req.output;
  summary.prompts = prompts.size();
  summary.seconds = seconds;
  summary.seconds_per_step = steps ? seconds / static_cast<double>(steps) : 0.0;
  write_file(summary.generations,
             write_trajectories(header_for(cfg, kGenerationsSchema, dc.seed), generations, kGenerationsSchema));
  if (dc.trace && !req.base_only) {
    summary.trace = paths.dir / ("trace_" + req.label + ".jsonl");
    write_file(summary.trace, trace_text);
  }
  // Wall-clock numbers are informational and kept out of reproducible artifacts.
  write_file(paths.dir / ("timing_" + req.label + ".tsv"),
             "prompts\tsteps\tseconds\tseconds_per_step\n" + std::to_string(prompts.size()) + "\t" +
                 std::to_string(steps) + "\t" + num(seconds) + "\t" + num(summary.seconds_per_step) + "\n");
  std::cerr << "decode " << req.label << ": " << prompts.size() << " prompts, " << steps << " steps, " << seconds
            << " s (" << summary.seconds_per_step * 1e6 << " us/step)\n";
  out << "generations: " << summary.generations.string() << "\n";
  if (!summary.trace.empty()) out << "trace: " << summary.trace.string() << "\n";
  return summary;
}

EvalReport cmd_eval(const RunConfig& cfg, const EvalRequest& req, std::ostream& out) {
  const RunPaths paths{cfg.out_dir};
  const auto a = load_generations(req.run_a);
  const auto b = load_generations(req.run_b);
  const SyntheticWorld world = world_of(cfg);
  const std::vector<std::string> dims = req.dims.empty() ? cfg.corpus.dim_names : req.dims;
  const EvalReport report = compare_runs(a, b, world.oracle, dims);

  write_file(paths.dir / ("eval_" + req.label + ".tsv"),
             comment_header(cfg, "pad.eval_table", cfg.seed) + report_table(report));
  write_file(paths.dir / ("eval_" + req.label + ".jsonl"),
             header_line(header_for(cfg, "pad.eval", cfg.seed)) + "\n" + report_summary_json(report) + "\n");
  out << report_table(report);
  return report;
}

std::filesystem::path cmd_sweep(const RunConfig& cfg, const SweepRequest& req, std::ostream& out) {
  if (req.parameter != "beta" && req.parameter != "k") throw ConfigError("--sweep must be beta or k");
  const RunPaths paths{cfg.out_dir};
  const Models models = load_models(paths);
  const SyntheticWorld world = world_of(cfg);
  const auto prompts = load_prompts(paths.prompts());
  const std::vector<std::string> names =
      req.preference.empty() ? std::vector<std::string>{cfg.corpus.dim_names.front()} : req.preference;
  const PreferenceDescriptor pref = descriptor_of(cfg, names);

  std::vector<double> values = req.values;
  if (values.empty()) {
    if (req.parameter == "beta")
      values = cfg.eval.sweep_betas;
    else
      for (std::size_t k : cfg.eval.sweep_ks) values.push_back(static_cast<double>(k));
  }

  std::vector<Trajectory> base;
  for (const auto& p : prompts) base.push_back(base_generate(models.lm, p, cfg.decode, cfg.decode.seed));

  std::string table = comment_header(cfg, "pad.sweep_" + req.parameter, cfg.decode.seed) + req.parameter;
  for (const auto& n : names) table += "\tscore:" + n;
  for (const auto& n : names) table += "\tbase:" + n;
  table += "\tdiversity\twin_rate\n";

  for (double v : values) {
    DecodeConfig dc = cfg.decode;
    if (req.parameter == "beta") {
      dc.beta = v;
    } else {
      if (v < 1.0 || v != static_cast<double>(static_cast<std::size_t>(v)))
        throw ConfigError("k sweep values must be positive integers");
      dc.k = static_cast<std::size_t>(v);
    }
    validate(dc, models.lm.vocab());
    std::vector<Trajectory> runs;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      DecodeConfig pc = dc;
      pc.seed = Rng::derive(dc.seed, i);
      runs.push_back(pad_generate(models.lm, models.rm, pref, prompts[i], pc).trajectory);
    }
    const EvalReport r = compare_runs(runs, base, world.oracle, names);
    table += num(v);
    for (const auto& n : names) table += "\t" + num(mean_score(world.oracle, runs, world.oracle.dim_index(n)));
    for (const auto& n : names) table += "\t" + num(mean_score(world.oracle, base, world.oracle.dim_index(n)));
    table += "\t" + num(r.diversity_a) + "\t" + num(r.win_rate) + "\n";
  }

  const auto path = paths.dir / ("sweep_" + req.parameter + ".tsv");
  write_file(path, table);
  out << table;
  return path;
}

}  // namespace pad::cli
