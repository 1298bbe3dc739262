#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cofcot/backend.hpp"
#include "cofcot/dataset.hpp"
#include "cofcot/metrics.hpp"
#include "cofcot/pipeline.hpp"
#include "cofcot/strategies.hpp"

namespace cofcot {

enum class BackendMode { Live, Record, Replay, Mock };

std::string_view to_string(BackendMode m);
BackendMode backend_mode_from_string(std::string_view s);

enum class SlotScorer { Pairs, Bio };

struct RunConfig {
  // dataset
  std::string dataset_path;
  DataFormat dataset_format = DataFormat::NativeJsonl;
  // split; test_domains has no default
  std::vector<std::string> test_domains;
  std::vector<std::string> train_domains;  // empty: every other domain
  bool filter_vocab_to_test_domains = false;
  // sample
  std::size_t sample_n = 200;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  // fewshot; demonstrations are drawn once and shared by every seed
  std::size_t k = 5;
  DemoMode mode = DemoMode::DomainDifferent;
  std::uint64_t fewshot_seed = 0;
  // strategy
  Strategy strategy = Strategy::CofCot;
  DecodingConfig decoding = default_decoding(Strategy::CofCot);
  // plan (COF_COT only)
  std::string plan_order = "cof";  // cof | foc | random
  std::set<StepId> drop;
  bool condition_domain = true;
  StructureKind structure_kind = StructureKind::Amr;
  bool llm_step5 = false;
  // backend; keys come from the environment only
  BackendMode backend = BackendMode::Live;
  std::string replay_path;
  BackendMode record_inner = BackendMode::Live;  // what record mode forwards to: live or mock
  double mock_noise = 0.15;
  HttpConfig http;  // base_url and api_key are never read from or written to config
  // scoring
  SlotScorer slot_scorer = SlotScorer::Pairs;
  // execution
  int parallelism = 4;
  std::string template_dir;  // empty: shipped templates
  std::string out_dir = "runs/latest";
};

nlohmann::json to_json(const RunConfig& c);
// Missing keys take defaults; unknown keys and wrong types throw
// InvalidConfig. Relative paths are resolved against base_dir. When the
// strategy block omits n / aggregator, the strategy's defaults apply.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::string& path);

// Throws InvalidConfig: empty seed list or test domains, sample.n == 0,
// missing dataset or replay file, plan given for a baseline, and so on.
void validate_run_config(const RunConfig& c);

// SHA-256 over the canonical JSON of everything that affects results
// (output location and parallelism excluded).
std::string config_hash(const RunConfig& c);

// "cof", "foc+no_domain", "drop3+drop4", "random+llm_step5", "dp", ...
void apply_plan_flag(RunConfig& c, const std::string& spec);

PipelinePlan plan_for(const RunConfig& c);

// Backend for the configured mode. Mock and record-from-mock answer with a
// SimulatedLlm over `dataset`.
std::shared_ptr<Backend> make_backend(const RunConfig& c, const Dataset& dataset);

// Loaded data, split, per-seed test sets, demonstrations and plan.
struct RunContext {
  RunConfig config;
  Dataset dataset;
  Split split;
  std::vector<TestSet> test_sets;
  PromptInputs prompt_inputs;
  PipelinePlan plan;
};

RunContext prepare_run(const RunConfig& c);

// One example under the configured strategy; per-example errors other than
// AuthFailure become result.failure.
PipelineResult run_one(const RunContext& ctx, const Example& ex, Backend& backend);

// Runs every example; results are in input order regardless of scheduling.
// parallelism <= 1 is the serial reference path.
std::vector<PipelineResult> run_batch(const RunContext& ctx, const std::vector<Example>& examples, Backend& backend,
                                      int parallelism);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<Example> examples;
  std::vector<PipelineResult> results;
  MetricsReport metrics;
  std::size_t n_failures = 0;
};

struct RunOutcome {
  std::string config_hash;
  std::vector<SeedOutcome> seeds;
  SeedAggregate aggregate;
  std::string table;
};

MetricsReport score_results(const RunConfig& c, const std::vector<Example>& examples,
                            const std::vector<PipelineResult>& results);

// Seeds run one after another; examples inside a seed run concurrently.
RunOutcome run_experiment(const RunContext& ctx, Backend& backend);

// Writes config.json, results.jsonl, table.txt, traces.jsonl and
// predictions.jsonl into c.out_dir. Throws WriteFailure.
void write_outputs(const RunConfig& c, const RunOutcome& outcome);

// Predictions file produced by write_outputs (or any JSONL with "gold" and
// "prediction" Logic Form strings; "prediction" may be null). Optional
// "utterance" enables the BIO scorer.
struct ScoredFile {
  MetricsReport metrics;
  std::optional<double> bio_slot_f1;
  std::size_t n_unparseable_predictions = 0;
};
ScoredFile score_predictions_file(const std::string& path);

// Deterministic stand-in for an LLM, driven by the gold labels of a dataset.
// It finds the query utterance in the prompt (last "Utterance: " line),
// detects the requested output from the final "Output (...):" cue, and
// answers from the gold annotations. With probability `noise` an
// (utterance, output) pair is systematically wrong in every sample, and
// independently each sample is corrupted with probability `noise`. All
// draws are hashes of the request, so answers are a pure function of it.
class SimulatedLlm : public Backend {
 public:
  SimulatedLlm(const std::vector<Example>& examples, double noise);
  CompletionResponse complete(const CompletionRequest& req) override;

 private:
  std::map<std::string, Example> by_utterance_;
  std::map<std::string, std::vector<std::string>> domain_intents_;
  std::map<std::string, std::vector<std::string>> domain_slot_types_;
  double noise_;
};

}  // namespace cofcot
