// cofcot: experiment driver.
//   cofcot run --config demo/config.json [--strategy sc_cot] [--plan foc+no_domain] [--backend replay] ...
//   cofcot score runs/latest/predictions.jsonl
//   cofcot validate-data --data data.tsv --format mtop_tsv
//   cofcot render-prompts --config demo/config.json --limit 2

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "cofcot/experiment.hpp"
#include "cofcot/text.hpp"

using namespace cofcot;

namespace {

struct Overrides {
  std::string config;
  std::string strategy;
  std::string plan;
  std::vector<std::uint64_t> seeds;
  int k = -1;
  std::string mode;
  std::string backend;
  std::string replay;
  std::string out;
  int parallelism = 0;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--strategy", o.strategy, "DIRECT, COT, SC_COT, COMPLEX_COT, LEAST_TO_MOST, PLAN_AND_SOLVE, COF_COT");
  cmd->add_option("--plan", o.plan, "cof|foc|random, no_domain, drop1..drop4, llm_step5, amr|dp|cp; join with '+'");
  cmd->add_option("--seed", o.seeds, "Test-set seed (repeatable; replaces sample.seeds)");
  cmd->add_option("--k", o.k, "Number of demonstrations")->check(CLI::NonNegativeNumber);
  cmd->add_option("--mode", o.mode, "domain_different or domain_similar");
  cmd->add_option("--backend", o.backend, "live, record, replay or mock");
  cmd->add_option("--replay", o.replay, "Replay archive path (record/replay)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("-j,--parallelism", o.parallelism, "Concurrent examples")->check(CLI::PositiveNumber);
}

RunConfig resolve_config(const Overrides& o) {
  RunConfig c = load_run_config(o.config);
  if (!o.strategy.empty()) {
    const Strategy s = strategy_from_string(o.strategy);
    if (s != c.strategy) {
      // A different strategy brings its own decoding defaults; model,
      // temperature and max_tokens from the file still apply.
      DecodingConfig d = default_decoding(s);
      d.model = c.decoding.model;
      d.temperature = c.decoding.temperature;
      d.max_tokens = c.decoding.max_tokens;
      c.decoding = d;
      c.strategy = s;
    }
  }
  if (!o.plan.empty()) apply_plan_flag(c, o.plan);
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (o.k >= 0) c.k = static_cast<std::size_t>(o.k);
  if (!o.mode.empty()) c.mode = demo_mode_from_string(o.mode);
  if (!o.backend.empty()) c.backend = backend_mode_from_string(o.backend);
  if (!o.replay.empty()) c.replay_path = o.replay;
  if (!o.out.empty()) c.out_dir = o.out;
  if (o.parallelism > 0) c.parallelism = o.parallelism;
  validate_run_config(c);
  return c;
}

int cmd_run(const Overrides& o) {
  const RunConfig c = resolve_config(o);
  const RunContext ctx = prepare_run(c);
  auto backend = make_backend(c, ctx.dataset);
  const RunOutcome outcome = run_experiment(ctx, *backend);
  write_outputs(c, outcome);
  std::cout << outcome.table;
  for (const auto& so : outcome.seeds) {
    std::cout << "seed " << so.seed << ": " << so.examples.size() << " examples, " << so.n_failures << " failures\n";
  }
  std::cout << "config hash " << outcome.config_hash << "\n";
  std::cout << "outputs in " << c.out_dir << "\n";
  return 0;
}

int cmd_score(const std::string& path, bool as_json) {
  const ScoredFile s = score_predictions_file(path);
  if (as_json) {
    nlohmann::json j = to_json(s.metrics);
    j["bio_slot_f1"] = s.bio_slot_f1 ? nlohmann::json(*s.bio_slot_f1) : nlohmann::json();
    j["n_unparseable_predictions"] = s.n_unparseable_predictions;
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::printf("examples         %zu\n", s.metrics.n_examples);
  std::printf("intent accuracy  %.4f\n", s.metrics.intent_accuracy);
  std::printf("slot F1          %.4f\n", s.metrics.slot_f1);
  std::printf("frame accuracy   %.4f\n", s.metrics.frame_accuracy);
  std::printf("exact match      %.4f\n", s.metrics.exact_match);
  if (s.bio_slot_f1) std::printf("slot F1 (BIO)    %.4f\n", *s.bio_slot_f1);
  if (s.n_unparseable_predictions) std::printf("unparseable predictions: %zu\n", s.n_unparseable_predictions);
  return 0;
}

int cmd_validate_data(const std::string& path, const std::string& format, bool as_json) {
  const Dataset ds = load_dataset(path, data_format_from_string(format));
  const DatasetStats& s = ds.stats;
  if (as_json) {
    std::cout << nlohmann::json{{"n_records", s.n_records},
                                {"n_examples", ds.examples.size()},
                                {"n_domains", s.n_domains},
                                {"n_intents", s.n_intents},
                                {"n_slot_types", s.n_slot_types},
                                {"sentence_length_mean", s.sentence_length_mean},
                                {"sentence_length_std", s.sentence_length_std},
                                {"slots_per_sample_mean", s.slots_per_sample_mean},
                                {"slots_per_sample_std", s.slots_per_sample_std},
                                {"n_nested_skipped", ds.n_nested_skipped},
                                {"n_locale_skipped", ds.n_locale_skipped}}
                     .dump(2)
              << "\n";
    return 0;
  }
  std::size_t annotated = 0;
  for (const auto& ex : ds.examples) annotated += ex.step_annotations ? 1 : 0;
  std::printf("records            %zu\n", s.n_records);
  std::printf("usable examples    %zu (%zu with step annotations)\n", ds.examples.size(), annotated);
  std::printf("domains            %zu\n", s.n_domains);
  std::printf("intents            %zu\n", s.n_intents);
  std::printf("slot types         %zu\n", s.n_slot_types);
  std::printf("sentence length    %.2f ± %.2f\n", s.sentence_length_mean, s.sentence_length_std);
  std::printf("slots per sample   %.2f ± %.2f\n", s.slots_per_sample_mean, s.slots_per_sample_std);
  if (ds.n_nested_skipped) std::printf("nested forms skipped   %zu\n", ds.n_nested_skipped);
  if (ds.n_locale_skipped) std::printf("non-English skipped    %zu\n", ds.n_locale_skipped);
  std::printf("domains: %s\n", text::join({ds.vocab.domains.begin(), ds.vocab.domains.end()}, ", ").c_str());
  return 0;
}

int cmd_render_prompts(const Overrides& o, std::size_t limit) {
  const RunConfig c = resolve_config(o);
  const RunContext ctx = prepare_run(c);
  const auto& examples = ctx.test_sets.front().examples;
  for (std::size_t i = 0; i < std::min(limit, examples.size()); ++i) {
    const Example& ex = examples[i];
    if (c.strategy == Strategy::CofCot) {
      const auto prompts = dry_run_prompts(ex, ctx.plan, ctx.prompt_inputs);
      for (const auto& [step, prompt] : prompts) {
        std::cout << "===== " << ex.id << " " << to_string(step) << " =====\n" << prompt << "\n";
      }
      if (!ctx.plan.llm_logic_form) {
        std::cout << "===== " << ex.id << " GEN_LOGIC_FORM =====\n(assembled from GEN_INTENT and GEN_SLOT_PAIRS)\n\n";
      }
    } else {
      std::cout << "===== " << ex.id << " " << to_string(c.strategy) << " =====\n"
                << build_prompt(c.strategy, ex, ctx.prompt_inputs) << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CoF-CoT experiment harness"};
  app.require_subcommand(1);

  Overrides run_o;
  auto* run = app.add_subcommand("run", "Run a strategy over every seed test set and score it");
  add_override_flags(run, run_o);

  std::string score_path;
  bool score_json = false;
  auto* score = app.add_subcommand("score", "Score a predictions JSONL file");
  score->add_option("predictions", score_path, "JSONL with gold/prediction fields")->required()->check(CLI::ExistingFile);
  score->add_flag("--json", score_json, "Print JSON");

  std::string data_path, data_format = "native_jsonl";
  bool data_json = false;
  auto* validate = app.add_subcommand("validate-data", "Load a dataset and print its statistics");
  validate->add_option("--data", data_path, "Dataset file")->required()->check(CLI::ExistingFile);
  validate->add_option("--format", data_format, "native_jsonl, mtop_tsv or massive_jsonl");
  validate->add_flag("--json", data_json, "Print JSON");

  Overrides render_o;
  std::size_t limit = 1;
  auto* render = app.add_subcommand("render-prompts", "Print the prompts a run would send, without a backend");
  add_override_flags(render, render_o);
  render->add_option("--limit", limit, "Examples to render (from the first seed's test set)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_o);
    if (score->parsed()) return cmd_score(score_path, score_json);
    if (validate->parsed()) return cmd_validate_data(data_path, data_format, data_json);
    if (render->parsed()) return cmd_render_prompts(render_o, limit);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::InvalidConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
