#include "cofcot/experiment.hpp"

#include <omp.h>

#include <exception>
#include <fstream>
#include <sstream>

#include "cofcot/text.hpp"

namespace cofcot {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad_config(const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); }

// Reads keys from one config block and rejects the ones nobody asked for,
// so a typo ("sedes") fails loudly instead of silently using a default.
class Block {
 public:
  Block(const json& root, const char* name) : name_(name) {
    if (!root.contains(name)) return;
    j_ = root.at(name);
    if (!j_.is_object()) bad_config(std::string("'") + name + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      bad_config(name_ + "." + key + " has the wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) bad_config("unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  std::string name_;
  json j_ = json::object();
  std::set<std::string> used_;
};

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

template <typename F>
auto parse_enum(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    bad_config(what + ": " + e.what());
  }
}

json hashed_view(const RunConfig& c) {
  json j = to_json(c);
  j.erase("run");
  j["templates"] = c.template_dir.empty() ? json() : json(c.template_dir);
  return j;
}

std::string plan_label(const RunConfig& c) {
  std::string label(to_string(c.strategy));
  if (c.strategy != Strategy::CofCot) return label;
  std::vector<std::string> parts;
  if (c.plan_order != "cof") parts.push_back(c.plan_order);
  for (StepId s : c.drop) parts.push_back("w/o step " + std::to_string(step_number(s)));
  if (!c.condition_domain) parts.push_back("no domain");
  if (c.structure_kind != StructureKind::Amr) parts.emplace_back(to_string(c.structure_kind));
  if (c.llm_step5) parts.push_back("llm step 5");
  if (!parts.empty()) label += " (" + text::join(parts, ", ") + ")";
  return label;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::WriteFailure, "cannot write " + p.string());
  return out;
}

}  // namespace

std::string_view to_string(BackendMode m) {
  switch (m) {
    case BackendMode::Live:
      return "live";
    case BackendMode::Record:
      return "record";
    case BackendMode::Replay:
      return "replay";
    case BackendMode::Mock:
      return "mock";
  }
  return "live";
}

BackendMode backend_mode_from_string(std::string_view s) {
  for (BackendMode m : {BackendMode::Live, BackendMode::Record, BackendMode::Replay, BackendMode::Mock}) {
    if (text::iequals(s, to_string(m))) return m;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown backend '" + std::string(s) + "'");
}

json to_json(const RunConfig& c) {
  json drop = json::array();
  for (StepId s : c.drop) drop.push_back(to_string(s));
  return {
      {"dataset", {{"path", c.dataset_path}, {"format", to_string(c.dataset_format)}}},
      {"split",
       {{"test_domains", c.test_domains},
        {"train_domains", c.train_domains},
        {"filter_vocab_to_test_domains", c.filter_vocab_to_test_domains}}},
      {"sample", {{"n", c.sample_n}, {"seeds", c.seeds}}},
      {"fewshot", {{"k", c.k}, {"mode", to_string(c.mode)}, {"seed", c.fewshot_seed}}},
      {"strategy",
       {{"name", to_string(c.strategy)},
        {"model", c.decoding.model},
        {"temperature", c.decoding.temperature},
        {"n", c.decoding.n},
        {"max_tokens", c.decoding.max_tokens},
        {"aggregator", to_string(c.decoding.aggregator.kind)},
        {"tie_break", to_string(c.decoding.aggregator.tie_break)},
        {"complex_fraction", c.decoding.aggregator.complex_fraction}}},
      {"plan",
       {{"order", c.plan_order},
        {"drop", drop},
        {"condition_domain", c.condition_domain},
        {"structure_kind", to_string(c.structure_kind)},
        {"llm_step5", c.llm_step5}}},
      {"backend",
       {{"mode", to_string(c.backend)},
        {"replay_path", c.replay_path},
        {"record_inner", to_string(c.record_inner)},
        {"mock_noise", c.mock_noise},
        {"requests_per_second", c.http.requests_per_second},
        {"burst", c.http.burst},
        {"max_in_flight", c.http.max_in_flight},
        {"timeout_seconds", c.http.timeout_seconds},
        {"max_attempts", c.http.retry.max_attempts},
        {"initial_backoff_ms", c.http.retry.initial_backoff.count()},
        {"max_backoff_ms", c.http.retry.max_backoff.count()}}},
      {"scoring", {{"slot_f1", c.slot_scorer == SlotScorer::Pairs ? "pairs" : "bio"}}},
      {"run", {{"parallelism", c.parallelism}, {"template_dir", c.template_dir}, {"out_dir", c.out_dir}}},
  };
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) bad_config("config must be a JSON object");
  static const std::set<std::string> kBlocks = {"dataset", "split",   "sample",  "fewshot", "strategy",
                                                "plan",    "backend", "scoring", "run"};
  for (const auto& [key, _] : j.items()) {
    if (!kBlocks.count(key)) bad_config("unknown config block '" + key + "'");
  }
  RunConfig c;
  std::string s;

  Block dataset(j, "dataset");
  dataset.read("path", c.dataset_path);
  s = std::string(to_string(c.dataset_format));
  dataset.read("format", s);
  c.dataset_format = parse_enum("dataset.format", [&] { return data_format_from_string(s); });
  dataset.finish();

  Block split(j, "split");
  split.read("test_domains", c.test_domains);
  split.read("train_domains", c.train_domains);
  split.read("filter_vocab_to_test_domains", c.filter_vocab_to_test_domains);
  split.finish();

  Block sample(j, "sample");
  sample.read("n", c.sample_n);
  sample.read("seeds", c.seeds);
  sample.finish();

  Block fewshot(j, "fewshot");
  fewshot.read("k", c.k);
  s = std::string(to_string(c.mode));
  fewshot.read("mode", s);
  c.mode = parse_enum("fewshot.mode", [&] { return demo_mode_from_string(s); });
  fewshot.read("seed", c.fewshot_seed);
  fewshot.finish();

  Block strategy(j, "strategy");
  s = std::string(to_string(c.strategy));
  strategy.read("name", s);
  c.strategy = parse_enum("strategy.name", [&] { return strategy_from_string(s); });
  c.decoding = default_decoding(c.strategy);
  strategy.read("model", c.decoding.model);
  strategy.read("temperature", c.decoding.temperature);
  strategy.read("n", c.decoding.n);
  strategy.read("max_tokens", c.decoding.max_tokens);
  s = std::string(to_string(c.decoding.aggregator.kind));
  strategy.read("aggregator", s);
  c.decoding.aggregator.kind = parse_enum("strategy.aggregator", [&] { return aggregator_from_string(s); });
  s = std::string(to_string(c.decoding.aggregator.tie_break));
  strategy.read("tie_break", s);
  c.decoding.aggregator.tie_break = parse_enum("strategy.tie_break", [&] { return tie_break_from_string(s); });
  strategy.read("complex_fraction", c.decoding.aggregator.complex_fraction);
  strategy.finish();

  Block plan(j, "plan");
  plan.read("order", c.plan_order);
  std::vector<std::string> drop;
  plan.read("drop", drop);
  for (const auto& d : drop) c.drop.insert(parse_enum("plan.drop", [&] { return step_from_string(d); }));
  plan.read("condition_domain", c.condition_domain);
  s = std::string(to_string(c.structure_kind));
  plan.read("structure_kind", s);
  c.structure_kind = parse_enum("plan.structure_kind", [&] { return structure_kind_from_string(s); });
  plan.read("llm_step5", c.llm_step5);
  plan.finish();

  Block backend(j, "backend");
  s = std::string(to_string(c.backend));
  backend.read("mode", s);
  c.backend = parse_enum("backend.mode", [&] { return backend_mode_from_string(s); });
  backend.read("replay_path", c.replay_path);
  s = std::string(to_string(c.record_inner));
  backend.read("record_inner", s);
  c.record_inner = parse_enum("backend.record_inner", [&] { return backend_mode_from_string(s); });
  backend.read("mock_noise", c.mock_noise);
  backend.read("requests_per_second", c.http.requests_per_second);
  backend.read("burst", c.http.burst);
  backend.read("max_in_flight", c.http.max_in_flight);
  backend.read("timeout_seconds", c.http.timeout_seconds);
  backend.read("max_attempts", c.http.retry.max_attempts);
  long long ms = c.http.retry.initial_backoff.count();
  backend.read("initial_backoff_ms", ms);
  c.http.retry.initial_backoff = std::chrono::milliseconds(ms);
  ms = c.http.retry.max_backoff.count();
  backend.read("max_backoff_ms", ms);
  c.http.retry.max_backoff = std::chrono::milliseconds(ms);
  if (backend.has("api_key") || backend.has("base_url")) {
    bad_config("API credentials are read from LLM_API_KEY / LLM_BASE_URL only, never from config");
  }
  backend.finish();

  Block scoring(j, "scoring");
  s = "pairs";
  scoring.read("slot_f1", s);
  if (s == "pairs") c.slot_scorer = SlotScorer::Pairs;
  else if (s == "bio") c.slot_scorer = SlotScorer::Bio;
  else bad_config("scoring.slot_f1 must be 'pairs' or 'bio'");
  scoring.finish();

  Block run(j, "run");
  run.read("parallelism", c.parallelism);
  run.read("template_dir", c.template_dir);
  run.read("out_dir", c.out_dir);
  run.finish();

  c.dataset_path = resolve(base_dir, c.dataset_path);
  c.replay_path = resolve(base_dir, c.replay_path);
  c.template_dir = resolve(base_dir, c.template_dir);
  c.out_dir = resolve(base_dir, c.out_dir);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    bad_config(path + ": " + e.what());
  }
  return run_config_from_json(j, fs::path(path).parent_path());
}

void validate_run_config(const RunConfig& c) {
  if (c.dataset_path.empty()) bad_config("dataset.path is required");
  if (!fs::exists(c.dataset_path)) bad_config("dataset file not found: " + c.dataset_path);
  if (c.test_domains.empty()) bad_config("split.test_domains is required (no default)");
  if (c.sample_n == 0) bad_config("sample.n must be at least 1");
  if (c.seeds.empty()) bad_config("sample.seeds must not be empty");
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
    bad_config("sample.seeds contains a repeated seed");
  }
  if (c.decoding.n < 1) bad_config("strategy.n must be at least 1");
  if (c.decoding.temperature < 0) bad_config("strategy.temperature must be >= 0");
  if (c.decoding.max_tokens < 1) bad_config("strategy.max_tokens must be at least 1");
  if (!(c.decoding.aggregator.complex_fraction > 0 && c.decoding.aggregator.complex_fraction <= 1)) {
    bad_config("strategy.complex_fraction must be in (0, 1]");
  }
  if (c.strategy == Strategy::PlanAndSolve && c.k > 0) bad_config("PLAN_AND_SOLVE is zero-shot only; set fewshot.k to 0");
  if (c.plan_order != "cof" && c.plan_order != "foc" && c.plan_order != "random") {
    bad_config("plan.order must be cof, foc or random");
  }
  const bool default_plan = c.plan_order == "cof" && c.drop.empty() && c.condition_domain &&
                            c.structure_kind == StructureKind::Amr && !c.llm_step5;
  if (c.strategy != Strategy::CofCot && !default_plan) bad_config("plan settings apply to COF_COT only");
  if (c.strategy == Strategy::CofCot) {
    try {
      plan_for(c);
    } catch (const Error& e) {
      bad_config(std::string("plan: ") + e.what());
    }
  }
  if (c.backend == BackendMode::Replay && !fs::exists(c.replay_path)) {
    bad_config("replay archive not found: " + c.replay_path);
  }
  if (c.backend == BackendMode::Record && c.replay_path.empty()) bad_config("record mode needs backend.replay_path");
  if (c.record_inner != BackendMode::Live && c.record_inner != BackendMode::Mock) {
    bad_config("backend.record_inner must be live or mock");
  }
  if (c.mock_noise < 0 || c.mock_noise > 1) bad_config("backend.mock_noise must be in [0, 1]");
  if (c.parallelism < 1) bad_config("run.parallelism must be at least 1");
  if (c.http.max_in_flight < 1 || c.http.retry.max_attempts < 1) {
    bad_config("backend.max_in_flight and backend.max_attempts must be at least 1");
  }
}

std::string config_hash(const RunConfig& c) { return sha256_hex(hashed_view(c).dump()); }

void apply_plan_flag(RunConfig& c, const std::string& spec) {
  std::string normalized = spec;
  std::replace(normalized.begin(), normalized.end(), ',', '+');
  std::stringstream ss(normalized);
  std::string tok;
  while (std::getline(ss, tok, '+')) {
    const std::string t = text::to_lower(text::trim(tok));
    if (t.empty()) continue;
    if (t == "cof" || t == "foc" || t == "random") {
      c.plan_order = t;
    } else if (t == "no_domain") {
      c.condition_domain = false;
    } else if (t == "llm_step5") {
      c.llm_step5 = true;
    } else if (t.size() == 5 && t.rfind("drop", 0) == 0) {
      c.drop.insert(parse_enum("--plan", [&] { return step_from_string(t.substr(4)); }));
    } else if (t == "amr" || t == "dp" || t == "cp") {
      c.structure_kind = structure_kind_from_string(t);
    } else {
      bad_config("unknown --plan token '" + tok + "'");
    }
  }
}

PipelinePlan plan_for(const RunConfig& c) {
  Ablation a;
  a.random_order = c.plan_order == "random";
  a.foc_order = c.plan_order == "foc";
  a.no_domain = !c.condition_domain;
  a.drop = c.drop;
  PipelinePlan p = ablation_plan(a, c.structure_kind);
  if (c.llm_step5) p.llm_logic_form = true;
  validate_plan(p);
  return p;
}

std::shared_ptr<Backend> make_backend(const RunConfig& c, const Dataset& dataset) {
  auto live = [&]() -> std::shared_ptr<Backend> {
    HttpConfig h = c.http;
    const HttpConfig env = http_config_from_env();
    h.base_url = env.base_url;
    h.api_key = env.api_key;
    return std::make_shared<HttpBackend>(h);
  };
  switch (c.backend) {
    case BackendMode::Live:
      return live();
    case BackendMode::Replay:
      return std::make_shared<ReplayBackend>(ReplayArchive::load(c.replay_path));
    case BackendMode::Mock:
      return std::make_shared<SimulatedLlm>(dataset.examples, c.mock_noise);
    case BackendMode::Record: {
      std::shared_ptr<Backend> inner = c.record_inner == BackendMode::Mock
                                           ? std::make_shared<SimulatedLlm>(dataset.examples, c.mock_noise)
                                           : live();
      return std::make_shared<RecordingBackend>(inner, ReplayArchive::open_for_append(c.replay_path));
    }
  }
  return live();
}

RunContext prepare_run(const RunConfig& c) {
  validate_run_config(c);
  RunContext ctx;
  ctx.config = c;
  ctx.dataset = load_dataset(c.dataset_path, c.dataset_format);
  ctx.split = make_split(ctx.dataset.vocab, c.test_domains, c.train_domains);
  ctx.test_sets = sample_test_sets(ctx.dataset.examples, ctx.split.test_domains, c.sample_n, c.seeds.size(), c.seeds);

  std::set<std::string> test_ids;
  for (const auto& ts : ctx.test_sets) {
    for (const auto& ex : ts.examples) test_ids.insert(ex.id);
  }
  const bool needs_annotations = c.strategy != Strategy::Direct;
  ctx.prompt_inputs.demonstrations =
      select_demonstrations(ctx.dataset.examples, ctx.split, c.k, c.mode, c.fewshot_seed, test_ids, needs_annotations);

  const Vocab& v = ctx.dataset.vocab;
  std::set<std::string> intents = v.intents, slots = v.slot_types;
  if (c.filter_vocab_to_test_domains) {
    intents.clear();
    slots.clear();
    for (const auto& d : ctx.split.test_domains) {
      if (auto it = v.domain_intents.find(d); it != v.domain_intents.end()) intents.insert(it->second.begin(), it->second.end());
      if (auto it = v.domain_slot_types.find(d); it != v.domain_slot_types.end()) slots.insert(it->second.begin(), it->second.end());
    }
  }
  ctx.prompt_inputs.intent_vocab.assign(intents.begin(), intents.end());
  ctx.prompt_inputs.slot_vocab.assign(slots.begin(), slots.end());
  ctx.prompt_inputs.template_dir = c.template_dir;
  ctx.plan = c.strategy == Strategy::CofCot ? plan_for(c) : default_cof_plan();
  return ctx;
}

PipelineResult run_one(const RunContext& ctx, const Example& ex, Backend& backend) {
  try {
    if (ctx.config.strategy == Strategy::CofCot) {
      return run_example(ex, ctx.plan, ctx.config.decoding, ctx.prompt_inputs, backend);
    }
    return run_baseline(ctx.config.strategy, ex, ctx.prompt_inputs, ctx.config.decoding, backend);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::AuthFailure) throw;
    PipelineResult r;
    r.example_id = ex.id;
    r.failure = Failure{e.kind(), e.what()};
    return r;
  }
}

std::vector<PipelineResult> run_batch(const RunContext& ctx, const std::vector<Example>& examples, Backend& backend,
                                      int parallelism) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(examples.size());
  std::vector<PipelineResult> results(examples.size());
  if (parallelism <= 1) {
    for (std::ptrdiff_t i = 0; i < n; ++i) results[i] = run_one(ctx, examples[i], backend);
    return results;
  }
  std::vector<std::exception_ptr> errors(examples.size());
#pragma omp parallel for num_threads(parallelism) schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      results[i] = run_one(ctx, examples[i], backend);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

MetricsReport score_results(const RunConfig& c, const std::vector<Example>& examples,
                            const std::vector<PipelineResult>& results) {
  if (examples.size() != results.size()) throw Error(ErrorKind::LengthMismatch, "examples and results differ in length");
  std::vector<Prediction> preds;
  std::vector<LogicForm> golds;
  std::vector<std::string> utterances;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    preds.push_back(results[i].final);
    golds.push_back(examples[i].gold);
    utterances.push_back(examples[i].utterance);
  }
  MetricsReport m = score(preds, golds);
  if (c.slot_scorer == SlotScorer::Bio) m.slot_f1 = bio_slot_f1(preds, golds, utterances);
  return m;
}

RunOutcome run_experiment(const RunContext& ctx, Backend& backend) {
  RunOutcome out;
  out.config_hash = config_hash(ctx.config);
  std::vector<MetricsReport> reports;
  for (const auto& ts : ctx.test_sets) {
    SeedOutcome so;
    so.seed = ts.seed;
    so.examples = ts.examples;
    so.results = run_batch(ctx, ts.examples, backend, ctx.config.parallelism);
    so.metrics = score_results(ctx.config, so.examples, so.results);
    for (const auto& r : so.results) so.n_failures += r.failure ? 1 : 0;
    reports.push_back(so.metrics);
    out.seeds.push_back(std::move(so));
  }
  out.aggregate = aggregate_seeds(reports);
  out.table = format_results_table({TableRow{plan_label(ctx.config), out.aggregate}});
  return out;
}

void write_outputs(const RunConfig& c, const RunOutcome& outcome) {
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::WriteFailure, "cannot create " + dir.string() + ": " + ec.message());

  open_out(dir / "config.json") << to_json(c).dump(2) << "\n";

  auto results = open_out(dir / "results.jsonl");
  auto traces = open_out(dir / "traces.jsonl");
  auto preds = open_out(dir / "predictions.jsonl");
  for (const auto& so : outcome.seeds) {
    results << json{{"config_hash", outcome.config_hash},
                    {"seed", so.seed},
                    {"strategy", to_string(c.strategy)},
                    {"metrics", to_json(so.metrics)},
                    {"n_failures", so.n_failures}}
                   .dump()
            << "\n";
    for (std::size_t i = 0; i < so.results.size(); ++i) {
      json t = to_json(so.results[i]);
      t["seed"] = so.seed;
      traces << t.dump() << "\n";
      const auto& r = so.results[i];
      preds << json{{"seed", so.seed},
                    {"id", so.examples[i].id},
                    {"utterance", so.examples[i].utterance},
                    {"gold", serialize_logic_form(so.examples[i].gold)},
                    {"prediction", r.final ? json(serialize_logic_form(*r.final)) : json()}}
                   .dump()
            << "\n";
    }
  }
  open_out(dir / "table.txt") << outcome.table;
  if (!results || !traces || !preds) throw Error(ErrorKind::WriteFailure, "write to " + dir.string() + " failed");
}

ScoredFile score_predictions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot read " + path);
  ScoredFile out;
  std::vector<Prediction> preds;
  std::vector<LogicForm> golds;
  std::vector<std::string> utterances;
  bool all_utterances = true;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      golds.push_back(parse_logic_form(j.at("gold").get<std::string>()));
      Prediction p;
      if (j.contains("prediction") && !j["prediction"].is_null()) {
        try {
          p = parse_logic_form(j["prediction"].get<std::string>());
        } catch (const Error&) {
          ++out.n_unparseable_predictions;
        }
      }
      preds.push_back(std::move(p));
      if (j.contains("utterance")) utterances.push_back(j["utterance"].get<std::string>());
      else all_utterances = false;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::UnparseableGoldForm, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  out.metrics = score(preds, golds);
  if (all_utterances && !golds.empty()) out.bio_slot_f1 = bio_slot_f1(preds, golds, utterances);
  return out;
}

}  // namespace cofcot
