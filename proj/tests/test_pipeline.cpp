#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cofcot/pipeline.hpp"
#include "cofcot/prompt_template.hpp"
#include "cofcot/text.hpp"

using namespace cofcot;
using nlohmann::json;

namespace {

const std::string kFixtures = std::string(COFCOT_DATA_DIR) + "/fixtures/";

const Dataset& fixture() {
  static const Dataset ds = load_dataset(kFixtures + "native_small.jsonl", DataFormat::NativeJsonl);
  return ds;
}

PromptInputs inputs(std::size_t k) {
  PromptInputs in;
  const auto& v = fixture().vocab;
  in.intent_vocab.assign(v.intents.begin(), v.intents.end());
  in.slot_vocab.assign(v.slot_types.begin(), v.slot_types.end());
  for (const auto& ex : fixture().examples) {
    if (in.demonstrations.size() == k) break;
    if (ex.step_annotations) in.demonstrations.push_back(ex);
  }
  return in;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidArgument;
}

// Only the last block (the query) of a prompt, without demonstrations.
std::string query_block(const std::string& prompt) {
  const std::size_t pos = prompt.rfind("Utterance: ");
  return pos == std::string::npos ? prompt : prompt.substr(pos);
}

const std::vector<std::pair<StepId, std::string>> kFieldPrefix = {{StepId::GenStructure, "AMR: "},
                                                                  {StepId::GenIntent, "Intent: "},
                                                                  {StepId::GenSlotValues, "Slot values: "},
                                                                  {StepId::GenSlotPairs, "Slot type pairs: "}};

std::vector<PipelinePlan> all_plans() {
  std::vector<PipelinePlan> plans{default_cof_plan()};
  for (bool random : {false, true}) {
    for (bool foc : {false, true}) {
      if (random && foc) continue;
      for (bool no_domain : {false, true}) {
        for (int drop_mask = 0; drop_mask < 16; ++drop_mask) {
          Ablation a{random, foc, no_domain, {}};
          for (int b = 0; b < 4; ++b) {
            if (drop_mask & (1 << b)) a.drop.insert(static_cast<StepId>(b + 1));
          }
          plans.push_back(ablation_plan(a));
        }
      }
    }
  }
  return plans;
}

std::shared_ptr<MockBackend> perfect_mock(const Example& ex) {
  const auto& a = *ex.step_annotations;
  std::string values = a.slot_values.empty() ? "none" : text::join(a.slot_values, "\n");
  std::string pairs;
  for (const auto& p : a.slot_pairs) pairs += p.slot_type + ": " + p.slot_value + "\n";
  if (pairs.empty()) pairs = "none";
  return MockBackend::rules({{"Output (AMR):", {a.amr_text}},
                             {"Output (Intent):", {"The intent is " + a.intent + "."}},
                             {"Output (Slot values):", {values}},
                             {"Output (Slot type pairs):", {pairs}},
                             {"Output (Logic Form):", {a.logic_form}}});
}

const Example& annotated(std::size_t nth) {
  std::size_t seen = 0;
  for (const auto& ex : fixture().examples) {
    if (ex.step_annotations && !ex.step_annotations->slot_pairs.empty() && seen++ == nth) return ex;
  }
  FAIL("fixture has too few annotated examples");
  return fixture().examples.front();
}

}  // namespace

TEST_CASE("template engine") {
  CHECK(render_template("a {x} b", {{"x", "1"}}) == "a 1 b");
  CHECK(render_template("{{literal}} {x}", {{"x", "{y}"}}) == "{literal} {y}");
  CHECK(render_template("[{#x}has {x}{/x}]", {{"x", ""}}) == "[]");
  CHECK(render_template("[{#x}has {x}{/x}]", {}) == "[]");
  CHECK(render_template("[{#x}has {x}{/x}]", {{"x", "v"}}) == "[has v]");
  CHECK(render_template("# header\n# more\nbody {x}\n# not a header\n", {{"x", "1"}}) == "body 1\n# not a header\n");
  CHECK(kind_of([] { render_template("{missing}", {}); }) == ErrorKind::TemplateError);
  CHECK(kind_of([] { render_template("{#x}never closed", {{"x", "1"}}); }) == ErrorKind::TemplateError);
  CHECK(kind_of([] { load_template_file("/nonexistent", "x.txt"); }) == ErrorKind::TemplateError);
}

TEST_CASE("default plan") {
  const PipelinePlan p = default_cof_plan();
  CHECK(p.order == std::vector<StepId>{StepId::GenStructure, StepId::GenIntent, StepId::GenSlotValues,
                                       StepId::GenSlotPairs, StepId::GenLogicForm});
  CHECK(p.removed.empty());
  CHECK(p.condition_domain);
  CHECK_FALSE(p.llm_logic_form);
  CHECK(p.conditioning.at(StepId::GenStructure).empty());
  CHECK(p.conditioning.at(StepId::GenIntent) == std::set<StepId>{StepId::GenStructure});
  CHECK(p.conditioning.at(StepId::GenSlotValues) == std::set<StepId>{StepId::GenStructure, StepId::GenIntent});
  CHECK(p.conditioning.at(StepId::GenSlotPairs) ==
        std::set<StepId>{StepId::GenStructure, StepId::GenIntent, StepId::GenSlotValues});
  CHECK(p.conditioning.at(StepId::GenLogicForm) == std::set<StepId>{StepId::GenIntent, StepId::GenSlotPairs});
  CHECK_NOTHROW(validate_plan(p));
  CHECK(pipeline_plan_from_json(to_json(p)) == p);
}

TEST_CASE("plan validation") {
  auto broken = [](auto mutate) {
    PipelinePlan p = default_cof_plan();
    mutate(p);
    return kind_of([&] { validate_plan(p); });
  };
  CHECK(broken([](PipelinePlan& p) { p.order.push_back(StepId::GenIntent); }) == ErrorKind::InvalidPlan);
  CHECK(broken([](PipelinePlan& p) { p.removed.insert(StepId::GenIntent); }) == ErrorKind::InvalidPlan);
  CHECK(broken([](PipelinePlan& p) { p.order.erase(p.order.begin()); }) == ErrorKind::InvalidPlan);
  CHECK(broken([](PipelinePlan& p) { std::swap(p.order[3], p.order[4]); }) == ErrorKind::InvalidPlan);
  CHECK(broken([](PipelinePlan& p) { p.conditioning[StepId::GenIntent].insert(StepId::GenSlotPairs); }) ==
        ErrorKind::InvalidPlan);
  CHECK(broken([](PipelinePlan& p) {
          p.order.erase(p.order.begin() + 1);
          p.removed.insert(StepId::GenIntent);
          for (auto& [_, s] : p.conditioning) s.erase(StepId::GenIntent);
          p.conditioning.erase(StepId::GenIntent);
        }) == ErrorKind::InvalidPlan);  // assembly without an intent
  CHECK(kind_of([] { pipeline_plan_from_json(json{{"order", 5}}); }) == ErrorKind::InvalidPlan);
}

TEST_CASE("ablations") {
  const PipelinePlan random = ablation_plan(Ablation{true, false, false, {}});
  CHECK(random.order == std::vector<StepId>{StepId::GenSlotValues, StepId::GenStructure, StepId::GenIntent,
                                            StepId::GenSlotPairs, StepId::GenLogicForm});
  CHECK(random.conditioning.at(StepId::GenSlotValues).empty());
  CHECK(random.conditioning.at(StepId::GenStructure) == std::set<StepId>{StepId::GenSlotValues});

  const PipelinePlan foc = ablation_plan(Ablation{false, true, false, {}});
  CHECK(foc.order == std::vector<StepId>{StepId::GenStructure, StepId::GenSlotValues, StepId::GenSlotPairs,
                                         StepId::GenIntent, StepId::GenLogicForm});
  CHECK(foc.conditioning.at(StepId::GenIntent).size() == 3);

  const PipelinePlan no_domain = ablation_plan(Ablation{false, false, true, {}});
  CHECK_FALSE(no_domain.condition_domain);

  const PipelinePlan no_amr = ablation_plan(Ablation{false, false, false, {StepId::GenStructure}});
  CHECK(no_amr.removed == std::set<StepId>{StepId::GenStructure});
  CHECK(no_amr.order.size() == 4);
  CHECK(no_amr.conditioning.at(StepId::GenIntent).empty());
  CHECK_FALSE(no_amr.llm_logic_form);

  const PipelinePlan no_intent = ablation_plan(Ablation{false, false, false, {StepId::GenIntent}});
  CHECK(no_intent.llm_logic_form);
  CHECK(no_intent.conditioning.at(StepId::GenLogicForm) == std::set<StepId>{StepId::GenSlotPairs});

  CHECK(kind_of([] { ablation_plan(Ablation{false, false, false, {StepId::GenLogicForm}}); }) ==
        ErrorKind::InvalidAblation);
  CHECK(kind_of([] { ablation_plan(Ablation{true, true, false, {}}); }) == ErrorKind::InvalidAblation);
}

TEST_CASE("property: prompts carry exactly the conditioned fields, for every plan") {
  const Example& ex = annotated(0);
  for (std::size_t k : {0u, 2u}) {
    const PromptInputs in = inputs(k);
    for (const PipelinePlan& plan : all_plans()) {
      CHECK(pipeline_plan_from_json(to_json(plan)) == plan);
      const auto prompts = dry_run_prompts(ex, plan, in);
      CHECK(prompts.size() == plan.order.size() - (plan.llm_logic_form ? 0 : 1));
      for (const auto& [step, prompt] : prompts) {
        const std::string q = query_block(prompt);
        const auto& sources = plan.conditioning.at(step);
        for (const auto& [src, prefix] : kFieldPrefix) {
          const bool wanted = sources.count(src) > 0;
          const std::string placeholder = "<" + std::string(to_string(src)) + " output>";
          CHECK_MESSAGE(text::contains(q, prefix) == wanted, to_string(step), " / ", to_string(src));
          CHECK(text::contains(q, placeholder) == wanted);
          // Isolation also holds for demonstrations: a field line appears
          // once per block or not at all.
          if (!wanted) CHECK_FALSE(text::contains(prompt, "\n" + prefix));
        }
        CHECK(text::contains(q, "Domain: ") == plan.condition_domain);
        CHECK(text::contains(prompt, "Output (" + output_label(step, plan.structure_kind) + "):"));
        CHECK(text::trim(q).back() == ':');
        CHECK(prompt.find("{") == std::string::npos);
      }
    }
  }
}

TEST_CASE("step prompts list the vocabulary they need") {
  const auto prompts = dry_run_prompts(annotated(0), default_cof_plan(), inputs(0));
  const std::string some_slot = *fixture().vocab.slot_types.begin();
  CHECK(text::contains(prompts[1].second, "Intent vocabulary:"));
  CHECK(text::contains(prompts[3].second, "Slot vocabulary: "));
  CHECK(text::contains(prompts[3].second, some_slot));
  CHECK_FALSE(text::contains(prompts[0].second, "vocabulary"));
}

TEST_CASE("demonstrations show the step's own annotation as the answer") {
  const PromptInputs in = inputs(1);
  const auto& d = *in.demonstrations[0].step_annotations;
  const auto prompts = dry_run_prompts(annotated(0), default_cof_plan(), in);
  CHECK(text::contains(prompts[0].second, "Output (AMR): " + d.amr_text));
  CHECK(text::contains(prompts[1].second, "Output (Intent): " + d.intent));
  CHECK(text::contains(prompts[2].second, "Intent: " + d.intent));
  if (!d.slot_pairs.empty()) {
    CHECK(text::contains(prompts[3].second, d.slot_pairs[0].slot_type + ": " + d.slot_pairs[0].slot_value));
  }
}

TEST_CASE("non-AMR structures") {
  const PipelinePlan dep = default_cof_plan(StructureKind::DependencyParse);
  const auto prompts = dry_run_prompts(annotated(0), dep, inputs(0));
  CHECK(text::contains(prompts[0].second, "Output (Dependency parse):"));
  CHECK(text::contains(query_block(prompts[1].second), "Dependency parse: <GEN_STRUCTURE output>"));
  // Demonstrations carry AMR text only.
  CHECK(kind_of([&] { dry_run_prompts(annotated(0), dep, inputs(2)); }) == ErrorKind::MissingAnnotations);
  const PipelinePlan dep_no_structure = ablation_plan(Ablation{false, false, false, {StepId::GenStructure}},
                                                      StructureKind::DependencyParse);
  CHECK_NOTHROW(dry_run_prompts(annotated(0), dep_no_structure, inputs(2)));
}

TEST_CASE("demonstrations without annotations are rejected") {
  PromptInputs in = inputs(2);
  in.demonstrations[0].step_annotations.reset();
  CHECK(kind_of([&] { dry_run_prompts(annotated(0), default_cof_plan(), in); }) == ErrorKind::MissingAnnotations);
}

TEST_CASE("parse_step_output on noisy completions") {
  std::ifstream f(std::string(COFCOT_TEST_FIXTURES) + "/step_outputs.json");
  REQUIRE(f.good());
  const json fx = json::parse(f);
  const ParseContext ctx{fx["intent_vocab"].get<std::vector<std::string>>(),
                         fx["slot_vocab"].get<std::vector<std::string>>(), StructureKind::Amr};
  std::size_t n = 0;
  for (const auto& c : fx["cases"]) {
    const StepId step = step_from_string(c["step"].get<std::string>());
    const std::string raw = c["raw"].get<std::string>();
    CAPTURE(raw);
    if (c.contains("error")) {
      CHECK(to_string(kind_of([&] { parse_step_output(step, raw, ctx); })) == c["error"].get<std::string>());
    } else {
      const StepValue v = parse_step_output(step, raw, ctx);
      CHECK(step_value_json(step, v) == c["want"]);
    }
    ++n;
  }
  CHECK(n >= 45);
}

TEST_CASE("structure outputs are validated") {
  const ParseContext ctx{{}, {}, StructureKind::Amr};
  const StepValue ok = parse_step_output(StepId::GenStructure, "(a / alarm)", ctx);
  REQUIRE(ok.validation.has_value());
  CHECK(ok.validation->ok);
  const StepValue bad = parse_step_output(StepId::GenStructure, "(a / alarm :mod (a / thing))", ctx);
  REQUIRE(bad.validation.has_value());
  CHECK_FALSE(bad.validation->ok);
}

TEST_CASE("run_example: every step answered correctly") {
  const Example& ex = annotated(1);
  auto mock = perfect_mock(ex);
  DecodingConfig dec = default_decoding(Strategy::CofCot);
  dec.n = 3;
  const PipelineResult r = run_example(ex, default_cof_plan(), dec, inputs(0), *mock);
  CHECK_FALSE(r.failure.has_value());
  REQUIRE(r.final.has_value());
  CHECK(*r.final == ex.gold);
  REQUIRE(r.traces.size() == 5);
  CHECK(mock->requests().size() == 4);  // step 5 is assembled
  CHECK(r.traces[4].prompt.empty());
  CHECK(r.traces[4].selection->rule == "assembled");
  CHECK(r.traces[0].validation.has_value());
  CHECK(r.traces[1].raw_completions.size() == 3);
  // Later prompts see earlier parsed outputs.
  CHECK(text::contains(mock->requests()[2].prompt, "Intent: " + ex.step_annotations->intent));
  CHECK(text::contains(mock->requests()[1].prompt, "AMR: " + ex.step_annotations->amr_text));
}

TEST_CASE("run_example: step 5 as an LLM call when step 2 is dropped") {
  const Example& ex = annotated(2);
  auto mock = perfect_mock(ex);
  const PipelinePlan plan = ablation_plan(Ablation{false, false, false, {StepId::GenIntent}});
  const PipelineResult r = run_example(ex, plan, default_decoding(Strategy::CofCot), inputs(0), *mock);
  REQUIRE(r.final.has_value());
  CHECK(*r.final == ex.gold);
  CHECK(mock->requests().size() == 4);
  CHECK(text::contains(mock->requests().back().prompt, "Output (Logic Form):"));
}

TEST_CASE("run_example: failures") {
  const Example& ex = annotated(3);
  const auto& a = *ex.step_annotations;

  SUBCASE("unextractable intent: later steps see unknown, assembly fails") {
    auto mock = MockBackend::rules({{"Output (AMR):", {a.amr_text}},
                                    {"Output (Intent):", {"no idea"}},
                                    {"Output (Slot values):", {"none"}},
                                    {"Output (Slot type pairs):", {"none"}}});
    const PipelineResult r = run_example(ex, default_cof_plan(), default_decoding(Strategy::CofCot), inputs(0), *mock);
    CHECK_FALSE(r.final.has_value());
    REQUIRE(r.failure.has_value());
    CHECK(r.failure->kind == ErrorKind::UnparseableFinalForm);
    CHECK(r.traces[1].error.has_value());
    CHECK(text::contains(mock->requests()[2].prompt, "Intent: unknown"));
  }

  SUBCASE("backend error ends the example") {
    auto mock = MockBackend::rules({{"Output (AMR):", {a.amr_text}}});
    const PipelineResult r = run_example(ex, default_cof_plan(), default_decoding(Strategy::CofCot), inputs(0), *mock);
    REQUIRE(r.failure.has_value());
    CHECK(r.failure->kind == ErrorKind::BackendError);
    CHECK(r.traces.size() == 2);
  }

  SUBCASE("auth failure propagates") {
    MockBackend mock([](const CompletionRequest&) -> std::vector<std::string> {
      throw Error(ErrorKind::AuthFailure, "bad key");
    });
    CHECK(kind_of([&] { run_example(ex, default_cof_plan(), default_decoding(Strategy::CofCot), inputs(0), mock); }) ==
          ErrorKind::AuthFailure);
  }
}

TEST_CASE("run_example: record then replay gives identical traces") {
  const auto dir = std::filesystem::temp_directory_path() / "cofcot_test_pipeline";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "archive.jsonl").string();

  const Example& ex = annotated(4);
  const DecodingConfig dec = default_decoding(Strategy::CofCot);
  json recorded;
  {
    auto archive = ReplayArchive::open_for_append(path);
    RecordingBackend rec(perfect_mock(ex), archive);
    recorded = to_json(run_example(ex, default_cof_plan(), dec, inputs(2), rec));
  }
  ReplayBackend replay(ReplayArchive::load(path));
  const json replayed = to_json(run_example(ex, default_cof_plan(), dec, inputs(2), replay));
  CHECK(replayed == recorded);
  CHECK(pipeline_result_from_json(replayed).final == parse_logic_form(ex.step_annotations->logic_form));

  // A different plan produces different prompts, which the archive never saw.
  const PipelineResult miss =
      run_example(ex, ablation_plan(Ablation{false, false, true, {}}), dec, inputs(2), replay);
  REQUIRE(miss.failure.has_value());
  CHECK(miss.failure->kind == ErrorKind::ReplayMiss);
  std::filesystem::remove_all(dir);
}
