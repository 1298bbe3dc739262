#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cofcot/amr.hpp"
#include "cofcot/backend.hpp"
#include "cofcot/dataset.hpp"
#include "cofcot/strategies.hpp"
#include "cofcot/trace.hpp"

namespace cofcot {

struct PipelinePlan {
  std::vector<StepId> order;
  std::set<StepId> removed;
  bool condition_domain = true;
  StructureKind structure_kind = StructureKind::Amr;
  std::map<StepId, std::set<StepId>> conditioning;
  // Step 5 as an LLM call instead of assembling the Logic Form from the
  // step 2 intent and step 4 pairs.
  bool llm_logic_form = false;

  friend bool operator==(const PipelinePlan&, const PipelinePlan&) = default;
};

// Throws InvalidPlan when: a step is both ordered and removed, or ordered
// twice, or neither; GEN_LOGIC_FORM is missing or not last; an edge points
// at a step that is not earlier in the order; or assembly mode lacks step 2
// or step 4.
void validate_plan(const PipelinePlan& plan);

// Order 1..5; step 2 <- {1}, 3 <- {1,2}, 4 <- {1,2,3}, 5 <- {2,4}; domain on.
PipelinePlan default_cof_plan(StructureKind kind = StructureKind::Amr);

// Conditioning for an arbitrary order: every step but the last sees all
// steps before it, and GEN_LOGIC_FORM sees {intent, slot pairs} when present.
// For the CoF order this is exactly the default plan.
std::map<StepId, std::set<StepId>> conditioning_for_order(const std::vector<StepId>& order);

struct Ablation {
  bool random_order = false;  // 3 -> 1 -> 2 -> 4 -> 5
  bool foc_order = false;     // 1 -> 3 -> 4 -> 2 -> 5
  bool no_domain = false;
  std::set<StepId> drop;
};

// Errors: InvalidAblation (dropping step 5, or both orderings at once).
// Dropping step 2 or step 4 switches step 5 to an LLM call since there is
// nothing left to assemble from.
PipelinePlan ablation_plan(const Ablation& a, StructureKind kind = StructureKind::Amr);

nlohmann::json to_json(const PipelinePlan& p);
PipelinePlan pipeline_plan_from_json(const nlohmann::json& j);

// Parsed output of one step.
struct StepValue {
  std::string structure;               // GEN_STRUCTURE
  std::optional<ValidationReport> validation;
  std::string intent;                  // GEN_INTENT
  std::vector<std::string> slot_values;  // GEN_SLOT_VALUES
  std::vector<SlotEntry> slot_pairs;   // GEN_SLOT_PAIRS
  std::optional<LogicForm> logic_form;  // GEN_LOGIC_FORM
};

struct ParseContext {
  std::vector<std::string> intent_vocab;
  std::vector<std::string> slot_vocab;
  StructureKind structure_kind = StructureKind::Amr;
};

// Throws NoExtractableAnswer when nothing usable is found.
StepValue parse_step_output(StepId step, std::string_view raw, const ParseContext& ctx);

// Vote class of a raw completion for per-step aggregation.
Normalizer step_normalizer(StepId step, const ParseContext& ctx);

// How a step's value appears inside later prompts ("none"/"unknown" for
// empty or failed outputs).
std::string render_step_value(StepId step, const StepValue& v);
nlohmann::json step_value_json(StepId step, const StepValue& v);

std::string structure_label(StructureKind kind);
std::string output_label(StepId step, StructureKind kind);

// Renders the prompt for `step`. `prior` holds the rendered value of every
// step the plan conditions `step` on; other entries are ignored.
// Errors: MissingAnnotations, TemplateError, InvalidPlan (a conditioned value
// is missing from `prior`).
std::string render_step_prompt(StepId step, const Example& ex, const PipelinePlan& plan,
                               const std::map<StepId, std::string>& prior, const PromptInputs& in);

// Prompts without any backend: prior outputs appear as "<GEN_INTENT output>".
// Step 5 is included only when the plan makes it an LLM call.
std::vector<std::pair<StepId, std::string>> dry_run_prompts(const Example& ex, const PipelinePlan& plan,
                                                            const PromptInputs& in);

// Executes the plan for one example. Step extraction failures are recorded in
// the trace and later prompts see "unknown"/"none"; backend failures end the
// example with result.failure set. AuthFailure is rethrown since no later
// request can succeed either.
PipelineResult run_example(const Example& ex, const PipelinePlan& plan, const DecodingConfig& dec,
                           const PromptInputs& in, Backend& backend);

}  // namespace cofcot
