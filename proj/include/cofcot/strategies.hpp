#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cofcot/backend.hpp"
#include "cofcot/dataset.hpp"
#include "cofcot/trace.hpp"

namespace cofcot {

enum class Strategy { Direct, Cot, ScCot, ComplexCot, LeastToMost, PlanAndSolve, CofCot };

std::string_view to_string(Strategy s);
// Case-insensitive; '-' and '_' are interchangeable ("sc-cot", "COF_COT").
Strategy strategy_from_string(std::string_view s);

enum class AggregatorKind { First, Majority, ComplexMajority };
enum class TieBreak { LowestIndex, Lexicographic };

std::string_view to_string(AggregatorKind a);
AggregatorKind aggregator_from_string(std::string_view s);
std::string_view to_string(TieBreak t);
TieBreak tie_break_from_string(std::string_view s);

struct Aggregator {
  AggregatorKind kind = AggregatorKind::Majority;
  TieBreak tie_break = TieBreak::LowestIndex;
  // COMPLEX_MAJORITY keeps the ceil(complex_fraction * n) longest completions.
  double complex_fraction = 0.5;
};

// Maps a completion to its vote class; nullopt means "not parseable", in
// which case the completion votes as its trimmed text.
using Normalizer = std::function<std::optional<std::string>(std::string_view)>;

// FIRST: completions[0].
// MAJORITY: most frequent class; ties by tie_break (lowest_index: the class
//   seen first; lexicographic: smallest class string). The winner is the
//   class's first completion.
// COMPLEX_MAJORITY: MAJORITY restricted to the longest completions by
//   character count (equal lengths keep the earlier one).
// Throws EmptyInput on an empty list.
Selection aggregate(const std::vector<std::string>& completions, const Aggregator& agg, const Normalizer& normalize);

// Canonical serialization of the form extracted from `text` (see extract_answer_form).
Normalizer logic_form_normalizer(Strategy s);

// DIRECT takes the first bracketed form in the text; reasoning strategies
// the last one, since chains restate partial forms before the answer.
std::optional<LogicForm> extract_answer_form(Strategy s, std::string_view text);

struct DecodingConfig {
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.7;
  int n = 10;
  int max_tokens = 512;
  Aggregator aggregator;
};

// n and aggregator the strategy uses unless configured otherwise.
DecodingConfig default_decoding(Strategy s);

struct PromptInputs {
  std::vector<std::string> intent_vocab;
  std::vector<std::string> slot_vocab;
  std::vector<Example> demonstrations;
  std::string template_dir;  // empty: default_template_dir()
};

// Baseline prompts (every strategy but COF_COT). Errors: MissingAnnotations
// (reasoning demos without step annotations), InvalidArgument (few-shot
// PLAN_AND_SOLVE, or COF_COT), TemplateError.
std::string build_prompt(Strategy s, const Example& ex, const PromptInputs& in);

// One request, aggregation, answer extraction. The single trace is labelled
// GEN_LOGIC_FORM. Backend failures propagate; an unparseable answer becomes
// result.failure (UnparseableFinalForm).
PipelineResult run_baseline(Strategy s, const Example& ex, const PromptInputs& in, const DecodingConfig& dec,
                            Backend& backend);

extern const char* const kPlanAndSolveInstruction;

}  // namespace cofcot
