#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cofcot/error.hpp"
#include "cofcot/logicform.hpp"

namespace cofcot {

enum class StepId { GenStructure = 1, GenIntent = 2, GenSlotValues = 3, GenSlotPairs = 4, GenLogicForm = 5 };

inline constexpr StepId kAllSteps[] = {StepId::GenStructure, StepId::GenIntent, StepId::GenSlotValues,
                                       StepId::GenSlotPairs, StepId::GenLogicForm};

std::string_view to_string(StepId s);
int step_number(StepId s);
// Accepts GEN_* names (any case) or the step numbers 1-5.
StepId step_from_string(std::string_view s);

// Which completion an aggregator picked and on what grounds.
struct Selection {
  std::size_t index = 0;
  std::string normalized;
  std::size_t votes = 1;       // size of the winning class
  std::size_t considered = 1;  // completions that took part in the vote
  std::string rule;            // "first", "majority", "complex_majority"

  friend bool operator==(const Selection&, const Selection&) = default;
};

struct StepTrace {
  StepId step = StepId::GenLogicForm;
  std::string prompt;
  std::vector<std::string> raw_completions;
  nlohmann::json parsed;                    // step-specific value; null when extraction failed
  std::optional<Selection> selection;       // absent when no completion came back
  std::optional<nlohmann::json> validation;  // structure step only
  std::optional<std::string> error;

  friend bool operator==(const StepTrace&, const StepTrace&) = default;
};

struct Failure {
  ErrorKind kind = ErrorKind::BackendError;
  std::string message;

  friend bool operator==(const Failure&, const Failure&) = default;
};

struct PipelineResult {
  std::string example_id;
  std::optional<LogicForm> final;
  std::vector<StepTrace> traces;
  std::optional<Failure> failure;

  friend bool operator==(const PipelineResult&, const PipelineResult&) = default;
};

nlohmann::json to_json(const Selection& s);
nlohmann::json to_json(const StepTrace& t);
nlohmann::json to_json(const PipelineResult& r);
PipelineResult pipeline_result_from_json(const nlohmann::json& j);

}  // namespace cofcot
