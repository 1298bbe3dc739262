#include "cofcot/trace.hpp"

#include "cofcot/text.hpp"

namespace cofcot {

using nlohmann::json;

std::string_view to_string(StepId s) {
  switch (s) {
    case StepId::GenStructure:
      return "GEN_STRUCTURE";
    case StepId::GenIntent:
      return "GEN_INTENT";
    case StepId::GenSlotValues:
      return "GEN_SLOT_VALUES";
    case StepId::GenSlotPairs:
      return "GEN_SLOT_PAIRS";
    case StepId::GenLogicForm:
      return "GEN_LOGIC_FORM";
  }
  return "?";
}

int step_number(StepId s) { return static_cast<int>(s); }

StepId step_from_string(std::string_view s) {
  const std::string_view t = text::trim(s);
  for (StepId id : kAllSteps) {
    if (text::iequals(t, to_string(id)) || t == std::to_string(step_number(id))) return id;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown step '" + std::string(s) + "'");
}

json to_json(const Selection& s) {
  return {{"index", s.index}, {"normalized", s.normalized}, {"votes", s.votes}, {"considered", s.considered},
          {"rule", s.rule}};
}

json to_json(const StepTrace& t) {
  json j = {{"step", to_string(t.step)},
            {"prompt", t.prompt},
            {"raw_completions", t.raw_completions},
            {"parsed", t.parsed},
            {"selection", t.selection ? to_json(*t.selection) : json()}};
  if (t.validation) j["validation"] = *t.validation;
  if (t.error) j["error"] = *t.error;
  return j;
}

json to_json(const PipelineResult& r) {
  json traces = json::array();
  for (const auto& t : r.traces) traces.push_back(to_json(t));
  json j = {{"example_id", r.example_id},
            {"final", r.final ? json(serialize_logic_form(*r.final)) : json()},
            {"traces", traces}};
  j["failure"] = r.failure ? json{{"kind", to_string(r.failure->kind)}, {"message", r.failure->message}} : json();
  return j;
}

PipelineResult pipeline_result_from_json(const json& j) {
  PipelineResult r;
  try {
    r.example_id = j.at("example_id").get<std::string>();
    if (j.contains("final") && !j["final"].is_null()) r.final = parse_logic_form(j["final"].get<std::string>());
    for (const auto& t : j.value("traces", json::array())) {
      StepTrace st;
      st.step = step_from_string(t.at("step").get<std::string>());
      st.prompt = t.at("prompt").get<std::string>();
      st.raw_completions = t.at("raw_completions").get<std::vector<std::string>>();
      st.parsed = t.value("parsed", json());
      if (t.contains("selection") && !t["selection"].is_null()) {
        const auto& s = t["selection"];
        st.selection = Selection{s.at("index").get<std::size_t>(), s.at("normalized").get<std::string>(),
                                 s.at("votes").get<std::size_t>(), s.at("considered").get<std::size_t>(),
                                 s.at("rule").get<std::string>()};
      }
      if (t.contains("validation")) st.validation = t["validation"];
      if (t.contains("error")) st.error = t["error"].get<std::string>();
      r.traces.push_back(std::move(st));
    }
    if (j.contains("failure") && !j["failure"].is_null()) {
      r.failure = Failure{error_kind_from_string(j["failure"].at("kind").get<std::string>()),
                          j["failure"].at("message").get<std::string>()};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("pipeline result: ") + e.what());
  }
  return r;
}

}  // namespace cofcot
