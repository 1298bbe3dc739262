#include "cofcot/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cofcot/prompt_template.hpp"
#include "cofcot/text.hpp"

namespace cofcot {

const char* const kPlanAndSolveInstruction =
    "Let’s first understand the problem and devise a plan to solve the problem. "
    "Then, let’s carry out the plan and solve the problem step by step.";

namespace {

std::string squash(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '-') c = '_';
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return std::string(text::trim(out));
}

bool reasoning_strategy(Strategy s) { return s != Strategy::Direct; }

std::string template_subdir(Strategy s) {
  switch (s) {
    case Strategy::Direct:
      return "direct";
    case Strategy::Cot:
    case Strategy::ScCot:
    case Strategy::ComplexCot:
      return "cot";
    case Strategy::LeastToMost:
      return "least_to_most";
    case Strategy::PlanAndSolve:
      return "plan_and_solve";
    case Strategy::CofCot:
      return "cof_cot";
  }
  return "";
}

std::string join_values(const std::vector<std::string>& values) {
  return values.empty() ? "none" : text::join(values, ", ");
}

std::string join_pairs(const std::vector<SlotEntry>& pairs) {
  if (pairs.empty()) return "none";
  std::vector<std::string> parts;
  for (const auto& p : pairs) parts.push_back(p.slot_type + ": " + p.slot_value);
  return text::join(parts, "; ");
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Direct:
      return "DIRECT";
    case Strategy::Cot:
      return "COT";
    case Strategy::ScCot:
      return "SC_COT";
    case Strategy::ComplexCot:
      return "COMPLEX_COT";
    case Strategy::LeastToMost:
      return "LEAST_TO_MOST";
    case Strategy::PlanAndSolve:
      return "PLAN_AND_SOLVE";
    case Strategy::CofCot:
      return "COF_COT";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view s) {
  const std::string key = squash(s);
  for (Strategy st : {Strategy::Direct, Strategy::Cot, Strategy::ScCot, Strategy::ComplexCot, Strategy::LeastToMost,
                      Strategy::PlanAndSolve, Strategy::CofCot}) {
    if (key == to_string(st)) return st;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown strategy '" + std::string(s) + "'");
}

std::string_view to_string(AggregatorKind a) {
  switch (a) {
    case AggregatorKind::First:
      return "FIRST";
    case AggregatorKind::Majority:
      return "MAJORITY";
    case AggregatorKind::ComplexMajority:
      return "COMPLEX_MAJORITY";
  }
  return "?";
}

AggregatorKind aggregator_from_string(std::string_view s) {
  const std::string key = squash(s);
  for (AggregatorKind a : {AggregatorKind::First, AggregatorKind::Majority, AggregatorKind::ComplexMajority}) {
    if (key == to_string(a)) return a;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown aggregator '" + std::string(s) + "'");
}

std::string_view to_string(TieBreak t) { return t == TieBreak::LowestIndex ? "lowest_index" : "lexicographic"; }

TieBreak tie_break_from_string(std::string_view s) {
  if (text::iequals(s, "lowest_index")) return TieBreak::LowestIndex;
  if (text::iequals(s, "lexicographic")) return TieBreak::Lexicographic;
  throw Error(ErrorKind::InvalidArgument, "unknown tie break '" + std::string(s) + "'");
}

Selection aggregate(const std::vector<std::string>& completions, const Aggregator& agg, const Normalizer& normalize) {
  if (completions.empty()) throw Error(ErrorKind::EmptyInput, "nothing to aggregate");
  auto vote_class = [&](std::size_t i) {
    if (normalize) {
      if (auto n = normalize(completions[i])) return *n;
    }
    return std::string(text::trim(completions[i]));
  };

  if (agg.kind == AggregatorKind::First) return Selection{0, vote_class(0), 1, 1, "first"};

  std::vector<std::size_t> pool(completions.size());
  std::iota(pool.begin(), pool.end(), 0);
  if (agg.kind == AggregatorKind::ComplexMajority) {
    const double fraction = std::clamp(agg.complex_fraction, 0.0, 1.0);
    const std::size_t keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(completions.size()) - 1e-9)));
    std::stable_sort(pool.begin(), pool.end(),
                     [&](std::size_t a, std::size_t b) { return completions[a].size() > completions[b].size(); });
    pool.resize(std::min(keep, pool.size()));
    std::sort(pool.begin(), pool.end());
  }

  struct Tally {
    std::size_t first_index;
    std::size_t votes;
  };
  std::map<std::string, Tally> tally;
  for (std::size_t i : pool) {
    auto [it, inserted] = tally.try_emplace(vote_class(i), Tally{i, 0});
    ++it->second.votes;
  }
  // std::map iterates classes in lexicographic order, which makes the
  // lexicographic tie break the natural "first best" in this loop.
  const std::pair<const std::string, Tally>* best = nullptr;
  for (const auto& entry : tally) {
    if (!best || entry.second.votes > best->second.votes) {
      best = &entry;
    } else if (entry.second.votes == best->second.votes && agg.tie_break == TieBreak::LowestIndex &&
               entry.second.first_index < best->second.first_index) {
      best = &entry;
    }
  }
  return Selection{best->second.first_index, best->first, best->second.votes, pool.size(),
                   agg.kind == AggregatorKind::Majority ? "majority" : "complex_majority"};
}

std::optional<LogicForm> extract_answer_form(Strategy s, std::string_view text) {
  const auto forms = find_bracketed_forms(text);
  if (forms.empty()) return std::nullopt;
  // Try the preferred end first, then fall back through the others.
  std::vector<std::string_view> order(forms.begin(), forms.end());
  if (reasoning_strategy(s)) std::reverse(order.begin(), order.end());
  for (auto f : order) {
    try {
      return parse_logic_form(f);
    } catch (const Error&) {
    }
  }
  return std::nullopt;
}

Normalizer logic_form_normalizer(Strategy s) {
  return [s](std::string_view text) -> std::optional<std::string> {
    if (auto lf = extract_answer_form(s, text)) return serialize_logic_form(*lf);
    return std::nullopt;
  };
}

DecodingConfig default_decoding(Strategy s) {
  DecodingConfig d;
  switch (s) {
    case Strategy::ScCot:
    case Strategy::CofCot:
      d.aggregator.kind = AggregatorKind::Majority;
      break;
    case Strategy::ComplexCot:
      d.aggregator.kind = AggregatorKind::ComplexMajority;
      break;
    default:
      d.n = 1;
      d.aggregator.kind = AggregatorKind::First;
      break;
  }
  return d;
}

std::string build_prompt(Strategy s, const Example& ex, const PromptInputs& in) {
  if (s == Strategy::CofCot) {
    throw Error(ErrorKind::InvalidArgument, "COF_COT prompts are built per step by the pipeline");
  }
  if (s == Strategy::PlanAndSolve && !in.demonstrations.empty()) {
    throw Error(ErrorKind::InvalidArgument, "PLAN_AND_SOLVE is zero-shot only");
  }
  const std::string dir = (in.template_dir.empty() ? default_template_dir() : in.template_dir) + "/" + template_subdir(s);

  std::vector<std::string> blocks;
  if (!in.demonstrations.empty()) {
    const std::string demo_tmpl = load_template_file(dir, "demo.txt");
    for (const auto& d : in.demonstrations) {
      TemplateVars v{{"utterance", d.utterance}, {"domain", d.domain}, {"logic_form", serialize_logic_form(d.gold)}};
      if (reasoning_strategy(s)) {
        if (!d.step_annotations) {
          throw Error(ErrorKind::MissingAnnotations,
                      "demonstration '" + d.id + "' has no step annotations for " + std::string(to_string(s)));
        }
        const auto& a = *d.step_annotations;
        v["amr"] = a.amr_text;
        v["intent"] = a.intent;
        v["slot_values"] = join_values(a.slot_values);
        v["slot_pairs"] = join_pairs(a.slot_pairs);
      }
      blocks.push_back(render_template(demo_tmpl, v));
    }
  }
  std::string demos = text::join(blocks, "\n");
  TemplateVars vars{{"utterance", ex.utterance},
                    {"domain", ex.domain},
                    {"intent_vocab", text::join(in.intent_vocab, ", ")},
                    {"slot_vocab", text::join(in.slot_vocab, ", ")},
                    {"demonstrations", demos},
                    {"plan_and_solve", kPlanAndSolveInstruction}};
  return render_template(load_template_file(dir, "prompt.txt"), vars);
}

PipelineResult run_baseline(Strategy s, const Example& ex, const PromptInputs& in, const DecodingConfig& dec,
                            Backend& backend) {
  PipelineResult result;
  result.example_id = ex.id;
  StepTrace trace;
  trace.step = StepId::GenLogicForm;
  trace.prompt = build_prompt(s, ex, in);

  const CompletionRequest req{dec.model, trace.prompt, dec.temperature, dec.n, dec.max_tokens};
  trace.raw_completions = backend.complete(req).completions;
  const Selection sel = aggregate(trace.raw_completions, dec.aggregator, logic_form_normalizer(s));
  trace.selection = sel;
  if (auto lf = extract_answer_form(s, trace.raw_completions[sel.index])) {
    trace.parsed = serialize_logic_form(*lf);
    result.final = std::move(lf);
  } else {
    trace.error = "no parseable Logic Form in the selected completion";
    result.failure = Failure{ErrorKind::UnparseableFinalForm, *trace.error};
  }
  result.traces.push_back(std::move(trace));
  return result;
}

}  // namespace cofcot
