#include "cofcot/pipeline.hpp"

#include <algorithm>

#include "cofcot/prompt_template.hpp"
#include "cofcot/text.hpp"

namespace cofcot {

using nlohmann::json;

namespace {

const std::vector<StepId> kCofOrder = {StepId::GenStructure, StepId::GenIntent, StepId::GenSlotValues,
                                       StepId::GenSlotPairs, StepId::GenLogicForm};

std::size_t position(const std::vector<StepId>& order, StepId s) {
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), s) - order.begin());
}

std::string step_file(StepId s) {
  switch (s) {
    case StepId::GenStructure:
      return "step1_structure.txt";
    case StepId::GenIntent:
      return "step2_intent.txt";
    case StepId::GenSlotValues:
      return "step3_slot_values.txt";
    case StepId::GenSlotPairs:
      return "step4_slot_pairs.txt";
    case StepId::GenLogicForm:
      return "step5_logic_form.txt";
  }
  return "";
}

const char* field_var(StepId s) {
  switch (s) {
    case StepId::GenStructure:
      return "amr";
    case StepId::GenIntent:
      return "intent";
    case StepId::GenSlotValues:
      return "slot_values";
    case StepId::GenSlotPairs:
      return "slot_pairs";
    case StepId::GenLogicForm:
      return "logic_form";
  }
  return "";
}

bool label_shaped(std::string_view s) {
  std::string_view t = text::trim(s);
  if (text::istarts_with(t, "SL:")) t = text::trim(t.substr(3));
  if (t.empty() || !(t[0] >= 'A' && t[0] <= 'Z')) return false;
  return std::all_of(t.begin(), t.end(), [](char c) { return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_'; });
}

std::string strip_decorations(std::string_view line) {
  std::string_view s = text::trim(line);
  // Bullets and enumerations: "-", "*", "•", "1.", "2)".
  if (!s.empty() && (s[0] == '-' || s[0] == '*')) s = text::trim(s.substr(1));
  if (text::istarts_with(s, "\xE2\x80\xA2")) s = text::trim(s.substr(3));
  std::size_t d = 0;
  while (d < s.size() && s[d] >= '0' && s[d] <= '9') ++d;
  if (d > 0 && d < s.size() && (s[d] == '.' || s[d] == ')')) s = text::trim(s.substr(d + 1));
  // Surrounding quotes.
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return std::string(text::trim(s));
}

// Drops a leading "Output (...):" / "<label>:" cue that models tend to echo.
std::string_view drop_cue(std::string_view line, std::initializer_list<std::string_view> cues) {
  std::string_view s = text::trim(line);
  if (text::istarts_with(s, "Output (")) {
    const std::size_t close = s.find("):");
    if (close != std::string_view::npos) return text::trim(s.substr(close + 2));
  }
  for (auto cue : cues) {
    if (text::istarts_with(s, cue)) return text::trim(s.substr(cue.size()));
  }
  return s;
}

bool is_none(std::string_view s) {
  const std::string t = text::to_lower(text::trim(s));
  return t == "none" || t == "none." || t == "n/a" || t == "no slot values" || t == "no slots" || t == "(none)";
}

std::string extract_structure(std::string_view raw, StructureKind kind) {
  std::string_view s = text::trim(raw);
  if (kind == StructureKind::Amr) {
    const std::size_t open = s.find('(');
    if (open != std::string_view::npos) {
      int depth = 0;
      bool in_string = false;
      for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
          if (c == '\\') ++i;
          else if (c == '"') in_string = false;
          continue;
        }
        if (c == '"') in_string = true;
        else if (c == '(') ++depth;
        else if (c == ')' && --depth == 0) return std::string(s.substr(open, i - open + 1));
      }
      return std::string(s.substr(open));
    }
  }
  return std::string(drop_cue(s, {"AMR:", "Dependency parse:", "Constituency parse:"}));
}

std::string parse_intent(std::string_view raw, const std::vector<std::string>& vocab) {
  std::vector<std::pair<std::string, std::string>> canon;  // canonical, as in vocab
  for (const auto& v : vocab) canon.emplace_back(canonical_label(v), v);

  std::vector<std::string> tokens;
  for (const auto& line : text::split_lines(raw)) {
    std::string cur;
    for (char c : line) {
      const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == ':';
      if (word) {
        cur += c;
      } else if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    }
    if (!cur.empty()) tokens.push_back(cur);
  }
  auto strip_colons = [](std::string t) {
    while (!t.empty() && t.back() == ':') t.pop_back();
    return t;
  };
  if (canon.empty()) {
    for (const auto& t : tokens) {
      const std::string c = canonical_label(strip_colons(t));
      if (c.size() > 1 && c.find('_') != std::string::npos && text::to_upper(strip_colons(t)) == strip_colons(t)) return c;
    }
    throw Error(ErrorKind::NoExtractableAnswer, "no intent label in output");
  }
  for (const auto& t : tokens) {
    const std::string c = canonical_label(strip_colons(t));
    for (const auto& [cv, orig] : canon) {
      if (c == cv) return orig;
    }
  }
  // Fuzzy: a token that extends a vocab label ("GET_EVENTS"), longest label wins.
  for (const auto& t : tokens) {
    const std::string c = canonical_label(strip_colons(t));
    const std::pair<std::string, std::string>* best = nullptr;
    for (const auto& entry : canon) {
      if (entry.first.size() >= 4 && c.rfind(entry.first, 0) == 0 && (!best || entry.first.size() > best->first.size())) {
        best = &entry;
      }
    }
    if (best) return best->second;
  }
  throw Error(ErrorKind::NoExtractableAnswer, "no intent from the vocabulary in output");
}

std::vector<std::string> parse_values(std::string_view raw) {
  std::vector<std::string> lines;
  for (const auto& l : text::split_lines(raw)) {
    const std::string_view body = drop_cue(l, {"Slot values:", "Values:"});
    if (!text::trim(body).empty()) lines.emplace_back(body);
  }
  std::vector<std::string> pieces;
  if (lines.size() == 1) {
    std::string_view s = lines[0];
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = s.find(',', start);
      pieces.emplace_back(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  } else {
    pieces = lines;
  }
  std::vector<std::string> out;
  for (const auto& p : pieces) {
    std::string v = text::collapse_ws(strip_decorations(p));
    if (v.empty() || is_none(v)) continue;
    out.push_back(std::move(v));
  }
  return out;
}

std::optional<SlotEntry> parse_pair(std::string_view item, const std::set<std::string>& vocab) {
  std::string line = strip_decorations(item);
  // "(value, TYPE)" layout.
  if (line.size() >= 2 && line.front() == '(' && line.back() == ')') line = line.substr(1, line.size() - 2);

  struct Cut {
    std::string left, right;
  };
  std::vector<Cut> cuts;
  for (std::string_view sep : {"->", "=>", "\t", ":", "=", ","}) {
    std::size_t pos = 0;
    while ((pos = line.find(sep, pos)) != std::string::npos) {
      // "SL:TYPE" keeps its own colon.
      if (sep == ":" && pos >= 2 && text::iequals(std::string_view(line).substr(pos - 2, 2), "SL")) {
        pos += 1;
        continue;
      }
      std::string l = text::collapse_ws(line.substr(0, pos));
      std::string r = text::collapse_ws(line.substr(pos + sep.size()));
      if (!l.empty() && !r.empty()) cuts.push_back({strip_decorations(l), strip_decorations(r)});
      pos += sep.size();
    }
    if (!cuts.empty() && sep != ":") break;  // prefer arrows over colons
  }
  if (cuts.empty()) return std::nullopt;
  auto in_vocab = [&](const std::string& s) { return vocab.count(canonical_label(s)) > 0; };
  for (const auto& c : cuts) {
    if (in_vocab(c.left)) return SlotEntry{canonical_label(c.left), c.right};
    if (in_vocab(c.right)) return SlotEntry{canonical_label(c.right), c.left};
  }
  for (const auto& c : cuts) {
    if (label_shaped(c.left)) return SlotEntry{canonical_label(c.left), c.right};
    if (label_shaped(c.right)) return SlotEntry{canonical_label(c.right), c.left};
  }
  return SlotEntry{canonical_label(cuts[0].left), cuts[0].right};
}

std::vector<SlotEntry> parse_pairs(std::string_view raw, const std::vector<std::string>& slot_vocab) {
  std::set<std::string> vocab;
  for (const auto& v : slot_vocab) vocab.insert(canonical_label(v));
  std::vector<SlotEntry> out;
  for (const auto& l : text::split_lines(raw)) {
    const std::string_view body = drop_cue(l, {"Slot type pairs:", "Pairs:"});
    std::size_t start = 0;
    for (;;) {
      const std::size_t semi = body.find(';', start);
      const std::string_view item =
          body.substr(start, semi == std::string_view::npos ? std::string_view::npos : semi - start);
      if (!text::trim(item).empty() && !is_none(item)) {
        if (auto p = parse_pair(item, vocab)) out.push_back(std::move(*p));
      }
      if (semi == std::string_view::npos) break;
      start = semi + 1;
    }
  }
  return out;
}

json report_json(const ValidationReport& r) {
  json errors = json::array(), warnings = json::array();
  for (const auto& f : r.errors) errors.push_back({{"kind", to_string(f.kind)}, {"message", f.message}});
  for (const auto& f : r.warnings) warnings.push_back({{"kind", to_string(f.kind)}, {"message", f.message}});
  return {{"ok", r.ok}, {"errors", errors}, {"warnings", warnings}};
}

std::string list_answer(const std::vector<std::string>& lines) {
  if (lines.empty()) return " none";
  std::string out;
  for (const auto& l : lines) out += "\n" + l;
  return out;
}

// The value each demonstration shows for a step, from its annotations.
StepValue annotated_value(const Example& d) {
  const auto& a = *d.step_annotations;
  StepValue v;
  v.structure = a.amr_text;
  v.intent = a.intent;
  v.slot_values = a.slot_values;
  v.slot_pairs = a.slot_pairs;
  v.logic_form = parse_logic_form(a.logic_form);
  return v;
}

std::string demo_answer(StepId step, const StepValue& v) {
  switch (step) {
    case StepId::GenStructure:
      return " " + v.structure;
    case StepId::GenIntent:
      return " " + v.intent;
    case StepId::GenSlotValues:
      return list_answer(v.slot_values);
    case StepId::GenSlotPairs: {
      std::vector<std::string> lines;
      for (const auto& p : v.slot_pairs) lines.push_back(p.slot_type + ": " + p.slot_value);
      return list_answer(lines);
    }
    case StepId::GenLogicForm:
      return " " + serialize_logic_form(*v.logic_form);
  }
  return "";
}

std::string render_fields(const std::string& tmpl, const std::string& utterance, const std::string& domain,
                          const PipelinePlan& plan, StepId step, const std::map<StepId, std::string>& prior) {
  TemplateVars vars{{"utterance", utterance}, {"structure_label", structure_label(plan.structure_kind)}};
  if (plan.condition_domain) vars["domain"] = domain;
  const auto edges = plan.conditioning.find(step);
  if (edges != plan.conditioning.end()) {
    for (StepId src : edges->second) {
      const auto it = prior.find(src);
      if (it == prior.end()) {
        throw Error(ErrorKind::InvalidPlan, std::string(to_string(step)) + " needs the output of " +
                                                std::string(to_string(src)) + " which is not available");
      }
      vars[field_var(src)] = it->second;
    }
  }
  std::string out = render_template(tmpl, vars);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out + "\n";
}

std::map<StepId, std::string> rendered_all(const StepValue& v) {
  std::map<StepId, std::string> m;
  for (StepId s : kAllSteps) m[s] = render_step_value(s, v);
  return m;
}

std::string cof_dir(const PromptInputs& in) {
  return (in.template_dir.empty() ? default_template_dir() : in.template_dir) + "/cof_cot";
}

bool needs_structure_annotation(StepId step, const PipelinePlan& plan) {
  if (step == StepId::GenStructure) return true;
  const auto it = plan.conditioning.find(step);
  return it != plan.conditioning.end() && it->second.count(StepId::GenStructure);
}

}  // namespace

// ---------------------------------------------------------------------------
// Plans

void validate_plan(const PipelinePlan& plan) {
  std::set<StepId> seen;
  for (StepId s : plan.order) {
    if (!seen.insert(s).second) throw Error(ErrorKind::InvalidPlan, std::string(to_string(s)) + " appears twice in the order");
    if (plan.removed.count(s)) throw Error(ErrorKind::InvalidPlan, std::string(to_string(s)) + " is both ordered and removed");
  }
  for (StepId s : kAllSteps) {
    if (!seen.count(s) && !plan.removed.count(s)) {
      throw Error(ErrorKind::InvalidPlan, std::string(to_string(s)) + " is neither ordered nor removed");
    }
  }
  if (plan.order.empty() || plan.order.back() != StepId::GenLogicForm) {
    throw Error(ErrorKind::InvalidPlan, "GEN_LOGIC_FORM must be present and last");
  }
  for (const auto& [step, sources] : plan.conditioning) {
    if (!seen.count(step) && !sources.empty()) {
      throw Error(ErrorKind::InvalidPlan, "conditioning given for absent step " + std::string(to_string(step)));
    }
    for (StepId src : sources) {
      if (!seen.count(src) || position(plan.order, src) >= position(plan.order, step)) {
        throw Error(ErrorKind::InvalidPlan, std::string(to_string(step)) + " is conditioned on " +
                                                std::string(to_string(src)) + ", which does not run before it");
      }
    }
  }
  if (!plan.llm_logic_form && (!seen.count(StepId::GenIntent) || !seen.count(StepId::GenSlotPairs))) {
    throw Error(ErrorKind::InvalidPlan, "assembling the Logic Form needs GEN_INTENT and GEN_SLOT_PAIRS");
  }
}

std::map<StepId, std::set<StepId>> conditioning_for_order(const std::vector<StepId>& order) {
  std::map<StepId, std::set<StepId>> cond;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& sources = cond[order[i]];
    if (order[i] == StepId::GenLogicForm) {
      for (StepId s : {StepId::GenIntent, StepId::GenSlotPairs}) {
        if (position(order, s) < i) sources.insert(s);
      }
    } else {
      sources.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }
  return cond;
}

PipelinePlan default_cof_plan(StructureKind kind) {
  PipelinePlan p;
  p.order = kCofOrder;
  p.structure_kind = kind;
  p.conditioning = conditioning_for_order(p.order);
  return p;
}

PipelinePlan ablation_plan(const Ablation& a, StructureKind kind) {
  if (a.drop.count(StepId::GenLogicForm)) throw Error(ErrorKind::InvalidAblation, "GEN_LOGIC_FORM cannot be dropped");
  if (a.random_order && a.foc_order) throw Error(ErrorKind::InvalidAblation, "choose one of random_order and foc_order");
  PipelinePlan p = default_cof_plan(kind);
  if (a.random_order) {
    p.order = {StepId::GenSlotValues, StepId::GenStructure, StepId::GenIntent, StepId::GenSlotPairs, StepId::GenLogicForm};
  } else if (a.foc_order) {
    p.order = {StepId::GenStructure, StepId::GenSlotValues, StepId::GenSlotPairs, StepId::GenIntent, StepId::GenLogicForm};
  }
  p.conditioning = conditioning_for_order(p.order);
  for (StepId s : a.drop) {
    p.removed.insert(s);
    p.order.erase(std::remove(p.order.begin(), p.order.end(), s), p.order.end());
    p.conditioning.erase(s);
    for (auto& [_, sources] : p.conditioning) sources.erase(s);
  }
  if (a.drop.count(StepId::GenIntent) || a.drop.count(StepId::GenSlotPairs)) p.llm_logic_form = true;
  if (a.no_domain) p.condition_domain = false;
  validate_plan(p);
  return p;
}

json to_json(const PipelinePlan& p) {
  json order = json::array(), removed = json::array(), cond = json::object();
  for (StepId s : p.order) order.push_back(to_string(s));
  for (StepId s : p.removed) removed.push_back(to_string(s));
  for (const auto& [step, sources] : p.conditioning) {
    json src = json::array();
    for (StepId s : sources) src.push_back(to_string(s));
    cond[std::string(to_string(step))] = src;
  }
  return {{"order", order},
          {"removed", removed},
          {"condition_domain", p.condition_domain},
          {"structure_kind", to_string(p.structure_kind)},
          {"conditioning", cond},
          {"llm_logic_form", p.llm_logic_form}};
}

PipelinePlan pipeline_plan_from_json(const json& j) {
  PipelinePlan p;
  try {
    for (const auto& s : j.at("order")) p.order.push_back(step_from_string(s.get<std::string>()));
    for (const auto& s : j.value("removed", json::array())) p.removed.insert(step_from_string(s.get<std::string>()));
    p.condition_domain = j.value("condition_domain", true);
    p.structure_kind = structure_kind_from_string(j.value("structure_kind", "amr"));
    for (const auto& [step, sources] : j.at("conditioning").items()) {
      auto& set = p.conditioning[step_from_string(step)];
      for (const auto& s : sources) set.insert(step_from_string(s.get<std::string>()));
    }
    p.llm_logic_form = j.value("llm_logic_form", false);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidPlan, std::string("plan JSON: ") + e.what());
  }
  validate_plan(p);
  return p;
}

// ---------------------------------------------------------------------------
// Step outputs

StepValue parse_step_output(StepId step, std::string_view raw, const ParseContext& ctx) {
  StepValue v;
  if (text::trim(raw).empty()) throw Error(ErrorKind::NoExtractableAnswer, "empty output");
  switch (step) {
    case StepId::GenStructure:
      v.structure = extract_structure(raw, ctx.structure_kind);
      if (v.structure.empty()) throw Error(ErrorKind::NoExtractableAnswer, "no structure in output");
      v.validation = validate_structure(v.structure, ctx.structure_kind);
      break;
    case StepId::GenIntent:
      v.intent = parse_intent(raw, ctx.intent_vocab);
      break;
    case StepId::GenSlotValues:
      v.slot_values = parse_values(raw);
      break;
    case StepId::GenSlotPairs:
      v.slot_pairs = parse_pairs(raw, ctx.slot_vocab);
      break;
    case StepId::GenLogicForm: {
      for (auto f : find_bracketed_forms(raw)) {
        try {
          v.logic_form = parse_logic_form(f);
          break;
        } catch (const Error&) {
        }
      }
      if (!v.logic_form) throw Error(ErrorKind::NoExtractableAnswer, "no parseable Logic Form in output");
      break;
    }
  }
  return v;
}

std::string render_step_value(StepId step, const StepValue& v) {
  switch (step) {
    case StepId::GenStructure:
      return v.structure.empty() ? "unknown" : v.structure;
    case StepId::GenIntent:
      return v.intent.empty() ? "unknown" : v.intent;
    case StepId::GenSlotValues:
      return v.slot_values.empty() ? "none" : text::join(v.slot_values, ", ");
    case StepId::GenSlotPairs: {
      if (v.slot_pairs.empty()) return "none";
      std::vector<std::string> parts;
      for (const auto& p : v.slot_pairs) parts.push_back(p.slot_type + ": " + p.slot_value);
      return text::join(parts, "; ");
    }
    case StepId::GenLogicForm:
      return v.logic_form ? serialize_logic_form(*v.logic_form) : "unknown";
  }
  return "";
}

json step_value_json(StepId step, const StepValue& v) {
  switch (step) {
    case StepId::GenStructure:
      return v.structure;
    case StepId::GenIntent:
      return v.intent;
    case StepId::GenSlotValues:
      return v.slot_values;
    case StepId::GenSlotPairs: {
      json pairs = json::array();
      for (const auto& p : v.slot_pairs) pairs.push_back({p.slot_type, p.slot_value});
      return pairs;
    }
    case StepId::GenLogicForm:
      return v.logic_form ? json(serialize_logic_form(*v.logic_form)) : json();
  }
  return json();
}

Normalizer step_normalizer(StepId step, const ParseContext& ctx) {
  return [step, ctx](std::string_view raw) -> std::optional<std::string> {
    try {
      const StepValue v = parse_step_output(step, raw, ctx);
      if (step == StepId::GenStructure) return text::collapse_ws(v.structure);
      if (step == StepId::GenSlotValues) {
        std::vector<std::string> lowered;
        for (const auto& s : v.slot_values) lowered.push_back(text::to_lower(s));
        return json(lowered).dump();
      }
      return step_value_json(step, v).dump();
    } catch (const Error&) {
      return std::nullopt;
    }
  };
}

std::string structure_label(StructureKind kind) {
  switch (kind) {
    case StructureKind::Amr:
      return "AMR";
    case StructureKind::DependencyParse:
      return "Dependency parse";
    case StructureKind::ConstituencyParse:
      return "Constituency parse";
  }
  return "Structure";
}

std::string output_label(StepId step, StructureKind kind) {
  switch (step) {
    case StepId::GenStructure:
      return structure_label(kind);
    case StepId::GenIntent:
      return "Intent";
    case StepId::GenSlotValues:
      return "Slot values";
    case StepId::GenSlotPairs:
      return "Slot type pairs";
    case StepId::GenLogicForm:
      return "Logic Form";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Prompts

std::string render_step_prompt(StepId step, const Example& ex, const PipelinePlan& plan,
                               const std::map<StepId, std::string>& prior, const PromptInputs& in) {
  const std::string dir = cof_dir(in);
  const std::string fields_tmpl = load_template_file(dir, "fields.txt");

  std::vector<std::string> blocks;
  if (!in.demonstrations.empty()) {
    const std::string demo_tmpl = load_template_file(dir, "demo.txt");
    for (const auto& d : in.demonstrations) {
      if (!d.step_annotations) {
        throw Error(ErrorKind::MissingAnnotations, "demonstration '" + d.id + "' has no step annotations");
      }
      if (plan.structure_kind != StructureKind::Amr && needs_structure_annotation(step, plan)) {
        throw Error(ErrorKind::MissingAnnotations, "demonstrations carry AMR annotations only, not " +
                                                       structure_label(plan.structure_kind) + " text");
      }
      const StepValue v = annotated_value(d);
      TemplateVars vars{{"fields", render_fields(fields_tmpl, d.utterance, d.domain, plan, step, rendered_all(v))},
                        {"output_label", output_label(step, plan.structure_kind)},
                        {"answer", demo_answer(step, v)}};
      blocks.push_back(render_template(demo_tmpl, vars));
    }
  }

  TemplateVars vars{{"fields", render_fields(fields_tmpl, ex.utterance, ex.domain, plan, step, prior)},
                    {"output_label", output_label(step, plan.structure_kind)},
                    {"structure_label", structure_label(plan.structure_kind)},
                    {"intent_vocab", text::join(in.intent_vocab, ", ")},
                    {"slot_vocab", text::join(in.slot_vocab, ", ")},
                    {"demonstrations", text::join(blocks, "\n")}};
  return render_template(load_template_file(dir, step_file(step)), vars);
}

std::vector<std::pair<StepId, std::string>> dry_run_prompts(const Example& ex, const PipelinePlan& plan,
                                                            const PromptInputs& in) {
  validate_plan(plan);
  std::map<StepId, std::string> prior;
  std::vector<std::pair<StepId, std::string>> out;
  for (StepId step : plan.order) {
    if (step == StepId::GenLogicForm && !plan.llm_logic_form) break;
    out.emplace_back(step, render_step_prompt(step, ex, plan, prior, in));
    prior[step] = "<" + std::string(to_string(step)) + " output>";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Execution

PipelineResult run_example(const Example& ex, const PipelinePlan& plan, const DecodingConfig& dec,
                           const PromptInputs& in, Backend& backend) {
  validate_plan(plan);
  PipelineResult result;
  result.example_id = ex.id;
  const ParseContext ctx{in.intent_vocab, in.slot_vocab, plan.structure_kind};

  StepValue values;  // accumulates every step's parsed output
  std::map<StepId, std::string> prior;

  for (StepId step : plan.order) {
    StepTrace trace;
    trace.step = step;

    if (step == StepId::GenLogicForm && !plan.llm_logic_form) {
      if (values.intent.empty()) {
        trace.error = "no intent to assemble a Logic Form from";
        result.traces.push_back(std::move(trace));
        result.failure = Failure{ErrorKind::UnparseableFinalForm, "no intent to assemble a Logic Form from"};
        return result;
      }
      LogicForm lf{values.intent, {}};
      for (const auto& p : values.slot_pairs) lf.slots.push_back(p);
      // The assembled form must be expressible; drop pairs that are not.
      std::erase_if(lf.slots, [](const SlotEntry& s) {
        return text::trim(s.slot_type).empty() || text::trim(s.slot_value).empty();
      });
      const std::string form = serialize_logic_form(lf);
      trace.raw_completions = {form};
      trace.selection = Selection{0, form, 1, 1, "assembled"};
      trace.parsed = form;
      result.final = parse_logic_form(form);
      result.traces.push_back(std::move(trace));
      return result;
    }

    trace.prompt = render_step_prompt(step, ex, plan, prior, in);
    try {
      const CompletionRequest req{dec.model, trace.prompt, dec.temperature, dec.n, dec.max_tokens};
      trace.raw_completions = backend.complete(req).completions;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::AuthFailure) throw;
      trace.error = e.what();
      result.traces.push_back(std::move(trace));
      result.failure = Failure{e.kind(), e.what()};
      return result;
    }

    const Selection sel = aggregate(trace.raw_completions, dec.aggregator, step_normalizer(step, ctx));
    trace.selection = sel;
    try {
      const StepValue v = parse_step_output(step, trace.raw_completions[sel.index], ctx);
      switch (step) {
        case StepId::GenStructure:
          values.structure = v.structure;
          trace.validation = report_json(*v.validation);
          break;
        case StepId::GenIntent:
          values.intent = v.intent;
          break;
        case StepId::GenSlotValues:
          values.slot_values = v.slot_values;
          break;
        case StepId::GenSlotPairs:
          values.slot_pairs = v.slot_pairs;
          break;
        case StepId::GenLogicForm:
          values.logic_form = v.logic_form;
          break;
      }
      trace.parsed = step_value_json(step, v);
    } catch (const Error& e) {
      trace.error = e.what();
      if (step == StepId::GenLogicForm) {
        result.traces.push_back(std::move(trace));
        result.failure = Failure{ErrorKind::UnparseableFinalForm, e.what()};
        return result;
      }
    }
    prior[step] = render_step_value(step, values);
    result.traces.push_back(std::move(trace));
  }
  result.final = values.logic_form;
  return result;
}

}  // namespace cofcot
