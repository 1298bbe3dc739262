#include <cstdint>

#include "cofcot/experiment.hpp"
#include "cofcot/text.hpp"

namespace cofcot {

namespace {

// Uniform draw in [0, 1) from a SHA-256 of the seed text.
double unit_draw(const std::string& seed) {
  const std::string h = sha256_hex(seed);
  const std::uint64_t v = std::stoull(h.substr(0, 13), nullptr, 16);  // 52 bits
  return static_cast<double>(v) / static_cast<double>(std::uint64_t{1} << 52);
}

std::size_t pick_index(const std::string& seed, std::size_t n) {
  return n == 0 ? 0 : static_cast<std::size_t>(unit_draw(seed) * static_cast<double>(n)) % n;
}

std::string last_line_value(const std::string& prompt, const std::string& prefix) {
  std::size_t pos = prompt.rfind("\n" + prefix);
  if (pos == std::string::npos) {
    if (prompt.rfind(prefix, 0) != 0) return "";
    pos = 0;
  } else {
    pos += 1;
  }
  const std::size_t start = pos + prefix.size();
  const std::size_t end = prompt.find('\n', start);
  return std::string(text::trim(prompt.substr(start, end == std::string::npos ? std::string::npos : end - start)));
}

std::string requested_label(const std::string& prompt) {
  const std::size_t pos = prompt.rfind("Output (");
  if (pos == std::string::npos) return "";
  const std::size_t close = prompt.find(')', pos);
  return prompt.substr(pos + 8, close == std::string::npos ? std::string::npos : close - pos - 8);
}

std::string concept_of(const std::string& label) {
  std::string out = text::to_lower(label);
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

// Stand-in structure for examples without annotated AMR.
std::string synthesized_amr(const Example& ex) {
  std::string amr = "(r / " + concept_of(ex.gold.intent);
  for (const auto& s : ex.gold.slots) {
    std::string value = s.slot_value;
    std::replace(value.begin(), value.end(), '"', '\'');
    amr += " :" + concept_of(s.slot_type) + " \"" + value + "\"";
  }
  return amr + ")";
}

}  // namespace

SimulatedLlm::SimulatedLlm(const std::vector<Example>& examples, double noise) : noise_(noise) {
  std::map<std::string, std::set<std::string>> intents, slots;
  for (const auto& ex : examples) {
    by_utterance_.emplace(ex.utterance, ex);
    intents[ex.domain].insert(ex.gold.intent);
    for (const auto& s : ex.gold.slots) slots[ex.domain].insert(s.slot_type);
  }
  for (const auto& [d, set] : intents) domain_intents_[d].assign(set.begin(), set.end());
  for (const auto& [d, set] : slots) domain_slot_types_[d].assign(set.begin(), set.end());
}

CompletionResponse SimulatedLlm::complete(const CompletionRequest& req) {
  validate_request(req);
  const std::string utterance = last_line_value(req.prompt, "Utterance: ");
  const auto it = by_utterance_.find(utterance);
  if (it == by_utterance_.end()) {
    throw Error(ErrorKind::BackendError, "simulated LLM: no gold labels for utterance '" + utterance + "'");
  }
  const Example& ex = it->second;
  const std::string label = requested_label(req.prompt);
  const bool reasoning = text::contains(req.prompt, "step by step") || text::contains(req.prompt, "Subproblem");

  const LogicForm& gold = ex.gold;
  std::vector<std::string> values;
  for (const auto& s : gold.slots) values.push_back(s.slot_value);

  // Wrong intent from the same domain (or a generic one when the domain has a single intent).
  auto wrong_intent = [&](const std::string& seed) {
    const auto& pool = domain_intents_[ex.domain];
    std::vector<std::string> others;
    for (const auto& i : pool) {
      if (i != gold.intent) others.push_back(i);
    }
    return others.empty() ? std::string("UNSUPPORTED") : others[pick_index(seed, others.size())];
  };
  auto corrupt_form = [&](const std::string& seed) {
    LogicForm lf = gold;
    const double u = unit_draw(seed + "#kind");
    if (u < 0.4 || lf.slots.empty()) {
      lf.intent = wrong_intent(seed);
    } else if (u < 0.7) {
      lf.slots.erase(lf.slots.begin() + static_cast<std::ptrdiff_t>(pick_index(seed + "#slot", lf.slots.size())));
    } else {
      const auto& pool = domain_slot_types_[ex.domain];
      auto& s = lf.slots[pick_index(seed + "#slot", lf.slots.size())];
      for (const auto& t : pool) {
        if (t != s.slot_type) {
          s.slot_type = t;
          break;
        }
      }
    }
    return lf;
  };

  auto answer = [&](bool corrupt, const std::string& seed) -> std::string {
    if (label == "Intent") {
      return "The intent is " + (corrupt ? wrong_intent(seed) : gold.intent) + ".";
    }
    if (label == "Slot values") {
      std::vector<std::string> v = values;
      if (corrupt) {
        if (v.empty()) v.push_back(text::split_ws(utterance + " please").front());
        else v.erase(v.begin() + static_cast<std::ptrdiff_t>(pick_index(seed, v.size())));
      }
      return v.empty() ? "none" : text::join(v, "\n");
    }
    if (label == "Slot type pairs") {
      const LogicForm lf = corrupt && !gold.slots.empty() ? corrupt_form(seed) : gold;
      if (lf.slots.empty()) return "none";
      std::vector<std::string> lines;
      for (const auto& s : lf.slots) lines.push_back(s.slot_type + ": " + s.slot_value);
      return text::join(lines, "\n");
    }
    if (label == "Logic Form") {
      const std::string form = serialize_logic_form(corrupt ? corrupt_form(seed) : gold);
      if (!reasoning) return form;
      return "The utterance asks for " + concept_of(gold.intent) + ". Slot values: " +
             (values.empty() ? std::string("none") : text::join(values, ", ")) + ". So the Logic Form is " + form;
    }
    // Structure steps (AMR / Dependency parse / Constituency parse).
    const std::string amr = ex.step_annotations && !ex.step_annotations->amr_text.empty()
                                ? ex.step_annotations->amr_text
                                : synthesized_amr(ex);
    return corrupt ? amr.substr(0, amr.size() - 1) : amr;
  };

  const std::string key = utterance + "\x1f" + label;
  const bool systematic = unit_draw(key + "#systematic") < noise_;
  CompletionResponse resp;
  for (int i = 0; i < req.n; ++i) {
    const std::string seed = req.prompt + "\x1f" + std::to_string(i);
    const bool corrupt = systematic || unit_draw(seed) < noise_;
    resp.completions.push_back(answer(corrupt, systematic ? key : seed));
  }
  resp.usage.prompt_tokens = text::split_ws(req.prompt).size();
  for (const auto& c : resp.completions) resp.usage.completion_tokens += text::split_ws(c).size();
  return resp;
}

}  // namespace cofcot
