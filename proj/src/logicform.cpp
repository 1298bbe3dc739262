#include "cofcot/logicform.hpp"

#include "cofcot/text.hpp"

namespace cofcot {
namespace {

bool is_label_char(char c) { return !text::is_space(c) && c != '[' && c != ']'; }

class LogicFormParser {
 public:
  explicit LogicFormParser(std::string_view text) : s_(text) {}

  LogicForm parse() {
    check_balance();
    skip_ws();
    if (!consume('[')) fail(ErrorKind::MalformedBrackets, "expected '[' at start of form");
    skip_ws();
    if (!consume_prefix("IN:")) {
      fail(ErrorKind::MissingIntent, "form does not start with an IN: label");
    }
    LogicForm lf;
    while (pos_ < s_.size() && is_label_char(s_[pos_])) lf.intent += s_[pos_++];
    if (lf.intent.empty()) fail(ErrorKind::MissingIntent, "empty intent label");

    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) fail(ErrorKind::MalformedBrackets, "unterminated form");
      if (consume(']')) break;
      if (s_[pos_] != '[') fail(ErrorKind::MalformedBrackets, "unexpected text between slot groups");
      ++pos_;
      lf.slots.push_back(parse_slot());
    }
    skip_ws();
    if (pos_ != s_.size()) fail(ErrorKind::MalformedBrackets, "trailing text after closing bracket");
    return lf;
  }

 private:
  // Balance check over unescaped brackets, run before anything else so that
  // "[IN:X [SL:A: b]" reports the bracket problem rather than a later symptom.
  void check_balance() const {
    long depth = 0;
    for (std::size_t i = 0; i < s_.size(); ++i) {
      if (s_[i] == '\\') {
        ++i;
        continue;
      }
      if (s_[i] == '[') ++depth;
      if (s_[i] == ']' && --depth < 0) fail(ErrorKind::MalformedBrackets, "unmatched ']'");
    }
    if (depth != 0) fail(ErrorKind::MalformedBrackets, "unmatched '['");
  }

  SlotEntry parse_slot() {
    skip_ws();
    if (text::istarts_with(s_.substr(pos_), "IN:")) {
      fail(ErrorKind::NestedForm, "intent nested inside the form");
    }
    if (!consume_prefix("SL:")) fail(ErrorKind::MalformedBrackets, "slot group must start with SL:");
    SlotEntry slot;
    while (pos_ < s_.size() && is_label_char(s_[pos_]) && s_[pos_] != ':') slot.slot_type += s_[pos_++];
    if (slot.slot_type.empty()) fail(ErrorKind::EmptySlot, "empty slot type");
    skip_ws();
    consume(':');

    std::string raw;
    for (;;) {
      if (pos_ >= s_.size()) fail(ErrorKind::MalformedBrackets, "unterminated slot");
      char c = s_[pos_++];
      if (c == '\\' && pos_ < s_.size()) {
        raw += s_[pos_++];
        continue;
      }
      if (c == ']') break;
      if (c == '[') fail(ErrorKind::NestedForm, "bracket inside slot value");
      raw += c;
    }
    slot.slot_value = text::collapse_ws(raw);
    if (slot.slot_value.empty()) fail(ErrorKind::EmptySlot, "slot " + slot.slot_type + " has no value");
    for (const auto& tok : text::split_ws(slot.slot_value)) {
      if (text::istarts_with(tok, "IN:")) fail(ErrorKind::NestedForm, "intent label inside slot value");
    }
    return slot;
  }

  void skip_ws() {
    while (pos_ < s_.size() && text::is_space(s_[pos_])) ++pos_;
  }

  bool consume(char c) {
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool consume_prefix(std::string_view prefix) {
    if (!text::istarts_with(s_.substr(pos_), prefix)) return false;
    pos_ += prefix.size();
    return true;
  }

  [[noreturn]] void fail(ErrorKind kind, const std::string& what) const {
    throw Error(kind, what + " at offset " + std::to_string(pos_));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

std::string escape_value(std::string_view v) {
  std::string out;
  out.reserve(v.size());
  for (char c : v) {
    if (c == '[' || c == ']' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

bool has_forbidden(std::string_view s, std::string_view forbidden) {
  for (char c : s) {
    if (text::is_space(c) || forbidden.find(c) != std::string_view::npos) return true;
  }
  return false;
}

std::string tag_type(const std::string& tag) { return tag.size() > 2 ? tag.substr(2) : std::string(); }

}  // namespace

LogicForm parse_logic_form(std::string_view text) { return LogicFormParser(text).parse(); }

std::string serialize_logic_form(const LogicForm& lf) {
  std::string out = "[IN:" + lf.intent;
  for (const auto& slot : lf.slots) {
    out += " [SL:";
    out += slot.slot_type;
    out += ": ";
    out += escape_value(slot.slot_value);
    out += ']';
  }
  out += ']';
  return out;
}

void validate_logic_form(const LogicForm& lf) {
  if (lf.intent.empty() || has_forbidden(lf.intent, "[]\\")) {
    throw Error(ErrorKind::MissingIntent, "intent must be a non-empty label without spaces or brackets");
  }
  for (const auto& slot : lf.slots) {
    if (slot.slot_type.empty() || has_forbidden(slot.slot_type, "[]:\\")) {
      throw Error(ErrorKind::EmptySlot, "slot type must be a non-empty label: '" + slot.slot_type + "'");
    }
    if (slot.slot_value.empty() || slot.slot_value != text::collapse_ws(slot.slot_value)) {
      throw Error(ErrorKind::EmptySlot, "slot value must be non-empty and whitespace-canonical");
    }
    for (const auto& tok : text::split_ws(slot.slot_value)) {
      if (text::istarts_with(tok, "IN:")) throw Error(ErrorKind::NestedForm, "intent label inside slot value");
    }
  }
}

std::string SemanticFrame::to_string() const {
  std::string out = "IN:" + intent;
  for (const auto& t : slot_types) out += "-SL:" + t;
  return out;
}

SemanticFrame extract_frame(const LogicForm& lf) {
  SemanticFrame frame{lf.intent, {}};
  frame.slot_types.reserve(lf.slots.size());
  for (const auto& slot : lf.slots) frame.slot_types.push_back(slot.slot_type);
  return frame;
}

BioAlignment to_bio(const LogicForm& lf, const std::vector<std::string>& tokens) {
  BioAlignment out;
  out.bio.tags.assign(tokens.size(), "O");
  std::vector<bool> tagged(tokens.size(), false);

  for (std::size_t s = 0; s < lf.slots.size(); ++s) {
    const auto value = text::split_ws(lf.slots[s].slot_value);
    const std::size_t m = value.size();
    bool placed = false;
    for (std::size_t start = 0; m > 0 && start + m <= tokens.size() && !placed; ++start) {
      bool ok = true;
      for (std::size_t j = 0; j < m && ok; ++j) {
        ok = !tagged[start + j] && text::iequals(tokens[start + j], value[j]);
      }
      if (!ok) continue;
      for (std::size_t j = 0; j < m; ++j) {
        tagged[start + j] = true;
        out.bio.tags[start + j] = (j == 0 ? "B-" : "I-") + lf.slots[s].slot_type;
      }
      placed = true;
    }
    if (!placed) out.unaligned_slots.push_back(s);
  }
  return out;
}

bool is_well_formed_bio(const BioSequence& seq) {
  std::string prev = "O";
  for (const auto& tag : seq.tags) {
    if (tag == "O") {
      prev = tag;
      continue;
    }
    if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I')) return false;
    if (tag[0] == 'I' && (prev == "O" || tag_type(prev) != tag_type(tag))) return false;
    prev = tag;
  }
  return true;
}

std::vector<BioChunk> bio_chunks(const BioSequence& seq) {
  std::vector<BioChunk> chunks;
  for (std::size_t i = 0; i < seq.tags.size(); ++i) {
    const auto& tag = seq.tags[i];
    if (tag == "O" || tag.size() < 3) continue;
    const std::string type = tag_type(tag);
    const bool continues = tag[0] == 'I' && !chunks.empty() && chunks.back().end == i &&
                           chunks.back().type == type;
    if (continues) {
      chunks.back().end = i + 1;
    } else {
      chunks.push_back({type, i, i + 1});
    }
  }
  return chunks;
}

std::vector<std::string_view> find_bracketed_forms(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '[') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && text::is_space(text[j])) ++j;
    if (!text::istarts_with(text.substr(j), "IN:")) {
      ++i;
      continue;
    }
    long depth = 0;
    std::size_t end = std::string_view::npos;
    for (std::size_t k = i; k < text.size(); ++k) {
      if (text[k] == '\\') {
        ++k;
        continue;
      }
      if (text[k] == '[') ++depth;
      if (text[k] == ']' && --depth == 0) {
        end = k;
        break;
      }
    }
    if (end == std::string_view::npos) {
      ++i;
      continue;
    }
    out.push_back(text.substr(i, end - i + 1));
    i = end + 1;
  }
  return out;
}

std::string canonical_label(std::string_view label) {
  label = text::trim(label);
  if (text::istarts_with(label, "IN:") || text::istarts_with(label, "SL:")) label.remove_prefix(3);
  return text::to_upper(text::trim(label));
}

}  // namespace cofcot
