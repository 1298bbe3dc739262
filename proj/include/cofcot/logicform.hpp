#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cofcot/error.hpp"

// Flat Logic Form labels: "[IN:<INTENT> [SL:<TYPE>: <value>] ...]".
//
// One intent followed by an ordered list of slots. Nested forms are rejected
// at parse time rather than flattened. Values are stored in canonical form
// (trimmed, internal whitespace collapsed to single spaces); inside a value a
// backslash escapes the next character so '[' and ']' can appear literally.
namespace cofcot {

struct SlotEntry {
  std::string slot_type;   // without "SL:"
  std::string slot_value;  // surface text span

  friend bool operator==(const SlotEntry&, const SlotEntry&) = default;
};

struct LogicForm {
  std::string intent;  // without "IN:"
  std::vector<SlotEntry> slots;

  friend bool operator==(const LogicForm&, const LogicForm&) = default;
};

struct SemanticFrame {
  std::string intent;
  std::vector<std::string> slot_types;

  friend bool operator==(const SemanticFrame&, const SemanticFrame&) = default;

  // "IN:CREATE_REMINDER-SL:TODO-SL:DATE_TIME"
  std::string to_string() const;
};

struct BioSequence {
  std::vector<std::string> tags;

  friend bool operator==(const BioSequence&, const BioSequence&) = default;
};

struct BioAlignment {
  BioSequence bio;
  // Indices into LogicForm::slots whose value matched no free token span.
  std::vector<std::size_t> unaligned_slots;
};

// Throws Error{MalformedBrackets|MissingIntent|NestedForm|EmptySlot}. Never
// throws anything else for any input.
LogicForm parse_logic_form(std::string_view text);

std::string serialize_logic_form(const LogicForm& lf);

// Throws Error{MissingIntent|EmptySlot|NestedForm} when lf violates the type
// invariants (and so would not survive a parse/serialize round trip).
void validate_logic_form(const LogicForm& lf);

SemanticFrame extract_frame(const LogicForm& lf);

// Slots are aligned in LogicForm order; each takes the leftmost span of
// untagged tokens matching its value case-insensitively, whole tokens only.
BioAlignment to_bio(const LogicForm& lf, const std::vector<std::string>& tokens);

bool is_well_formed_bio(const BioSequence& seq);

struct BioChunk {
  std::string type;
  std::size_t begin = 0;  // token index, inclusive
  std::size_t end = 0;    // exclusive

  friend bool operator==(const BioChunk&, const BioChunk&) = default;
};

// conlleval-style chunk decoding; a stray I- tag opens a new chunk.
std::vector<BioChunk> bio_chunks(const BioSequence& seq);

// Every balanced "[IN:...]" span in text, in order of appearance. Used to pull
// a Logic Form out of surrounding model prose.
std::vector<std::string_view> find_bracketed_forms(std::string_view text);

// Strips an "IN:"/"SL:" prefix (any case) and upper-cases. Used when labels
// are compared across sources.
std::string canonical_label(std::string_view label);

}  // namespace cofcot
