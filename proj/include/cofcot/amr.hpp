#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cofcot/error.hpp"

// AMR graphs in PENMAN notation, e.g.
//
//   (r / remind-01
//      :ARG1 (p / person
//               :name (j / "John")))
//
// Nodes are introduced by "var / concept". A relation target that is a bare
// declared variable becomes a re-entrant edge. Other bare symbols and quoted
// strings in target position ("-", 5, imperative, "Paris") are kept as
// attributes on the source node rather than nodes.
namespace cofcot {

enum class StructureKind { Amr, DependencyParse, ConstituencyParse };

std::string_view to_string(StructureKind kind);
StructureKind structure_kind_from_string(std::string_view s);

using NodeId = std::size_t;

struct AmrNode {
  std::string variable;
  std::string concept_label;  // as written; quoted constants keep their quotes

  friend bool operator==(const AmrNode&, const AmrNode&) = default;
};

struct AmrEdge {
  NodeId source = 0;
  std::string relation;  // ":ARG0", ":time", ...
  NodeId target = 0;

  friend bool operator==(const AmrEdge&, const AmrEdge&) = default;
};

struct AmrAttribute {
  NodeId source = 0;
  std::string relation;
  std::string value;

  friend bool operator==(const AmrAttribute&, const AmrAttribute&) = default;
};

struct AmrGraph {
  std::vector<AmrNode> nodes;
  std::vector<AmrEdge> edges;  // document order
  std::vector<AmrAttribute> attributes;
  NodeId root = 0;
};

// Throws Error{UnbalancedParens|DuplicateVariableDefinition|
// DanglingReference|EmptyGraph|MalformedNode}.
AmrGraph parse_amr(std::string_view text);

// Single-line PENMAN. Each node is written in full at its first depth-first
// encounter from the root and referenced by variable afterwards.
std::string serialize_amr(const AmrGraph& g);

// Throws Error{MalformedNode|DanglingReference|DuplicateVariableDefinition}
// if the graph breaks its invariants (including unreachable nodes).
void validate_amr_graph(const AmrGraph& g);

// Concept strings in depth-first order from the root, following edges in
// document order, each node once.
std::vector<std::string> concepts(const AmrGraph& g);

// Structural isomorphism: a bijection between nodes preserving concepts,
// root, labelled edges (as a multiset) and attributes. Variable names are
// ignored.
bool isomorphic(const AmrGraph& a, const AmrGraph& b);

struct Finding {
  ErrorKind kind;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Finding> errors;
  std::vector<Finding> warnings;
};

// AMR text is fully parsed. Dependency and constituency parses are opaque:
// they only need to be non-empty, and unbalanced parentheses are reported as
// a warning.
ValidationReport validate_structure(std::string_view text, StructureKind kind);

}  // namespace cofcot
