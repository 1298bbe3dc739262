#include "cofcot/amr.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <unordered_map>

#include "cofcot/text.hpp"

namespace cofcot {
namespace {

constexpr std::size_t kMaxDepth = 512;

enum class Tok { LParen, RParen, Slash, Role, String, Symbol, End };

struct Token {
  Tok type;
  std::string text;
  std::size_t offset;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto is_delim = [](char c) { return text::is_space(c) || c == '(' || c == ')' || c == '/' || c == '"'; };
  while (i < s.size()) {
    const char c = s[i];
    if (text::is_space(c)) {
      ++i;
    } else if (c == '(') {
      out.push_back({Tok::LParen, "(", i++});
    } else if (c == ')') {
      out.push_back({Tok::RParen, ")", i++});
    } else if (c == '/') {
      out.push_back({Tok::Slash, "/", i++});
    } else if (c == '"') {
      const std::size_t start = i++;
      while (i < s.size() && s[i] != '"') i += (s[i] == '\\') ? 2 : 1;
      if (i >= s.size()) throw Error(ErrorKind::MalformedNode, "unterminated string at offset " + std::to_string(start));
      ++i;
      out.push_back({Tok::String, std::string(s.substr(start, i - start)), start});
    } else {
      // Symbols stop at ':' so "thing:mod" splits into a concept and a role.
      const std::size_t start = i++;
      while (i < s.size() && !is_delim(s[i]) && s[i] != ':') ++i;
      const std::string word(s.substr(start, i - start));
      out.push_back({word.size() > 1 && word[0] == ':' ? Tok::Role : Tok::Symbol, word, start});
    }
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

// A single lowercase letter plus optional digits: the shape AMR variables take.
bool variable_shaped(std::string_view s) {
  if (s.empty() || s[0] < 'a' || s[0] > 'z') return false;
  return std::all_of(s.begin() + 1, s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

class AmrParser {
 public:
  explicit AmrParser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  AmrGraph parse() {
    long depth = 0;
    for (const auto& t : toks_) {
      if (t.type == Tok::LParen) ++depth;
      if (t.type == Tok::RParen && --depth < 0) {
        throw Error(ErrorKind::UnbalancedParens, "unmatched ')' at offset " + std::to_string(t.offset));
      }
    }
    if (depth != 0) throw Error(ErrorKind::UnbalancedParens, "unclosed '('");

    if (peek().type != Tok::LParen) fail("expected '(' to open the root node");
    if (toks_[1].type == Tok::RParen) throw Error(ErrorKind::EmptyGraph, "empty root node");
    parse_node(0);
    if (peek().type != Tok::End) fail("trailing content after the root node");
    return build();
  }

 private:
  enum class TargetKind { Node, Symbol, String };

  struct Relation {
    NodeId source;
    std::string role;
    TargetKind kind;
    NodeId node = 0;
    std::string text;
  };

  NodeId parse_node(std::size_t depth) {
    if (depth > kMaxDepth) fail("nesting too deep");
    expect(Tok::LParen, "'('");
    const Token var = next();
    if (var.type != Tok::Symbol) fail_at(var, "expected a variable");
    expect(Tok::Slash, "'/' after variable " + var.text);
    const Token label = next();
    if (label.type != Tok::Symbol && label.type != Tok::String) fail_at(label, "expected a concept");
    if (vars_.count(var.text)) {
      throw Error(ErrorKind::DuplicateVariableDefinition, "variable '" + var.text + "' defined twice");
    }
    const NodeId id = nodes_.size();
    vars_.emplace(var.text, id);
    nodes_.push_back({var.text, label.text});

    while (peek().type == Tok::Role) {
      const std::string role = next().text;
      Relation rel{id, role, TargetKind::Symbol, 0, {}};
      const std::size_t slot = relations_.size();
      relations_.push_back(rel);
      const Token& t = peek();
      if (t.type == Tok::LParen) {
        const NodeId child = parse_node(depth + 1);
        relations_[slot].kind = TargetKind::Node;
        relations_[slot].node = child;
      } else if (t.type == Tok::String || t.type == Tok::Symbol) {
        relations_[slot].kind = t.type == Tok::String ? TargetKind::String : TargetKind::Symbol;
        relations_[slot].text = next().text;
      } else {
        fail_at(t, "relation " + role + " has no target");
      }
    }
    expect(Tok::RParen, "')' or a relation");
    return id;
  }

  AmrGraph build() {
    AmrGraph g;
    g.nodes = std::move(nodes_);
    g.root = 0;
    for (auto& rel : relations_) {
      switch (rel.kind) {
        case TargetKind::Node:
          g.edges.push_back({rel.source, rel.role, rel.node});
          break;
        case TargetKind::String:
          g.attributes.push_back({rel.source, rel.role, rel.text});
          break;
        case TargetKind::Symbol:
          if (auto it = vars_.find(rel.text); it != vars_.end()) {
            g.edges.push_back({rel.source, rel.role, it->second});
          } else if (variable_shaped(rel.text)) {
            throw Error(ErrorKind::DanglingReference,
                        rel.role + " refers to undeclared variable '" + rel.text + "'");
          } else {
            g.attributes.push_back({rel.source, rel.role, rel.text});
          }
          break;
      }
    }
    return g;
  }

  const Token& peek() const { return toks_[pos_]; }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  void expect(Tok type, const std::string& what) {
    const Token t = next();
    if (t.type != type) fail_at(t, "expected " + what);
  }

  [[noreturn]] void fail(const std::string& what) const { fail_at(peek(), what); }
  [[noreturn]] static void fail_at(const Token& t, const std::string& what) {
    throw Error(ErrorKind::MalformedNode, what + " at offset " + std::to_string(t.offset));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<AmrNode> nodes_;
  std::vector<Relation> relations_;
  std::unordered_map<std::string, NodeId> vars_;
};

}  // namespace

std::string_view to_string(StructureKind kind) {
  switch (kind) {
    case StructureKind::Amr: return "amr";
    case StructureKind::DependencyParse: return "dependency_parse";
    case StructureKind::ConstituencyParse: return "constituency_parse";
  }
  return "amr";
}

StructureKind structure_kind_from_string(std::string_view s) {
  const std::string v = text::to_lower(text::trim(s));
  if (v == "amr") return StructureKind::Amr;
  if (v == "dependency_parse" || v == "dp") return StructureKind::DependencyParse;
  if (v == "constituency_parse" || v == "cp") return StructureKind::ConstituencyParse;
  throw Error(ErrorKind::InvalidArgument, "unknown structure kind '" + std::string(s) + "'");
}

AmrGraph parse_amr(std::string_view text) {
  if (text::trim(text).empty()) throw Error(ErrorKind::EmptyGraph, "no AMR text");
  return AmrParser(tokenize(text)).parse();
}

void validate_amr_graph(const AmrGraph& g) {
  if (g.nodes.empty()) throw Error(ErrorKind::EmptyGraph, "graph has no nodes");
  if (g.root >= g.nodes.size()) throw Error(ErrorKind::MalformedNode, "root out of range");
  std::unordered_map<std::string, NodeId> seen;
  for (NodeId i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    if (n.variable.empty() || n.concept_label.empty()) throw Error(ErrorKind::MalformedNode, "empty variable or concept");
    if (!seen.emplace(n.variable, i).second) {
      throw Error(ErrorKind::DuplicateVariableDefinition, "variable '" + n.variable + "' defined twice");
    }
  }
  std::vector<std::vector<NodeId>> adj(g.nodes.size());
  for (const auto& e : g.edges) {
    if (e.source >= g.nodes.size() || e.target >= g.nodes.size()) {
      throw Error(ErrorKind::DanglingReference, "edge endpoint out of range");
    }
    if (e.relation.size() < 2 || e.relation[0] != ':') throw Error(ErrorKind::MalformedNode, "bad relation label");
    adj[e.source].push_back(e.target);
  }
  for (const auto& a : g.attributes) {
    if (a.source >= g.nodes.size()) throw Error(ErrorKind::DanglingReference, "attribute source out of range");
  }
  std::vector<bool> reached(g.nodes.size(), false);
  std::vector<NodeId> stack{g.root};
  reached[g.root] = true;
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    for (NodeId v : adj[u]) {
      if (!reached[v]) {
        reached[v] = true;
        stack.push_back(v);
      }
    }
  }
  if (std::find(reached.begin(), reached.end(), false) != reached.end()) {
    throw Error(ErrorKind::MalformedNode, "node unreachable from root");
  }
}

std::string serialize_amr(const AmrGraph& g) {
  validate_amr_graph(g);
  // Relations per source in document order: edges and attributes interleave
  // only by their own relative order, which parse_amr does not record, so
  // edges are written first.
  std::vector<std::vector<std::size_t>> out_edges(g.nodes.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i) out_edges[g.edges[i].source].push_back(i);
  std::vector<std::vector<std::size_t>> out_attrs(g.nodes.size());
  for (std::size_t i = 0; i < g.attributes.size(); ++i) out_attrs[g.attributes[i].source].push_back(i);

  std::vector<bool> emitted(g.nodes.size(), false);
  std::string out;
  std::function<void(NodeId)> emit = [&](NodeId u) {
    emitted[u] = true;
    out += "(" + g.nodes[u].variable + " / " + g.nodes[u].concept_label;
    for (std::size_t ei : out_edges[u]) {
      const auto& e = g.edges[ei];
      out += " " + e.relation + " ";
      if (emitted[e.target]) {
        out += g.nodes[e.target].variable;
      } else {
        emit(e.target);
      }
    }
    for (std::size_t ai : out_attrs[u]) out += " " + g.attributes[ai].relation + " " + g.attributes[ai].value;
    out += ")";
  };
  emit(g.root);
  return out;
}

std::vector<std::string> concepts(const AmrGraph& g) {
  std::vector<std::vector<NodeId>> adj(g.nodes.size());
  for (const auto& e : g.edges) adj[e.source].push_back(e.target);
  std::vector<bool> seen(g.nodes.size(), false);
  std::vector<std::string> out;
  std::function<void(NodeId)> visit = [&](NodeId u) {
    seen[u] = true;
    out.push_back(g.nodes[u].concept_label);
    for (NodeId v : adj[u]) {
      if (!seen[v]) visit(v);
    }
  };
  if (!g.nodes.empty()) visit(g.root);
  return out;
}

bool isomorphic(const AmrGraph& a, const AmrGraph& b) {
  const std::size_t n = a.nodes.size();
  if (n != b.nodes.size() || a.edges.size() != b.edges.size() || a.attributes.size() != b.attributes.size()) {
    return false;
  }
  if (n == 0) return true;

  using EdgeKey = std::tuple<NodeId, std::string, NodeId>;
  std::multiset<EdgeKey> b_edges;
  for (const auto& e : b.edges) b_edges.insert({e.source, e.relation, e.target});
  std::multiset<std::tuple<NodeId, std::string, std::string>> b_attrs;
  for (const auto& at : b.attributes) b_attrs.insert({at.source, at.relation, at.value});

  // Cheap per-node signature to prune candidate pairs.
  auto signature = [](const AmrGraph& g, NodeId u) {
    std::multiset<std::string> out_rel, in_rel, attrs;
    for (const auto& e : g.edges) {
      if (e.source == u) out_rel.insert(e.relation);
      if (e.target == u) in_rel.insert(e.relation);
    }
    for (const auto& at : g.attributes) {
      if (at.source == u) attrs.insert(at.relation + " " + at.value);
    }
    return std::make_tuple(g.nodes[u].concept_label, out_rel, in_rel, attrs);
  };
  std::vector<decltype(signature(a, 0))> sig_a, sig_b;
  for (NodeId i = 0; i < n; ++i) {
    sig_a.push_back(signature(a, i));
    sig_b.push_back(signature(b, i));
  }

  std::vector<std::optional<NodeId>> map(n);
  std::vector<bool> used(n, false);

  auto consistent = [&]() {
    std::multiset<EdgeKey> mapped;
    for (const auto& e : a.edges) mapped.insert({*map[e.source], e.relation, *map[e.target]});
    if (mapped != b_edges) return false;
    std::multiset<std::tuple<NodeId, std::string, std::string>> mapped_attrs;
    for (const auto& at : a.attributes) mapped_attrs.insert({*map[at.source], at.relation, at.value});
    return mapped_attrs == b_attrs;
  };

  std::map<EdgeKey, int> a_count, b_count;
  for (const auto& e : a.edges) ++a_count[{e.source, e.relation, e.target}];
  for (const auto& e : b.edges) ++b_count[{e.source, e.relation, e.target}];
  auto count_of = [](const std::map<EdgeKey, int>& m, const EdgeKey& k) {
    auto it = m.find(k);
    return it == m.end() ? 0 : it->second;
  };
  // Edges between i and already-mapped nodes must have mapped counterparts.
  auto locally_consistent = [&](NodeId i, NodeId j) {
    for (const auto& e : a.edges) {
      NodeId s = e.source, t = e.target;
      if (s != i && t != i) continue;
      const std::optional<NodeId> ms = s == i ? std::optional<NodeId>(j) : map[s];
      const std::optional<NodeId> mt = t == i ? std::optional<NodeId>(j) : map[t];
      if (!ms || !mt) continue;
      if (count_of(a_count, {s, e.relation, t}) != count_of(b_count, {*ms, e.relation, *mt})) return false;
    }
    return true;
  };

  std::function<bool(NodeId)> assign = [&](NodeId i) -> bool {
    if (i == n) return consistent();
    for (NodeId j = 0; j < n; ++j) {
      if (used[j] || sig_a[i] != sig_b[j]) continue;
      if ((i == a.root) != (j == b.root)) continue;
      if (!locally_consistent(i, j)) continue;
      map[i] = j;
      used[j] = true;
      if (assign(i + 1)) return true;
      used[j] = false;
      map[i].reset();
    }
    return false;
  };
  return assign(0);
}

ValidationReport validate_structure(std::string_view text, StructureKind kind) {
  ValidationReport report;
  if (kind == StructureKind::Amr) {
    try {
      parse_amr(text);
    } catch (const Error& e) {
      report.errors.push_back({e.kind(), e.what()});
    }
  } else {
    if (text::trim(text).empty()) {
      report.errors.push_back({ErrorKind::EmptyGraph, "empty structure text"});
    } else {
      long depth = 0;
      bool underflow = false;
      for (char c : text) {
        if (c == '(') ++depth;
        if (c == ')' && --depth < 0) underflow = true;
      }
      if (underflow || depth != 0) {
        report.warnings.push_back({ErrorKind::UnbalancedParens, "unbalanced parentheses in opaque structure"});
      }
    }
  }
  report.ok = report.errors.empty();
  return report;
}

}  // namespace cofcot
