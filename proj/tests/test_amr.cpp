#include <doctest.h>

#include <fstream>
#include <json.hpp>

#include "cofcot/amr.hpp"
#include "generators.hpp"

using namespace cofcot;
using nlohmann::json;

namespace {

json load_cases() {
  std::ifstream in(std::string(COFCOT_TEST_FIXTURES) + "/amr_cases.json");
  REQUIRE(in.good());
  return json::parse(in);
}

ErrorKind amr_error_kind(std::string_view text) {
  try {
    parse_amr(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected error for " << text);
  return ErrorKind::InvalidArgument;
}

AmrGraph rename_variables(AmrGraph g) {
  for (std::size_t i = 0; i < g.nodes.size(); ++i) g.nodes[i].variable = "z" + std::to_string(g.nodes.size() - i);
  return g;
}

}  // namespace

TEST_CASE("remind-01 example") {
  const AmrGraph g = parse_amr("(r / remind-01 :ARG1 (p / person :name (j / \"John\")))");
  CHECK(g.nodes.size() == 3);
  CHECK(g.edges.size() == 2);
  CHECK(g.nodes[g.root].variable == "r");
  CHECK(concepts(g) == std::vector<std::string>{"remind-01", "person", "\"John\""});
}

TEST_CASE("minimal graph and self edge") {
  const AmrGraph single = parse_amr("(x / thing)");
  CHECK(single.nodes.size() == 1);
  CHECK(single.edges.empty());
  CHECK(concepts(single) == std::vector<std::string>{"thing"});

  const AmrGraph self = parse_amr("(a / b :r a)");
  REQUIRE(self.nodes.size() == 1);
  REQUIRE(self.edges.size() == 1);
  CHECK(self.edges[0] == AmrEdge{0, ":r", 0});
}

TEST_CASE("hand-written fixture suite") {
  for (const auto& c : load_cases()) {
    const std::string text = c["text"];
    CAPTURE(text);
    if (c.contains("error")) {
      CHECK(to_string(amr_error_kind(text)) == c["error"].get<std::string>());
      continue;
    }
    const AmrGraph g = parse_amr(text);
    CHECK(g.nodes.size() == c["nodes"].get<std::size_t>());
    CHECK(g.edges.size() == c["edges"].get<std::size_t>());
    CHECK(g.attributes.size() == c["attributes"].get<std::size_t>());
    CHECK(g.nodes[g.root].variable == c["root"].get<std::string>());
    CHECK(concepts(g) == c["concepts"].get<std::vector<std::string>>());
    CHECK_NOTHROW(validate_amr_graph(g));
    const AmrGraph again = parse_amr(serialize_amr(g));
    CHECK(isomorphic(g, again));
  }
}

TEST_CASE("generated graphs round trip up to isomorphism") {
  testing::Gen gen(314);
  for (int i = 0; i < 500; ++i) {
    const AmrGraph g = gen.amr_graph();
    const std::string text = serialize_amr(g);
    CAPTURE(text);
    const AmrGraph parsed = parse_amr(text);
    // One node per "var / concept" introduction regardless of references.
    REQUIRE(parsed.nodes.size() == g.nodes.size());
    REQUIRE(isomorphic(g, parsed));
    REQUIRE(isomorphic(rename_variables(g), parsed));
  }
}

TEST_CASE("isomorphism rejects structural changes") {
  const AmrGraph g = parse_amr("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))");
  AmrGraph concept_changed = g;
  concept_changed.nodes[1].concept_label = "girl";
  CHECK_FALSE(isomorphic(g, concept_changed));

  AmrGraph relation_changed = g;
  relation_changed.edges[2].relation = ":ARG1";
  CHECK_FALSE(isomorphic(g, relation_changed));

  const AmrGraph tree = parse_amr("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 (b2 / boy)))");
  CHECK_FALSE(isomorphic(g, tree));
  CHECK(isomorphic(g, rename_variables(g)));
}

TEST_CASE("re-entrancy does not add nodes") {
  const AmrGraph once = parse_amr("(a / x :r (b / y))");
  const AmrGraph many = parse_amr("(a / x :r (b / y :s a :t b) :u b :v b)");
  CHECK(once.nodes.size() == many.nodes.size());
  CHECK(many.edges.size() == 5);
}

TEST_CASE("typed errors for malformed input") {
  CHECK(amr_error_kind("((") == ErrorKind::UnbalancedParens);
  CHECK(amr_error_kind("(a / b :r c)") == ErrorKind::DanglingReference);
  CHECK(amr_error_kind("(a / b :r (a / c))") == ErrorKind::DuplicateVariableDefinition);
  CHECK(amr_error_kind("") == ErrorKind::EmptyGraph);
  CHECK(amr_error_kind("(a / b) junk") == ErrorKind::MalformedNode);
  std::string deep;
  for (int i = 0; i < 2000; ++i) deep += "(v" + std::to_string(i) + " / x :r ";
  deep += "(end / y)";
  deep += std::string(2000, ')');
  CHECK(amr_error_kind(deep) == ErrorKind::MalformedNode);
}

TEST_CASE("parser is total over random paren soup") {
  testing::Gen gen(11);
  const std::string alphabet = "()/: ab\"-01xARG";
  for (int i = 0; i < 20000; ++i) {
    std::string s;
    const std::size_t len = gen.below(20);
    for (std::size_t j = 0; j < len; ++j) s += alphabet[gen.below(alphabet.size())];
    try {
      const AmrGraph g = parse_amr(s);
      CHECK(isomorphic(g, parse_amr(serialize_amr(g))));
    } catch (const Error&) {
    }
  }
}

TEST_CASE("validate_structure") {
  CHECK(validate_structure("(r / remind-01 :ARG1 (p / person))", StructureKind::Amr).ok);
  const auto bad = validate_structure("((", StructureKind::Amr);
  CHECK_FALSE(bad.ok);
  REQUIRE(bad.errors.size() == 1);
  CHECK(bad.errors[0].kind == ErrorKind::UnbalancedParens);

  CHECK(validate_structure("nsubj(set, you) dobj(set, reminder)", StructureKind::DependencyParse).ok);
  const auto ragged = validate_structure("(S (NP it", StructureKind::ConstituencyParse);
  CHECK(ragged.ok);
  CHECK(ragged.warnings.size() == 1);
  CHECK_FALSE(validate_structure("   ", StructureKind::DependencyParse).ok);

  // Idempotent and side-effect free.
  const std::string text = "(a / b :r c)";
  const auto first = validate_structure(text, StructureKind::Amr);
  const auto second = validate_structure(text, StructureKind::Amr);
  CHECK(first.ok == second.ok);
  CHECK(first.errors.size() == second.errors.size());
  CHECK(text == "(a / b :r c)");
}

TEST_CASE("structure kind names") {
  CHECK(structure_kind_from_string("AMR") == StructureKind::Amr);
  CHECK(structure_kind_from_string("dp") == StructureKind::DependencyParse);
  CHECK(structure_kind_from_string("constituency_parse") == StructureKind::ConstituencyParse);
  CHECK_THROWS_AS(structure_kind_from_string("tree"), Error);
}
