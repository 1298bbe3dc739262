#pragma once

// Hand-rolled random generators for property tests.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <utility>
#include <random>
#include <string>
#include <vector>

#include "cofcot/amr.hpp"
#include "cofcot/logicform.hpp"

namespace cofcot::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(rng_() % n); }
  bool coin(double p = 0.5) { return static_cast<double>(rng_() % 1000000) < p * 1000000.0; }

  template <typename T>
  const T& pick(const std::vector<T>& xs) {
    return xs[below(xs.size())];
  }

  std::string label(std::size_t max_len = 8) {
    static const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ_0123456789";
    std::string s(1, alphabet[below(26)]);
    const std::size_t len = below(max_len);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[below(alphabet.size())];
    return s;
  }

  // Words include bracket/backslash/colon characters so the escape path and
  // the type/value colon split are exercised.
  std::string word() {
    static const std::vector<std::string> words = {
        "message", "mike", "at", "7pm", "tonight", "a", "the", "Set", "up", "reminder", "x:y", "a[b",
        "c]d", "back\\slash", "10:30", ":lead", "tail:", "caf\xc3\xa9", "\"q\"", "n,o"};
    return pick(words);
  }

  std::string value(std::size_t max_words = 4) {
    std::string v = word();
    const std::size_t extra = below(max_words);
    for (std::size_t i = 0; i < extra; ++i) v += " " + word();
    return v;
  }

  LogicForm logic_form(std::size_t max_slots = 5) {
    LogicForm lf;
    lf.intent = label();
    const std::size_t n = below(max_slots + 1);
    for (std::size_t i = 0; i < n; ++i) lf.slots.push_back({label(6), value()});
    return lf;
  }

  // Random rooted graph: a spanning tree (so every node is reachable) plus
  // extra re-entrant edges and constant attributes.
  AmrGraph amr_graph(std::size_t max_nodes = 12) {
    static const std::vector<std::string> concepts = {
        "remind-01", "person", "\"John\"", "date-entity", "want-01", "go-02", "thing", "music", "and", "city"};
    static const std::vector<std::string> relations = {":ARG0", ":ARG1", ":ARG2", ":mod", ":time", ":name",
                                                       ":op1", ":ARG0-of", ":location"};
    static const std::vector<std::string> constants = {"-", "5", "imperative", "\"Paris\"", "\"19:00\""};
    AmrGraph g;
    const std::size_t n = 1 + below(max_nodes);
    for (std::size_t i = 0; i < n; ++i) {
      g.nodes.push_back({std::string(1, static_cast<char>('a' + below(26))) + std::to_string(i), pick(concepts)});
    }
    for (std::size_t i = 1; i < n; ++i) g.edges.push_back({below(i), pick(relations), i});
    const std::size_t extra = below(n + 1);
    for (std::size_t k = 0; k < extra; ++k) g.edges.push_back({below(n), pick(relations), below(n)});
    const std::size_t attrs = below(3);
    for (std::size_t k = 0; k < attrs; ++k) g.attributes.push_back({below(n), pick(relations), pick(constants)});
    g.root = 0;
    return g;
  }

  // Small label/value alphabets so that predictions collide with golds often
  // enough to exercise partial matches, duplicates and case differences.
  LogicForm small_form() {
    static const std::vector<std::string> intents = {"GET_EVENT", "SET_ALARM", "get_event", "PLAY_MUSIC"};
    static const std::vector<std::string> types = {"DATE_TIME", "LOCATION", "date_time", "ARTIST"};
    static const std::vector<std::string> values = {"today", "Today", "at 7pm", "at  7pm", "paris", "x"};
    LogicForm lf{pick(intents), {}};
    const std::size_t n = below(4);
    for (std::size_t i = 0; i < n; ++i) lf.slots.push_back({pick(types), pick(values)});
    return lf;
  }

  std::pair<std::vector<std::optional<LogicForm>>, std::vector<LogicForm>> corpus(std::size_t max_n) {
    std::vector<std::optional<LogicForm>> preds;
    std::vector<LogicForm> golds;
    const std::size_t n = 1 + below(max_n);
    for (std::size_t i = 0; i < n; ++i) {
      LogicForm gold = small_form();
      std::optional<LogicForm> pred;
      const std::size_t mode = below(5);
      if (mode == 0) {
        pred.reset();
      } else if (mode == 1) {
        pred = gold;
      } else if (mode == 2) {
        pred = gold;
        std::shuffle(pred->slots.begin(), pred->slots.end(), rng_);
      } else {
        pred = small_form();
      }
      preds.push_back(pred);
      golds.push_back(gold);
    }
    return {preds, golds};
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace cofcot::testing
