#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cofcot/logicform.hpp"

namespace cofcot {

enum class DataFormat { MtopTsv, MassiveJsonl, NativeJsonl };

std::string_view to_string(DataFormat f);
DataFormat data_format_from_string(std::string_view s);

// Hand-written labels for every intermediate step, used when an example is
// shown as a few-shot demonstration.
struct StepAnnotations {
  std::string amr_text;
  std::string intent;
  std::vector<std::string> slot_values;
  std::vector<SlotEntry> slot_pairs;
  std::string logic_form;

  friend bool operator==(const StepAnnotations&, const StepAnnotations&) = default;
};

struct Example {
  std::string id;
  std::string utterance;
  std::string domain;
  LogicForm gold;
  std::optional<StepAnnotations> step_annotations;

  friend bool operator==(const Example&, const Example&) = default;
};

struct Vocab {
  std::set<std::string> domains;
  std::set<std::string> intents;
  std::set<std::string> slot_types;
  std::map<std::string, std::set<std::string>> domain_intents;
  std::map<std::string, std::set<std::string>> domain_slot_types;
};

struct DatasetStats {
  std::size_t n_records = 0;  // every record read, nested MTOP forms included
  std::size_t n_domains = 0;
  std::size_t n_intents = 0;
  std::size_t n_slot_types = 0;
  double sentence_length_mean = 0.0;
  double sentence_length_std = 0.0;
  double slots_per_sample_mean = 0.0;
  double slots_per_sample_std = 0.0;
};

struct Dataset {
  std::vector<Example> examples;
  Vocab vocab;
  DatasetStats stats;
  // Records whose gold form is nested (MTOP compositional queries). They
  // contribute labels to the vocab and stats but cannot be flat examples.
  std::size_t n_nested_skipped = 0;
  // MASSIVE records outside en-US.
  std::size_t n_locale_skipped = 0;
};

// Errors: UnreadableFile, MalformedRecord ("line N: ..."), UnparseableGoldForm.
Dataset load_dataset(const std::string& path, DataFormat format);
Dataset parse_dataset(std::istream& in, DataFormat format);

nlohmann::json to_json(const Example& ex);
Example example_from_json(const nlohmann::json& j);
void write_native_jsonl(std::ostream& out, const std::vector<Example>& examples);

struct Split {
  std::set<std::string> train_domains;
  std::set<std::string> test_domains;
};

// Unknown domains throw DomainNotFound; overlap or an empty test side throws
// InvalidArgument. An empty train list means every non-test domain.
Split make_split(const Vocab& vocab, const std::vector<std::string>& test_domains,
                 const std::vector<std::string>& train_domains = {});

struct TestSet {
  std::uint64_t seed = 0;
  std::vector<Example> examples;
};

// Draws n_per_set examples per seed (without replacement) from the records
// in test_domains, in file order, via a partial Fisher-Yates shuffle driven
// by SeededRng. Errors: DomainNotFound, InsufficientData, InvalidArgument
// (seed count != n_seeds, or repeated seeds).
std::vector<TestSet> sample_test_sets(const std::vector<Example>& data, const std::set<std::string>& test_domains,
                                      std::size_t n_per_set, std::size_t n_seeds,
                                      const std::vector<std::uint64_t>& seeds);

enum class DemoMode { DomainDifferent, DomainSimilar };

std::string_view to_string(DemoMode m);
DemoMode demo_mode_from_string(std::string_view s);

// k examples from train_domains (DomainDifferent) or test_domains
// (DomainSimilar), never one whose id is in exclude_ids.
// Throws InsufficientAnnotatedData when fewer than k candidates qualify.
std::vector<Example> select_demonstrations(const std::vector<Example>& data, const Split& split, std::size_t k,
                                           DemoMode mode, std::uint64_t seed,
                                           const std::set<std::string>& exclude_ids = {},
                                           bool require_annotations = true);

}  // namespace cofcot
