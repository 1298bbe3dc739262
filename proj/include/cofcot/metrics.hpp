#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cofcot/logicform.hpp"

// Corpus-level evaluation of predicted against gold Logic Forms.
//
// Intent:  canonical labels equal ("IN:" stripped, case-insensitive).
// Slot F1: micro F1 over (type, value) pairs; per example the multiset
//          intersection counts as TP. Values are lowercased with whitespace
//          collapsed before comparison.
// Frame:   intent equal and slot-type multisets equal.
// Exact:   intent equal and (type, value) multisets equal.
//
// An absent prediction (unparseable model output) is wrong on every metric
// and contributes all of its gold slots as false negatives.
namespace cofcot {

using Prediction = std::optional<LogicForm>;

struct MetricsReport {
  double intent_accuracy = 0.0;
  double slot_f1 = 0.0;
  double frame_accuracy = 0.0;
  double exact_match = 0.0;
  std::size_t n_examples = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Integer tallies behind a report. Summing them is exact, so serial and
// parallel reductions always agree bit for bit.
struct CorpusCounts {
  std::size_t n = 0;
  std::size_t intent_correct = 0;
  std::size_t frame_correct = 0;
  std::size_t exact_correct = 0;
  std::size_t absent = 0;
  std::size_t true_pos = 0;
  std::size_t false_pos = 0;
  std::size_t false_neg = 0;

  CorpusCounts& operator+=(const CorpusCounts& o);
  friend bool operator==(const CorpusCounts&, const CorpusCounts&) = default;
};

CorpusCounts count_example(const Prediction& pred, const LogicForm& gold);

// Reference implementation: a plain loop.
CorpusCounts count_serial(std::span<const Prediction> preds, std::span<const LogicForm> golds);
// OpenMP reduction over examples. threads == 0 uses the runtime default.
CorpusCounts count_parallel(std::span<const Prediction> preds, std::span<const LogicForm> golds, int threads = 0);

// F1 is defined as 1 when the corpus has no gold and no predicted slots.
MetricsReport report_from_counts(const CorpusCounts& counts);

// Throws Error{LengthMismatch} on unequal sizes and Error{EmptyInput} on an
// empty corpus.
MetricsReport score(std::span<const Prediction> preds, std::span<const LogicForm> golds);

double intent_accuracy(std::span<const Prediction> preds, std::span<const LogicForm> golds);
double slot_f1(std::span<const Prediction> preds, std::span<const LogicForm> golds);
double frame_accuracy(std::span<const Prediction> preds, std::span<const LogicForm> golds);
double exact_match(std::span<const Prediction> preds, std::span<const LogicForm> golds);

// Alternative slot scorer: conlleval-style chunk F1 over the BIO sequences
// obtained by aligning each form to its utterance's whitespace tokens.
double bio_slot_f1(std::span<const Prediction> preds, std::span<const LogicForm> golds,
                   std::span<const std::string> utterances);

std::string normalize_slot_value(std::string_view value);

struct SeedAggregate {
  std::vector<MetricsReport> per_seed;
  MetricsReport mean;  // n_examples: total across seeds
  MetricsReport stddev;  // population standard deviation; n_examples unused (0)
};

// Throws Error{EmptyInput} for an empty list.
SeedAggregate aggregate_seeds(std::span<const MetricsReport> reports);

// "57.67 ± 2.75": fractions rendered as percentages with two decimals.
std::string format_mean_std(double mean, double stddev);

struct TableRow {
  std::string label;
  SeedAggregate aggregate;
};

// Plain-text table with the NLU (Intent Acc, Slot F1) and Semantic Parsing
// (Frame Acc, Exact Match) column groups.
std::string format_results_table(const std::vector<TableRow>& rows);

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

}  // namespace cofcot
