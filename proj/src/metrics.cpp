#include "cofcot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <utility>

#include <omp.h>

#include "cofcot/text.hpp"

namespace cofcot {
namespace {

using PairKey = std::pair<std::string, std::string>;

std::vector<PairKey> pair_keys(const LogicForm& lf) {
  std::vector<PairKey> keys;
  keys.reserve(lf.slots.size());
  for (const auto& s : lf.slots) keys.emplace_back(canonical_label(s.slot_type), normalize_slot_value(s.slot_value));
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::vector<std::string> type_keys(const LogicForm& lf) {
  std::vector<std::string> keys;
  keys.reserve(lf.slots.size());
  for (const auto& s : lf.slots) keys.push_back(canonical_label(s.slot_type));
  std::sort(keys.begin(), keys.end());
  return keys;
}

void check_lengths(std::size_t preds, std::size_t golds) {
  if (preds != golds) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(preds) + " predictions for " + std::to_string(golds) + " gold forms");
  }
}

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

}  // namespace

CorpusCounts& CorpusCounts::operator+=(const CorpusCounts& o) {
  n += o.n;
  intent_correct += o.intent_correct;
  frame_correct += o.frame_correct;
  exact_correct += o.exact_correct;
  absent += o.absent;
  true_pos += o.true_pos;
  false_pos += o.false_pos;
  false_neg += o.false_neg;
  return *this;
}

std::string normalize_slot_value(std::string_view value) { return text::to_lower(text::collapse_ws(value)); }

CorpusCounts count_example(const Prediction& pred, const LogicForm& gold) {
  CorpusCounts c;
  c.n = 1;
  const auto gold_pairs = pair_keys(gold);
  if (!pred) {
    c.absent = 1;
    c.false_neg = gold_pairs.size();
    return c;
  }
  const auto pred_pairs = pair_keys(*pred);
  std::vector<PairKey> common;
  std::set_intersection(pred_pairs.begin(), pred_pairs.end(), gold_pairs.begin(), gold_pairs.end(),
                        std::back_inserter(common));
  c.true_pos = common.size();
  c.false_pos = pred_pairs.size() - common.size();
  c.false_neg = gold_pairs.size() - common.size();

  const bool intent_ok = canonical_label(pred->intent) == canonical_label(gold.intent);
  c.intent_correct = intent_ok;
  c.frame_correct = intent_ok && type_keys(*pred) == type_keys(gold);
  c.exact_correct = intent_ok && pred_pairs == gold_pairs;
  return c;
}

CorpusCounts count_serial(std::span<const Prediction> preds, std::span<const LogicForm> golds) {
  check_lengths(preds.size(), golds.size());
  CorpusCounts total;
  for (std::size_t i = 0; i < golds.size(); ++i) total += count_example(preds[i], golds[i]);
  return total;
}

CorpusCounts count_parallel(std::span<const Prediction> preds, std::span<const LogicForm> golds, int threads) {
  check_lengths(preds.size(), golds.size());
  const long n = static_cast<long>(golds.size());
  std::size_t intent = 0, frame = 0, exact = 0, absent = 0, tp = 0, fp = 0, fn = 0;
  const int team = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(team) reduction(+ : intent, frame, exact, absent, tp, fp, fn)
  for (long i = 0; i < n; ++i) {
    const CorpusCounts c = count_example(preds[i], golds[i]);
    intent += c.intent_correct;
    frame += c.frame_correct;
    exact += c.exact_correct;
    absent += c.absent;
    tp += c.true_pos;
    fp += c.false_pos;
    fn += c.false_neg;
  }
  CorpusCounts total;
  total.n = golds.size();
  total.intent_correct = intent;
  total.frame_correct = frame;
  total.exact_correct = exact;
  total.absent = absent;
  total.true_pos = tp;
  total.false_pos = fp;
  total.false_neg = fn;
  return total;
}

MetricsReport report_from_counts(const CorpusCounts& c) {
  MetricsReport r;
  r.n_examples = c.n;
  r.intent_accuracy = ratio(c.intent_correct, c.n);
  r.frame_accuracy = ratio(c.frame_correct, c.n);
  r.exact_match = ratio(c.exact_correct, c.n);
  const std::size_t den = 2 * c.true_pos + c.false_pos + c.false_neg;
  r.slot_f1 = den == 0 ? 1.0 : static_cast<double>(2 * c.true_pos) / static_cast<double>(den);
  return r;
}

MetricsReport score(std::span<const Prediction> preds, std::span<const LogicForm> golds) {
  check_lengths(preds.size(), golds.size());
  if (golds.empty()) throw Error(ErrorKind::EmptyInput, "cannot score an empty corpus");
  return report_from_counts(count_parallel(preds, golds));
}

double intent_accuracy(std::span<const Prediction> preds, std::span<const LogicForm> golds) {
  return score(preds, golds).intent_accuracy;
}
double slot_f1(std::span<const Prediction> preds, std::span<const LogicForm> golds) {
  return score(preds, golds).slot_f1;
}
double frame_accuracy(std::span<const Prediction> preds, std::span<const LogicForm> golds) {
  return score(preds, golds).frame_accuracy;
}
double exact_match(std::span<const Prediction> preds, std::span<const LogicForm> golds) {
  return score(preds, golds).exact_match;
}

double bio_slot_f1(std::span<const Prediction> preds, std::span<const LogicForm> golds,
                   std::span<const std::string> utterances) {
  check_lengths(preds.size(), golds.size());
  check_lengths(utterances.size(), golds.size());
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto tokens = text::split_ws(utterances[i]);
    auto gold_chunks = bio_chunks(to_bio(golds[i], tokens).bio);
    std::vector<BioChunk> pred_chunks;
    if (preds[i]) pred_chunks = bio_chunks(to_bio(*preds[i], tokens).bio);
    auto key = [](const BioChunk& c) { return std::make_tuple(canonical_label(c.type), c.begin, c.end); };
    std::vector<decltype(key(BioChunk{}))> g, p, common;
    for (const auto& c : gold_chunks) g.push_back(key(c));
    for (const auto& c : pred_chunks) p.push_back(key(c));
    std::sort(g.begin(), g.end());
    std::sort(p.begin(), p.end());
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(common));
    tp += common.size();
    fp += p.size() - common.size();
    fn += g.size() - common.size();
  }
  const std::size_t den = 2 * tp + fp + fn;
  return den == 0 ? 1.0 : static_cast<double>(2 * tp) / static_cast<double>(den);
}

SeedAggregate aggregate_seeds(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw Error(ErrorKind::EmptyInput, "no per-seed reports to aggregate");
  SeedAggregate agg;
  agg.per_seed.assign(reports.begin(), reports.end());
  const double k = static_cast<double>(reports.size());

  using Field = double MetricsReport::*;
  for (Field f : {&MetricsReport::intent_accuracy, &MetricsReport::slot_f1, &MetricsReport::frame_accuracy,
                  &MetricsReport::exact_match}) {
    double sum = 0.0;
    for (const auto& r : reports) sum += r.*f;
    const bool constant =
        std::all_of(reports.begin(), reports.end(), [&](const MetricsReport& r) { return r.*f == reports[0].*f; });
    // Summation rounding would otherwise give e.g. 5e-17 for three equal seeds.
    const double mean = constant ? reports[0].*f : sum / k;
    double sq = 0.0;
    for (const auto& r : reports) sq += (r.*f - mean) * (r.*f - mean);
    agg.mean.*f = mean;
    agg.stddev.*f = std::sqrt(sq / k);
  }
  for (const auto& r : reports) agg.mean.n_examples += r.n_examples;
  return agg;
}

std::string format_mean_std(double mean, double stddev) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f \xC2\xB1 %.2f", mean * 100.0, stddev * 100.0);
  return buf;
}

std::string format_results_table(const std::vector<TableRow>& rows) {
  std::size_t label_width = 5;
  for (const auto& row : rows) label_width = std::max(label_width, row.label.size());
  const int cell = 15;  // "100.00 ± 100.00" in display columns

  std::ostringstream out;
  auto pad = [](const std::string& s, std::size_t width) {
    // '±' is two bytes but one column.
    std::size_t cols = 0;
    for (unsigned char c : s) cols += (c & 0xC0) != 0x80;
    return s + std::string(width > cols ? width - cols : 0, ' ');
  };
  const std::string group_nlu = pad("NLU", 2 * cell + 3);
  out << pad("", label_width) << " | " << group_nlu << " | " << "Semantic Parsing" << '\n';
  out << pad("Model", label_width) << " | " << pad("Intent Acc", cell) << " | " << pad("Slot F1", cell) << " | "
      << pad("Frame Acc", cell) << " | " << "Exact Match" << '\n';
  out << std::string(label_width, '-') << "-+-" << std::string(cell, '-') << "-+-" << std::string(cell, '-') << "-+-"
      << std::string(cell, '-') << "-+-" << std::string(cell, '-') << '\n';
  for (const auto& row : rows) {
    const auto& m = row.aggregate.mean;
    const auto& s = row.aggregate.stddev;
    out << pad(row.label, label_width) << " | " << pad(format_mean_std(m.intent_accuracy, s.intent_accuracy), cell)
        << " | " << pad(format_mean_std(m.slot_f1, s.slot_f1), cell) << " | "
        << pad(format_mean_std(m.frame_accuracy, s.frame_accuracy), cell) << " | "
        << format_mean_std(m.exact_match, s.exact_match) << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"intent_accuracy", r.intent_accuracy},
          {"slot_f1", r.slot_f1},
          {"frame_accuracy", r.frame_accuracy},
          {"exact_match", r.exact_match},
          {"n_examples", r.n_examples}};
}

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.intent_accuracy = j.at("intent_accuracy").get<double>();
  r.slot_f1 = j.at("slot_f1").get<double>();
  r.frame_accuracy = j.at("frame_accuracy").get<double>();
  r.exact_match = j.at("exact_match").get<double>();
  r.n_examples = j.at("n_examples").get<std::size_t>();
  return r;
}

}  // namespace cofcot
