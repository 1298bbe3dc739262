#include "cofcot/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cofcot/rng.hpp"
#include "cofcot/text.hpp"

namespace cofcot {
namespace {

using nlohmann::json;

[[noreturn]] void malformed(std::size_t line, const std::string& msg) {
  throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line) + ": " + msg);
}

// Labels observed in one record, at every nesting level.
struct RecordLabels {
  std::string domain;
  std::size_t n_tokens = 0;
  std::vector<std::string> intents;
  std::vector<std::string> slot_types;
};

class StatsBuilder {
 public:
  void add(const RecordLabels& r) {
    vocab_.domains.insert(r.domain);
    for (const auto& i : r.intents) {
      vocab_.intents.insert(i);
      vocab_.domain_intents[r.domain].insert(i);
    }
    for (const auto& s : r.slot_types) {
      vocab_.slot_types.insert(s);
      vocab_.domain_slot_types[r.domain].insert(s);
    }
    lengths_.push_back(static_cast<double>(r.n_tokens));
    slot_counts_.push_back(static_cast<double>(r.slot_types.size()));
  }

  void finish(Dataset& ds) const {
    ds.vocab = vocab_;
    DatasetStats& s = ds.stats;
    s.n_records = lengths_.size();
    s.n_domains = vocab_.domains.size();
    s.n_intents = vocab_.intents.size();
    s.n_slot_types = vocab_.slot_types.size();
    std::tie(s.sentence_length_mean, s.sentence_length_std) = mean_std(lengths_);
    std::tie(s.slots_per_sample_mean, s.slots_per_sample_std) = mean_std(slot_counts_);
  }

 private:
  static std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
  }

  Vocab vocab_;
  std::vector<double> lengths_;
  std::vector<double> slot_counts_;
};

RecordLabels labels_of(const Example& ex) {
  RecordLabels r;
  r.domain = ex.domain;
  r.n_tokens = text::split_ws(ex.utterance).size();
  r.intents.push_back(ex.gold.intent);
  for (const auto& s : ex.gold.slots) r.slot_types.push_back(s.slot_type);
  return r;
}

// Every "[IN:X" / "[SL:X" label in a possibly nested MTOP form.
void scan_labels(std::string_view form, RecordLabels& r) {
  for (std::size_t i = 0; i + 4 <= form.size(); ++i) {
    if (form[i] != '[') continue;
    const std::string_view head = form.substr(i + 1, 3);
    const bool intent = text::iequals(head, "IN:");
    if (!intent && !text::iequals(head, "SL:")) continue;
    std::size_t j = i + 4;
    while (j < form.size() && !text::is_space(form[j]) && form[j] != ']' && form[j] != '[' && form[j] != ':') ++j;
    std::string label(form.substr(i + 4, j - i - 4));
    if (label.empty()) continue;
    (intent ? r.intents : r.slot_types).push_back(std::move(label));
  }
}

void require_utterance(const std::string& utterance, std::size_t line) {
  if (text::trim(utterance).empty()) malformed(line, "empty utterance");
}

// MTOP: id, intent, slot spans, utterance, domain, locale, decoupled form, tokens.
void parse_mtop(std::istream& in, Dataset& ds, StatsBuilder& stats) {
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (text::trim(raw).empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = raw.find('\t', start);
      cols.push_back(raw.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() < 7) malformed(line, "expected at least 7 tab-separated columns, got " + std::to_string(cols.size()));

    Example ex;
    ex.id = cols[0];
    ex.utterance = text::collapse_ws(cols[3]);
    ex.domain = std::string(text::trim(cols[4]));
    require_utterance(ex.utterance, line);
    if (ex.domain.empty()) malformed(line, "empty domain");

    RecordLabels labels;
    labels.domain = ex.domain;
    labels.n_tokens = text::split_ws(ex.utterance).size();
    scan_labels(cols[6], labels);
    stats.add(labels);

    try {
      ex.gold = parse_logic_form(cols[6]);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NestedForm) {
        ++ds.n_nested_skipped;
        continue;
      }
      throw Error(ErrorKind::UnparseableGoldForm, "line " + std::to_string(line) + ": " + e.what());
    }
    ds.examples.push_back(std::move(ex));
  }
}

// "wake me up at [time : nine am] on [date : friday]"
std::vector<SlotEntry> parse_annot_utt(std::string_view annot, std::size_t line) {
  std::vector<SlotEntry> slots;
  std::size_t i = 0;
  while ((i = annot.find('[', i)) != std::string_view::npos) {
    const std::size_t close = annot.find(']', i);
    if (close == std::string_view::npos) {
      throw Error(ErrorKind::UnparseableGoldForm, "line " + std::to_string(line) + ": unclosed '[' in annot_utt");
    }
    const std::string_view inner = annot.substr(i + 1, close - i - 1);
    const std::size_t colon = inner.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorKind::UnparseableGoldForm, "line " + std::to_string(line) + ": slot without ':' in annot_utt");
    }
    SlotEntry s{std::string(text::trim(inner.substr(0, colon))), text::collapse_ws(inner.substr(colon + 1))};
    if (s.slot_type.empty() || s.slot_value.empty()) {
      throw Error(ErrorKind::UnparseableGoldForm, "line " + std::to_string(line) + ": empty slot in annot_utt");
    }
    slots.push_back(std::move(s));
    i = close + 1;
  }
  return slots;
}

json parse_json_line(const std::string& raw, std::size_t line) {
  try {
    json j = json::parse(raw);
    if (!j.is_object()) malformed(line, "record is not a JSON object");
    return j;
  } catch (const json::exception& e) {
    malformed(line, std::string("invalid JSON: ") + e.what());
  }
}

std::string string_field(const json& j, const char* key, std::size_t line) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) malformed(line, std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

void parse_massive(std::istream& in, Dataset& ds, StatsBuilder& stats) {
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (text::trim(raw).empty()) continue;
    const json j = parse_json_line(raw, line);
    if (j.contains("locale") && j["locale"].is_string() && j["locale"].get<std::string>() != "en-US") {
      ++ds.n_locale_skipped;
      continue;
    }
    Example ex;
    ex.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                             : std::to_string(line);
    ex.utterance = text::collapse_ws(string_field(j, "utt", line));
    ex.domain = string_field(j, "scenario", line);
    require_utterance(ex.utterance, line);
    ex.gold.intent = string_field(j, "intent", line);
    ex.gold.slots = parse_annot_utt(string_field(j, "annot_utt", line), line);
    try {
      validate_logic_form(ex.gold);
    } catch (const Error& e) {
      throw Error(ErrorKind::UnparseableGoldForm, "line " + std::to_string(line) + ": " + e.what());
    }
    stats.add(labels_of(ex));
    ds.examples.push_back(std::move(ex));
  }
}

void parse_native(std::istream& in, Dataset& ds, StatsBuilder& stats) {
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (text::trim(raw).empty()) continue;
    const json j = parse_json_line(raw, line);
    Example ex;
    try {
      ex = example_from_json(j);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::MalformedRecord) malformed(line, e.what());
      throw Error(e.kind(), "line " + std::to_string(line) + ": " + e.what());
    }
    require_utterance(ex.utterance, line);
    if (ex.domain.empty()) malformed(line, "empty domain");
    stats.add(labels_of(ex));
    ds.examples.push_back(std::move(ex));
  }
}

}  // namespace

std::string_view to_string(DataFormat f) {
  switch (f) {
    case DataFormat::MtopTsv:
      return "mtop_tsv";
    case DataFormat::MassiveJsonl:
      return "massive_jsonl";
    case DataFormat::NativeJsonl:
      return "native_jsonl";
  }
  return "?";
}

DataFormat data_format_from_string(std::string_view s) {
  for (DataFormat f : {DataFormat::MtopTsv, DataFormat::MassiveJsonl, DataFormat::NativeJsonl}) {
    if (text::iequals(s, to_string(f))) return f;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown dataset format '" + std::string(s) + "'");
}

Dataset parse_dataset(std::istream& in, DataFormat format) {
  Dataset ds;
  StatsBuilder stats;
  switch (format) {
    case DataFormat::MtopTsv:
      parse_mtop(in, ds, stats);
      break;
    case DataFormat::MassiveJsonl:
      parse_massive(in, ds, stats);
      break;
    case DataFormat::NativeJsonl:
      parse_native(in, ds, stats);
      break;
  }
  stats.finish(ds);
  return ds;
}

Dataset load_dataset(const std::string& path, DataFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open '" + path + "'");
  return parse_dataset(in, format);
}

json to_json(const Example& ex) {
  json j = {{"id", ex.id}, {"utterance", ex.utterance}, {"domain", ex.domain}, {"gold", serialize_logic_form(ex.gold)}};
  if (ex.step_annotations) {
    const auto& a = *ex.step_annotations;
    json pairs = json::array();
    for (const auto& p : a.slot_pairs) pairs.push_back({p.slot_type, p.slot_value});
    j["step_annotations"] = {{"amr_text", a.amr_text},       {"intent", a.intent},
                             {"slot_values", a.slot_values}, {"slot_pairs", pairs},
                             {"logic_form", a.logic_form}};
  }
  return j;
}

Example example_from_json(const json& j) {
  auto field = [&](const char* key) -> std::string {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw Error(ErrorKind::MalformedRecord, std::string("missing string field '") + key + "'");
    }
    return it->get<std::string>();
  };
  Example ex;
  ex.id = field("id");
  ex.utterance = field("utterance");
  ex.domain = field("domain");
  const std::string gold = field("gold");
  try {
    ex.gold = parse_logic_form(gold);
  } catch (const Error& e) {
    throw Error(ErrorKind::UnparseableGoldForm, std::string("gold form: ") + e.what());
  }
  if (const auto it = j.find("step_annotations"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Error(ErrorKind::MalformedRecord, "step_annotations must be an object");
    try {
      StepAnnotations a;
      a.amr_text = it->value("amr_text", "");
      a.intent = it->value("intent", "");
      a.slot_values = it->value("slot_values", std::vector<std::string>{});
      for (const auto& p : it->value("slot_pairs", json::array())) {
        if (!p.is_array() || p.size() != 2) throw Error(ErrorKind::MalformedRecord, "slot_pairs entries are [type, value]");
        a.slot_pairs.push_back({p[0].get<std::string>(), p[1].get<std::string>()});
      }
      a.logic_form = it->value("logic_form", "");
      ex.step_annotations = std::move(a);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, std::string("step_annotations: ") + e.what());
    }
  }
  return ex;
}

void write_native_jsonl(std::ostream& out, const std::vector<Example>& examples) {
  for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

Split make_split(const Vocab& vocab, const std::vector<std::string>& test_domains,
                 const std::vector<std::string>& train_domains) {
  if (test_domains.empty()) throw Error(ErrorKind::InvalidArgument, "no test domains given");
  Split split;
  for (const auto& d : test_domains) {
    if (!vocab.domains.count(d)) throw Error(ErrorKind::DomainNotFound, "test domain '" + d + "' not in dataset");
    split.test_domains.insert(d);
  }
  if (train_domains.empty()) {
    for (const auto& d : vocab.domains) {
      if (!split.test_domains.count(d)) split.train_domains.insert(d);
    }
  } else {
    for (const auto& d : train_domains) {
      if (!vocab.domains.count(d)) throw Error(ErrorKind::DomainNotFound, "train domain '" + d + "' not in dataset");
      if (split.test_domains.count(d)) {
        throw Error(ErrorKind::InvalidArgument, "domain '" + d + "' is both a train and a test domain");
      }
      split.train_domains.insert(d);
    }
  }
  return split;
}

std::vector<TestSet> sample_test_sets(const std::vector<Example>& data, const std::set<std::string>& test_domains,
                                      std::size_t n_per_set, std::size_t n_seeds,
                                      const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() != n_seeds) {
    throw Error(ErrorKind::InvalidArgument,
                std::to_string(n_seeds) + " test sets requested but " + std::to_string(seeds.size()) + " seeds given");
  }
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw Error(ErrorKind::InvalidArgument, "seeds must be distinct");
  }
  std::set<std::string> present;
  std::vector<const Example*> pool;
  for (const auto& ex : data) {
    if (test_domains.count(ex.domain)) {
      pool.push_back(&ex);
      present.insert(ex.domain);
    }
  }
  for (const auto& d : test_domains) {
    if (!present.count(d)) throw Error(ErrorKind::DomainNotFound, "no examples in test domain '" + d + "'");
  }
  if (pool.size() < n_per_set) {
    throw Error(ErrorKind::InsufficientData, "test domains hold " + std::to_string(pool.size()) +
                                                 " examples, " + std::to_string(n_per_set) + " requested");
  }
  std::vector<TestSet> sets;
  for (std::uint64_t seed : seeds) {
    SeededRng rng(seed);
    TestSet set{seed, {}};
    for (std::size_t i : rng.sample_indices(pool.size(), n_per_set)) set.examples.push_back(*pool[i]);
    sets.push_back(std::move(set));
  }
  return sets;
}

std::string_view to_string(DemoMode m) {
  return m == DemoMode::DomainDifferent ? "domain_different" : "domain_similar";
}

DemoMode demo_mode_from_string(std::string_view s) {
  if (text::iequals(s, "domain_different")) return DemoMode::DomainDifferent;
  if (text::iequals(s, "domain_similar")) return DemoMode::DomainSimilar;
  throw Error(ErrorKind::InvalidArgument, "unknown few-shot mode '" + std::string(s) + "'");
}

std::vector<Example> select_demonstrations(const std::vector<Example>& data, const Split& split, std::size_t k,
                                           DemoMode mode, std::uint64_t seed,
                                           const std::set<std::string>& exclude_ids, bool require_annotations) {
  if (k == 0) return {};
  const auto& domains = mode == DemoMode::DomainDifferent ? split.train_domains : split.test_domains;
  std::vector<const Example*> pool;
  for (const auto& ex : data) {
    if (!domains.count(ex.domain) || exclude_ids.count(ex.id)) continue;
    if (require_annotations && !ex.step_annotations) continue;
    pool.push_back(&ex);
  }
  if (pool.size() < k) {
    throw Error(ErrorKind::InsufficientAnnotatedData,
                std::to_string(k) + " demonstrations requested, " + std::to_string(pool.size()) + " " +
                    (require_annotations ? "annotated " : "") + "candidates in " + std::string(to_string(mode)) +
                    " domains");
  }
  SeededRng rng(seed);
  std::vector<Example> out;
  for (std::size_t i : rng.sample_indices(pool.size(), k)) out.push_back(*pool[i]);
  return out;
}

}  // namespace cofcot
