#include "eegemd/relevance.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "eegemd/error.hpp"
#include "eegemd/text_io.hpp"

namespace eegemd {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ClassMode parse_class_mode(std::string_view s) {
  if (s == "pooled") return ClassMode::Pooled;
  if (s == "per_class_union") return ClassMode::PerClassUnion;
  throw invalid_input("unknown class mode '" + std::string(s) + "' (pooled|per_class_union)");
}

namespace {

std::vector<double> score_array(const json& j, size_t expected, const std::string& what) {
  if (!j.is_array()) throw format_error("relevance: '" + what + "' must be an array");
  if (j.size() != expected) throw format_error("relevance: '" + what + "' length differs from 'channels'");
  std::vector<double> out;
  for (const json& v : j) {
    if (!v.is_number()) throw format_error("relevance: '" + what + "' holds a non-number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw format_error("relevance: non-finite score in '" + what + "'");
    out.push_back(d);
  }
  return out;
}

}  // namespace

RelevanceScores ingest_external(std::string_view json_text, const GridLayout& layout) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw format_error(std::string("relevance JSON: ") + e.what());
  }
  if (!doc.is_object()) throw format_error("relevance JSON must be an object");
  for (const char* key : {"subject", "model", "channels", "pooled"}) {
    if (!doc.contains(key)) throw format_error(std::string("relevance JSON missing '") + key + "'");
  }
  if (!doc["subject"].is_string() || !doc["model"].is_string()) {
    throw format_error("relevance JSON: subject and model must be strings");
  }
  if (!doc["channels"].is_array()) throw format_error("relevance JSON: 'channels' must be an array");

  RelevanceScores out;
  out.source = RelevanceSource::External;
  out.subject = doc["subject"].get<std::string>();
  out.model = doc["model"].get<std::string>();
  std::set<size_t> seen;
  for (const json& c : doc["channels"]) {
    if (!c.is_string()) throw format_error("relevance JSON: channel names must be strings");
    const std::string name = c.get<std::string>();
    const auto idx = layout.index_of(name);
    if (!idx) throw invalid_input("relevance JSON: unknown channel '" + name + "'");
    if (!seen.insert(*idx).second) throw invalid_input("relevance JSON: duplicate channel '" + name + "'");
    out.channels.push_back(layout.electrodes()[*idx].name);
  }
  out.pooled = score_array(doc["pooled"], out.channels.size(), "pooled");
  if (doc.contains("per_class") && !doc["per_class"].is_null()) {
    if (!doc["per_class"].is_object()) throw format_error("relevance JSON: 'per_class' must be an object");
    for (const auto& [label, arr] : doc["per_class"].items()) {
      out.per_class[label] = score_array(arr, out.channels.size(), "per_class." + label);
    }
  }
  return out;
}

RelevanceScores ingest_external_file(const std::filesystem::path& path, const GridLayout& layout) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw io_error(e.what());
  }
  return ingest_external(text, layout);
}

std::string to_json(const RelevanceScores& scores) {
  ordered_json j;
  j["subject"] = scores.subject;
  j["model"] = scores.model;
  j["channels"] = scores.channels;
  j["pooled"] = scores.pooled;
  if (!scores.per_class.empty()) {
    ordered_json pc = ordered_json::object();
    for (const auto& [label, v] : scores.per_class) pc[label] = v;
    j["per_class"] = pc;
  }
  return j.dump(2) + "\n";
}

RelevanceScores relevance_from_trace(const SelectionTrace& trace,
                                     const std::vector<std::string>& channel_names,
                                     const GridLayout& layout, std::string subject) {
  if (static_cast<int>(channel_names.size()) != trace.initial_dim) {
    throw invalid_input("channel names do not match the elimination trace");
  }
  RelevanceScores out;
  out.source = RelevanceSource::Riemannian;
  out.subject = std::move(subject);
  out.model = "mdm";
  const double n = static_cast<double>(trace.ranking.size());
  for (size_t r = 0; r < trace.ranking.size(); ++r) {
    out.channels.push_back(layout.at(channel_names[trace.ranking[r]]).name);
    out.pooled.push_back(n - static_cast<double>(r));
  }
  return out;
}

namespace {

// Indices into `scores.channels` of the k best entries of `values`,
// ties to the lower montage index.
std::vector<size_t> best_k(const RelevanceScores& scores, const std::vector<double>& values, size_t k,
                           const GridLayout& layout, const std::vector<size_t>& candidates) {
  std::vector<size_t> order = candidates;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return *layout.index_of(scores.channels[a]) < *layout.index_of(scores.channels[b]);
  });
  order.resize(std::min(k, order.size()));
  return order;
}

}  // namespace

std::vector<std::string> top_k(const RelevanceScores& scores, int k, ClassMode mode,
                               const GridLayout& layout) {
  if (k < 1 || static_cast<size_t>(k) > scores.channels.size()) {
    throw invalid_input("k must lie in [1, " + std::to_string(scores.channels.size()) + "]");
  }
  std::vector<size_t> all(scores.channels.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<size_t> chosen;
  if (mode == ClassMode::Pooled) {
    chosen = best_k(scores, scores.pooled, static_cast<size_t>(k), layout, all);
  } else {
    if (scores.per_class.empty()) throw invalid_input("per_class_union needs per-class scores");
    std::set<size_t> uni;
    for (const auto& [label, values] : scores.per_class) {
      for (size_t i : best_k(scores, values, static_cast<size_t>(k), layout, all)) uni.insert(i);
    }
    chosen = best_k(scores, scores.pooled, static_cast<size_t>(k), layout,
                    std::vector<size_t>(uni.begin(), uni.end()));
  }
  std::sort(chosen.begin(), chosen.end(), [&](size_t a, size_t b) {
    return *layout.index_of(scores.channels[a]) < *layout.index_of(scores.channels[b]);
  });
  std::vector<std::string> out;
  for (size_t i : chosen) out.push_back(scores.channels[i]);
  return out;
}

CohortAggregate aggregate_cohort(const std::map<std::string, std::vector<std::string>>& selections,
                                 const GridLayout& layout) {
  if (selections.empty()) throw invalid_input("cohort is empty");
  CohortAggregate out;
  for (const auto& [subject, channels] : selections) {
    out.subjects.push_back(subject);
    std::set<size_t> distinct;
    for (const std::string& c : channels) {
      const auto idx = layout.index_of(c);
      if (!idx) throw invalid_input("unknown channel '" + c + "' for subject " + subject);
      distinct.insert(*idx);
    }
    for (size_t idx : distinct) ++out.counts[layout.electrodes()[idx].name];
  }
  return out;
}

const std::vector<std::string>& motor_imagery_channels() {
  static const std::vector<std::string> channels = {
      "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6",  //
      "C5",  "C3",  "C1",  "Cz",  "C2",  "C4",  "C6",   //
      "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6",
  };
  return channels;
}

SpatialMap mi_baseline(const GridLayout& layout, BaselineWeighting weighting, double weight) {
  for (const std::string& c : motor_imagery_channels()) {
    if (!layout.contains(c)) throw invalid_input("layout is missing baseline channel " + c);
  }
  if (weighting == BaselineWeighting::Binary) return binary_map(motor_imagery_channels(), layout);
  if (!(weight > 0.0) || !std::isfinite(weight)) throw invalid_input("baseline weight must be positive");
  std::map<std::string, double> w;
  for (const std::string& c : motor_imagery_channels()) w[c] = weight;
  return weighted_map(w, layout);
}

}  // namespace eegemd
