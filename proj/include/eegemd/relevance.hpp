#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eegemd/montage.hpp"
#include "eegemd/spdgeom.hpp"

namespace eegemd {

enum class RelevanceSource { Riemannian, External };
enum class ClassMode { Pooled, PerClassUnion };
enum class BaselineWeighting { Binary, UniformWeighted };

ClassMode parse_class_mode(std::string_view s);

/// Per-channel importance. `channels` uses the montage's canonical names;
/// channels of the montage that are not listed are absent, not zero.
struct RelevanceScores {
  RelevanceSource source = RelevanceSource::External;
  std::string subject;
  std::string model;
  std::vector<std::string> channels;
  std::vector<double> pooled;
  std::map<std::string, std::vector<double>> per_class;  // aligned with `channels`
};

/// Parses and validates a relevance JSON document:
/// { "subject": str, "model": str, "channels": [str], "pooled": [float],
///   "per_class": { "<label>": [float] } }  (per_class optional)
RelevanceScores ingest_external(std::string_view json_text, const GridLayout& layout);
RelevanceScores ingest_external_file(const std::filesystem::path& path, const GridLayout& layout);

/// Serialises in the same schema that ingest_external reads.
std::string to_json(const RelevanceScores& scores);

/// Relevance from a Riemannian elimination trace: the channel ranked first
/// scores initial_dim, the last 1. `channel_names` maps indices to names.
RelevanceScores relevance_from_trace(const SelectionTrace& trace,
                                     const std::vector<std::string>& channel_names,
                                     const GridLayout& layout, std::string subject);

/// k highest-scoring channels, ties resolved by montage order. Result is in
/// montage order.
std::vector<std::string> top_k(const RelevanceScores& scores, int k, ClassMode mode,
                               const GridLayout& layout);

struct CohortAggregate {
  std::map<std::string, int> counts;  // canonical channel name -> subjects selecting it
  std::vector<std::string> subjects;
};

CohortAggregate aggregate_cohort(const std::map<std::string, std::vector<std::string>>& selections,
                                 const GridLayout& layout);

/// Motor-imagery baseline channels: FC, C and CP rows, 7 electrodes each.
const std::vector<std::string>& motor_imagery_channels();

SpatialMap mi_baseline(const GridLayout& layout, BaselineWeighting weighting = BaselineWeighting::Binary,
                       double weight = 1.0);

}  // namespace eegemd
