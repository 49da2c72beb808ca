#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "eegemd/montage.hpp"
#include "eegemd/relevance.hpp"
#include "eegemd/signal.hpp"
#include "eegemd/spdgeom.hpp"
#include "eegemd/stats.hpp"
#include "eegemd/transport.hpp"

namespace eegemd::cli {

enum class ChannelConfig { All64, Mi21, Feat21 };
ChannelConfig parse_channel_config(std::string_view s);
std::string_view to_string(ChannelConfig c);

/// Relevance source / model tag: "mdm" or "external:<name>".
struct ModelSpec {
  std::string tag;
  bool external() const { return tag.rfind("external:", 0) == 0; }
  std::string external_name() const { return external() ? tag.substr(9) : std::string(); }
  /// Directory-safe form ("mdm", "external_eegnet").
  std::string dir_name() const;
};

struct ExperimentConfig {
  int version = 1;
  std::filesystem::path dataset_root = ".";
  std::string input_format = "edf";
  std::vector<int> subjects;
  std::vector<int> runs = {3, 4, 7, 8, 11, 12};
  std::vector<ChannelConfig> channel_configs = {ChannelConfig::All64, ChannelConfig::Mi21,
                                                ChannelConfig::Feat21};
  std::vector<ModelSpec> models = {{"mdm"}};
  std::filesystem::path relevance_dir = "relevance";
  std::string class_mode = "pooled";
  int k = 21;
  SplitSpec split;
  double shrinkage = 0.05;
  double band_lo = 8.0;
  double band_hi = 30.0;
  int filter_order = 4;
  Metric metric = Metric::Euclidean;
  MassMode mass = MassMode::Raw;
  bool rebalance = false;
  std::filesystem::path output_dir = "out";
  std::filesystem::path cache_dir;  // empty: <output_dir>/cache
  std::filesystem::path layout;     // empty: shipped 64-channel grid
  std::string chance_method = "majority";
  double chance_alpha = 0.05;
  double selection_margin = 0.10;
  FrechetOptions frechet;
  WilcoxonMode wilcoxon = WilcoxonMode::NormalApprox;

  std::filesystem::path effective_cache_dir() const;
};

/// `key = value` lines, `#` comments. Must contain `version = 1`. Relative
/// paths are resolved against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                   const std::filesystem::path& base_dir = {});

std::filesystem::path default_layout_path();
GridLayout load_layout(const ExperimentConfig& cfg);

// ---- epoch cache --------------------------------------------------------

struct SubjectEpochs {
  int subject = 0;
  double sample_rate = 0.0;
  std::vector<std::string> channel_names;
  std::vector<Epoch> epochs;
};

std::string subject_id(int subject);  // "S007"
void write_epoch_cache(const std::filesystem::path& file, const SubjectEpochs& s);
SubjectEpochs read_epoch_cache(const std::filesystem::path& file);

// ---- commands -----------------------------------------------------------

struct PrepareSummary {
  std::vector<int> prepared;
  std::vector<std::string> missing_files;
};
PrepareSummary cmd_prepare(const ExperimentConfig& cfg, std::ostream& log);

struct SubjectRow {
  std::string subject;
  std::string status = "ok";  // "ok" or an error message
  int n_train = 0;
  int n_test = 0;
  double chance = 0.0;
  double overall = 0.0;
  double overall_macro = 0.0;
  double left = 0.0;
  double right = 0.0;
  bool meets_margin = false;
  std::vector<std::string> channels;
};

struct RunReport {
  std::string model;
  ChannelConfig channel_config = ChannelConfig::All64;
  std::vector<SubjectRow> rows;
  std::filesystem::path dir;
};

/// Trains and evaluates MDM for every model x channel configuration in the
/// config. Writes rows.csv / rows.json (and elimination traces) per run.
std::vector<RunReport> cmd_train_eval(const ExperimentConfig& cfg, std::ostream& log);

/// Riemannian elimination on each subject's training fold; writes relevance
/// JSON and traces under <output_dir>/relevance/mdm and <output_dir>/traces.
void cmd_select_channels(const ExperimentConfig& cfg, std::ostream& log);

struct EmdEntry {
  std::string model;
  std::string kind;  // "binary" or "weighted"
  double distance = 0.0;
  int rank = 0;      // 1 = closest to the baseline within `kind`
};

struct EmdRequest {
  std::map<std::string, std::filesystem::path> relevance_dirs;  // model -> dir of relevance JSON
  std::map<std::string, std::filesystem::path> map_files;       // model -> spatial map CSV
  std::filesystem::path baseline_file;                          // optional override
  std::filesystem::path out_dir;
  int k = 21;
  ClassMode class_mode = ClassMode::Pooled;
  Metric metric = Metric::Euclidean;
  MassMode mass = MassMode::Raw;
  bool rebalance = false;
};

std::vector<EmdEntry> cmd_emd(const EmdRequest& req, const GridLayout& layout, std::ostream& log);

struct PlotOptions {
  std::string title;
};
std::string render_svg(const SpatialMap& map, const GridLayout& layout, const PlotOptions& opts = {});
void cmd_plot(const SpatialMap& map, const GridLayout& layout, const std::filesystem::path& out,
              const PlotOptions& opts = {});

struct ReportRun {
  std::string name;
  std::filesystem::path rows_csv;
};

struct ReportTables {
  std::string table_csv;
  std::string pvalues_csv;
  std::string json;
};

std::vector<SubjectRow> read_rows_csv(const std::filesystem::path& path);
std::string rows_to_csv(const std::vector<SubjectRow>& rows);
ReportTables build_report(const std::vector<std::pair<std::string, std::vector<SubjectRow>>>& runs,
                          WilcoxonMode mode);
ReportTables cmd_report(const std::vector<ReportRun>& runs, const std::filesystem::path& out_dir,
                        WilcoxonMode mode);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eegemd::cli
