#include <cstdlib>

#include "eegemd/cli.hpp"
#include "eegemd/error.hpp"
#include "eegemd/text_io.hpp"

#ifndef EEGEMD_DEFAULT_LAYOUT
#define EEGEMD_DEFAULT_LAYOUT "data/physionet64_grid11.map"
#endif

namespace eegemd::cli {

namespace fs = std::filesystem;

ChannelConfig parse_channel_config(std::string_view s) {
  if (s == "all64") return ChannelConfig::All64;
  if (s == "mi21") return ChannelConfig::Mi21;
  if (s == "feat21") return ChannelConfig::Feat21;
  throw invalid_input("unknown channel config '" + std::string(s) + "' (all64|mi21|feat21)");
}

std::string_view to_string(ChannelConfig c) {
  switch (c) {
    case ChannelConfig::All64:
      return "all64";
    case ChannelConfig::Mi21:
      return "mi21";
    case ChannelConfig::Feat21:
      return "feat21";
  }
  return "all64";
}

std::string ModelSpec::dir_name() const {
  if (external()) return "external_" + external_name();
  return tag;
}

fs::path ExperimentConfig::effective_cache_dir() const {
  return cache_dir.empty() ? output_dir / "cache" : cache_dir;
}

namespace {

std::vector<std::string> list_value(const std::string& v) {
  std::vector<std::string> out;
  for (const std::string& item : split(v, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& v) {
  const fs::path p(v);
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

bool bool_value(const std::string& v) {
  const std::string t = to_lower(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw invalid_input("expected a boolean, got '" + v + "'");
}

}  // namespace

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                   const fs::path& base_dir) {
  try {
    if (key == "version") {
      cfg.version = static_cast<int>(parse_long(value));
      if (cfg.version != 1) throw invalid_input("unsupported config version " + value);
    } else if (key == "dataset_root") {
      cfg.dataset_root = resolve(base_dir, value);
    } else if (key == "input_format") {
      if (value != "edf" && value != "csv") throw invalid_input("input_format must be edf or csv");
      cfg.input_format = value;
    } else if (key == "subjects") {
      cfg.subjects.clear();
      for (const auto& s : list_value(value)) cfg.subjects.push_back(static_cast<int>(parse_long(s)));
    } else if (key == "runs") {
      cfg.runs.clear();
      for (const auto& s : list_value(value)) cfg.runs.push_back(static_cast<int>(parse_long(s)));
    } else if (key == "channel_configs" || key == "channel_config") {
      cfg.channel_configs.clear();
      for (const auto& s : list_value(value)) cfg.channel_configs.push_back(parse_channel_config(s));
    } else if (key == "models" || key == "model") {
      cfg.models.clear();
      for (const auto& s : list_value(value)) {
        ModelSpec m{s};
        if (s != "mdm" && (!m.external() || m.external_name().empty())) {
          throw invalid_input("model must be mdm or external:<name>, got '" + s + "'");
        }
        cfg.models.push_back(m);
      }
    } else if (key == "relevance_dir") {
      cfg.relevance_dir = resolve(base_dir, value);
    } else if (key == "class_mode") {
      parse_class_mode(value);
      cfg.class_mode = value;
    } else if (key == "k") {
      cfg.k = static_cast<int>(parse_long(value));
    } else if (key == "seed") {
      cfg.split.seed = static_cast<std::uint64_t>(parse_long(value));
    } else if (key == "test_fraction") {
      cfg.split.test_fraction = parse_double(value);
    } else if (key == "shrinkage") {
      cfg.shrinkage = parse_double(value);
    } else if (key == "band_lo") {
      cfg.band_lo = parse_double(value);
    } else if (key == "band_hi") {
      cfg.band_hi = parse_double(value);
    } else if (key == "filter_order") {
      cfg.filter_order = static_cast<int>(parse_long(value));
    } else if (key == "metric") {
      cfg.metric = parse_metric(value);
    } else if (key == "mass") {
      cfg.mass = parse_mass_mode(value);
    } else if (key == "rebalance") {
      cfg.rebalance = bool_value(value);
    } else if (key == "output_dir") {
      cfg.output_dir = resolve(base_dir, value);
    } else if (key == "cache_dir") {
      cfg.cache_dir = resolve(base_dir, value);
    } else if (key == "layout") {
      cfg.layout = resolve(base_dir, value);
    } else if (key == "chance_method") {
      parse_chance_method(value);
      cfg.chance_method = value;
    } else if (key == "chance_alpha") {
      cfg.chance_alpha = parse_double(value);
    } else if (key == "selection_margin") {
      cfg.selection_margin = parse_double(value);
    } else if (key == "frechet_tol") {
      cfg.frechet.tol = parse_double(value);
    } else if (key == "frechet_max_iter") {
      cfg.frechet.max_iter = static_cast<int>(parse_long(value));
    } else if (key == "wilcoxon") {
      cfg.wilcoxon = parse_wilcoxon_mode(value);
    } else {
      throw invalid_input("unknown config key '" + key + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw invalid_input("config key '" + key + "': " + e.what());
  }
}

ExperimentConfig parse_config(std::string_view text, const fs::path& base_dir) {
  ExperimentConfig cfg;
  // Defaults are relative to the config file too.
  if (!base_dir.empty()) {
    cfg.dataset_root = base_dir;
    cfg.relevance_dir = base_dir / cfg.relevance_dir;
    cfg.output_dir = base_dir / cfg.output_dir;
  }
  bool have_version = false;
  int line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw invalid_input("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    apply_setting(cfg, key, value, base_dir);
    have_version = have_version || key == "version";
  }
  if (!have_version) throw invalid_input("config must declare 'version = 1'");
  return cfg;
}

fs::path default_layout_path() {
  if (const char* env = std::getenv("EEGEMD_LAYOUT")) return env;
  return EEGEMD_DEFAULT_LAYOUT;
}

GridLayout load_layout(const ExperimentConfig& cfg) {
  return load_grid_layout_file(cfg.layout.empty() ? default_layout_path() : cfg.layout);
}

}  // namespace eegemd::cli
