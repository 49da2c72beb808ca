#include <CLI11.hpp>

#include <json.hpp>

#include <ostream>

#include "eegemd/cli.hpp"
#include "eegemd/error.hpp"
#include "eegemd/text_io.hpp"

namespace eegemd::cli {

namespace fs = std::filesystem;

namespace {

// Flags shared by the config-driven subcommands. Empty/unset values leave
// the config file untouched.
struct CommonFlags {
  std::string config;
  std::string seed;
  std::string metric;
  std::string mass;
  std::string output_dir;
  std::vector<std::string> settings;
};

void add_common(CLI::App* sub, CommonFlags& f, bool config_required) {
  auto* opt = sub->add_option("--config", f.config, "experiment config file");
  if (config_required) opt->required();
  sub->add_option("--seed", f.seed, "split seed (overrides config)");
  sub->add_option("--metric", f.metric, "ground metric: euclidean or manhattan");
  sub->add_option("--mass", f.mass, "mass mode: raw or normalized");
  sub->add_option("--out", f.output_dir, "output directory (overrides config)");
  sub->add_option("--set", f.settings, "KEY=VALUE config override, repeatable");
}

ExperimentConfig load_config(const CommonFlags& f) {
  ExperimentConfig cfg;
  if (!f.config.empty()) {
    const fs::path path = f.config;
    cfg = parse_config(read_text_file(path), path.parent_path());
  }
  for (const auto& kv : f.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw invalid_input("--set expects KEY=VALUE, got " + kv);
    apply_setting(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)), fs::current_path());
  }
  if (!f.seed.empty()) apply_setting(cfg, "seed", f.seed);
  if (!f.metric.empty()) apply_setting(cfg, "metric", f.metric);
  if (!f.mass.empty()) apply_setting(cfg, "mass", f.mass);
  if (!f.output_dir.empty()) apply_setting(cfg, "output_dir", f.output_dir, fs::current_path());
  return cfg;
}

std::pair<std::string, fs::path> named_path(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw invalid_input("expected NAME=PATH, got " + spec);
  }
  return {spec.substr(0, eq), fs::path(spec.substr(eq + 1))};
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"kind", kind}, {"message", message}};
  err << j.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"EEG channel-relevance toolkit: Riemannian MDM pipeline and EMD map comparison", "eegemd"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonFlags prep_f, train_f, sel_f, emd_f, report_f;

  auto* prepare = app.add_subcommand("prepare", "filter and epoch recordings into the cache");
  add_common(prepare, prep_f, true);

  auto* train = app.add_subcommand("train-eval", "train and evaluate MDM for every model x channel config");
  add_common(train, train_f, true);

  auto* select = app.add_subcommand("select-channels", "Riemannian backward elimination per subject");
  add_common(select, sel_f, true);

  auto* emd_cmd = app.add_subcommand("emd", "compare relevance maps with the motor-imagery baseline");
  add_common(emd_cmd, emd_f, false);
  std::vector<std::string> emd_relevance, emd_maps;
  std::string emd_baseline, emd_layout, emd_class_mode;
  int emd_k = 0;
  bool emd_rebalance = false;
  emd_cmd->add_option("--relevance", emd_relevance, "NAME=DIR of per-subject relevance JSON, repeatable");
  emd_cmd->add_option("--map", emd_maps, "NAME=CSV spatial map, repeatable");
  emd_cmd->add_option("--baseline", emd_baseline, "baseline map CSV (default: 21-channel MI baseline)");
  emd_cmd->add_option("--layout", emd_layout, "grid layout file");
  emd_cmd->add_option("--k", emd_k, "channels per subject selection");
  emd_cmd->add_option("--class-mode", emd_class_mode, "pooled or per-class-union");
  emd_cmd->add_flag("--rebalance", emd_rebalance, "scale both maps to the baseline total");

  auto* plot = app.add_subcommand("plot", "render a spatial map as SVG");
  std::string plot_map, plot_out, plot_layout, plot_title;
  plot->add_option("--map", plot_map, "spatial map CSV")->required();
  plot->add_option("--out", plot_out, "output SVG")->required();
  plot->add_option("--layout", plot_layout, "grid layout file");
  plot->add_option("--title", plot_title, "title text");

  auto* report = app.add_subcommand("report", "table CSV/JSON with Mean±SD footer and Wilcoxon p-values");
  add_common(report, report_f, false);
  std::vector<std::string> report_runs;
  std::string report_wilcoxon;
  report->add_option("--run", report_runs, "NAME=rows.csv (or its directory), repeatable");
  report->add_option("--wilcoxon", report_wilcoxon, "exact, normal-approx or auto");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }

  try {
    if (prepare->parsed()) {
      cmd_prepare(load_config(prep_f), out);
    } else if (train->parsed()) {
      const auto reports = cmd_train_eval(load_config(train_f), out);
      for (const auto& r : reports) out << "wrote " << (r.dir / "rows.csv").string() << "\n";
    } else if (select->parsed()) {
      cmd_select_channels(load_config(sel_f), out);
    } else if (emd_cmd->parsed()) {
      const ExperimentConfig cfg = load_config(emd_f);
      EmdRequest req;
      for (const auto& s : emd_relevance) req.relevance_dirs.insert(named_path(s));
      for (const auto& s : emd_maps) req.map_files.insert(named_path(s));
      if (req.relevance_dirs.empty() && req.map_files.empty() && !emd_f.config.empty()) {
        for (const auto& m : cfg.models) {
          req.relevance_dirs[m.dir_name()] =
              m.external() ? cfg.relevance_dir / m.external_name() : cfg.output_dir / "relevance" / "mdm";
        }
      }
      req.baseline_file = emd_baseline;
      req.out_dir = emd_f.config.empty() && emd_f.output_dir.empty() ? fs::path("emd") : cfg.output_dir / "emd";
      if (!emd_f.output_dir.empty() && emd_f.config.empty()) req.out_dir = emd_f.output_dir;
      req.k = emd_k > 0 ? emd_k : cfg.k;
      req.class_mode = parse_class_mode(emd_class_mode.empty() ? cfg.class_mode : emd_class_mode);
      req.metric = cfg.metric;
      req.mass = cfg.mass;
      req.rebalance = emd_rebalance || cfg.rebalance;
      ExperimentConfig layout_cfg = cfg;
      if (!emd_layout.empty()) layout_cfg.layout = emd_layout;
      const auto entries = cmd_emd(req, load_layout(layout_cfg), out);
      for (const auto& e : entries) {
        out << e.kind << " #" << e.rank << " " << e.model << " " << format_double(e.distance) << "\n";
      }
    } else if (plot->parsed()) {
      ExperimentConfig cfg;
      if (!plot_layout.empty()) cfg.layout = plot_layout;
      cmd_plot(parse_spatial_map_csv(read_text_file(plot_map)), load_layout(cfg), plot_out, {plot_title});
      out << "wrote " << plot_out << "\n";
    } else if (report->parsed()) {
      const ExperimentConfig cfg = load_config(report_f);
      const WilcoxonMode mode = report_wilcoxon.empty() ? cfg.wilcoxon : parse_wilcoxon_mode(report_wilcoxon);
      if (!report_runs.empty()) {
        std::vector<ReportRun> runs;
        for (const auto& s : report_runs) {
          auto [name, path] = named_path(s);
          if (fs::is_directory(path)) path /= "rows.csv";
          runs.push_back({name, path});
        }
        const fs::path dir = report_f.output_dir.empty() && report_f.config.empty() ? fs::path("report")
                                                                                    : cfg.output_dir;
        cmd_report(runs, dir, mode);
        out << "wrote " << (dir / "report.csv").string() << "\n";
      } else {
        if (report_f.config.empty()) throw invalid_input("report needs --config or at least one --run");
        for (const auto& m : cfg.models) {
          std::vector<ReportRun> runs;
          for (ChannelConfig cc : cfg.channel_configs) {
            const std::string name(to_string(cc));
            runs.push_back({name, cfg.output_dir / m.dir_name() / name / "rows.csv"});
          }
          const fs::path dir = cfg.output_dir / m.dir_name();
          cmd_report(runs, dir, mode);
          out << "wrote " << (dir / "report.csv").string() << "\n";
        }
      }
    }
  } catch (const Error& e) {
    print_error(err, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace eegemd::cli
