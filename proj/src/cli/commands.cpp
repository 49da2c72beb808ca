#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "eegemd/cli.hpp"
#include "eegemd/error.hpp"
#include "eegemd/serialize.hpp"
#include "eegemd/text_io.hpp"

namespace eegemd::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Runs fn(i) for i in [0, n) on a small worker pool. Each task writes only
// its own slot, so results come back in input order whatever the schedule.
template <typename Fn>
void parallel_for(size_t n, Fn fn) {
  const size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const size_t workers = std::min(n, hw);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string fmt9(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

fs::path recording_path(const ExperimentConfig& cfg, int subject, int run, const char* ext) {
  char name[32];
  std::snprintf(name, sizeof name, "R%02d%s", run, ext);
  return cfg.dataset_root / subject_id(subject) / (subject_id(subject) + name);
}

Recording load_recording(const ExperimentConfig& cfg, int subject, int run, std::vector<std::string>& missing) {
  if (cfg.input_format == "csv") {
    const fs::path data = recording_path(cfg, subject, run, ".csv");
    const fs::path ann = recording_path(cfg, subject, run, ".annotations.csv");
    bool ok = true;
    for (const auto& p : {data, ann}) {
      if (!fs::exists(p)) {
        missing.push_back(p.string());
        ok = false;
      }
    }
    if (!ok) return {};
    return read_csv_recording(data, ann);
  }
  const fs::path edf = recording_path(cfg, subject, run, ".edf");
  if (!fs::exists(edf)) {
    missing.push_back(edf.string());
    return {};
  }
  return read_edf(edf);
}

fs::path cache_file(const ExperimentConfig& cfg, int subject) {
  return cfg.effective_cache_dir() / (subject_id(subject) + ".epochs.csv");
}

std::string canonical_name(const std::string& raw, const GridLayout& layout) {
  auto idx = layout.index_of(raw);
  return idx ? layout.electrodes()[*idx].name : raw;
}

std::vector<std::string> canonical_names(const std::vector<std::string>& raw, const GridLayout& layout) {
  std::vector<std::string> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(canonical_name(r, layout));
  return out;
}

// Positions of `wanted` (montage names) among the recording's channels.
std::vector<int> indices_of(const std::vector<std::string>& wanted, const std::vector<std::string>& recorded) {
  std::vector<int> out;
  for (const auto& w : wanted) {
    const std::string key = channel_key(w);
    auto it = std::find_if(recorded.begin(), recorded.end(),
                           [&](const std::string& r) { return channel_key(r) == key; });
    if (it == recorded.end()) throw invalid_input("channel " + w + " is not in the recording");
    out.push_back(static_cast<int>(it - recorded.begin()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Training-fold material shared by every model/config of one subject.
struct SubjectFold {
  SubjectEpochs data;
  SplitIndices split;
  std::vector<SPDMatrix> train_covs;
  std::vector<int> train_labels;
  std::vector<SPDMatrix> test_covs;
  std::vector<int> test_labels;
};

SubjectFold make_fold(SubjectEpochs data, const ExperimentConfig& cfg) {
  SubjectFold f{std::move(data), {}, {}, {}, {}, {}};
  if (f.data.epochs.empty()) throw invalid_input("no epochs cached for " + subject_id(f.data.subject));
  f.split = split(f.data.epochs, cfg.split);
  for (size_t i : f.split.train) {
    f.train_covs.push_back(covariance(f.data.epochs[i].data, cfg.shrinkage));
    f.train_labels.push_back(static_cast<int>(f.data.epochs[i].label));
  }
  for (size_t i : f.split.test) {
    f.test_covs.push_back(covariance(f.data.epochs[i].data, cfg.shrinkage));
    f.test_labels.push_back(static_cast<int>(f.data.epochs[i].label));
  }
  return f;
}

SelectionTrace eliminate(const SubjectFold& f, const ExperimentConfig& cfg) {
  return backward_elimination(f.train_covs, f.train_labels, cfg.k, cfg.frechet);
}

void write_selection(const ExperimentConfig& cfg, const SubjectFold& f, const SelectionTrace& trace,
                     const GridLayout& layout) {
  const std::string id = subject_id(f.data.subject);
  const auto names = canonical_names(f.data.channel_names, layout);
  write_text_file(cfg.output_dir / "traces" / (id + ".json"), selection_trace_to_json(trace, names));
  RelevanceScores scores = relevance_from_trace(trace, names, layout, id);
  write_text_file(cfg.output_dir / "relevance" / "mdm" / (id + ".json"), to_json(scores));
}

std::vector<int> channel_subset(const SubjectFold& f, const ExperimentConfig& cfg, ChannelConfig cc,
                                const ModelSpec& model, const GridLayout& layout,
                                const SelectionTrace* trace) {
  const auto& names = f.data.channel_names;
  switch (cc) {
    case ChannelConfig::All64: {
      std::vector<int> all(names.size());
      for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
      return all;
    }
    case ChannelConfig::Mi21:
      return indices_of(motor_imagery_channels(), names);
    case ChannelConfig::Feat21:
      break;
  }
  if (!model.external()) return trace->final_subset;
  const fs::path file = cfg.relevance_dir / model.external_name() / (subject_id(f.data.subject) + ".json");
  if (!fs::exists(file)) throw io_error("missing relevance file " + file.string());
  const RelevanceScores scores = ingest_external_file(file, layout);
  return indices_of(top_k(scores, cfg.k, parse_class_mode(cfg.class_mode), layout), names);
}

SubjectRow evaluate_config(const SubjectFold& f, const ExperimentConfig& cfg, ChannelConfig cc,
                           const ModelSpec& model, const GridLayout& layout, const SelectionTrace* trace,
                           const fs::path& run_dir) {
  SubjectRow row;
  row.subject = subject_id(f.data.subject);
  const std::vector<int> subset = channel_subset(f, cfg, cc, model, layout, trace);

  const MDMModel mdm = mdm_fit(f.train_covs, f.train_labels, subset, cfg.frechet);
  write_text_file(run_dir / "models" / (row.subject + ".json"), mdm_model_to_json(mdm));

  std::vector<int> preds;
  preds.reserve(f.test_covs.size());
  for (const auto& c : f.test_covs) preds.push_back(mdm_predict_full(mdm, c));
  const EvalResult ev = evaluate(preds, f.test_labels);

  row.n_train = static_cast<int>(f.train_covs.size());
  row.n_test = ev.n_test;
  row.chance = 100.0 * chance_level(f.test_labels, parse_chance_method(cfg.chance_method), cfg.chance_alpha);
  row.overall = 100.0 * ev.overall;
  row.overall_macro = 100.0 * ev.overall_macro;
  auto recall = [&](Hand h) {
    auto it = ev.per_class_recall.find(static_cast<int>(h));
    return it == ev.per_class_recall.end() ? 0.0 : 100.0 * it->second;
  };
  row.left = recall(Hand::Left);
  row.right = recall(Hand::Right);
  row.meets_margin = row.overall >= row.chance + 100.0 * cfg.selection_margin - 1e-10;
  for (int i : subset) row.channels.push_back(canonical_name(f.data.channel_names[i], layout));
  return row;
}

std::string error_status(const std::exception& e) {
  std::string kind = "internal";
  if (auto* err = dynamic_cast<const Error*>(&e)) kind = err->kind();
  return "error: " + kind + ": " + e.what();
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

ordered_json rows_to_json(const RunReport& r) {
  ordered_json j;
  j["model"] = r.model;
  j["channel_config"] = std::string(to_string(r.channel_config));
  ordered_json rows = ordered_json::array();
  for (const auto& s : r.rows) {
    ordered_json o;
    o["subject"] = s.subject;
    o["status"] = s.status;
    o["n_train"] = s.n_train;
    o["n_test"] = s.n_test;
    o["chance"] = s.chance;
    o["overall"] = s.overall;
    o["overall_macro"] = s.overall_macro;
    o["left"] = s.left;
    o["right"] = s.right;
    o["meets_margin"] = s.meets_margin;
    o["channels"] = s.channels;
    rows.push_back(o);
  }
  j["rows"] = rows;
  std::vector<double> overall;
  for (const auto& s : r.rows) {
    if (s.status == "ok") overall.push_back(s.overall);
  }
  if (!overall.empty()) {
    const Summary sm = cohort_summary(overall);
    j["summary"] = {{"n", overall.size()}, {"mean", sm.mean}, {"sd", sm.sd}};
  }
  return j;
}

}  // namespace

// ---- epoch cache ----------------------------------------------------------

std::string subject_id(int subject) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%03d", subject);
  return buf;
}

void write_epoch_cache(const fs::path& file, const SubjectEpochs& s) {
  std::string out;
  out += "# eegemd epochs v1\n";
  out += "# subject=" + std::to_string(s.subject) + "\n";
  out += "# sample_rate=" + format_double(s.sample_rate) + "\n";
  out += "# channels=" + join(s.channel_names, ';') + "\n";
  out += "run,trial,slice,label,values\n";
  for (const Epoch& e : s.epochs) {
    if (static_cast<size_t>(e.data.rows()) != s.channel_names.size()) {
      throw invalid_input("epoch channel count differs from the cache header");
    }
    out += std::to_string(e.run) + "," + std::to_string(e.trial) + "," + std::to_string(e.slice) + "," +
           std::string(to_string(e.label));
    for (Eigen::Index c = 0; c < e.data.rows(); ++c) {
      for (Eigen::Index t = 0; t < e.data.cols(); ++t) {
        out += ',';
        out += fmt9(e.data(c, t));
      }
    }
    out += '\n';
  }
  write_text_file(file, out);
}

SubjectEpochs read_epoch_cache(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw io_error("cannot open epoch cache " + file.string());
  SubjectEpochs s;
  std::string line;
  if (!std::getline(in, line) || trim(line) != "# eegemd epochs v1") {
    throw format_error(file.string() + ": not an epoch cache (v1)");
  }
  bool have_rate = false;
  bool have_channels = false;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(std::string_view(line).substr(1));
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = body.substr(0, eq);
      const std::string val = body.substr(eq + 1);
      if (key == "subject") s.subject = static_cast<int>(parse_long(val));
      if (key == "sample_rate") {
        s.sample_rate = parse_double(val);
        have_rate = true;
      }
      if (key == "channels") {
        s.channel_names = split(val, ';');
        have_channels = true;
      }
      continue;
    }
    if (!have_header) {
      have_header = true;
      continue;
    }
    if (!have_rate || !have_channels || s.channel_names.empty()) {
      throw format_error(file.string() + ": missing sample_rate or channels header");
    }
    const auto fields = split(line, ',');
    const size_t nch = s.channel_names.size();
    if (fields.size() < 5 || (fields.size() - 4) % nch != 0) {
      throw format_error(file.string() + ": epoch row has " + std::to_string(fields.size()) + " fields");
    }
    const Eigen::Index len = static_cast<Eigen::Index>((fields.size() - 4) / nch);
    Epoch e;
    e.subject = s.subject;
    e.run = static_cast<int>(parse_long(fields[0]));
    e.trial = static_cast<int>(parse_long(fields[1]));
    e.slice = static_cast<int>(parse_long(fields[2]));
    e.label = parse_hand(fields[3]);
    e.data.resize(static_cast<Eigen::Index>(nch), len);
    size_t k = 4;
    for (Eigen::Index c = 0; c < e.data.rows(); ++c) {
      for (Eigen::Index t = 0; t < len; ++t) e.data(c, t) = parse_double(fields[k++]);
    }
    s.epochs.push_back(std::move(e));
  }
  if (!have_rate || !have_channels) throw format_error(file.string() + ": truncated epoch cache header");
  return s;
}

// ---- prepare ------------------------------------------------------------------

PrepareSummary cmd_prepare(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.subjects.empty()) throw invalid_input("no subjects configured");
  if (cfg.runs.empty()) throw invalid_input("no runs configured");

  struct Outcome {
    std::optional<SubjectEpochs> epochs;
    std::vector<std::string> missing;
    int skipped = 0;
    int runs_found = 0;
    std::string error;
  };
  std::vector<Outcome> outcomes(cfg.subjects.size());

  parallel_for(cfg.subjects.size(), [&](size_t i) {
    const int subject = cfg.subjects[i];
    Outcome& o = outcomes[i];
    try {
      SubjectEpochs se;
      se.subject = subject;
      for (int run : cfg.runs) {
        Recording rec = load_recording(cfg, subject, run, o.missing);
        if (rec.channel_names.empty()) continue;
        if (o.runs_found == 0) {
          se.channel_names = rec.channel_names;
          se.sample_rate = rec.sample_rate;
        } else if (rec.channel_names != se.channel_names || rec.sample_rate != se.sample_rate) {
          throw format_error(subject_id(subject) + " run " + std::to_string(run) +
                             ": channels or sample rate differ from earlier runs");
        }
        ++o.runs_found;
        const Recording filtered = bandpass(rec, cfg.band_lo, cfg.band_hi, cfg.filter_order);
        EpochingResult er = epoch_trials(filtered, 1.0, 4, subject, run);
        o.skipped += er.skipped_truncated;
        for (auto& e : er.epochs) se.epochs.push_back(std::move(e));
      }
      if (o.runs_found > 0) {
        write_epoch_cache(cache_file(cfg, subject), se);
        o.epochs = std::move(se);
      }
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });

  PrepareSummary summary;
  std::string index = "subject,status,runs_found,epochs,left,right,skipped_truncated\n";
  for (size_t i = 0; i < cfg.subjects.size(); ++i) {
    const Outcome& o = outcomes[i];
    const std::string id = subject_id(cfg.subjects[i]);
    for (const auto& m : o.missing) {
      log << "warning: missing " << m << "\n";
      summary.missing_files.push_back(m);
    }
    if (!o.error.empty()) {
      log << "warning: " << id << " skipped: " << o.error << "\n";
      index += id + ",error,0,0,0,0,0\n";
      continue;
    }
    if (!o.epochs) {
      index += id + ",missing,0,0,0,0,0\n";
      continue;
    }
    int left = 0;
    for (const auto& e : o.epochs->epochs) left += e.label == Hand::Left ? 1 : 0;
    const int total = static_cast<int>(o.epochs->epochs.size());
    index += id + ",ok," + std::to_string(o.runs_found) + "," + std::to_string(total) + "," +
             std::to_string(left) + "," + std::to_string(total - left) + "," + std::to_string(o.skipped) + "\n";
    summary.prepared.push_back(cfg.subjects[i]);
    log << id << ": " << total << " epochs from " << o.runs_found << " runs\n";
  }
  write_text_file(cfg.effective_cache_dir() / "index.csv", index);
  if (summary.prepared.empty()) {
    std::string msg = "no subject could be prepared";
    if (!summary.missing_files.empty()) msg += "; missing: " + join(summary.missing_files, ' ');
    throw io_error(msg);
  }
  if (summary.prepared.size() < cfg.subjects.size()) {
    log << "warning: partial cohort, " << summary.prepared.size() << " of " << cfg.subjects.size()
        << " subjects prepared\n";
  }
  return summary;
}

// ---- train-eval / select-channels -----------------------------------------------

std::vector<RunReport> cmd_train_eval(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.subjects.empty()) throw invalid_input("no subjects configured");
  if (cfg.channel_configs.empty() || cfg.models.empty()) throw invalid_input("no channel configs or models");
  const GridLayout layout = load_layout(cfg);

  std::vector<RunReport> reports;
  for (const auto& model : cfg.models) {
    for (ChannelConfig cc : cfg.channel_configs) {
      RunReport r;
      r.model = model.tag;
      r.channel_config = cc;
      r.dir = cfg.output_dir / model.dir_name() / std::string(to_string(cc));
      r.rows.resize(cfg.subjects.size());
      reports.push_back(std::move(r));
    }
  }
  const bool needs_trace = std::any_of(cfg.models.begin(), cfg.models.end(),
                                       [](const ModelSpec& m) { return !m.external(); }) &&
                           std::find(cfg.channel_configs.begin(), cfg.channel_configs.end(),
                                     ChannelConfig::Feat21) != cfg.channel_configs.end();

  parallel_for(cfg.subjects.size(), [&](size_t i) {
    const int subject = cfg.subjects[i];
    const std::string id = subject_id(subject);
    auto fill_all = [&](const std::string& status) {
      for (auto& r : reports) {
        r.rows[i].subject = id;
        r.rows[i].status = status;
      }
    };
    const fs::path cache = cache_file(cfg, subject);
    if (!fs::exists(cache)) {
      fill_all("missing");
      return;
    }
    std::optional<SubjectFold> fold;
    try {
      fold = make_fold(read_epoch_cache(cache), cfg);
    } catch (const std::exception& e) {
      fill_all(error_status(e));
      return;
    }
    std::optional<SelectionTrace> trace;
    std::string trace_error;
    if (needs_trace) {
      try {
        trace = eliminate(*fold, cfg);
        write_selection(cfg, *fold, *trace, layout);
      } catch (const std::exception& e) {
        trace_error = error_status(e);
      }
    }
    for (auto& r : reports) {
      const ModelSpec model{r.model};
      SubjectRow& row = r.rows[i];
      if (r.channel_config == ChannelConfig::Feat21 && !model.external() && !trace) {
        row.subject = id;
        row.status = trace_error;
        continue;
      }
      try {
        row = evaluate_config(*fold, cfg, r.channel_config, model, layout, trace ? &*trace : nullptr, r.dir);
      } catch (const std::exception& e) {
        row = SubjectRow{};
        row.subject = id;
        row.status = error_status(e);
      }
    }
  });

  for (const auto& r : reports) {
    write_text_file(r.dir / "rows.csv", rows_to_csv(r.rows));
    write_text_file(r.dir / "rows.json", rows_to_json(r).dump(2) + "\n");
    int ok = 0;
    for (const auto& row : r.rows) {
      if (row.status == "ok") {
        ++ok;
      } else {
        log << "warning: " << r.model << "/" << to_string(r.channel_config) << " " << row.subject << ": "
            << row.status << "\n";
      }
    }
    log << r.model << "/" << to_string(r.channel_config) << ": " << ok << " of " << r.rows.size()
        << " subjects evaluated\n";
  }
  return reports;
}

void cmd_select_channels(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.subjects.empty()) throw invalid_input("no subjects configured");
  const GridLayout layout = load_layout(cfg);
  std::vector<std::string> status(cfg.subjects.size());
  parallel_for(cfg.subjects.size(), [&](size_t i) {
    try {
      const SubjectFold fold = make_fold(read_epoch_cache(cache_file(cfg, cfg.subjects[i])), cfg);
      write_selection(cfg, fold, eliminate(fold, cfg), layout);
      status[i] = "ok";
    } catch (const std::exception& e) {
      status[i] = error_status(e);
    }
  });
  int ok = 0;
  for (size_t i = 0; i < status.size(); ++i) {
    if (status[i] == "ok") {
      ++ok;
    } else {
      log << "warning: " << subject_id(cfg.subjects[i]) << ": " << status[i] << "\n";
    }
  }
  if (ok == 0) throw invalid_input("channel selection failed for every subject");
  log << "selected channels for " << ok << " of " << status.size() << " subjects\n";
}

// ---- rows CSV -----------------------------------------------------------------

std::string rows_to_csv(const std::vector<SubjectRow>& rows) {
  std::string out = "subject,status,n_train,n_test,chance,overall,overall_macro,left,right,meets_margin,channels\n";
  for (const auto& r : rows) {
    const bool ok = r.status == "ok";
    auto num = [&](double v) { return ok ? format_double(v) : std::string(); };
    out += r.subject + "," + csv_safe(r.status) + "," + std::to_string(r.n_train) + "," +
           std::to_string(r.n_test) + "," + num(r.chance) + "," + num(r.overall) + "," + num(r.overall_macro) +
           "," + num(r.left) + "," + num(r.right) + "," + (r.meets_margin ? "1" : "0") + "," +
           join(r.channels, ';') + "\n";
  }
  return out;
}

std::vector<SubjectRow> read_rows_csv(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw format_error(path.string() + ": empty rows file");
  const auto header = split(trim(line), ',');
  std::map<std::string, size_t> col;
  for (size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
  for (const char* required : {"subject", "overall"}) {
    if (!col.count(required)) throw format_error(path.string() + ": missing column " + required);
  }
  std::vector<SubjectRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    auto get = [&](const char* name) -> std::string {
      auto it = col.find(name);
      return it != col.end() && it->second < f.size() ? trim(f[it->second]) : std::string();
    };
    SubjectRow r;
    r.subject = get("subject");
    r.status = col.count("status") ? get("status") : "ok";
    if (r.status.empty()) r.status = "ok";
    auto num = [&](const char* name) {
      const std::string v = get(name);
      return v.empty() ? 0.0 : parse_double(v);
    };
    if (r.status == "ok") {
      r.chance = num("chance");
      r.overall = num("overall");
      r.overall_macro = num("overall_macro");
      r.left = num("left");
      r.right = num("right");
    }
    if (!get("n_train").empty()) r.n_train = static_cast<int>(parse_long(get("n_train")));
    if (!get("n_test").empty()) r.n_test = static_cast<int>(parse_long(get("n_test")));
    r.meets_margin = get("meets_margin") == "1";
    if (!get("channels").empty()) r.channels = split(get("channels"), ';');
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw invalid_input(path.string() + ": no rows");
  return rows;
}

// ---- report -------------------------------------------------------------------

ReportTables build_report(const std::vector<std::pair<std::string, std::vector<SubjectRow>>>& runs,
                          WilcoxonMode mode) {
  if (runs.empty()) throw invalid_input("report needs at least one run");
  std::vector<std::string> subjects;
  std::set<std::string> seen;
  std::vector<std::map<std::string, const SubjectRow*>> lookup(runs.size());
  for (size_t r = 0; r < runs.size(); ++r) {
    for (const auto& row : runs[r].second) {
      if (seen.insert(row.subject).second) subjects.push_back(row.subject);
      if (row.status == "ok") lookup[r][row.subject] = &row;
    }
  }
  if (subjects.empty()) throw invalid_input("report needs at least one row");

  auto chance_of = [&](const std::string& s) -> const SubjectRow* {
    for (const auto& l : lookup) {
      auto it = l.find(s);
      if (it != l.end()) return it->second;
    }
    return nullptr;
  };

  std::string table = "ID,Chance";
  for (const auto& [name, rows] : runs) table += "," + name + " Overall," + name + " Left," + name + " Right";
  table += "\n";
  ordered_json jrows = ordered_json::array();
  for (const auto& s : subjects) {
    const SubjectRow* c = chance_of(s);
    table += s + "," + (c ? format_fixed(c->chance, 2) : "NA");
    ordered_json jr;
    jr["subject"] = s;
    jr["chance"] = c ? ordered_json(c->chance) : ordered_json(nullptr);
    for (size_t r = 0; r < runs.size(); ++r) {
      auto it = lookup[r].find(s);
      if (it == lookup[r].end()) {
        table += ",NA,NA,NA";
        jr[runs[r].first] = nullptr;
      } else {
        const SubjectRow& row = *it->second;
        table += "," + format_fixed(row.overall, 2) + "," + format_fixed(row.left, 2) + "," +
                 format_fixed(row.right, 2);
        jr[runs[r].first] = {{"overall", row.overall}, {"left", row.left}, {"right", row.right}};
      }
    }
    table += "\n";
    jrows.push_back(jr);
  }

  auto pm = [](const Summary& sm) { return format_fixed(sm.mean, 2) + "±" + format_fixed(sm.sd, 2); };
  auto column = [&](size_t r, double SubjectRow::*field) {
    std::vector<double> v;
    for (const auto& s : subjects) {
      auto it = lookup[r].find(s);
      if (it != lookup[r].end()) v.push_back(it->second->*field);
    }
    return v;
  };
  auto summary_or_na = [&](const std::vector<double>& v, ordered_json& j) {
    if (v.empty()) {
      j = nullptr;
      return std::string("NA");
    }
    const Summary sm = cohort_summary(v);
    j = {{"n", v.size()}, {"mean", sm.mean}, {"sd", sm.sd}};
    return pm(sm);
  };

  ordered_json jsummary;
  std::vector<double> chances;
  for (const auto& s : subjects) {
    if (const SubjectRow* c = chance_of(s)) chances.push_back(c->chance);
  }
  ordered_json jchance;
  table += "Mean±SD," + summary_or_na(chances, jchance);
  std::vector<double> overall_means(runs.size(), std::nan(""));
  for (size_t r = 0; r < runs.size(); ++r) {
    ordered_json jo, jl, jrt;
    const auto ov = column(r, &SubjectRow::overall);
    table += "," + summary_or_na(ov, jo);
    table += "," + summary_or_na(column(r, &SubjectRow::left), jl);
    table += "," + summary_or_na(column(r, &SubjectRow::right), jrt);
    if (!ov.empty()) overall_means[r] = cohort_summary(ov).mean;
    jsummary[runs[r].first] = {{"overall", jo}, {"left", jl}, {"right", jrt}};
  }
  table += "\n";

  // Pairwise tests on subjects evaluated in both runs.
  const size_t m = runs.size();
  std::vector<std::vector<std::optional<double>>> p(m, std::vector<std::optional<double>>(m));
  for (size_t a = 0; a < m; ++a) {
    p[a][a] = 1.0;
    for (size_t b = a + 1; b < m; ++b) {
      std::vector<double> x, y;
      for (const auto& s : subjects) {
        auto ia = lookup[a].find(s);
        auto ib = lookup[b].find(s);
        if (ia != lookup[a].end() && ib != lookup[b].end()) {
          x.push_back(ia->second->overall);
          y.push_back(ib->second->overall);
        }
      }
      try {
        p[a][b] = p[b][a] = wilcoxon_signed_rank(x, y, mode).p_value;
      } catch (const Error&) {
        // too few pairs or no nonzero differences: left as NA
      }
    }
  }
  std::string pcsv = "run";
  for (const auto& r : runs) pcsv += "," + r.first;
  pcsv += "\n";
  ordered_json jp = ordered_json::array();
  for (size_t a = 0; a < m; ++a) {
    pcsv += runs[a].first;
    ordered_json jrow = ordered_json::array();
    for (size_t b = 0; b < m; ++b) {
      pcsv += "," + (p[a][b] ? format_fixed(*p[a][b], 6) : std::string("NA"));
      jrow.push_back(p[a][b] ? ordered_json(*p[a][b]) : ordered_json(nullptr));
    }
    pcsv += "\n";
    jp.push_back(jrow);
  }

  ordered_json j;
  j["format"] = "eegemd.report";
  j["version"] = 1;
  std::vector<std::string> names;
  for (const auto& r : runs) names.push_back(r.first);
  j["runs"] = names;
  j["rows"] = jrows;
  j["chance"] = jchance;
  j["summary"] = jsummary;
  ordered_json deltas;
  for (size_t r = 1; r < m; ++r) {
    deltas[names[r]] = std::isnan(overall_means[0]) || std::isnan(overall_means[r])
                           ? ordered_json(nullptr)
                           : ordered_json(overall_means[0] - overall_means[r]);
  }
  j["mean_overall_drop_from_first"] = deltas;
  j["wilcoxon"] = {{"mode", std::string(to_string(mode))}, {"p_values", jp}};
  return {table, pcsv, j.dump(2) + "\n"};
}

ReportTables cmd_report(const std::vector<ReportRun>& runs, const fs::path& out_dir, WilcoxonMode mode) {
  std::vector<std::pair<std::string, std::vector<SubjectRow>>> loaded;
  for (const auto& r : runs) loaded.emplace_back(r.name, read_rows_csv(r.rows_csv));
  ReportTables t = build_report(loaded, mode);
  write_text_file(out_dir / "report.csv", t.table_csv);
  write_text_file(out_dir / "report_pvalues.csv", t.pvalues_csv);
  write_text_file(out_dir / "report.json", t.json);
  return t;
}

// ---- emd ----------------------------------------------------------------------

std::vector<EmdEntry> cmd_emd(const EmdRequest& req, const GridLayout& layout, std::ostream& log) {
  if (req.relevance_dirs.empty() && req.map_files.empty()) {
    throw invalid_input("emd needs at least one model map or relevance directory");
  }
  if (req.k < 1 || static_cast<size_t>(req.k) > layout.size()) throw invalid_input("k out of range");

  const SpatialMap baseline = req.baseline_file.empty()
                                  ? mi_baseline(layout, BaselineWeighting::Binary)
                                  : parse_spatial_map_csv(read_text_file(req.baseline_file));
  if (baseline.n() != layout.n()) throw invalid_input("baseline grid differs from the layout grid");
  const fs::path maps_dir = req.out_dir / "maps";
  write_text_file(maps_dir / "baseline_binary.csv", to_csv(baseline));

  auto compare = [&](const SpatialMap& model, const SpatialMap& base) {
    if (req.rebalance) {
      auto [p, q] = rebalance(model, base, baseline.total());
      return emd(p, q, req.metric, req.mass).distance;
    }
    return emd(model, base, req.metric, req.mass).distance;
  };

  std::vector<EmdEntry> entries;
  for (const auto& [name, dir] : req.relevance_dirs) {
    if (!fs::is_directory(dir)) throw io_error("relevance directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw invalid_input("no relevance JSON files in " + dir.string());

    std::map<std::string, std::vector<std::string>> selections;
    for (const auto& f : files) {
      const RelevanceScores s = ingest_external_file(f, layout);
      const std::string key = s.subject.empty() ? f.stem().string() : s.subject;
      selections[key] = top_k(s, req.k, req.class_mode, layout);
    }
    const CohortAggregate agg = aggregate_cohort(selections, layout);

    // Model binary map: the k channels chosen by the most subjects.
    RelevanceScores counts;
    counts.model = name;
    for (const auto& el : layout.electrodes()) {
      auto it = agg.counts.find(el.name);
      counts.channels.push_back(el.name);
      counts.pooled.push_back(it == agg.counts.end() ? 0.0 : it->second);
    }
    const SpatialMap model_binary = binary_map(top_k(counts, req.k, ClassMode::Pooled, layout), layout);
    std::map<std::string, double> weights(agg.counts.begin(), agg.counts.end());
    const SpatialMap model_weighted = weighted_map(weights, layout);
    const SpatialMap base_weighted =
        mi_baseline(layout, BaselineWeighting::UniformWeighted, static_cast<double>(agg.subjects.size()));

    write_text_file(maps_dir / (name + "_binary.csv"), to_csv(model_binary));
    write_text_file(maps_dir / (name + "_weighted.csv"), to_csv(model_weighted));
    entries.push_back({name, "binary", compare(model_binary, baseline), 0});
    entries.push_back({name, "weighted", compare(model_weighted, base_weighted), 0});
    log << name << ": " << agg.subjects.size() << " subjects aggregated\n";
  }
  for (const auto& [name, file] : req.map_files) {
    const SpatialMap m = parse_spatial_map_csv(read_text_file(file));
    if (m.n() != baseline.n()) throw invalid_input(file.string() + ": grid differs from the baseline");
    entries.push_back({name, "map", compare(m, baseline), 0});
  }

  std::stable_sort(entries.begin(), entries.end(), [](const EmdEntry& a, const EmdEntry& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.model < b.model;
  });
  for (size_t i = 0; i < entries.size(); ++i) {
    entries[i].rank = (i > 0 && entries[i - 1].kind == entries[i].kind) ? entries[i - 1].rank + 1 : 1;
  }

  std::string csv = "kind,rank,model,distance\n";
  ordered_json j;
  j["format"] = "eegemd.emd";
  j["version"] = 1;
  j["metric"] = std::string(to_string(req.metric));
  j["mass"] = std::string(to_string(req.mass));
  j["rebalance"] = req.rebalance;
  j["k"] = req.k;
  ordered_json arr = ordered_json::array();
  for (const auto& e : entries) {
    csv += e.kind + "," + std::to_string(e.rank) + "," + e.model + "," + format_double(e.distance) + "\n";
    arr.push_back({{"model", e.model}, {"kind", e.kind}, {"rank", e.rank}, {"distance", e.distance}});
  }
  j["entries"] = arr;
  write_text_file(req.out_dir / "emd.csv", csv);
  write_text_file(req.out_dir / "emd.json", j.dump(2) + "\n");
  return entries;
}

}  // namespace eegemd::cli
