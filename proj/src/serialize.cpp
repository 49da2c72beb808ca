#include "eegemd/serialize.hpp"

#include <json.hpp>

#include "eegemd/error.hpp"

namespace eegemd {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kVersion = 1;

void check_header(const ordered_json& j, const char* format) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw format_error(std::string("expected a ") + format + " document");
  }
  if (j.value("version", 0) != kVersion) throw format_error(std::string(format) + ": unsupported version");
}

ordered_json parse(std::string_view text) {
  try {
    return ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw format_error(e.what());
  }
}

}  // namespace

std::string mdm_model_to_json(const MDMModel& model) {
  ordered_json j;
  j["format"] = "eegemd.mdm_model";
  j["version"] = kVersion;
  j["classes"] = model.classes;
  j["channel_subset"] = model.channel_subset;
  ordered_json cents = ordered_json::array();
  for (const SPDMatrix& c : model.centroids) {
    ordered_json m = ordered_json::array();
    for (Eigen::Index r = 0; r < c.dim(); ++r) {
      std::vector<double> row(c.values().row(r).begin(), c.values().row(r).end());
      m.push_back(row);
    }
    cents.push_back(m);
  }
  j["centroids"] = cents;
  return j.dump(1) + "\n";
}

MDMModel mdm_model_from_json(std::string_view text) {
  const ordered_json j = parse(text);
  check_header(j, "eegemd.mdm_model");
  try {
    MDMModel m;
    m.classes = j.at("classes").get<std::vector<int>>();
    m.channel_subset = j.at("channel_subset").get<std::vector<int>>();
    for (const auto& c : j.at("centroids")) {
      const auto rows = c.get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd v(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) throw format_error("centroid is not square");
        for (size_t k = 0; k < rows.size(); ++k) v(r, k) = rows[r][k];
      }
      m.centroids.emplace_back(v);
    }
    if (m.centroids.size() != m.classes.size() || m.classes.size() < 2) {
      throw format_error("model needs one centroid per class and at least two classes");
    }
    for (const auto& c : m.centroids) {
      if (c.dim() != m.dim()) throw format_error("centroid dimension differs from channel subset");
    }
    return m;
  } catch (const ordered_json::exception& e) {
    throw format_error(std::string("mdm model: ") + e.what());
  }
}

std::string selection_trace_to_json(const SelectionTrace& trace,
                                    const std::vector<std::string>& channel_names) {
  ordered_json j;
  j["format"] = "eegemd.selection_trace";
  j["version"] = kVersion;
  j["initial_dim"] = trace.initial_dim;
  if (!channel_names.empty()) j["channels"] = channel_names;
  ordered_json removals = ordered_json::array();
  for (const RemovalRecord& r : trace.removal_order) {
    ordered_json e;
    e["iteration"] = r.iteration;
    e["removed"] = r.removed;
    e["distance"] = r.distance;
    removals.push_back(e);
  }
  j["removals"] = removals;
  j["final_subset"] = trace.final_subset;
  j["ranking"] = trace.ranking;
  return j.dump(2) + "\n";
}

SelectionTrace selection_trace_from_json(std::string_view text) {
  const ordered_json j = parse(text);
  check_header(j, "eegemd.selection_trace");
  try {
    SelectionTrace t;
    t.initial_dim = j.at("initial_dim").get<int>();
    for (const auto& e : j.at("removals")) {
      t.removal_order.push_back(
          {e.at("iteration").get<int>(), e.at("removed").get<int>(), e.at("distance").get<double>()});
    }
    t.final_subset = j.at("final_subset").get<std::vector<int>>();
    t.ranking = j.at("ranking").get<std::vector<int>>();
    return t;
  } catch (const ordered_json::exception& e) {
    throw format_error(std::string("selection trace: ") + e.what());
  }
}

}  // namespace eegemd
