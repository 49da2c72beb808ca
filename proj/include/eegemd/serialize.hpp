#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "eegemd/spdgeom.hpp"

namespace eegemd {

/// Versioned JSON document: {"format": "eegemd.mdm_model", "version": 1,
/// "classes", "channel_subset", "centroids": [[[row]...]...]}.
std::string mdm_model_to_json(const MDMModel& model);
MDMModel mdm_model_from_json(std::string_view text);

/// {"format": "eegemd.selection_trace", "version": 1, "initial_dim",
/// "removals": [{"iteration", "removed", "distance"}], "final_subset",
/// "ranking"} plus "channels" (index -> name) when names are given.
std::string selection_trace_to_json(const SelectionTrace& trace,
                                    const std::vector<std::string>& channel_names = {});
SelectionTrace selection_trace_from_json(std::string_view text);

}  // namespace eegemd
