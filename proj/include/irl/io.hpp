#pragma once

#include "irl/environments.hpp"
#include "irl/estimators.hpp"
#include "irl/metrics.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace irl {

using Json = nlohmann::json;

/// {"discount", "horizon"?, "initial_dist", "transition": [s][a][s']}.
Json mdp_to_json(const TabularMDP& mdp);
TabularMDP mdp_from_json(const Json& doc);

/// One trajectory per line: {"steps": [[s, a], ...], "terminal": s | null}.
void write_dataset_jsonl(std::ostream& out, const Dataset& data);
Dataset read_dataset_jsonl(std::istream& in);

/// {"kind", "layer_sizes", "params"}.
Json model_to_json(const RewardModel& model);
RewardModel model_from_json(const Json& doc);

Json timing_to_json(const TimingBreakdown& timing);
Json result_to_json(const EstimationResult& result);
Json metrics_to_json(const MetricReport& report);

/// Header: position,velocity,action,next_position,next_velocity.
std::vector<ContinuousTransition> read_transitions_csv(std::istream& in);
void write_transitions_csv(std::ostream& out, const std::vector<ContinuousTransition>& rows);

/// RFC 4180 field quoting.
std::string csv_escape(const std::string& field);
/// Splits one CSV record, honouring quoted fields.
std::vector<std::string> csv_split(const std::string& line);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace irl
