#include "irl/io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace irl {

namespace {

Json matrix_to_json(const MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vector_from_json(const Json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

Json mdp_to_json(const TabularMDP& mdp) {
    const int ns = mdp.n_states();
    const int na = mdp.n_actions();
    Json tensor = Json::array();
    for (int s = 0; s < ns; ++s) {
        Json per_action = Json::array();
        for (int a = 0; a < na; ++a) {
            const auto row = mdp.transition(a).row(s);
            per_action.push_back(std::vector<double>(row.begin(), row.end()));
        }
        tensor.push_back(std::move(per_action));
    }
    Json doc{{"discount", mdp.discount()}, {"initial_dist", vector_to_json(mdp.initial_dist())},
             {"transition", std::move(tensor)}};
    if (mdp.horizon()) doc["horizon"] = *mdp.horizon();
    if (!mdp.terminal_states().empty()) doc["terminal_states"] = mdp.terminal_states();
    return doc;
}

TabularMDP mdp_from_json(const Json& doc) {
    const VectorXd initial = vector_from_json(doc.at("initial_dist"));
    const Json& tensor = doc.at("transition");
    const auto ns = static_cast<Eigen::Index>(initial.size());
    if (tensor.size() != static_cast<std::size_t>(ns))
        throw std::invalid_argument("mdp json: transition has " + std::to_string(tensor.size()) +
                                    " states, initial_dist has " + std::to_string(ns));
    const std::size_t na = tensor.empty() ? 0 : tensor[0].size();
    std::vector<MatrixXd> t(na, MatrixXd::Zero(ns, ns));
    for (Eigen::Index s = 0; s < ns; ++s) {
        const Json& per_action = tensor[static_cast<std::size_t>(s)];
        if (per_action.size() != na) throw std::invalid_argument("mdp json: ragged action dimension");
        for (std::size_t a = 0; a < na; ++a) {
            const auto row = per_action[a].get<std::vector<double>>();
            if (row.size() != static_cast<std::size_t>(ns))
                throw std::invalid_argument("mdp json: ragged next-state dimension");
            for (Eigen::Index n = 0; n < ns; ++n) t[a](s, n) = row[static_cast<std::size_t>(n)];
        }
    }
    std::optional<int> horizon;
    if (doc.contains("horizon") && !doc["horizon"].is_null()) horizon = doc["horizon"].get<int>();
    TabularMDP mdp(std::move(t), initial, doc.at("discount").get<double>(), horizon);
    if (doc.contains("terminal_states")) mdp.set_terminal_states(doc["terminal_states"].get<std::vector<bool>>());
    return mdp;
}

void write_dataset_jsonl(std::ostream& out, const Dataset& data) {
    for (const auto& traj : data.trajectories) {
        Json steps = Json::array();
        for (const auto& st : traj.steps) steps.push_back({st.state, st.action});
        Json line{{"steps", std::move(steps)}, {"terminal", nullptr}};
        if (traj.terminal) line["terminal"] = *traj.terminal;
        out << line.dump() << '\n';
    }
}

Dataset read_dataset_jsonl(std::istream& in) {
    Dataset data;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const Json doc = Json::parse(line);
            Trajectory traj;
            for (const auto& st : doc.at("steps")) {
                if (!st.is_array() || st.size() != 2) throw std::invalid_argument("step must be [state, action]");
                traj.steps.push_back({st[0].get<int>(), st[1].get<int>()});
            }
            if (doc.contains("terminal") && !doc["terminal"].is_null()) traj.terminal = doc["terminal"].get<int>();
            data.trajectories.push_back(std::move(traj));
        } catch (const std::exception& e) {
            throw std::invalid_argument("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return data;
}

Json model_to_json(const RewardModel& model) {
    return {{"kind", to_string(model.kind())}, {"layer_sizes", model.layer_sizes()},
            {"params", vector_to_json(model.params())}};
}

RewardModel model_from_json(const Json& doc) {
    const RewardKind kind = reward_kind_from_string(doc.at("kind").get<std::string>());
    VectorXd params = vector_from_json(doc.at("params"));
    if (kind == RewardKind::linear) return RewardModel::linear(std::move(params));
    return RewardModel::mlp_with_params(doc.at("layer_sizes").get<std::vector<int>>(), std::move(params));
}

Json timing_to_json(const TimingBreakdown& timing) {
    Json phases = Json::object();
    for (Phase p : kPhases) {
        const auto i = static_cast<std::size_t>(p);
        phases[to_string(p)] = {{"seconds", timing.seconds[i]},
                                {"dp_ops", timing.dp_ops[i]},
                                {"matmul_ops", timing.matmul_ops[i]}};
    }
    return {{"phases", std::move(phases)},
            {"total_seconds", timing.total_seconds},
            {"inner_steps", timing.inner_steps},
            {"warmup_inner_seconds", timing.warmup_inner_seconds},
            {"inner_step_average", timing.inner_step_average()},
            {"inner_dp_ops", timing.inner_dp_ops()}};
}

Json result_to_json(const EstimationResult& result) {
    Json trace{{"outer", Json::array()}, {"iteration", Json::array()}, {"grad_norm", Json::array()},
               {"objective", Json::array()}, {"seconds", Json::array()}};
    for (const auto& e : result.trace) {
        trace["outer"].push_back(e.outer);
        trace["iteration"].push_back(e.iteration);
        trace["grad_norm"].push_back(e.grad_norm);
        trace["objective"].push_back(e.objective);
        trace["seconds"].push_back(e.seconds);
    }
    return {{"theta", vector_to_json(result.theta())},
            {"model", model_to_json(result.model)},
            {"policy", matrix_to_json(result.policy.probs())},
            {"converged", result.converged},
            {"trace", std::move(trace)},
            {"timing", timing_to_json(result.timing)}};
}

Json metrics_to_json(const MetricReport& report) {
    // JSON has no infinity; a zero-probability NLL is reported as null plus the flag.
    Json nll = std::isfinite(report.nll) ? Json(report.nll) : Json(nullptr);
    return {{"nll", std::move(nll)},
            {"nll_zero_probability", report.nll_zero_probability},
            {"nll_in_sample", report.nll_in_sample},
            {"evd", report.evd},
            {"stochastic_evd", report.stochastic_evd},
            {"epic", report.epic},
            {"epic_degenerate", report.epic_degenerate}};
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    return fields;
}

std::vector<ContinuousTransition> read_transitions_csv(std::istream& in) {
    static const std::vector<std::string> kHeader{"position", "velocity", "action", "next_position",
                                                  "next_velocity"};
    std::string line;
    if (!std::getline(in, line) || csv_split(line) != kHeader)
        throw std::invalid_argument("transitions csv: expected header position,velocity,action,next_position,next_velocity");
    std::vector<ContinuousTransition> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = csv_split(line);
        if (f.size() != kHeader.size())
            throw std::invalid_argument("transitions csv line " + std::to_string(line_no) + ": expected 5 fields");
        try {
            rows.push_back({std::stod(f[0]), std::stod(f[1]), std::stoi(f[2]), std::stod(f[3]), std::stod(f[4])});
        } catch (const std::exception&) {
            throw std::invalid_argument("transitions csv line " + std::to_string(line_no) + ": malformed number");
        }
    }
    return rows;
}

void write_transitions_csv(std::ostream& out, const std::vector<ContinuousTransition>& rows) {
    out << "position,velocity,action,next_position,next_velocity\n";
    out.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : rows)
        out << r.position << ',' << r.velocity << ',' << r.action << ',' << r.next_position << ','
            << r.next_velocity << '\n';
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

}  // namespace irl
