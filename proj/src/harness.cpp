#include "irl/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace irl {

std::string to_string(EnvironmentKind kind) {
    switch (kind) {
        case EnvironmentKind::obstacleworld: return "obstacleworld";
        case EnvironmentKind::objectworld: return "objectworld";
        case EnvironmentKind::mountaincar: return "mountaincar";
    }
    return "unknown";
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Strict view over one JSON object: every key read is recorded, and
// finish() rejects whatever was not.
class ObjectReader {
public:
    ObjectReader(const Json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) fail(path_, "expected an object");
    }

    [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
        throw ConfigError(path + ": " + msg);
    }

    std::string at(const std::string& key) const { return path_ + "." + key; }
    bool has(const std::string& key) {
        seen_.insert(key);
        return doc_.contains(key) && !doc_[key].is_null();
    }
    const Json& raw(const std::string& key) {
        seen_.insert(key);
        return doc_.at(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        try {
            return doc_[key].get<T>();
        } catch (const Json::exception&) {
            fail(at(key), "wrong type");
        }
    }

    double number(const std::string& key, double fallback, double lo, double hi) {
        const double v = get<double>(key, fallback);
        if (!(v >= lo && v <= hi)) {
            std::ostringstream msg;
            msg << "must lie in [" << lo << ", " << hi << "], got " << v;
            fail(at(key), msg.str());
        }
        return v;
    }

    long integer(const std::string& key, long fallback, long lo, long hi = std::numeric_limits<long>::max()) {
        if (has(key) && !doc_[key].is_number_integer()) fail(at(key), "expected an integer");
        const long v = get<long>(key, fallback);
        if (v < lo || v > hi) {
            std::ostringstream msg;
            msg << "must be >= " << lo;
            if (hi != std::numeric_limits<long>::max()) msg << " and <= " << hi;
            msg << ", got " << v;
            fail(at(key), msg.str());
        }
        return v;
    }

    void finish() const {
        for (auto it = doc_.begin(); it != doc_.end(); ++it)
            if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }

private:
    const Json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

Cell parse_cell(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        ObjectReader::fail(path, "expected [row, col]");
    return {j[0].get<int>(), j[1].get<int>()};
}

RewardKind parse_reward(const std::string& name, const std::string& path) {
    try {
        return reward_kind_from_string(name);
    } catch (const std::exception&) {
        ObjectReader::fail(path, "unknown reward kind '" + name + "' (expected linear or mlp)");
    }
}

void parse_environment(ExperimentConfig& c, const Json& doc) {
    ObjectReader r(doc, "$.environment");
    const std::string kind = r.get<std::string>("kind", "");
    if (kind == "obstacleworld") {
        c.environment = EnvironmentKind::obstacleworld;
        auto& s = c.obstacleworld;
        s.width = static_cast<int>(r.integer("width", s.width, 1));
        s.height = static_cast<int>(r.integer("height", s.height, 1));
        if (r.has("obstacles")) {
            const Json& obs = r.raw("obstacles");
            if (!obs.is_array()) ObjectReader::fail(r.at("obstacles"), "expected an array of [row, col]");
            s.obstacles.clear();
            for (std::size_t i = 0; i < obs.size(); ++i)
                s.obstacles.push_back(parse_cell(obs[i], r.at("obstacles") + "[" + std::to_string(i) + "]"));
        }
        if (r.has("goal")) s.goal = parse_cell(r.raw("goal"), r.at("goal"));
        if (r.has("start")) {
            const Json& start = r.raw("start");
            if (start.is_string() && start.get<std::string>() == "uniform")
                s.start.reset();
            else
                s.start = parse_cell(start, r.at("start"));
        }
        if (r.has("true_theta")) {
            const auto theta = r.get<std::vector<double>>("true_theta", {});
            if (theta.size() != 3) ObjectReader::fail(r.at("true_theta"), "expected 3 weights (path, obstacle, goal)");
            s.true_theta = Eigen::Map<const VectorXd>(theta.data(), 3);
        }
        s.stay_action = r.get<bool>("stay_action", s.stay_action);
        s.discount = r.number("discount", s.discount, 0.0, 1.0 - 1e-12);
        s.horizon = static_cast<int>(r.integer("horizon", s.horizon, 1));
        c.horizon = s.horizon;
    } else if (kind == "objectworld") {
        c.environment = EnvironmentKind::objectworld;
        auto& s = c.objectworld;
        s.grid = static_cast<int>(r.integer("grid", s.grid, 1));
        s.colors = static_cast<int>(r.integer("colors", s.colors, 2));
        s.n_objects = static_cast<int>(r.integer("n_objects", s.n_objects, 0));
        s.slip = r.number("slip", s.slip, 0.0, 1.0);
        const std::string metric = r.get<std::string>("metric", "chebyshev");
        if (metric == "chebyshev")
            s.metric = DistanceMetric::chebyshev;
        else if (metric == "euclidean")
            s.metric = DistanceMetric::euclidean;
        else
            ObjectReader::fail(r.at("metric"), "expected chebyshev or euclidean");
        s.outer_radius_a = r.number("outer_radius_a", s.outer_radius_a, 0.0, 1e9);
        s.outer_radius_b = r.number("outer_radius_b", s.outer_radius_b, 0.0, 1e9);
        s.discount = r.number("discount", s.discount, 0.0, 1.0 - 1e-12);
        s.horizon = static_cast<int>(r.integer("horizon", s.horizon, 1));
        c.objectworld_seed = static_cast<std::uint64_t>(r.integer("seed", 0, 0));
        c.horizon = s.horizon;
        const int n_objects = s.n_objects > 0 ? s.n_objects : std::max(s.colors, s.grid * s.grid / 10);
        if (s.colors > n_objects)
            ObjectReader::fail(r.at("colors"), "more colours than objects (" + std::to_string(n_objects) + ")");
    } else if (kind == "mountaincar") {
        c.environment = EnvironmentKind::mountaincar;
        auto& s = c.mountaincar;
        s.position_bins = static_cast<int>(r.integer("position_bins", s.position_bins, 2));
        s.velocity_bins = static_cast<int>(r.integer("velocity_bins", s.velocity_bins, 2));
        s.position_bandwidth = r.number("position_bandwidth", s.position_bandwidth, 1e-9, 1e9);
        s.velocity_bandwidth = r.number("velocity_bandwidth", s.velocity_bandwidth, 1e-9, 1e9);
        s.goal_position = r.number("goal_position", s.goal_position, s.position_min, s.position_max);
        s.discount = r.number("discount", s.discount, 0.0, 1.0 - 1e-12);
        s.horizon = static_cast<int>(r.integer("horizon", s.horizon, 1));
        c.horizon = s.horizon;
        if (r.has("source")) {
            ObjectReader src(r.raw("source"), r.at("source"));
            auto& m = c.mountaincar_source;
            if (src.has("csv")) m.csv = src.get<std::string>("csv", "");
            m.episodes = static_cast<int>(src.integer("episodes", m.episodes, 1));
            m.steps = static_cast<int>(src.integer("steps", m.steps, 1));
            m.seed = static_cast<std::uint64_t>(src.integer("seed", 0, 0));
            src.finish();
        }
    } else {
        ObjectReader::fail(r.at("kind"), "expected obstacleworld, objectworld or mountaincar, got '" + kind + "'");
    }
    r.finish();
}

MethodSpec parse_method(const Json& doc, const std::string& path, EnvironmentKind env, RewardKind reward) {
    if (doc.is_string()) {
        try {
            return default_method(doc.get<std::string>(), env, reward);
        } catch (const std::invalid_argument& e) {
            ObjectReader::fail(path, e.what());
        }
    }
    ObjectReader r(doc, path);
    const std::string name = r.get<std::string>("name", "");
    if (name.empty()) ObjectReader::fail(r.at("name"), "required");
    if (r.has("reward")) reward = parse_reward(r.get<std::string>("reward", ""), r.at("reward"));

    MethodSpec m;
    if (r.has("method")) {
        const std::string method = r.get<std::string>("method", "");
        m.name = name;
        m.reward = reward;
        try {
            m.estimation = EstimationConfig::defaults_for(estimation_method_from_string(method), reward);
        } catch (const std::invalid_argument&) {
            ObjectReader::fail(r.at("method"), "expected optimization or approximation");
        }
        if (m.estimation.method == EstimationMethod::approximation)
            m.estimation.outer_iterations = env == EnvironmentKind::objectworld ? 5 : 10;
        else
            m.estimation.expert_counts = ExpertCounts::empirical;
    } else {
        try {
            m = default_method(name, env, reward);
        } catch (const std::invalid_argument& e) {
            ObjectReader::fail(r.at("name"), std::string(e.what()) + "; set \"method\" for custom names");
        }
        m.name = name;
    }

    auto& e = m.estimation;
    if (r.has("K")) {
        if (e.method == EstimationMethod::optimization)
            ObjectReader::fail(r.at("K"), "only applies to approximation methods");
        e.outer_iterations = static_cast<int>(r.integer("K", e.outer_iterations, 1));
    }
    if (r.has("optimizer")) {
        const std::string opt = r.get<std::string>("optimizer", "");
        if (opt == "gradient_ascent")
            e.step = StepConfig::default_for(RewardKind::linear);
        else if (opt == "adam")
            e.step = StepConfig::default_for(RewardKind::mlp);
        else
            ObjectReader::fail(r.at("optimizer"), "expected gradient_ascent or adam");
    }
    e.step.rate = r.number("step_rate", e.step.rate, 1e-12, 1e6);
    e.convergence.threshold = r.number("threshold", e.convergence.threshold, 1e-300, 1e9);
    e.convergence.consecutive = static_cast<int>(r.integer("consecutive", e.convergence.consecutive, 1));
    e.convergence.max_iterations = r.integer("max_iterations", e.convergence.max_iterations, 1);
    e.smoothing = r.number("smoothing", e.smoothing, 0.0, 1e9);
    if (r.has("expert_counts")) {
        if (e.method != EstimationMethod::optimization)
            ObjectReader::fail(r.at("expert_counts"), "only applies to optimization methods");
        try {
            e.expert_counts = expert_counts_from_string(r.get<std::string>("expert_counts", ""));
        } catch (const std::invalid_argument&) {
            ObjectReader::fail(r.at("expert_counts"), "expected occupancy or empirical");
        }
    }
    e.warm_start_value = r.get<bool>("warm_start_value", e.warm_start_value);
    r.finish();
    return m;
}

Json method_echo(const MethodSpec& m) {
    const auto& e = m.estimation;
    Json j{{"name", m.name},
           {"method", to_string(e.method)},
           {"reward", to_string(m.reward)},
           {"optimizer", e.step.kind == OptimizerKind::adam ? "adam" : "gradient_ascent"},
           {"step_rate", e.step.rate},
           {"threshold", e.convergence.threshold},
           {"consecutive", e.convergence.consecutive},
           {"max_iterations", e.convergence.max_iterations},
           {"smoothing", e.smoothing},
           {"warm_start_value", e.warm_start_value}};
    if (e.method == EstimationMethod::approximation)
        j["K"] = e.outer_iterations;
    else
        j["expert_counts"] = to_string(e.expert_counts);
    return j;
}

}  // namespace

MethodSpec default_method(const std::string& name, EnvironmentKind env, RewardKind reward) {
    const std::string key = lower(name);
    MethodSpec m;
    m.reward = reward;
    if (key == "mce-irl" || key == "nfxp") {
        m.name = key == "nfxp" ? "NFXP" : "MCE-IRL";
        m.estimation = EstimationConfig::defaults_for(EstimationMethod::optimization, reward);
        m.estimation.expert_counts = ExpertCounts::empirical;
    } else if (key == "ccp") {
        m.name = "CCP";
        m.estimation = EstimationConfig::defaults_for(EstimationMethod::approximation, reward);
        m.estimation.outer_iterations = 1;
    } else if (key == "npl") {
        m.name = "NPL";
        m.estimation = EstimationConfig::defaults_for(EstimationMethod::approximation, reward);
        m.estimation.outer_iterations = env == EnvironmentKind::objectworld ? 5 : 10;
    } else {
        throw std::invalid_argument("unknown method '" + name + "' (expected MCE-IRL, NFXP, CCP or NPL)");
    }
    return m;
}

std::vector<int> default_trajectory_grid(EnvironmentKind env) {
    switch (env) {
        case EnvironmentKind::obstacleworld: return {1, 3, 5, 10, 20, 30, 50};
        case EnvironmentKind::mountaincar: return {100, 200, 400, 500, 700, 1000};
        case EnvironmentKind::objectworld: return {1, 3, 5, 10, 20, 30, 50, 100, 150, 200};
    }
    return {};
}

int default_seed_count(EnvironmentKind env) { return env == EnvironmentKind::objectworld ? 5 : 3; }

ExperimentConfig parse_config(const Json& doc) {
    ExperimentConfig c;
    ObjectReader r(doc, "$");
    if (!r.has("environment")) ObjectReader::fail("$.environment", "required");
    parse_environment(c, r.raw("environment"));
    if (c.environment == EnvironmentKind::objectworld) c.expert = ExpertKind::epsilon_noisy_optimal;

    if (r.has("expert")) {
        ObjectReader e(r.raw("expert"), "$.expert");
        if (e.has("kind")) {
            try {
                c.expert = expert_kind_from_string(e.get<std::string>("kind", ""));
            } catch (const std::invalid_argument&) {
                ObjectReader::fail(e.at("kind"), "expected soft_optimal or epsilon_noisy_optimal");
            }
        }
        c.expert_epsilon = e.number("epsilon", c.expert_epsilon, 0.0, 1.0);
        c.horizon = static_cast<int>(e.integer("horizon", c.horizon, 1));
        e.finish();
    }

    const std::string mask = r.get<std::string>("partial_mask", "none");
    if (mask == "none")
        c.mask = MaskKind::none;
    else if (mask == "corridor")
        c.mask = MaskKind::corridor;
    else if (mask == "below_diagonal")
        c.mask = MaskKind::below_diagonal;
    else
        ObjectReader::fail("$.partial_mask", "expected none, corridor or below_diagonal");
    if (c.mask != MaskKind::none && c.environment == EnvironmentKind::mountaincar)
        ObjectReader::fail("$.partial_mask", "masks apply to grid environments only");

    const RewardKind reward =
        r.has("reward") ? parse_reward(r.get<std::string>("reward", ""), "$.reward") : RewardKind::linear;
    if (!r.has("methods")) ObjectReader::fail("$.methods", "required");
    const Json& methods = r.raw("methods");
    if (!methods.is_array() || methods.empty()) ObjectReader::fail("$.methods", "expected a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < methods.size(); ++i) {
        const std::string path = "$.methods[" + std::to_string(i) + "]";
        c.methods.push_back(parse_method(methods[i], path, c.environment, reward));
        if (!names.insert(c.methods.back().name).second) ObjectReader::fail(path, "duplicate method name");
    }

    c.trajectories = r.get<std::vector<int>>("trajectories", default_trajectory_grid(c.environment));
    if (c.trajectories.empty()) ObjectReader::fail("$.trajectories", "expected at least one count");
    for (std::size_t i = 0; i < c.trajectories.size(); ++i)
        if (c.trajectories[i] < 1)
            ObjectReader::fail("$.trajectories[" + std::to_string(i) + "]", "counts must be >= 1");
    c.n_seeds = static_cast<int>(r.integer("seeds", default_seed_count(c.environment), 1));
    c.base_seed = static_cast<std::uint64_t>(r.integer("base_seed", 0, 0));

    if (r.has("metrics")) {
        ObjectReader m(r.raw("metrics"), "$.metrics");
        c.metric_nll = m.get<bool>("nll", c.metric_nll);
        c.metric_evd = m.get<bool>("evd", c.metric_evd);
        c.metric_stochastic_evd = m.get<bool>("stochastic_evd", c.metric_stochastic_evd);
        c.metric_epic = m.get<bool>("epic", c.metric_epic);
        c.nll_in_sample = m.get<bool>("nll_in_sample", c.nll_in_sample);
        m.finish();
    }
    c.output_dir = r.get<std::string>("output_dir", c.output_dir.string());
    c.workers = static_cast<int>(r.integer("workers", 0, 0));
    r.finish();

    Json echo = doc;
    echo["methods"] = Json::array();
    for (const auto& m : c.methods) echo["methods"].push_back(method_echo(m));
    echo["trajectories"] = c.trajectories;
    echo["seeds"] = c.n_seeds;
    echo["base_seed"] = c.base_seed;
    echo["partial_mask"] = mask;
    echo["expert"] = {{"kind", to_string(c.expert)}, {"epsilon", c.expert_epsilon}, {"horizon", c.horizon}};
    echo["metrics"] = {{"nll", c.metric_nll},
                       {"evd", c.metric_evd},
                       {"stochastic_evd", c.metric_stochastic_evd},
                       {"epic", c.metric_epic},
                       {"nll_in_sample", c.nll_in_sample}};
    echo["output_dir"] = c.output_dir.string();
    c.echo = std::move(echo);
    return c;
}

ExperimentConfig validate_config(const std::filesystem::path& path) {
    Json doc;
    try {
        doc = read_json_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    ExperimentConfig c = parse_config(doc);
    // Relative source paths resolve against the config file.
    auto& csv = c.mountaincar_source.csv;
    if (csv && csv->is_relative()) csv = path.parent_path() / *csv;
    return c;
}

Environment build_environment(const ExperimentConfig& config) {
    switch (config.environment) {
        case EnvironmentKind::obstacleworld: return build_obstacleworld(config.obstacleworld);
        case EnvironmentKind::objectworld: return build_objectworld(config.objectworld, config.objectworld_seed);
        case EnvironmentKind::mountaincar: {
            const auto& src = config.mountaincar_source;
            if (src.csv) {
                std::ifstream in(*src.csv);
                if (!in) throw std::runtime_error("cannot open " + src.csv->string());
                return build_mountaincar(config.mountaincar, read_transitions_csv(in));
            }
            return build_mountaincar(config.mountaincar,
                                     simulate_mountaincar(config.mountaincar, src.episodes, src.steps, src.seed));
        }
    }
    throw std::logic_error("unhandled environment kind");
}

namespace {

// Held-out data uses a seed disjoint from the training seeds.
constexpr std::uint64_t kHeldOutSalt = 0x5bd1e9955bd1e995ULL;

}  // namespace

CellOutcome run_cell(const ExperimentConfig& config, const Environment& env, const MethodSpec& method,
                     int n_trajectories, std::uint64_t seed) {
    const TabularMDP& mdp = env.mdp;
    const Dataset data = generate_expert(mdp, env.true_reward, config.expert, n_trajectories, config.horizon, seed,
                                         config.expert_epsilon);
    ExpertEstimate expert =
        estimate_expert_policy(data, mdp.n_states(), mdp.n_actions(), method.estimation.smoothing);
    // Trajectory counts stay intact under a partial mask; only the policy
    // estimate loses states.
    attach_trajectory_counts(expert, data, mdp.discount());
    if (config.mask == MaskKind::corridor)
        expert = apply_partial_mask(std::move(expert), corridor_mask(env.grid_width, env.grid_height));
    else if (config.mask == MaskKind::below_diagonal)
        expert = apply_partial_mask(std::move(expert), below_diagonal_mask(env.grid_width, env.grid_height));

    const RewardModel init = method.reward == RewardKind::linear
                                 ? RewardModel::linear(VectorXd::Zero(env.features.dim()))
                                 : RewardModel::mlp(env.features.dim(), seed);
    const EstimationResult result = estimate(mdp, env.features, init, expert, method.estimation);
    const MatrixXd recovered = reward_table(result.model, env.features);
    const SolverOptions& solver = method.estimation.solver;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    CellOutcome out;
    MetricReport& m = out.metrics;
    m.nll = m.evd = m.stochastic_evd = m.epic = nan;
    m.nll_in_sample = config.nll_in_sample;
    if (config.metric_nll) {
        const Dataset eval = config.nll_in_sample
                                 ? data
                                 : generate_expert(mdp, env.true_reward, config.expert, n_trajectories,
                                                   config.horizon, seed ^ kHeldOutSalt, config.expert_epsilon);
        const NllValue nll = metric_nll(result.policy, eval);
        m.nll = nll.value;
        m.nll_zero_probability = nll.zero_probability;
    }
    if (config.metric_evd) m.evd = metric_evd(mdp, env.true_reward, recovered, solver);
    if (config.metric_stochastic_evd) m.stochastic_evd = metric_stochastic_evd(mdp, env.true_reward, result.policy, solver);
    if (config.metric_epic) {
        const EpicValue epic = metric_epic(mdp, env.true_reward, recovered);
        m.epic = epic.distance;
        m.epic_degenerate = epic.degenerate;
    }

    out.timing = result.timing;
    out.converged = result.converged;
    out.row = ResultRow{env.name,
                        method.name,
                        n_trajectories,
                        seed,
                        m.nll,
                        m.evd,
                        m.stochastic_evd,
                        m.epic,
                        result.timing.total_seconds,
                        result.timing.inner_step_average(),
                        result.timing.phase_seconds(Phase::outer_dp)};
    return out;
}

namespace {

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream s;
    s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return s.str();
}

double parse_number(const std::string& s) {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("malformed number '" + s + "'");
    return v;
}

struct Task {
    std::size_t method;
    int n_trajectories;
    std::uint64_t seed;
};

}  // namespace

std::string results_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    for (std::size_t i = 0; i < kResultColumns.size(); ++i) out << (i ? "," : "") << kResultColumns[i];
    out << "\r\n";
    for (const auto& r : rows) {
        out << csv_escape(r.environment) << ',' << csv_escape(r.method) << ',' << r.n_trajectories << ','
            << r.seed << ',' << format_number(r.nll) << ',' << format_number(r.evd) << ','
            << format_number(r.stochastic_evd) << ',' << format_number(r.epic) << ','
            << format_number(r.wall_clock_total) << ',' << format_number(r.inner_step_avg) << ','
            << format_number(r.outer_dp_total) << "\r\n";
    }
    return out.str();
}

std::vector<ResultRow> results_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("results csv: empty input");
    const auto header = csv_split(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const auto& name : kResultColumns)
        if (!col.count(name)) throw std::invalid_argument("results csv: missing column '" + name + "'");

    std::vector<ResultRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = csv_split(line);
        if (f.size() != header.size())
            throw std::invalid_argument("results csv line " + std::to_string(line_no) + ": wrong field count");
        auto field = [&](const char* name) -> const std::string& { return f[col.at(name)]; };
        try {
            rows.push_back(ResultRow{field("environment"), field("method"), std::stoi(field("n_trajectories")),
                                     std::stoull(field("seed")), parse_number(field("nll")),
                                     parse_number(field("evd")), parse_number(field("stochastic_evd")),
                                     parse_number(field("epic")), parse_number(field("wall_clock_total")),
                                     parse_number(field("inner_step_avg")), parse_number(field("outer_dp_total"))});
        } catch (const std::exception& e) {
            throw std::invalid_argument("results csv line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

std::string git_blob_hash(const std::string& content) {
    const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1)
        throw std::runtime_error("sha1 digest failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

ExperimentOutput run_experiment(const ExperimentConfig& config) {
    const Environment env = build_environment(config);

    // Cells enumerate (count, replicate); every method sees the same expert
    // data within a cell.
    std::vector<Task> tasks;
    std::uint64_t cell_index = 0;
    for (int n : config.trajectories)
        for (int k = 0; k < config.n_seeds; ++k, ++cell_index)
            for (std::size_t m = 0; m < config.methods.size(); ++m)
                tasks.push_back({m, n, config.base_seed + cell_index});

    std::vector<std::optional<CellOutcome>> outcomes(tasks.size());
    std::vector<std::string> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const Task& t = tasks[i];
            try {
                outcomes[i] = run_cell(config, env, config.methods[t.method], t.n_trajectories, t.seed);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    unsigned workers = config.workers > 0 ? static_cast<unsigned>(config.workers)
                                          : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(tasks.size()));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    ExperimentOutput out;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (outcomes[i])
            out.cells.push_back(std::move(*outcomes[i]));
        else
            out.failures.push_back({config.methods[tasks[i].method].name, tasks[i].n_trajectories, tasks[i].seed,
                                    errors[i]});
    }

    std::filesystem::create_directories(config.output_dir);
    std::vector<ResultRow> rows;
    Json timing = Json::array();
    for (const auto& c : out.cells) {
        rows.push_back(c.row);
        timing.push_back({{"environment", c.row.environment},
                          {"method", c.row.method},
                          {"n_trajectories", c.row.n_trajectories},
                          {"seed", c.row.seed},
                          {"converged", c.converged},
                          {"metrics", metrics_to_json(c.metrics)},
                          {"timing", timing_to_json(c.timing)}});
    }
    write_text_file(config.output_dir / "results.csv", results_to_csv(rows));
    write_text_file(config.output_dir / "timing.json", timing.dump(2) + "\n");

    Json inputs = Json::object();
    if (config.mountaincar_source.csv) {
        std::ifstream in(*config.mountaincar_source.csv, std::ios::binary);
        std::ostringstream content;
        content << in.rdbuf();
        inputs[config.mountaincar_source.csv->string()] = git_blob_hash(content.str());
    }
    Json failures = Json::array();
    for (const auto& f : out.failures)
        failures.push_back({{"method", f.method}, {"n_trajectories", f.n_trajectories}, {"seed", f.seed},
                            {"error", f.error}});
    const Json manifest{{"config", config.echo},
                        {"config_hash", git_blob_hash(config.echo.dump())},
                        {"input_hashes", std::move(inputs)},
                        {"cells", tasks.size()},
                        {"completed", out.cells.size()},
                        {"failures", std::move(failures)}};
    write_text_file(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
    return out;
}

std::string speedup_label(double baseline_seconds, double method_seconds) {
    // Speedups round to the nearest integer; anything slower than the
    // baseline shows as x0.
    long factor = 0;
    if (method_seconds > 0.0) {
        const double ratio = baseline_seconds / method_seconds;
        if (ratio >= 1.0) factor = std::lround(ratio);
    }
    return "×" + std::to_string(factor);
}

std::string emit_timing_table(const std::vector<ResultRow>& rows) {
    auto is_baseline = [](const std::string& name) {
        const std::string key = lower(name);
        return key == "mce-irl" || key == "nfxp";
    };
    std::vector<std::string> methods;
    std::string baseline;
    for (const auto& r : rows) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
        if (baseline.empty() && is_baseline(r.method)) baseline = r.method;
    }
    if (baseline.empty()) throw std::invalid_argument("timing table: no MCE-IRL/NFXP baseline rows");
    methods.erase(std::find(methods.begin(), methods.end(), baseline));
    methods.insert(methods.begin(), baseline);

    // (environment, count) -> method -> (sum, n)
    std::map<std::pair<std::string, int>, std::map<std::string, std::pair<double, int>>> groups;
    for (const auto& r : rows) {
        auto& acc = groups[{r.environment, r.n_trajectories}][r.method];
        acc.first += r.wall_clock_total;
        acc.second += 1;
    }

    std::ostringstream out;
    out << "| environment | n_trajectories |";
    for (const auto& m : methods) out << ' ' << m << " |";
    out << "\n|---|---|";
    for (std::size_t i = 0; i < methods.size(); ++i) out << "---|";
    out << '\n';
    for (const auto& [key, per_method] : groups) {
        const auto base = per_method.find(baseline);
        if (base == per_method.end())
            throw std::invalid_argument("timing table: no " + baseline + " rows for " + key.first + " with " +
                                        std::to_string(key.second) + " trajectories");
        const double base_mean = base->second.first / base->second.second;
        out << "| " << key.first << " | " << key.second << " |";
        for (const auto& m : methods) {
            const auto it = per_method.find(m);
            if (it == per_method.end()) {
                out << " - |";
                continue;
            }
            const double mean = it->second.first / it->second.second;
            out << ' ' << std::fixed << std::setprecision(2) << mean;
            if (m != baseline) out << " (" << speedup_label(base_mean, mean) << ')';
            out << " |";
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace irl
