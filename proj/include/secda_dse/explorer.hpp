#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "secda_dse/advisor.hpp"

namespace secda_dse {

enum class Strategy { exhaustive, heuristic, llm };

std::string to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& text);

// Improvement-free iterations tolerated before a heuristic/llm run stops.
inline constexpr std::size_t kConvergencePatience = 3;

struct ExplorationConfig {
    WorkloadSpec workload;
    DeviceProfile device;
    Directives directives;
    Strategy strategy = Strategy::heuristic;
    std::size_t max_iterations = 10;
    std::size_t candidates_per_iteration = 4;
    std::size_t diversity_k = 1;
    std::uint64_t seed = 0;
    std::string objective = "min_total_cycles";
    std::filesystem::path workspace{};
    CalibrationProfile profile = vecmul_default_profile();
    AdvisorConfig advisor{};
    std::optional<std::string> external_evaluator{};
    std::optional<std::filesystem::path> corpus_dir{};
    bool logical_timestamps = true;
};

ExplorationConfig load_exploration_config(const Json& document);
Json to_json(const ExplorationConfig& config);

struct EvaluatedEntry {
    ParameterPoint point;
    std::string design_id;
    std::string run_id;
    std::string point_id;
    double objective = kInfeasibleObjective;
    bool feasible = false;
};

struct ExplorationState {
    std::size_t iteration = 0;
    std::set<std::string> evaluated;  // design ids
    std::vector<EvaluatedEntry> history;  // evaluation order
    std::vector<EvaluatedEntry> frontier;  // feasible, not vetoed, (objective, point) ascending
    std::optional<EvaluatedEntry> best;
    std::vector<ParameterPoint> diversity_set;
    std::vector<std::string> pending_verdicts;

    std::set<std::string> vetoed;    // design ids rejected by a reviewer
    std::set<std::string> accepted;  // design ids accepted by a reviewer
    std::size_t stale_iterations = 0;
};

Json to_json(const ExplorationState& state);

/// Top-`candidates_per_iteration` frontier points, then `diversity_k` more
/// evaluated points chosen greedily to maximise the minimum normalised L1
/// distance (directive-set index positions divided by set size) to the
/// selection. Ties go to the lexicographically smaller point.
std::vector<ParameterPoint> select_frontier(const ExplorationState& state, const ExplorationConfig& config);

// Normalised L1 distance between two members of `directives`.
double directive_distance(const ParameterPoint& a, const ParameterPoint& b, const Directives& directives);

struct StepOutcome {
    std::size_t iteration = 0;
    std::optional<EvaluatedEntry> best;
    std::vector<std::string> evaluated_run_ids;
    std::size_t rejected = 0;
};

/// Owns the exploration state and writes run folders and data points into
/// the workspace. Not thread-safe; the caller serialises access.
class Explorer {
public:
    Explorer(ExplorationConfig config, CostDb& db, std::shared_ptr<ChatProvider> provider = nullptr);

    const ExplorationConfig& config() const { return config_; }
    const ExplorationState& state() const { return state_; }

    // Throws SpaceExhausted when no unexplored valid point remains.
    StepOutcome step();

    // Steps until max_iterations, exhaustion or convergence; writes exploration_report.json.
    Json run();

    const ExplorationState& apply_verdict(const std::string& point_id, Verdict verdict, const std::string& notes);

    bool has_point(const std::string& point_id) const;

    ExplorationSnapshot snapshot() const;
    Json report() const;
    const std::string& stop_reason() const { return stop_reason_; }

private:
    struct Pick {
        ParameterPoint point;
        std::optional<std::string> rationale;
    };

    std::vector<Pick> obtain_candidates(std::optional<Transcript>& transcript, std::size_t& rejected);
    void evaluate_candidate(const Pick& pick, const std::optional<Transcript>& transcript,
                            std::vector<std::string>& run_ids);
    void record_rejection(const ParameterPoint& point, const std::string& rationale);
    void refresh_frontier();
    std::string timestamp(std::size_t sequence) const;
    std::filesystem::path reserve_run_folder(const std::string& design_id);
    bool any_unexplored() const;

    ExplorationConfig config_;
    CostDb& db_;
    std::shared_ptr<ChatProvider> provider_;
    std::optional<RetrievalIndex> index_;
    std::optional<ExternalEvaluator> external_;
    AcceleratorTemplate template_;
    ExplorationState state_;
    std::set<ParameterPoint> evaluated_points_;
    std::set<std::string> owned_points_;
    std::map<std::string, std::pair<Verdict, std::string>> decided_;
    std::vector<Json> trace_;
    std::vector<Json> fallbacks_;
    std::string stop_reason_;
};

/// Appends a human verdict record for `original`; returns the new point_id.
std::string record_human_verdict(CostDb& db, const HardwareDataPoint& original, Verdict verdict,
                                  const std::string& notes, const std::string& created_at);

struct ExplorationResult {
    ExplorationState state;
    Json report;
};

// Opens <workspace>/db/datapoints.ndjson and runs a full exploration.
ExplorationResult run_exploration(const ExplorationConfig& config, std::shared_ptr<ChatProvider> provider = nullptr);

// Creates the workspace directory layout (db/, runs/).
void init_workspace(const std::filesystem::path& workspace);

}  // namespace secda_dse
