#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "secda_dse/evaluator.hpp"

namespace secda_dse {

enum class Verdict { accepted, rejected, failed, pending };
enum class DataSource { analytical, external, human };

std::string to_string(Verdict verdict);
std::string to_string(DataSource source);
Verdict verdict_from_string(const std::string& text);
DataSource source_from_string(const std::string& text);

// The slice of an EvaluationReport kept with every data point.
struct MetricsSummary {
    std::int64_t total_cycles = 0;
    double wall_time_ns = 0.0;
    ResourceUsage resources;
    ResourceUsage utilization_pct;
    bool timing_pass = false;
    bool feasible = false;

    bool operator==(const MetricsSummary&) const = default;
};

MetricsSummary summarize_metrics(const EvaluationReport& report);

struct HardwareDataPoint {
    std::string point_id;
    std::string design_id;
    ParameterPoint configuration;
    WorkloadSpec workload;
    std::string device;
    MetricsSummary metrics;
    Verdict verdict = Verdict::pending;
    DataSource source = DataSource::analytical;
    std::optional<std::string> rationale;
    std::string created_at;

    bool operator==(const HardwareDataPoint&) const = default;
};

Json to_json(const HardwareDataPoint& point);
HardwareDataPoint load_data_point(const Json& document);

// point_id = design_id + source + monotonic sequence suffix.
std::string make_point_id(const std::string& design_id, DataSource source, std::size_t sequence);

// RFC 3339 UTC timestamps. The logical form offsets the epoch by `sequence`
// seconds and keeps reproducible runs byte-identical.
std::string logical_timestamp(std::size_t sequence);
std::string wall_timestamp();

struct PointFilter {
    std::optional<WorkloadSpec> workload;
    std::optional<std::string> device;
    std::optional<Verdict> verdict;
    std::optional<bool> feasible;
    std::optional<DataSource> source;
    std::optional<std::string> design_id;
};

/// Append-only line-delimited store of hardware data points with an
/// in-memory index built at open. One writer per file; readers see a
/// consistent prefix.
class CostDb {
public:
    enum class Mode { read_only, writer };

    explicit CostDb(std::filesystem::path file, Mode mode = Mode::writer);

    CostDb(const CostDb&) = delete;
    CostDb& operator=(const CostDb&) = delete;

    const std::filesystem::path& path() const { return file_; }

    std::string append(const HardwareDataPoint& point);

    /// Metrics: sequence (append order), point_id, total_cycles, objective,
    /// wall_time_ns, bram_18k, dsp, ff, lut. Cycle and wall-time keys treat
    /// infeasible points as +infinity.
    std::vector<HardwareDataPoint> query(const PointFilter& filter, const std::string& order = "sequence",
                                         std::optional<std::size_t> limit = std::nullopt) const;

    std::optional<HardwareDataPoint> find(const std::string& point_id) const;
    std::size_t size() const;

    // Sequence number the next appended record will get (1-based).
    std::size_t next_sequence() const;

    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    void load();

    std::filesystem::path file_;
    Mode mode_;
    mutable std::mutex mutex_;
    std::vector<HardwareDataPoint> records_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::vector<std::string> warnings_;
};

bool matches(const HardwareDataPoint& point, const PointFilter& filter);

struct RunSummary {
    std::string run_id;
    std::string design_id;
    std::int64_t total_cycles = 0;
    ResourceUsage utilization_pct;
    bool feasible = false;
    std::vector<std::string> source_files;

    bool operator==(const RunSummary&) const = default;
};

Json to_json(const RunSummary& summary);
RunSummary load_run_summary(const Json& document);

// Reads design.json, report.json and the src/ listing of a run folder.
RunSummary summarize_run(const std::filesystem::path& run_folder);

// One record per matching point: configuration, workload, device, feedback
// {simulation_success, latency_cycles, resource_utilization}, verdict, rationale.
Json finetune_record(const HardwareDataPoint& point);
std::size_t export_finetune_dataset(const CostDb& db, const PointFilter& filter, const std::filesystem::path& out);

}  // namespace secda_dse
