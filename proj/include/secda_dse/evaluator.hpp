#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <semaphore>
#include <string>

#include "secda_dse/templates.hpp"

namespace secda_dse {

/// Affine latency coefficients for one hardware module:
/// cycles = ceil(alpha * ceil(L / lanes)) + beta, or `idle` when L = 0.
struct ModuleCoefficients {
    double alpha = 0.0;
    std::int64_t beta = 0;
    std::int64_t idle = 0;

    bool operator==(const ModuleCoefficients&) const = default;
};

/// Coefficients that make the analytical model reproduce an observed HLS report.
struct CalibrationProfile {
    std::map<std::string, ModuleCoefficients> modules;
    std::int64_t total_handoff = 0;
    std::int64_t dsp_per_multiplier = 0;
    std::int64_t bram_bits_per_block = 18432;
    std::int64_t ff_base = 0;
    std::int64_t lut_base = 0;
    std::int64_t ff_per_lane = 0;
    std::int64_t lut_per_lane = 0;
    double estimated_path_ns = 0.0;
    std::int64_t declared_l_max = 1;

    bool operator==(const CalibrationProfile&) const = default;
};

struct ResourceUsage {
    std::int64_t bram_18k = 0;
    std::int64_t dsp = 0;
    std::int64_t ff = 0;
    std::int64_t lut = 0;

    bool operator==(const ResourceUsage&) const = default;
};

struct LatencyEstimate {
    std::map<std::string, std::int64_t> module_cycles;
    std::int64_t total_cycles = 0;
};

inline constexpr double kInfeasibleObjective = std::numeric_limits<double>::infinity();

struct EvaluationReport {
    std::map<std::string, std::int64_t> module_cycles;
    std::int64_t total_cycles = 0;
    std::int64_t initiation_interval = 0;
    double wall_time_ns = 0.0;
    ResourceUsage resources;
    ResourceUsage utilization_pct;
    bool timing_pass = false;
    bool feasible = false;
    double objective = kInfeasibleObjective;

    bool operator==(const EvaluationReport&) const = default;
};

/// The profile shipped for the built-in vecmul template (also packaged as
/// data/profiles/vecmul.json).
CalibrationProfile vecmul_default_profile();

CalibrationProfile load_profile(const Json& document);
Json to_json(const CalibrationProfile& profile);

Json to_json(const ResourceUsage& usage);
ResourceUsage load_resource_usage(const Json& document);

Json to_json(const EvaluationReport& report);
EvaluationReport load_report(const Json& document);

LatencyEstimate estimate_latency(const AcceleratorDesign& design, const CalibrationProfile& profile);
ResourceUsage estimate_resources(const AcceleratorDesign& design, const CalibrationProfile& profile);

/// floor(100 * used / available); throws ValidationError unless available > 0 and used >= 0.
std::int64_t utilization_pct(std::int64_t used, std::int64_t available);

bool check_timing(const CalibrationProfile& profile, const DeviceProfile& device);

EvaluationReport evaluate(const AcceleratorDesign& design, const DeviceProfile& device,
                          const CalibrationProfile& profile);

/// Runs `<command> <run_folder>` through the shell and reads back
/// `<run_folder>/report.json`. At most `max_concurrency` processes run at once.
class ExternalEvaluator {
public:
    explicit ExternalEvaluator(std::string command, std::ptrdiff_t max_concurrency = 1);

    EvaluationReport run(const AcceleratorDesign& design, const std::filesystem::path& run_folder);

    const std::string& command() const { return command_; }

private:
    std::string command_;
    std::counting_semaphore<64> slots_;
};

EvaluationReport run_external_evaluator(const std::string& command, const AcceleratorDesign& design,
                                        const std::filesystem::path& run_folder);

}  // namespace secda_dse
