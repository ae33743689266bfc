#include "secda_dse/evaluator.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace secda_dse {

namespace {

std::int64_t ceil_div(std::int64_t numerator, std::int64_t denominator) {
    return (numerator + denominator - 1) / denominator;
}

std::string shell_quote(const std::string& text) {
    std::string quoted = "'";
    for (char c : text) {
        if (c == '\'') quoted += "'\\''";
        else quoted.push_back(c);
    }
    quoted.push_back('\'');
    return quoted;
}

std::map<std::string, std::int64_t> load_cycles(const Json& document) {
    if (!document.is_object()) throw ParseError("module_cycles: expected object");
    std::map<std::string, std::int64_t> cycles;
    for (const auto& [name, value] : document.items()) {
        if (!value.is_number_integer()) throw ParseError("module_cycles." + name + ": expected integer");
        cycles[name] = value.get<std::int64_t>();
    }
    return cycles;
}

}  // namespace

CalibrationProfile vecmul_default_profile() {
    CalibrationProfile profile;
    profile.modules = {{"HW_MAIN", {0.0, 3, 3}},
                       {"Send", {1.0, 7, 7}},
                       {"Compute", {1.0, 13, 13}},
                       {"Recv", {2.0, 13, 8}}};
    profile.total_handoff = 1;
    profile.dsp_per_multiplier = 3;
    profile.bram_bits_per_block = 18432;
    profile.ff_base = 993;
    profile.lut_base = 1113;
    profile.ff_per_lane = 331;
    profile.lut_per_lane = 371;
    profile.estimated_path_ns = 3.950;
    profile.declared_l_max = 1023;
    return profile;
}

CalibrationProfile load_profile(const Json& document) {
    FieldReader reader(document, "profile");
    CalibrationProfile profile;

    const Json& modules = reader.raw("modules");
    if (!modules.is_object()) throw ParseError("profile.modules: expected object");
    for (const auto& [name, row] : modules.items()) {
        FieldReader coeffs(row, "profile.modules." + name);
        ModuleCoefficients c;
        c.alpha = coeffs.required<double>("alpha");
        c.beta = coeffs.required<std::int64_t>("beta");
        c.idle = coeffs.required<std::int64_t>("idle");
        coeffs.finish();
        if (c.alpha < 0 || c.beta < 0 || c.idle < 0) {
            throw ValidationError("modules." + name, "coefficients for " + name + " must be >= 0");
        }
        profile.modules[name] = c;
    }
    profile.total_handoff = reader.required<std::int64_t>("total_handoff");
    profile.dsp_per_multiplier = reader.required<std::int64_t>("dsp_per_multiplier");
    profile.bram_bits_per_block = reader.optional_or<std::int64_t>("bram_bits_per_block", 18432);
    profile.ff_base = reader.required<std::int64_t>("ff_base");
    profile.lut_base = reader.required<std::int64_t>("lut_base");
    profile.ff_per_lane = reader.required<std::int64_t>("ff_per_lane");
    profile.lut_per_lane = reader.required<std::int64_t>("lut_per_lane");
    profile.estimated_path_ns = reader.required<double>("estimated_path_ns");
    profile.declared_l_max = reader.required<std::int64_t>("declared_l_max");
    reader.finish();

    if (profile.bram_bits_per_block <= 0) {
        throw ValidationError("bram_bits_per_block", "bram_bits_per_block must be > 0");
    }
    if (!(profile.estimated_path_ns > 0)) throw ValidationError("estimated_path_ns", "estimated_path_ns must be > 0");
    if (profile.declared_l_max < 1) throw ValidationError("declared_l_max", "declared_l_max must be >= 1");
    return profile;
}

Json to_json(const CalibrationProfile& profile) {
    Json modules = Json::object();
    for (const auto& [name, c] : profile.modules) {
        modules[name] = Json{{"alpha", c.alpha}, {"beta", c.beta}, {"idle", c.idle}};
    }
    return Json{{"modules", modules},
                {"total_handoff", profile.total_handoff},
                {"dsp_per_multiplier", profile.dsp_per_multiplier},
                {"bram_bits_per_block", profile.bram_bits_per_block},
                {"ff_base", profile.ff_base},
                {"lut_base", profile.lut_base},
                {"ff_per_lane", profile.ff_per_lane},
                {"lut_per_lane", profile.lut_per_lane},
                {"estimated_path_ns", profile.estimated_path_ns},
                {"declared_l_max", profile.declared_l_max}};
}

Json to_json(const ResourceUsage& usage) {
    return Json{{"bram_18k", usage.bram_18k}, {"dsp", usage.dsp}, {"ff", usage.ff}, {"lut", usage.lut}};
}

ResourceUsage load_resource_usage(const Json& document) {
    FieldReader reader(document, "resources");
    ResourceUsage usage;
    usage.bram_18k = reader.required<std::int64_t>("bram_18k");
    usage.dsp = reader.required<std::int64_t>("dsp");
    usage.ff = reader.required<std::int64_t>("ff");
    usage.lut = reader.required<std::int64_t>("lut");
    reader.finish();
    return usage;
}

Json to_json(const EvaluationReport& report) {
    return Json{{"module_cycles", report.module_cycles},
                {"total_cycles", report.total_cycles},
                {"initiation_interval", report.initiation_interval},
                {"wall_time_ns", report.wall_time_ns},
                {"resources", to_json(report.resources)},
                {"utilization_pct", to_json(report.utilization_pct)},
                {"timing_pass", report.timing_pass},
                {"feasible", report.feasible},
                {"objective", number_or_null(report.objective)}};
}

EvaluationReport load_report(const Json& document) {
    FieldReader reader(document, "report");
    EvaluationReport report;
    report.module_cycles = load_cycles(reader.raw("module_cycles"));
    report.total_cycles = reader.required<std::int64_t>("total_cycles");
    report.initiation_interval = reader.required<std::int64_t>("initiation_interval");
    report.wall_time_ns = reader.required<double>("wall_time_ns");
    report.resources = load_resource_usage(reader.raw("resources"));
    report.utilization_pct = load_resource_usage(reader.raw("utilization_pct"));
    report.timing_pass = reader.required<bool>("timing_pass");
    report.feasible = reader.required<bool>("feasible");
    report.objective = number_or_infinity(reader.raw("objective"));
    reader.finish();
    return report;
}

LatencyEstimate estimate_latency(const AcceleratorDesign& design, const CalibrationProfile& profile) {
    const auto length = design.workload.length_l;
    if (length < 0 || length > design.point.buffer_depth) {
        throw ValidationError("length_l", "length_l must be in [0, buffer_depth]");
    }
    auto tmpl = find_template(design.template_id);
    if (!tmpl) throw UnsupportedTemplate("unknown template_id '" + design.template_id + "'");

    LatencyEstimate estimate;
    std::int64_t slowest = 0;
    for (const auto& module : tmpl->hw_modules) {
        auto row = profile.modules.find(module.name);
        if (row == profile.modules.end()) {
            throw ProfileMissingModule("profile has no coefficients for module " + module.name);
        }
        const auto& c = row->second;
        std::int64_t cycles = c.idle;
        if (length > 0) {
            const auto lanes = module.kind == ModuleKind::compute ? design.point.parallelism_p : std::int64_t{1};
            const auto beats = ceil_div(length, lanes);
            cycles = static_cast<std::int64_t>(std::ceil(c.alpha * static_cast<double>(beats))) + c.beta;
        }
        estimate.module_cycles[module.name] = cycles;
        slowest = std::max(slowest, cycles);
    }
    // Modules overlap in dataflow; the top level waits on the slowest plus a handoff.
    estimate.total_cycles = length == 0 ? 0 : slowest + profile.total_handoff;
    return estimate;
}

ResourceUsage estimate_resources(const AcceleratorDesign& design, const CalibrationProfile& profile) {
    auto tmpl = find_template(design.template_id);
    if (!tmpl) throw UnsupportedTemplate("unknown template_id '" + design.template_id + "'");

    const auto& p = design.point;
    const auto bits = p.buffer_depth * static_cast<std::int64_t>(p.data_width);
    ResourceUsage usage;
    usage.bram_18k = static_cast<std::int64_t>(tmpl->buffers.size()) * ceil_div(bits, profile.bram_bits_per_block);
    usage.dsp = profile.dsp_per_multiplier * p.parallelism_p;
    usage.ff = profile.ff_base + profile.ff_per_lane * (p.parallelism_p - 1);
    usage.lut = profile.lut_base + profile.lut_per_lane * (p.parallelism_p - 1);
    return usage;
}

std::int64_t utilization_pct(std::int64_t used, std::int64_t available) {
    if (available <= 0) throw ValidationError("available", "available capacity must be > 0");
    if (used < 0) throw ValidationError("used", "used amount must be >= 0");
    return (100 * used) / available;
}

bool check_timing(const CalibrationProfile& profile, const DeviceProfile& device) {
    return profile.estimated_path_ns <= device.clock_target_ns;
}

EvaluationReport evaluate(const AcceleratorDesign& design, const DeviceProfile& device,
                          const CalibrationProfile& profile) {
    auto latency = estimate_latency(design, profile);
    EvaluationReport report;
    report.module_cycles = std::move(latency.module_cycles);
    report.total_cycles = latency.total_cycles;
    report.initiation_interval = latency.total_cycles;
    report.wall_time_ns = static_cast<double>(latency.total_cycles) * device.clock_target_ns;
    report.resources = estimate_resources(design, profile);

    // A zero-capacity resource that is actually used counts as fully over budget.
    auto pct = [](std::int64_t used, std::int64_t available) -> std::int64_t {
        if (available > 0) return utilization_pct(used, available);
        return used > 0 ? 100 : 0;
    };
    report.utilization_pct = {pct(report.resources.bram_18k, device.bram_18k), pct(report.resources.dsp, device.dsp),
                              pct(report.resources.ff, device.ff), pct(report.resources.lut, device.lut)};

    report.timing_pass = check_timing(profile, device);
    const bool fits = report.resources.bram_18k <= device.bram_18k && report.resources.dsp <= device.dsp &&
                      report.resources.ff <= device.ff && report.resources.lut <= device.lut;
    report.feasible = report.timing_pass && fits;
    report.objective = report.feasible ? static_cast<double>(report.total_cycles) : kInfeasibleObjective;
    return report;
}

ExternalEvaluator::ExternalEvaluator(std::string command, std::ptrdiff_t max_concurrency)
    : command_(std::move(command)), slots_(std::clamp<std::ptrdiff_t>(max_concurrency, 1, 64)) {}

EvaluationReport ExternalEvaluator::run(const AcceleratorDesign& design, const std::filesystem::path& run_folder) {
    (void)design;
    if (!std::filesystem::is_directory(run_folder)) {
        throw ExternalToolFailure("run folder does not exist: " + run_folder.string(), "");
    }

    std::string diagnostics;
    int status = 0;
    {
        slots_.acquire();
        const std::string command_line = command_ + " " + shell_quote(run_folder.string()) + " 2>&1";
        FILE* pipe = ::popen(command_line.c_str(), "r");
        if (pipe == nullptr) {
            slots_.release();
            throw ExternalToolFailure("cannot launch external evaluator", command_line);
        }
        char buffer[4096];
        std::size_t n = 0;
        while ((n = std::fread(buffer, 1, sizeof(buffer), pipe)) > 0) diagnostics.append(buffer, n);
        status = ::pclose(pipe);
        slots_.release();
    }

    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        const int code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
        throw ExternalToolFailure("external evaluator exited with status " + std::to_string(code), diagnostics);
    }

    const auto report_path = run_folder / "report.json";
    if (!std::filesystem::exists(report_path)) {
        throw ExternalToolFailure("external evaluator did not write report.json", diagnostics);
    }
    try {
        return load_report(read_json_file(report_path));
    } catch (const Error& e) {
        throw ExternalToolFailure("unparseable report.json", diagnostics + e.what());
    }
}

EvaluationReport run_external_evaluator(const std::string& command, const AcceleratorDesign& design,
                                        const std::filesystem::path& run_folder) {
    ExternalEvaluator evaluator(command);
    return evaluator.run(design, run_folder);
}

}  // namespace secda_dse
