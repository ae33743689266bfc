#include "secda_dse/cost_db.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iostream>

namespace secda_dse {

namespace {

std::string format_utc(std::time_t seconds) {
    std::tm parts{};
    ::gmtime_r(&seconds, &parts);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &parts);
    return buffer;
}

Json metrics_json(const MetricsSummary& m) {
    return Json{{"total_cycles", m.total_cycles},
                {"wall_time_ns", m.wall_time_ns},
                {"resources", to_json(m.resources)},
                {"utilization_pct", to_json(m.utilization_pct)},
                {"timing_pass", m.timing_pass},
                {"feasible", m.feasible}};
}

MetricsSummary load_metrics(const Json& document) {
    FieldReader reader(document, "metrics");
    MetricsSummary m;
    m.total_cycles = reader.required<std::int64_t>("total_cycles");
    m.wall_time_ns = reader.required<double>("wall_time_ns");
    m.resources = load_resource_usage(reader.raw("resources"));
    m.utilization_pct = load_resource_usage(reader.raw("utilization_pct"));
    m.timing_pass = reader.required<bool>("timing_pass");
    m.feasible = reader.required<bool>("feasible");
    reader.finish();
    return m;
}

double cost_key(const HardwareDataPoint& p, double value) {
    return p.metrics.feasible ? value : std::numeric_limits<double>::infinity();
}

// Returns nullopt for unknown metrics; "sequence" and "point_id" are handled by the caller.
std::optional<double> metric_value(const HardwareDataPoint& p, const std::string& metric) {
    if (metric == "total_cycles" || metric == "objective") {
        return cost_key(p, static_cast<double>(p.metrics.total_cycles));
    }
    if (metric == "wall_time_ns") return cost_key(p, p.metrics.wall_time_ns);
    if (metric == "bram_18k") return static_cast<double>(p.metrics.resources.bram_18k);
    if (metric == "dsp") return static_cast<double>(p.metrics.resources.dsp);
    if (metric == "ff") return static_cast<double>(p.metrics.resources.ff);
    if (metric == "lut") return static_cast<double>(p.metrics.resources.lut);
    return std::nullopt;
}

bool known_metric(const std::string& metric) {
    static const HardwareDataPoint probe;
    return metric == "sequence" || metric == "point_id" || metric_value(probe, metric).has_value();
}

void write_all(int fd, const std::string& data, const std::filesystem::path& file) {
    const char* cursor = data.data();
    std::size_t remaining = data.size();
    while (remaining > 0) {
        const auto written = ::write(fd, cursor, remaining);
        if (written < 0) {
            if (errno == EINTR) continue;
            throw StorageError("write failed for " + file.string());
        }
        cursor += written;
        remaining -= static_cast<std::size_t>(written);
    }
}

}  // namespace

std::string to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::accepted: return "accepted";
        case Verdict::rejected: return "rejected";
        case Verdict::failed: return "failed";
        case Verdict::pending: return "pending";
    }
    return "unknown";
}

std::string to_string(DataSource source) {
    switch (source) {
        case DataSource::analytical: return "analytical";
        case DataSource::external: return "external";
        case DataSource::human: return "human";
    }
    return "unknown";
}

Verdict verdict_from_string(const std::string& text) {
    if (text == "accepted") return Verdict::accepted;
    if (text == "rejected") return Verdict::rejected;
    if (text == "failed") return Verdict::failed;
    if (text == "pending") return Verdict::pending;
    throw ValidationError("verdict", "unknown verdict '" + text + "'");
}

DataSource source_from_string(const std::string& text) {
    if (text == "analytical") return DataSource::analytical;
    if (text == "external") return DataSource::external;
    if (text == "human") return DataSource::human;
    throw ValidationError("source", "unknown source '" + text + "'");
}

MetricsSummary summarize_metrics(const EvaluationReport& report) {
    return {report.total_cycles,    report.wall_time_ns, report.resources, report.utilization_pct,
            report.timing_pass,     report.feasible};
}

Json to_json(const HardwareDataPoint& point) {
    return Json{{"point_id", point.point_id},
                {"design_id", point.design_id},
                {"configuration", to_json(point.configuration)},
                {"workload", to_json(point.workload)},
                {"device", point.device},
                {"metrics", metrics_json(point.metrics)},
                {"verdict", to_string(point.verdict)},
                {"source", to_string(point.source)},
                {"rationale", point.rationale ? Json(*point.rationale) : Json(nullptr)},
                {"created_at", point.created_at}};
}

HardwareDataPoint load_data_point(const Json& document) {
    FieldReader reader(document, "datapoint");
    HardwareDataPoint point;
    point.point_id = reader.required<std::string>("point_id");
    point.design_id = reader.required<std::string>("design_id");
    point.configuration = load_point(reader.raw("configuration"));
    point.workload = load_workload(reader.raw("workload"));
    point.device = reader.required<std::string>("device");
    point.metrics = load_metrics(reader.raw("metrics"));
    point.verdict = verdict_from_string(reader.required<std::string>("verdict"));
    point.source = source_from_string(reader.required<std::string>("source"));
    point.rationale = reader.optional<std::string>("rationale");
    point.created_at = reader.required<std::string>("created_at");
    reader.finish();
    return point;
}

std::string make_point_id(const std::string& design_id, DataSource source, std::size_t sequence) {
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "%06zu", sequence);
    return design_id + "-" + to_string(source) + "-" + suffix;
}

std::string logical_timestamp(std::size_t sequence) {
    return format_utc(static_cast<std::time_t>(sequence));
}

std::string wall_timestamp() {
    return format_utc(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now()));
}

bool matches(const HardwareDataPoint& point, const PointFilter& filter) {
    if (filter.workload && !(point.workload == *filter.workload)) return false;
    if (filter.device && point.device != *filter.device) return false;
    if (filter.verdict && point.verdict != *filter.verdict) return false;
    if (filter.feasible && point.metrics.feasible != *filter.feasible) return false;
    if (filter.source && point.source != *filter.source) return false;
    if (filter.design_id && point.design_id != *filter.design_id) return false;
    return true;
}

CostDb::CostDb(std::filesystem::path file, Mode mode) : file_(std::move(file)), mode_(mode) {
    std::error_code ec;
    if (mode_ == Mode::writer) {
        if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path(), ec);
        if (!std::filesystem::exists(file_)) {
            write_text_file(file_, "");
        }
    }
    load();
}

void CostDb::load() {
    if (!std::filesystem::exists(file_)) return;  // read-only view of a database not yet created
    const std::string content = read_text_file(file_);

    std::size_t valid_bytes = 0;
    std::size_t start = 0;
    std::size_t line_number = 0;
    while (start < content.size()) {
        const auto end = content.find('\n', start);
        ++line_number;
        if (end == std::string::npos) {
            warnings_.push_back(file_.string() + ": ignoring torn final line " + std::to_string(line_number));
            std::cerr << "warning: " << warnings_.back() << "\n";
            break;
        }
        const std::string line = content.substr(start, end - start);
        if (!line.empty()) {
            try {
                auto point = load_data_point(parse_json_text(line, "datapoint"));
                if (by_id_.count(point.point_id)) {
                    throw StorageError("duplicate point_id " + point.point_id);
                }
                by_id_[point.point_id] = records_.size();
                records_.push_back(std::move(point));
            } catch (const StorageError&) {
                throw;
            } catch (const Error& e) {
                throw StorageError(file_.string() + ": corrupt record on line " + std::to_string(line_number) +
                                   ": " + e.what());
            }
        }
        start = end + 1;
        valid_bytes = start;
    }

    // Drop the torn tail so the next append starts on a line boundary.
    if (mode_ == Mode::writer && valid_bytes < content.size()) {
        std::error_code ec;
        std::filesystem::resize_file(file_, valid_bytes, ec);
        if (ec) throw StorageError("cannot truncate torn tail of " + file_.string() + ": " + ec.message());
    }
}

std::string CostDb::append(const HardwareDataPoint& point) {
    if (mode_ != Mode::writer) throw StorageError("database opened read-only");
    if (point.point_id.empty()) throw ValidationError("point_id", "point_id must not be empty");
    if (point.verdict == Verdict::failed && point.metrics.feasible) {
        throw ValidationError("verdict", "a failed data point cannot be feasible");
    }

    std::lock_guard lock(mutex_);
    if (by_id_.count(point.point_id)) throw DuplicatePoint("duplicate point_id " + point.point_id);

    const std::string line = to_json(point).dump() + "\n";
    const int fd = ::open(file_.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
    if (fd < 0) throw StorageError("cannot open " + file_.string() + " for append");
    try {
        write_all(fd, line, file_);
    } catch (...) {
        ::close(fd);
        throw;
    }
    const bool synced = ::fsync(fd) == 0;
    ::close(fd);
    if (!synced) throw StorageError("fsync failed for " + file_.string());

    by_id_[point.point_id] = records_.size();
    records_.push_back(point);
    return point.point_id;
}

std::vector<HardwareDataPoint> CostDb::query(const PointFilter& filter, const std::string& order,
                                             std::optional<std::size_t> limit) const {
    if (!known_metric(order)) throw UnknownMetric("unknown order metric '" + order + "'");

    std::lock_guard lock(mutex_);
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (matches(records_[i], filter)) hits.push_back(i);
    }

    if (order != "sequence") {
        std::stable_sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) {
            const auto& pa = records_[a];
            const auto& pb = records_[b];
            if (order != "point_id") {
                const double va = *metric_value(pa, order);
                const double vb = *metric_value(pb, order);
                if (va != vb) return va < vb;
            }
            return pa.point_id < pb.point_id;
        });
    }
    if (limit && hits.size() > *limit) hits.resize(*limit);

    std::vector<HardwareDataPoint> result;
    result.reserve(hits.size());
    for (auto i : hits) result.push_back(records_[i]);
    return result;
}

std::optional<HardwareDataPoint> CostDb::find(const std::string& point_id) const {
    std::lock_guard lock(mutex_);
    auto it = by_id_.find(point_id);
    if (it == by_id_.end()) return std::nullopt;
    return records_[it->second];
}

std::size_t CostDb::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::size_t CostDb::next_sequence() const {
    return size() + 1;
}

Json to_json(const RunSummary& summary) {
    return Json{{"run_id", summary.run_id},
                {"design_id", summary.design_id},
                {"total_cycles", summary.total_cycles},
                {"utilization_pct", to_json(summary.utilization_pct)},
                {"feasible", summary.feasible},
                {"source_files", summary.source_files}};
}

RunSummary load_run_summary(const Json& document) {
    FieldReader reader(document, "summary");
    RunSummary summary;
    summary.run_id = reader.required<std::string>("run_id");
    summary.design_id = reader.required<std::string>("design_id");
    summary.total_cycles = reader.required<std::int64_t>("total_cycles");
    summary.utilization_pct = load_resource_usage(reader.raw("utilization_pct"));
    summary.feasible = reader.required<bool>("feasible");
    summary.source_files = reader.required<std::vector<std::string>>("source_files");
    reader.finish();
    return summary;
}

RunSummary summarize_run(const std::filesystem::path& run_folder) {
    for (const char* artifact : {"design.json", "report.json"}) {
        if (!std::filesystem::exists(run_folder / artifact)) throw MissingArtifact(artifact);
    }
    const auto design = load_design(read_json_file(run_folder / "design.json"));
    const auto report = load_report(read_json_file(run_folder / "report.json"));

    RunSummary summary;
    summary.run_id = run_folder.filename().string();
    if (summary.run_id.empty()) summary.run_id = run_folder.parent_path().filename().string();
    summary.design_id = design.design_id;
    summary.total_cycles = report.total_cycles;
    summary.utilization_pct = report.utilization_pct;
    summary.feasible = report.feasible;

    const auto src = run_folder / "src";
    if (std::filesystem::is_directory(src)) {
        for (const auto& entry : std::filesystem::recursive_directory_iterator(src)) {
            if (entry.is_regular_file()) {
                summary.source_files.push_back(entry.path().lexically_relative(src).generic_string());
            }
        }
        std::sort(summary.source_files.begin(), summary.source_files.end());
    }
    return summary;
}

Json finetune_record(const HardwareDataPoint& point) {
    const bool simulation_success = point.verdict != Verdict::failed && point.metrics.feasible;
    return Json{{"configuration", to_json(point.configuration)},
                {"workload", to_json(point.workload)},
                {"device", point.device},
                {"feedback",
                 {{"simulation_success", simulation_success},
                  {"latency_cycles", point.metrics.total_cycles},
                  {"resource_utilization", to_json(point.metrics.utilization_pct)}}},
                {"verdict", to_string(point.verdict)},
                {"rationale", point.rationale ? Json(*point.rationale) : Json(nullptr)}};
}

std::size_t export_finetune_dataset(const CostDb& db, const PointFilter& filter, const std::filesystem::path& out) {
    std::string content;
    const auto points = db.query(filter);
    for (const auto& point : points) content += finetune_record(point).dump() + "\n";
    write_text_file(out, content);
    return points.size();
}

}  // namespace secda_dse
