#include "secda_dse/design_space.hpp"

#include <algorithm>

namespace secda_dse {

namespace {

template <typename T>
std::vector<T> normalized_set(std::vector<T> values, const char* field) {
    if (values.empty()) throw ValidationError(field, std::string("directive set '") + field + "' is empty");
    std::sort(values.begin(), values.end());
    if (std::adjacent_find(values.begin(), values.end()) != values.end()) {
        throw ValidationError(field, std::string("directive set '") + field + "' has duplicate values");
    }
    if (values.front() <= 0) {
        throw ValidationError(field, std::string("directive set '") + field + "' has non-positive values");
    }
    return values;
}

template <typename T, typename V>
bool member(const std::vector<T>& set, V value) {
    return std::binary_search(set.begin(), set.end(), static_cast<T>(value));
}

template <typename T, typename V>
std::size_t position(const std::vector<T>& set, V value, const char* field) {
    auto it = std::lower_bound(set.begin(), set.end(), static_cast<T>(value));
    if (it == set.end() || *it != static_cast<T>(value)) {
        throw ValidationError(field, std::string(field) + " not in directive set");
    }
    return static_cast<std::size_t>(it - set.begin());
}

void check_width(int width, const char* field) {
    if (width != 8 && width != 16 && width != 32) {
        throw ValidationError(field, std::string(field) + " must be one of 8, 16, 32");
    }
}

}  // namespace

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::vecmul: return "vecmul";
    }
    return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& text) {
    if (text == "vecmul") return KernelKind::vecmul;
    throw ValidationError("kernel_kind", "unknown kernel_kind '" + text + "'");
}

std::string to_string(const ParameterPoint& point) {
    return "depth=" + std::to_string(point.buffer_depth) + " P=" + std::to_string(point.parallelism_p) +
           " width=" + std::to_string(point.data_width);
}

Directives::Directives(std::vector<std::int64_t> buffer_depth, std::vector<std::int64_t> parallelism_p,
                       std::vector<int> data_width)
    : buffer_depth_(normalized_set(std::move(buffer_depth), "buffer_depth")),
      parallelism_p_(normalized_set(std::move(parallelism_p), "parallelism_p")),
      data_width_(normalized_set(std::move(data_width), "data_width")) {}

bool Directives::contains(const ParameterPoint& point) const {
    return member(buffer_depth_, point.buffer_depth) && member(parallelism_p_, point.parallelism_p) &&
           member(data_width_, point.data_width);
}

WorkloadSpec load_workload(const Json& document) {
    FieldReader reader(document, "workload");
    WorkloadSpec workload;
    workload.kernel_kind = kernel_kind_from_string(reader.required<std::string>("kernel_kind"));
    workload.length_l = reader.required<std::int64_t>("length_l");
    workload.data_width = reader.optional_or<int>("data_width", 32);
    workload.name = reader.optional_or<std::string>("name", to_string(workload.kernel_kind));
    reader.finish();

    if (workload.length_l < 1) throw ValidationError("length_l", "length_l must be >= 1");
    check_width(workload.data_width, "data_width");
    return workload;
}

WorkloadSpec load_workload_file(const std::filesystem::path& path) {
    return load_workload(read_json_file(path));
}

DeviceProfile load_device(const Json& document) {
    FieldReader reader(document, "device");
    DeviceProfile device;
    device.name = reader.required<std::string>("name");
    device.bram_18k = reader.required<std::int64_t>("bram_18k");
    device.dsp = reader.required<std::int64_t>("dsp");
    device.ff = reader.required<std::int64_t>("ff");
    device.lut = reader.required<std::int64_t>("lut");
    device.clock_target_ns = reader.required<double>("clock_target_ns");
    reader.finish();

    for (auto [field, value] : {std::pair{"bram_18k", device.bram_18k}, std::pair{"dsp", device.dsp},
                                std::pair{"ff", device.ff}, std::pair{"lut", device.lut}}) {
        if (value < 0) throw ValidationError(field, std::string(field) + " must be >= 0");
    }
    if (!(device.clock_target_ns > 0)) throw ValidationError("clock_target_ns", "clock_target_ns must be > 0");
    return device;
}

Directives load_directives(const Json& document) {
    FieldReader reader(document, "directives");
    auto depths = reader.required<std::vector<std::int64_t>>("buffer_depth");
    auto lanes = reader.required<std::vector<std::int64_t>>("parallelism_p");
    auto widths = reader.required<std::vector<int>>("data_width");
    reader.finish();
    return Directives(std::move(depths), std::move(lanes), std::move(widths));
}

Json to_json(const WorkloadSpec& workload) {
    return Json{{"kernel_kind", to_string(workload.kernel_kind)},
                {"length_l", workload.length_l},
                {"data_width", workload.data_width},
                {"name", workload.name}};
}

Json to_json(const DeviceProfile& device) {
    return Json{{"name", device.name}, {"bram_18k", device.bram_18k}, {"dsp", device.dsp},
                {"ff", device.ff},     {"lut", device.lut},           {"clock_target_ns", device.clock_target_ns}};
}

Json to_json(const Directives& directives) {
    return Json{{"buffer_depth", directives.buffer_depth()},
                {"parallelism_p", directives.parallelism_p()},
                {"data_width", directives.data_width()}};
}

Json to_json(const ParameterPoint& point) {
    return Json{{"buffer_depth", point.buffer_depth},
                {"parallelism_p", point.parallelism_p},
                {"data_width", point.data_width}};
}

ParameterPoint load_point(const Json& document) {
    FieldReader reader(document, "point");
    ParameterPoint point;
    point.buffer_depth = reader.required<std::int64_t>("buffer_depth");
    point.parallelism_p = reader.required<std::int64_t>("parallelism_p");
    point.data_width = reader.required<int>("data_width");
    reader.finish();
    return point;
}

std::vector<ParameterPoint> enumerate_points(const Directives& directives) {
    std::vector<ParameterPoint> points;
    points.reserve(directives.size());
    for (auto depth : directives.buffer_depth()) {
        for (auto lanes : directives.parallelism_p()) {
            for (auto width : directives.data_width()) points.push_back({depth, lanes, width});
        }
    }
    return points;
}

Validity validate_against_workload(const ParameterPoint& point, const WorkloadSpec& workload) {
    Validity verdict;
    if (point.buffer_depth < workload.length_l) verdict.reasons.emplace_back("buffer_depth < length_L");
    if (point.parallelism_p > workload.length_l) verdict.reasons.emplace_back("parallelism_P > length_L");
    if (point.parallelism_p < 1) verdict.reasons.emplace_back("parallelism_P < 1");
    std::sort(verdict.reasons.begin(), verdict.reasons.end());
    verdict.valid = verdict.reasons.empty();
    return verdict;
}

Validity validate_point(const ParameterPoint& point, const WorkloadSpec& workload, const Directives& directives) {
    Validity verdict = validate_against_workload(point, workload);
    if (!member(directives.buffer_depth(), point.buffer_depth)) {
        verdict.reasons.emplace_back("buffer_depth not in directive set");
    }
    if (!member(directives.parallelism_p(), point.parallelism_p)) {
        verdict.reasons.emplace_back("parallelism_P not in directive set");
    }
    if (!member(directives.data_width(), point.data_width)) {
        verdict.reasons.emplace_back("data_width not in directive set");
    }
    std::sort(verdict.reasons.begin(), verdict.reasons.end());
    verdict.valid = verdict.reasons.empty();
    return verdict;
}

PointIndex index_of(const ParameterPoint& point, const Directives& directives) {
    return {position(directives.buffer_depth(), point.buffer_depth, "buffer_depth"),
            position(directives.parallelism_p(), point.parallelism_p, "parallelism_p"),
            position(directives.data_width(), point.data_width, "data_width")};
}

std::vector<ParameterPoint> neighbor_points(const ParameterPoint& point, const Directives& directives) {
    const auto at = index_of(point, directives);
    std::vector<ParameterPoint> result;

    auto step = [&](const auto& set, std::size_t index, auto assign) {
        if (index > 0) {
            auto moved = point;
            assign(moved, set[index - 1]);
            result.push_back(moved);
        }
        if (index + 1 < set.size()) {
            auto moved = point;
            assign(moved, set[index + 1]);
            result.push_back(moved);
        }
    };
    step(directives.buffer_depth(), at.buffer_depth, [](ParameterPoint& p, auto v) { p.buffer_depth = v; });
    step(directives.parallelism_p(), at.parallelism_p, [](ParameterPoint& p, auto v) { p.parallelism_p = v; });
    step(directives.data_width(), at.data_width, [](ParameterPoint& p, auto v) { p.data_width = v; });

    std::sort(result.begin(), result.end());
    return result;
}

}  // namespace secda_dse
