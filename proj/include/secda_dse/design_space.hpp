#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "secda_dse/json_util.hpp"

namespace secda_dse {

enum class KernelKind { vecmul };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& text);

struct WorkloadSpec {
    KernelKind kernel_kind = KernelKind::vecmul;
    std::int64_t length_l = 1;  // elements
    int data_width = 32;        // bits
    std::string name;

    bool operator==(const WorkloadSpec&) const = default;
};

struct DeviceProfile {
    std::string name;
    std::int64_t bram_18k = 0;
    std::int64_t dsp = 0;
    std::int64_t ff = 0;
    std::int64_t lut = 0;
    double clock_target_ns = 5.0;

    bool operator==(const DeviceProfile&) const = default;
};

// Ordering is lexicographic: buffer_depth, then parallelism_p, then data_width.
struct ParameterPoint {
    std::int64_t buffer_depth = 0;
    std::int64_t parallelism_p = 0;
    int data_width = 0;

    auto operator<=>(const ParameterPoint&) const = default;
};

std::string to_string(const ParameterPoint& point);

// Bounded per-parameter value sets. Construction sorts each set and rejects
// empty sets, duplicates and non-positive values.
class Directives {
public:
    Directives(std::vector<std::int64_t> buffer_depth,
               std::vector<std::int64_t> parallelism_p,
               std::vector<int> data_width);

    const std::vector<std::int64_t>& buffer_depth() const { return buffer_depth_; }
    const std::vector<std::int64_t>& parallelism_p() const { return parallelism_p_; }
    const std::vector<int>& data_width() const { return data_width_; }

    std::size_t size() const { return buffer_depth_.size() * parallelism_p_.size() * data_width_.size(); }

    bool contains(const ParameterPoint& point) const;

    bool operator==(const Directives&) const = default;

private:
    std::vector<std::int64_t> buffer_depth_;
    std::vector<std::int64_t> parallelism_p_;
    std::vector<int> data_width_;
};

struct Validity {
    bool valid = true;
    std::vector<std::string> reasons;  // sorted, one per violated rule
};

WorkloadSpec load_workload(const Json& document);
WorkloadSpec load_workload_file(const std::filesystem::path& path);
DeviceProfile load_device(const Json& document);
Directives load_directives(const Json& document);

Json to_json(const WorkloadSpec& workload);
Json to_json(const DeviceProfile& device);
Json to_json(const Directives& directives);
Json to_json(const ParameterPoint& point);
ParameterPoint load_point(const Json& document);

std::vector<ParameterPoint> enumerate_points(const Directives& directives);

// Rules: every field is in its directive set, buffer_depth >= length_l,
// parallelism_p <= length_l.
Validity validate_point(const ParameterPoint& point, const WorkloadSpec& workload, const Directives& directives);

// Only the workload-coupled rules; used where no directive set is at hand.
Validity validate_against_workload(const ParameterPoint& point, const WorkloadSpec& workload);

// Points one directive step away in exactly one field, sorted ascending.
std::vector<ParameterPoint> neighbor_points(const ParameterPoint& point, const Directives& directives);

// Index of each field within its directive set; the point must be a member.
struct PointIndex {
    std::size_t buffer_depth;
    std::size_t parallelism_p;
    std::size_t data_width;
};
PointIndex index_of(const ParameterPoint& point, const Directives& directives);

}  // namespace secda_dse
