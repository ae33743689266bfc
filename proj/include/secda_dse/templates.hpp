#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "secda_dse/design_space.hpp"

namespace secda_dse {

enum class ModuleKind { main, load, compute, store };
enum class BufferRole { input, output };

std::string to_string(ModuleKind kind);
std::string to_string(BufferRole role);

struct HwModule {
    std::string name;
    ModuleKind kind;
};

struct BufferSpec {
    std::string name;
    BufferRole role;
};

// Directed edge between modules, buffers, or the external memory boundary.
struct StreamSpec {
    std::string name;
    std::string producer;
    std::string consumer;
};

inline constexpr const char* kExternalEndpoint = "external";

struct AcceleratorTemplate {
    std::string template_id;
    std::vector<HwModule> hw_modules;
    std::vector<BufferSpec> buffers;
    std::vector<StreamSpec> streams;
};

struct ComplianceVerdict {
    bool pass = true;
    std::vector<std::string> violations;
};

struct AcceleratorDesign {
    std::string template_id;
    ParameterPoint point;
    WorkloadSpec workload;
    std::string design_id;
};

struct SourceSet {
    std::map<std::string, std::string> files;  // relative path -> content
};

AcceleratorTemplate builtin_vecmul_template();

// Looks up a built-in template; empty when the id is unknown.
std::optional<AcceleratorTemplate> find_template(const std::string& template_id);

ComplianceVerdict check_compliance(const AcceleratorTemplate& tmpl);

// Lowercase hex SHA-256 over the canonical JSON of template id, point and workload.
std::string compute_design_id(const std::string& template_id, const ParameterPoint& point,
                              const WorkloadSpec& workload);

AcceleratorDesign instantiate(const AcceleratorTemplate& tmpl, const ParameterPoint& point,
                              const WorkloadSpec& workload);
AcceleratorDesign instantiate(const AcceleratorTemplate& tmpl, const ParameterPoint& point,
                              const WorkloadSpec& workload, const Directives& directives);

SourceSet emit_source(const AcceleratorDesign& design);

// Writes every file under `root`; refuses absolute or escaping paths.
void write_source_set(const SourceSet& sources, const std::filesystem::path& root);

bool is_safe_relative_path(const std::string& path);

Json to_json(const AcceleratorDesign& design);
AcceleratorDesign load_design(const Json& document);

}  // namespace secda_dse
