#include "secda_dse/templates.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace secda_dse {

namespace {

std::string sha256_hex(const std::string& data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw StorageError("sha256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0f]);
    }
    return out;
}

std::string vecmul_accelerator(const AcceleratorDesign& design) {
    const auto& p = design.point;
    std::ostringstream out;
    out << "// vecmul accelerator: Z[i] = X[i] * Y[i]\n"
        << "// design " << design.design_id << "\n"
        << "#pragma once\n\n"
        << "#include <systemc.h>\n"
        << "#include \"secda_tools/axi_support/axi_api_v2.h\"\n\n"
        << "static constexpr int L = " << design.workload.length_l << ";\n"
        << "static constexpr int DEPTH = " << p.buffer_depth << ";\n"
        << "static constexpr int P = " << p.parallelism_p << ";\n"
        << "static constexpr int WIDTH = " << p.data_width << ";\n\n"
        << "typedef sc_int<WIDTH> elem_t;\n\n"
        << "SC_MODULE(ACCNAME) {\n"
        << "  sc_in<bool> clock;\n"
        << "  sc_in<bool> reset;\n"
        << "  sc_fifo_in<DATA> din1;\n"
        << "  sc_fifo_in<DATA> din2;\n"
        << "  sc_fifo_out<DATA> dout1;\n\n"
        << "  elem_t X[DEPTH];\n"
        << "  elem_t Y[DEPTH];\n"
        << "  elem_t Z[DEPTH];\n\n"
        << "  sc_signal<int> length;\n"
        << "  sc_signal<bool> send_done, compute_done, recv_done;\n\n"
        << "  void HW_MAIN();\n"
        << "  void Send();\n"
        << "  void Compute();\n"
        << "  void Recv();\n\n"
        << "  SC_HAS_PROCESS(ACCNAME);\n"
        << "  ACCNAME(sc_module_name name_) : sc_module(name_) {\n"
        << "    SC_CTHREAD(HW_MAIN, clock.pos());\n"
        << "    reset_signal_is(reset, true);\n"
        << "    SC_CTHREAD(Send, clock.pos());\n"
        << "    reset_signal_is(reset, true);\n"
        << "    SC_CTHREAD(Compute, clock.pos());\n"
        << "    reset_signal_is(reset, true);\n"
        << "    SC_CTHREAD(Recv, clock.pos());\n"
        << "    reset_signal_is(reset, true);\n"
        << "  }\n"
        << "};\n\n"
        << "void ACCNAME::HW_MAIN() {\n"
        << "  wait();\n"
        << "  while (1) {\n"
        << "    length.write(din1.read().data);\n"
        << "    wait();\n"
        << "  }\n"
        << "}\n\n"
        << "void ACCNAME::Send() {\n"
        << "  wait();\n"
        << "  while (1) {\n"
        << "    for (int i = 0; i < length.read(); i++) {\n"
        << "      X[i] = din1.read().data;\n"
        << "      Y[i] = din2.read().data;\n"
        << "      wait();\n"
        << "    }\n"
        << "    send_done.write(true);\n"
        << "    wait();\n"
        << "  }\n"
        << "}\n\n"
        << "void ACCNAME::Compute() {\n"
        << "  wait();\n"
        << "  while (1) {\n"
        << "    while (!send_done.read()) wait();\n"
        << "    for (int i = 0; i < length.read(); i += P) {\n"
        << "      for (int lane = 0; lane < P; lane++) {\n"
        << "#pragma HLS unroll\n"
        << "        if (i + lane < length.read()) Z[i + lane] = X[i + lane] * Y[i + lane];\n"
        << "      }\n"
        << "      wait();\n"
        << "    }\n"
        << "    compute_done.write(true);\n"
        << "    wait();\n"
        << "  }\n"
        << "}\n\n"
        << "void ACCNAME::Recv() {\n"
        << "  wait();\n"
        << "  while (1) {\n"
        << "    while (!compute_done.read()) wait();\n"
        << "    for (int i = 0; i < length.read(); i++) {\n"
        << "      DATA d;\n"
        << "      d.data = Z[i];\n"
        << "      d.tlast = (i == length.read() - 1);\n"
        << "      dout1.write(d);\n"
        << "      wait();\n"
        << "    }\n"
        << "    recv_done.write(true);\n"
        << "    wait();\n"
        << "  }\n"
        << "}\n";
    return out.str();
}

std::string vecmul_driver(const AcceleratorDesign& design) {
    std::ostringstream out;
    out << "// vecmul driver: streams X and Y to the accelerator, reads Z back\n"
        << "#include <cstdint>\n"
        << "#include <vector>\n\n"
        << "#include \"acc_container.h\"\n\n"
        << "namespace vecmul_driver {\n\n"
        << "static constexpr int L = " << design.workload.length_l << ";\n"
        << "static constexpr int WIDTH = " << design.point.data_width << ";\n\n"
        << "void run(acc_container& acc, const int32_t* x, const int32_t* y, int32_t* z) {\n"
        << "  acc.stream_in(0, &L, 1);\n"
        << "  acc.stream_in(0, x, L);\n"
        << "  acc.stream_in(1, y, L);\n"
        << "  acc.stream_out(0, z, L);\n"
        << "}\n\n"
        << "}  // namespace vecmul_driver\n";
    return out.str();
}

std::string vecmul_manifest(const AcceleratorDesign& design) {
    std::ostringstream out;
    out << "# build manifest for design " << design.design_id << "\n"
        << "ACCNAME := VECMUL_" << design.design_id.substr(0, 8) << "\n"
        << "TOP := hw/vecmul_acc.sc.h\n"
        << "DRIVER := sw/vecmul_driver.cc\n"
        << "PART := xc7z020-clg400-1\n"
        << "CLOCK_PERIOD_NS := 5.00\n"
        << "DEFINES := -DDEPTH=" << design.point.buffer_depth << " -DP=" << design.point.parallelism_p
        << " -DWIDTH=" << design.point.data_width << " -DL=" << design.workload.length_l << "\n\n"
        << "sim:\n\t$(CXX) -std=c++14 -I$(SYSTEMC_HOME)/include $(DEFINES) sim/main.cc -lsystemc -o sim.out\n\n"
        << "hls:\n\tvivado_hls -f hls/run_hls.tcl\n";
    return out.str();
}

}  // namespace

std::string to_string(ModuleKind kind) {
    switch (kind) {
        case ModuleKind::main: return "main";
        case ModuleKind::load: return "load";
        case ModuleKind::compute: return "compute";
        case ModuleKind::store: return "store";
    }
    return "unknown";
}

std::string to_string(BufferRole role) {
    return role == BufferRole::input ? "input" : "output";
}

AcceleratorTemplate builtin_vecmul_template() {
    AcceleratorTemplate t;
    t.template_id = "vecmul";
    t.hw_modules = {{"HW_MAIN", ModuleKind::main},
                    {"Send", ModuleKind::load},
                    {"Compute", ModuleKind::compute},
                    {"Recv", ModuleKind::store}};
    t.buffers = {{"X", BufferRole::input}, {"Y", BufferRole::input}, {"Z", BufferRole::output}};
    t.streams = {{"din1", kExternalEndpoint, "Send"},  {"din2", kExternalEndpoint, "Send"},
                 {"load_x", "Send", "X"},              {"load_y", "Send", "Y"},
                 {"read_x", "X", "Compute"},           {"read_y", "Y", "Compute"},
                 {"write_z", "Compute", "Z"},          {"read_z", "Z", "Recv"},
                 {"dout1", "Recv", kExternalEndpoint}};
    return t;
}

std::optional<AcceleratorTemplate> find_template(const std::string& template_id) {
    if (template_id == "vecmul") return builtin_vecmul_template();
    return std::nullopt;
}

ComplianceVerdict check_compliance(const AcceleratorTemplate& tmpl) {
    ComplianceVerdict verdict;
    auto fail = [&](std::string message) { verdict.violations.push_back(std::move(message)); };

    std::set<std::string> modules;
    std::size_t mains = 0;
    for (const auto& m : tmpl.hw_modules) {
        if (!modules.insert(m.name).second) fail("duplicate module " + m.name);
        if (m.kind == ModuleKind::main) ++mains;
    }
    if (mains == 0) fail("no main module");
    if (mains > 1) fail("multiple main modules");

    std::set<std::string> buffers;
    for (const auto& b : tmpl.buffers) {
        if (!buffers.insert(b.name).second) fail("duplicate buffer " + b.name);
        if (modules.count(b.name)) fail("buffer " + b.name + " shadows a module name");
    }

    auto known = [&](const std::string& endpoint) {
        return endpoint == kExternalEndpoint || modules.count(endpoint) || buffers.count(endpoint);
    };
    for (const auto& s : tmpl.streams) {
        if (!known(s.producer)) fail("stream " + s.name + " has unknown producer " + s.producer);
        if (!known(s.consumer)) fail("stream " + s.name + " has unknown consumer " + s.consumer);
        if (buffers.count(s.producer) && buffers.count(s.consumer)) {
            fail("stream " + s.name + " connects two buffers");
        }
    }

    for (const auto& b : tmpl.buffers) {
        std::size_t writers = 0;
        std::size_t readers = 0;
        for (const auto& s : tmpl.streams) {
            if (s.consumer == b.name && modules.count(s.producer)) ++writers;
            if (s.producer == b.name && modules.count(s.consumer)) ++readers;
        }
        if (writers == 0) fail("buffer " + b.name + " has no writer");
        if (writers > 1) fail("buffer " + b.name + " has multiple writers");
        if (readers == 0) fail("buffer " + b.name + " has no reader");
        if (readers > 1) fail("buffer " + b.name + " has multiple readers");
    }

    verdict.pass = verdict.violations.empty();
    return verdict;
}

std::string compute_design_id(const std::string& template_id, const ParameterPoint& point,
                              const WorkloadSpec& workload) {
    const Json canonical{{"template_id", template_id}, {"point", to_json(point)}, {"workload", to_json(workload)}};
    return sha256_hex(canonical.dump());
}

AcceleratorDesign instantiate(const AcceleratorTemplate& tmpl, const ParameterPoint& point,
                              const WorkloadSpec& workload) {
    auto compliance = check_compliance(tmpl);
    if (!compliance.pass) {
        throw ValidationError("template", "template " + tmpl.template_id + " is not compliant: " +
                                              compliance.violations.front());
    }
    auto validity = validate_against_workload(point, workload);
    if (!validity.valid) throw ValidationError("point", to_string(point) + ": " + validity.reasons.front());
    return {tmpl.template_id, point, workload, compute_design_id(tmpl.template_id, point, workload)};
}

AcceleratorDesign instantiate(const AcceleratorTemplate& tmpl, const ParameterPoint& point,
                              const WorkloadSpec& workload, const Directives& directives) {
    auto validity = validate_point(point, workload, directives);
    if (!validity.valid) throw ValidationError("point", to_string(point) + ": " + validity.reasons.front());
    return instantiate(tmpl, point, workload);
}

SourceSet emit_source(const AcceleratorDesign& design) {
    if (design.template_id != "vecmul") throw UnsupportedTemplate("unknown template_id '" + design.template_id + "'");
    SourceSet sources;
    sources.files["hw/vecmul_acc.sc.h"] = vecmul_accelerator(design);
    sources.files["sw/vecmul_driver.cc"] = vecmul_driver(design);
    sources.files["build.mk"] = vecmul_manifest(design);
    return sources;
}

bool is_safe_relative_path(const std::string& path) {
    if (path.empty()) return false;
    std::filesystem::path p(path);
    if (p.is_absolute() || p.has_root_name() || p.has_root_directory()) return false;
    for (const auto& part : p) {
        if (part == "..") return false;
    }
    return true;
}

void write_source_set(const SourceSet& sources, const std::filesystem::path& root) {
    for (const auto& [relative, content] : sources.files) {
        if (!is_safe_relative_path(relative)) throw StorageError("refusing unsafe source path '" + relative + "'");
        write_text_file(root / relative, content);
    }
}

Json to_json(const AcceleratorDesign& design) {
    return Json{{"template_id", design.template_id},
                {"point", to_json(design.point)},
                {"workload", to_json(design.workload)},
                {"design_id", design.design_id}};
}

AcceleratorDesign load_design(const Json& document) {
    FieldReader reader(document, "design");
    AcceleratorDesign design;
    design.template_id = reader.required<std::string>("template_id");
    design.point = load_point(reader.raw("point"));
    design.workload = load_workload(reader.raw("workload"));
    auto stored_id = reader.optional<std::string>("design_id");
    reader.finish();

    design.design_id = compute_design_id(design.template_id, design.point, design.workload);
    if (stored_id && *stored_id != design.design_id) {
        throw ValidationError("design_id", "design_id does not match design content");
    }
    return design;
}

}  // namespace secda_dse
