#include "secda_dse/json_util.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace secda_dse {

FieldReader::FieldReader(const Json& object, std::string context)
    : object_(object), context_(std::move(context)) {
    if (!object_.is_object()) throw ParseError(context_ + ": expected a JSON object");
}

const Json* FieldReader::lookup(const std::string& key, bool required) {
    seen_.insert(key);
    auto it = object_.find(key);
    if (it == object_.end()) {
        if (required) throw ParseError(context_ + ": missing required field '" + key + "'");
        return nullptr;
    }
    return &*it;
}

void FieldReader::finish() const {
    for (const auto& [key, value] : object_.items()) {
        if (!seen_.count(key)) throw ParseError(context_ + ": unknown field '" + key + "'");
    }
}

Json number_or_null(double value) {
    if (std::isinf(value)) return nullptr;
    return value;
}

double number_or_infinity(const Json& value) {
    if (value.is_null()) return std::numeric_limits<double>::infinity();
    if (!value.is_number()) throw ParseError("expected number or null");
    return value.get<double>();
}

Json parse_json_text(const std::string& text, const std::string& context) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(context + ": " + e.what());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

Json read_json_file(const std::filesystem::path& path) {
    return parse_json_text(read_text_file(path), path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw StorageError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw StorageError("cannot rename " + tmp.string() + ": " + ec.message());
}

void write_json_file(const std::filesystem::path& path, const Json& document) {
    write_text_file(path, document.dump(2) + "\n");
}

}  // namespace secda_dse
