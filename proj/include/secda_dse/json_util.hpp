#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "secda_dse/errors.hpp"

namespace secda_dse {

using Json = nlohmann::json;

// Strict reader for a JSON object: every field must be consumed, anything
// left over when `finish()` runs is rejected as an unknown field.
class FieldReader {
public:
    FieldReader(const Json& object, std::string context);

    template <typename T>
    T required(const std::string& key) {
        return convert<T>(key, lookup(key, true));
    }

    template <typename T>
    std::optional<T> optional(const std::string& key) {
        const Json* value = lookup(key, false);
        if (value == nullptr || value->is_null()) return std::nullopt;
        return convert<T>(key, value);
    }

    template <typename T>
    T optional_or(const std::string& key, T fallback) {
        auto value = optional<T>(key);
        return value ? *value : std::move(fallback);
    }

    // Returns the raw sub-document (object or array) for nested parsing.
    const Json& raw(const std::string& key) { return *lookup(key, true); }
    const Json* raw_optional(const std::string& key) { return lookup(key, false); }

    void finish() const;

private:
    const Json* lookup(const std::string& key, bool required);

    template <typename T>
    T convert(const std::string& key, const Json* value) const {
        try {
            if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!value->is_number_integer()) throw ParseError(context_ + "." + key + ": expected integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!value->is_number()) throw ParseError(context_ + "." + key + ": expected number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!value->is_boolean()) throw ParseError(context_ + "." + key + ": expected boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!value->is_string()) throw ParseError(context_ + "." + key + ": expected string");
            }
            return value->get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(context_ + "." + key + ": " + e.what());
        }
    }

    const Json& object_;
    std::string context_;
    std::set<std::string> seen_;
};

// Infinite objectives are written as null; JSON has no infinity literal.
Json number_or_null(double value);
double number_or_infinity(const Json& value);

Json parse_json_text(const std::string& text, const std::string& context);
Json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

// Writes through a temporary file and rename so readers never see a partial document.
void write_text_file(const std::filesystem::path& path, const std::string& content);
void write_json_file(const std::filesystem::path& path, const Json& document);

}  // namespace secda_dse
