#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace hulirag::jsonl {

using Json = nlohmann::json;

/// Calls `fn(record, line_number)` for every non-blank line of `path`.
/// Parse failures and exceptions thrown by `fn` surface as RecordError with
/// the 1-based line number.
void for_each(const std::string& path, const std::function<void(const Json&, std::size_t)>& fn);

void write(const std::string& path, const std::vector<Json>& records);

Json read_document(const std::string& path);
void write_document(const std::string& path, const Json& doc);

// Field accessors that raise Error(kMalformedRecord) with the key name.
const Json& require(const Json& obj, const char* key);
std::string require_string(const Json& obj, const char* key);
double require_number(const Json& obj, const char* key);
std::vector<float> require_floats(const Json& obj, const char* key);
std::vector<double> require_doubles(const Json& obj, const char* key);

}  // namespace hulirag::jsonl
