#include "hulirag/jsonl.hpp"

#include <cmath>
#include <fstream>

#include "hulirag/error.hpp"

namespace hulirag::jsonl {

void for_each(const std::string& path, const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kNotFound, "cannot open " + path);
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw RecordError(ErrorCode::kMalformedRecord, path, line_no, e.what());
    }
    try {
      fn(record, line_no);
    } catch (const RecordError&) {
      throw;
    } catch (const Error& e) {
      throw RecordError(e.code(), path, line_no, e.what());
    } catch (const Json::exception& e) {
      throw RecordError(ErrorCode::kMalformedRecord, path, line_no, e.what());
    }
  }
}

void write(const std::string& path, const std::vector<Json>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kNotFound, "cannot write " + path);
  }
  for (const auto& r : records) {
    out << r.dump() << '\n';
  }
}

Json read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kNotFound, "cannot open " + path);
  }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kMalformedRecord, path + ": " + e.what());
  }
}

void write_document(const std::string& path, const Json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kNotFound, "cannot write " + path);
  }
  out << doc.dump(2) << '\n';
}

const Json& require(const Json& obj, const char* key) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::kMalformedRecord, "expected an object");
  }
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::kMalformedRecord, std::string("missing key '") + key + "'");
  }
  return *it;
}

std::string require_string(const Json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_string()) {
    throw Error(ErrorCode::kMalformedRecord, std::string("key '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

double require_number(const Json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_number()) {
    throw Error(ErrorCode::kMalformedRecord, std::string("key '") + key + "' must be a number");
  }
  return v.get<double>();
}

namespace {

template <typename T>
std::vector<T> numbers(const Json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_array()) {
    throw Error(ErrorCode::kMalformedRecord, std::string("key '") + key + "' must be an array");
  }
  std::vector<T> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) {
      throw Error(ErrorCode::kMalformedRecord,
                  std::string("key '") + key + "' must contain only numbers");
    }
    const double d = x.get<double>();
    if (!std::isfinite(d)) {
      throw Error(ErrorCode::kMalformedRecord, std::string("non-finite value in '") + key + "'");
    }
    out.push_back(static_cast<T>(d));
  }
  return out;
}

}  // namespace

std::vector<float> require_floats(const Json& obj, const char* key) { return numbers<float>(obj, key); }

std::vector<double> require_doubles(const Json& obj, const char* key) {
  return numbers<double>(obj, key);
}

}  // namespace hulirag::jsonl
