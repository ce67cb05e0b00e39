#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "megadance/errors.hpp"

namespace megadance::io {

using Json = nlohmann::json;

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ParseError(origin + ": line " + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
  }
}

inline Json read_json(const std::filesystem::path& path) { return parse_json(read_text(path), path.string()); }

/// Field lookup that names the file and key in its error.
inline const Json& field(const Json& obj, const std::string& key, const std::string& origin) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(origin + ": missing field '" + key + "'");
  return obj.at(key);
}

template <typename T>
T field_as(const Json& obj, const std::string& key, const std::string& origin) {
  const Json& v = field(obj, key, origin);
  try {
    return v.get<T>();
  } catch (const Json::exception&) {
    throw ParseError(origin + ": field '" + key + "' has the wrong type");
  }
}

/// Checks the {format, version} envelope shared by every file this library writes.
inline void check_envelope(const Json& doc, const std::string& format, int version, const std::string& origin) {
  const auto fmt = field_as<std::string>(doc, "format", origin);
  if (fmt != format) throw ValidationError(origin + ": expected format '" + format + "', found '" + fmt + "'");
  const auto ver = field_as<int>(doc, "version", origin);
  if (ver != version) {
    throw ValidationError(origin + ": unsupported " + format + " version " + std::to_string(ver) +
                          " (this build reads version " + std::to_string(version) + ")");
  }
}

/// Writes a header object followed by a frame-major array, one frame per line.
inline std::string dump_with_frames(const Json& header, const std::string& key,
                                    const std::vector<std::vector<double>>& frames) {
  std::ostringstream out;
  std::string head = header.dump(1);
  head.pop_back();  // closing brace
  while (!head.empty() && (head.back() == '\n' || head.back() == ' ')) head.pop_back();
  out << head << ",\n \"" << key << "\": [";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out << (i ? ",\n  " : "\n  ") << Json(frames[i]).dump();
  }
  out << (frames.empty() ? "]\n}\n" : "\n ]\n}\n");
  return out.str();
}

/// Reads rows[i] as exactly `width` numbers, reporting the offending row.
inline std::vector<double> read_frames(const Json& doc, const std::string& key, std::size_t width,
                                       std::size_t expected_rows, const std::string& origin) {
  const Json& rows = field(doc, key, origin);
  if (!rows.is_array()) throw ParseError(origin + ": field '" + key + "' must be an array");
  if (rows.size() != expected_rows) {
    throw ValidationError(origin + ": frame_count says " + std::to_string(expected_rows) + " but '" + key +
                          "' holds " + std::to_string(rows.size()) + " rows");
  }
  std::vector<double> values;
  values.reserve(expected_rows * width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Json& row = rows[i];
    if (!row.is_array() || row.size() != width) {
      throw ValidationError(origin + ": " + key + "[" + std::to_string(i) + "]: expected width " +
                            std::to_string(width) + ", got " +
                            (row.is_array() ? std::to_string(row.size()) : std::string("a non-array")));
    }
    for (std::size_t j = 0; j < width; ++j) {
      if (!row[j].is_number()) {
        throw ParseError(origin + ": " + key + "[" + std::to_string(i) + "][" + std::to_string(j) +
                         "] is not a number");
      }
      values.push_back(row[j].get<double>());
    }
  }
  return values;
}

}  // namespace megadance::io
