#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "lithoseg/error.hpp"

namespace lithoseg {

// indent < 0 writes compact JSON.
inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j, int indent = 1) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(indent) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace lithoseg
