#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace netlat {

std::uint64_t fnv1a64(const std::string& bytes);
std::string fnv1a64_hex(const std::string& bytes);
std::string hash_file(const std::string& path);  // fnv1a64 of file contents

// Provenance record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, content hash
  std::vector<std::string> outputs;
  std::string timestamp;

  void add_input(const std::string& path);
  nlohmann::json to_json() const;
  // writes <dir>/manifest.json
  void write(const std::string& dir) const;
};

std::string current_timestamp();

}  // namespace netlat
