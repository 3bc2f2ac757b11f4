#include "netlat/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "netlat/errors.hpp"

namespace netlat {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string(buf);
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file for hashing: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64_hex(ss.str());
}

void RunManifest::add_input(const std::string& path) { inputs.push_back({path, hash_file(path)}); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["args"] = args;
  j["seed"] = seed;
  nlohmann::json ins = nlohmann::json::array();
  for (const auto& [path, hash] : inputs) ins.push_back({{"path", path}, {"hash", hash}});
  j["inputs"] = std::move(ins);
  j["outputs"] = outputs;
  j["timestamp"] = timestamp;
  return j;
}

void RunManifest::write(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / "manifest.json").string();
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write manifest: " + path);
  out << to_json().dump(2) << '\n';
}

std::string current_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return std::string(buf);
}

}  // namespace netlat
