#pragma once

#include <set>
#include <string>

#include "json.hpp"
#include "lipbench/core/errors.hpp"

namespace lipbench {

using Json = nlohmann::json;

/// Reads a JSON object field by field and rejects keys nobody asked for.
/// Every failure is reported as a ConfigError naming the dotted key path.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string path) : json_(j), path_(std::move(path)) {
    if (!json_.is_object()) throw ConfigError(where() + "expected an object");
  }

  bool has(const std::string& key) const { return json_.contains(key); }

  /// Reads `key` into `out` if present; leaves the default otherwise.
  template <class T>
  void optional(const std::string& key, T& out) {
    seen_.insert(key);
    if (!json_.contains(key)) return;
    try {
      out = json_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(where(key) + "wrong type (" + e.what() + ")");
    }
  }

  template <class T>
  void required(const std::string& key, T& out) {
    if (!json_.contains(key)) throw ConfigError(where(key) + "missing required key");
    optional(key, out);
  }

  /// Sub-object, or nullptr when absent.
  const Json* child(const std::string& key) {
    seen_.insert(key);
    return json_.contains(key) ? &json_.at(key) : nullptr;
  }

  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = json_.begin(); it != json_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where(it.key()) + "unknown key");
    }
  }

 private:
  std::string where(const std::string& key = {}) const {
    std::string p = key.empty() ? path_ : child_path(key);
    return p.empty() ? std::string("config: ") : "config key '" + p + "': ";
  }

  const Json& json_;
  std::string path_;
  std::set<std::string> seen_;
};

/// Parses text into JSON; syntax errors become ConfigError with line and column.
Json parse_json_text(const std::string& text, const std::string& source_name);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// 64-bit FNV-1a, used for config hashes and file checksums.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace lipbench
