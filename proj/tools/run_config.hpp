#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vampkit {

// Flat key=value run configuration. Every tunable default of the library
// surfaces as a registered key; files may set them (# starts a comment) and
// CLI flags override file values. Unknown keys are rejected.
class RunConfig {
 public:
  RunConfig();

  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);  // rejects unknown keys
  void set_kv(const std::string& assignment);                  // "key=value"

  const std::string& get(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  uint64_t get_seed(const std::string& key) const;

  // Canonical "key=value\n" listing, sorted by key.
  std::string resolved_text() const;
  // FNV-1a hash of the resolved text, as 16 hex digits.
  std::string config_hash() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace vampkit
