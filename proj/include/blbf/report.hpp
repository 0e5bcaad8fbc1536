#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace blbf {

/// Shortest-exact decimal for a double: 17 significant digits round-trip.
std::string format_double(double v);

/// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Digest of a canonical "key=value\n" option listing (keys pre-sorted by caller
/// or appended in a fixed order).
std::uint64_t config_digest(const std::vector<std::pair<std::string, std::string>>& kv);

/// Self-describing key/value report document:
///
///   blbf-report v1
///   [section]
///   key = value
///
/// Values: integers verbatim, doubles with 17 significant digits, strings raw
/// (no newlines). Rendering is fully deterministic.
class ReportDoc {
   public:
    void section(const std::string& name);
    void kv(const std::string& key, const std::string& value);
    void kv(const std::string& key, const char* value) { kv(key, std::string(value)); }
    void kv(const std::string& key, double value);
    void kv(const std::string& key, std::int64_t value);
    void kv(const std::string& key, std::size_t value) {
        kv(key, static_cast<std::int64_t>(value));
    }
    void kv(const std::string& key, int value) { kv(key, static_cast<std::int64_t>(value)); }

    std::string str() const;

   private:
    std::string body_;
};

/// Write-then-rename so a report either exists completely or not at all.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace blbf
