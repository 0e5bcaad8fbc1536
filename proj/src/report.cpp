#include "blbf/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace blbf {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t config_digest(const std::vector<std::pair<std::string, std::string>>& kv) {
    std::string canon;
    for (const auto& [k, v] : kv) {
        canon += k;
        canon += '=';
        canon += v;
        canon += '\n';
    }
    return fnv1a64(canon);
}

void ReportDoc::section(const std::string& name) {
    body_ += '[';
    body_ += name;
    body_ += "]\n";
}

void ReportDoc::kv(const std::string& key, const std::string& value) {
    body_ += key;
    body_ += " = ";
    body_ += value;
    body_ += '\n';
}

void ReportDoc::kv(const std::string& key, double value) { kv(key, format_double(value)); }

void ReportDoc::kv(const std::string& key, std::int64_t value) {
    kv(key, std::to_string(value));
}

std::string ReportDoc::str() const { return "blbf-report v1\n" + body_; }

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace blbf
