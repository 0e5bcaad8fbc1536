#include "blbf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "blbf/errors.hpp"
#include "blbf/report.hpp"
#include "blbf/rng.hpp"

namespace blbf {

void LoggedDataset::validate() const {
    if (samples.empty()) throw DataError("dataset is empty");
    if (n_actions < 1) throw DataError("n_actions must be >= 1");
    if (feature_dim < 1) throw DataError("feature_dim must be >= 1");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const LoggedSample& s = samples[i];
        if (s.action < 0 || s.action >= n_actions)
            throw DataError("sample " + std::to_string(i) + ": action " +
                            std::to_string(s.action) + " outside [0, " +
                            std::to_string(n_actions) + ")");
        if (static_cast<int>(s.features.size()) != feature_dim)
            throw DataError("sample " + std::to_string(i) + ": feature count " +
                            std::to_string(s.features.size()) + " != " +
                            std::to_string(feature_dim));
        for (double f : s.features)
            if (!std::isfinite(f))
                throw DataError("sample " + std::to_string(i) + ": non-finite feature");
        if (!std::isfinite(s.loss))
            throw DataError("sample " + std::to_string(i) + ": non-finite loss");
        if (s.logged_propensity) {
            double p = *s.logged_propensity;
            if (!(p > 0.0) || p > 1.0)
                throw DataError("sample " + std::to_string(i) +
                                ": propensity must be in (0, 1], got " + format_double(p));
        }
    }
}

std::vector<double> LoggedDataset::losses() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.loss);
    return out;
}

std::vector<double> LoggedDataset::logged_propensities() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!samples[i].logged_propensity)
            throw DataError("sample " + std::to_string(i) + " has no logged propensity");
        out.push_back(*samples[i].logged_propensity);
    }
    return out;
}

bool LoggedDataset::has_propensities() const {
    return !samples.empty() &&
           std::all_of(samples.begin(), samples.end(),
                       [](const LoggedSample& s) { return s.logged_propensity.has_value(); });
}

int ToyEnvironment::n_actions() const {
    return loss_table.empty() ? 0 : static_cast<int>(loss_table.front().size());
}

void ToyEnvironment::validate() const {
    if (context_probs.empty()) throw DataError("environment has no contexts");
    if (loss_table.size() != context_probs.size() ||
        context_features.size() != context_probs.size())
        throw DataError("environment: table sizes disagree");
    double total = 0.0;
    for (double p : context_probs) {
        if (!(p >= 0.0)) throw DataError("environment: negative context probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw DataError("environment: context probabilities sum to " + format_double(total));
    const std::size_t k = loss_table.front().size();
    if (k == 0) throw DataError("environment has no actions");
    for (const auto& row : loss_table) {
        if (row.size() != k) throw DataError("environment: ragged loss table");
        for (double v : row)
            if (!std::isfinite(v)) throw DataError("environment: non-finite loss");
    }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double_strict(const std::string& s, const std::string& what, std::size_t row) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw DataError("row " + std::to_string(row) + ": bad " + what + " value '" + s + "'");
    return v;
}

long parse_int_strict(const std::string& s, const std::string& what, std::size_t row) {
    const char* begin = s.c_str();
    char* end = nullptr;
    long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0')
        throw DataError("row " + std::to_string(row) + ": bad " + what + " value '" + s + "'");
    return v;
}

}  // namespace

LoggedDataset load_logged_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);

    std::string header;
    if (!std::getline(in, header)) throw DataError(path + ": empty file");
    const std::vector<std::string> cols = split_csv_line(header);

    int action_col = -1, loss_col = -1, propensity_col = -1, group_col = -1;
    std::map<int, int> feature_cols;  // feature index -> column index
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const std::string& name = cols[c];
        if (name == schema.action) {
            action_col = static_cast<int>(c);
        } else if (name == schema.loss) {
            loss_col = static_cast<int>(c);
        } else if (name == schema.propensity) {
            propensity_col = static_cast<int>(c);
        } else if (name == schema.group) {
            group_col = static_cast<int>(c);
        } else if (name.rfind(schema.feature_prefix, 0) == 0) {
            const std::string idx = name.substr(schema.feature_prefix.size());
            if (!idx.empty() && std::all_of(idx.begin(), idx.end(), ::isdigit))
                feature_cols[std::stoi(idx)] = static_cast<int>(c);
        }
    }
    if (action_col < 0) throw DataError(path + ": missing column '" + schema.action + "'");
    if (loss_col < 0) throw DataError(path + ": missing column '" + schema.loss + "'");
    if (feature_cols.empty())
        throw DataError(path + ": no feature columns with prefix '" + schema.feature_prefix + "'");
    const int d = static_cast<int>(feature_cols.size());
    for (int j = 0; j < d; ++j)
        if (!feature_cols.count(j))
            throw DataError(path + ": feature columns not contiguous, missing " +
                            schema.feature_prefix + std::to_string(j));

    LoggedDataset data;
    data.feature_dim = d;
    std::string line;
    std::size_t row = 1;  // header was physical row 1
    int max_action = -1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != cols.size())
            throw DataError("row " + std::to_string(row) + ": expected " +
                            std::to_string(cols.size()) + " fields, got " +
                            std::to_string(fields.size()));
        LoggedSample s;
        const long a = parse_int_strict(fields[action_col], "action", row);
        if (a < 0) throw DataError("row " + std::to_string(row) + ": negative action");
        s.action = static_cast<int>(a);
        max_action = std::max(max_action, s.action);
        s.loss = parse_double_strict(fields[loss_col], "loss", row);
        if (!std::isfinite(s.loss))
            throw DataError("row " + std::to_string(row) + ": non-finite loss");
        if (propensity_col >= 0) {
            const double p = parse_double_strict(fields[propensity_col], "propensity", row);
            if (!(p > 0.0) || p > 1.0)
                throw DataError("row " + std::to_string(row) +
                                ": propensity must be in (0, 1], got " + fields[propensity_col]);
            s.logged_propensity = p;
        }
        if (group_col >= 0 && !fields[group_col].empty()) s.group_id = fields[group_col];
        s.features.resize(d);
        for (int j = 0; j < d; ++j) {
            const double f = parse_double_strict(fields[feature_cols[j]], "feature", row);
            if (!std::isfinite(f))
                throw DataError("row " + std::to_string(row) + ": non-finite feature " +
                                schema.feature_prefix + std::to_string(j));
            s.features[j] = f;
        }
        data.samples.push_back(std::move(s));
    }
    if (data.samples.empty()) throw DataError(path + ": no data rows");
    data.n_actions = schema.n_actions_override.value_or(max_action + 1);
    data.validate();
    return data;
}

std::string logged_csv_string(const LoggedDataset& data) {
    const bool groups = std::any_of(data.samples.begin(), data.samples.end(),
                                    [](const LoggedSample& s) { return s.group_id.has_value(); });
    const bool props = data.has_propensities();
    std::string out;
    if (groups) out += "group_id,";
    out += "action,loss";
    if (props) out += ",propensity";
    for (int j = 0; j < data.feature_dim; ++j) out += ",f" + std::to_string(j);
    out += '\n';
    for (const auto& s : data.samples) {
        if (groups) {
            if (s.group_id) out += *s.group_id;
            out += ',';
        }
        out += std::to_string(s.action);
        out += ',';
        out += format_double(s.loss);
        if (props) {
            out += ',';
            out += format_double(*s.logged_propensity);
        }
        for (double f : s.features) {
            out += ',';
            out += format_double(f);
        }
        out += '\n';
    }
    return out;
}

void save_logged_csv(const std::string& path, const LoggedDataset& data) {
    write_file_atomic(path, logged_csv_string(data));
}

// ---------------------------------------------------------------------------
// IDX
// ---------------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError(path + ": truncated file");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

std::vector<SupervisedSample> load_idx_pair(const std::string& images_path,
                                            const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw DataError("cannot open: " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError("cannot open: " + labels_path);

    const std::uint32_t img_magic = read_be32(img, images_path);
    if (img_magic != 0x00000803u)
        throw DataError(images_path + ": bad magic " + std::to_string(img_magic) +
                        ", expected 2051");
    const std::uint32_t n_img = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);

    const std::uint32_t lab_magic = read_be32(lab, labels_path);
    if (lab_magic != 0x00000801u)
        throw DataError(labels_path + ": bad magic " + std::to_string(lab_magic) +
                        ", expected 2049");
    const std::uint32_t n_lab = read_be32(lab, labels_path);
    if (n_img != n_lab)
        throw DataError("item count mismatch: " + std::to_string(n_img) + " images vs " +
                        std::to_string(n_lab) + " labels");

    std::vector<SupervisedSample> out;
    out.reserve(n_img);
    std::vector<unsigned char> pixel_row(cols);
    for (std::uint32_t i = 0; i < n_img; ++i) {
        SupervisedSample s;
        s.sequence.resize(rows);
        for (std::uint32_t r = 0; r < rows; ++r) {
            img.read(reinterpret_cast<char*>(pixel_row.data()), cols);
            if (!img) throw DataError(images_path + ": truncated file");
            auto& dst = s.sequence[r];
            dst.resize(cols);
            for (std::uint32_t c = 0; c < cols; ++c) dst[c] = pixel_row[c] / 255.0;
        }
        unsigned char y = 0;
        lab.read(reinterpret_cast<char*>(&y), 1);
        if (!lab) throw DataError(labels_path + ": truncated file");
        if (y >= 10)
            throw DataError(labels_path + ": label " + std::to_string(int(y)) +
                            " out of range [0, 10) at item " + std::to_string(i));
        s.label = y;
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Counting task
// ---------------------------------------------------------------------------

std::vector<SupervisedSample> generate_counting_task(std::size_t n, int n_classes, int vocab,
                                                     int seq_len_mean, int seq_len_spread,
                                                     std::uint64_t seed) {
    if (n == 0) throw DataError("n must be >= 1");
    if (n_classes < 2) throw DataError("n_classes must be >= 2");
    if (vocab < 2) throw DataError("vocab must be >= 2");
    if (!(seq_len_mean > seq_len_spread) || seq_len_spread < 0)
        throw DataError("require seq_len_mean > seq_len_spread >= 0");
    const int max_count = seq_len_mean + seq_len_spread;
    if (n_classes - 1 > max_count)
        throw DataError("infeasible balance: class " + std::to_string(n_classes - 1) +
                        " needs " + std::to_string(n_classes - 1) + " zeros but sequences cap at " +
                        std::to_string(max_count) + " tokens");

    // Per-class quotas; remainder goes to the lowest class ids.
    std::vector<std::size_t> quota(n_classes, n / n_classes);
    for (std::size_t r = 0; r < n % n_classes; ++r) quota[r] += 1;

    Rng rng(seed);
    std::vector<SupervisedSample> out;
    out.reserve(n);
    std::vector<std::size_t> filled(n_classes, 0);
    const std::size_t max_attempts = 100 * n;
    std::size_t attempts = 0;
    while (out.size() < n) {
        if (++attempts > max_attempts)
            throw DataError("infeasible balance: exceeded " + std::to_string(max_attempts) +
                            " draws with class counts still short");
        const int len =
            seq_len_mean - seq_len_spread + rng.below_int(2 * seq_len_spread + 1);
        std::vector<int> tokens(len);
        int zeros = 0;
        for (int t = 0; t < len; ++t) {
            tokens[t] = rng.below_int(vocab);
            if (tokens[t] == 0) ++zeros;
        }
        const int label = std::min(zeros, n_classes - 1);
        if (filled[label] >= quota[label]) continue;  // rejected: class full
        ++filled[label];
        SupervisedSample s;
        s.label = label;
        s.sequence.resize(len);
        for (int t = 0; t < len; ++t) {
            s.sequence[t].assign(vocab, 0.0);
            s.sequence[t][tokens[t]] = 1.0;
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSONL container
// ---------------------------------------------------------------------------

void save_supervised_jsonl(const std::string& path,
                           std::span<const SupervisedSample> samples) {
    if (samples.empty()) throw DataError("nothing to save");
    nlohmann::json header;
    header["format"] = "blbf-seq";
    header["version"] = 1;
    header["token_width"] = samples.front().sequence.front().size();
    header["static_dim"] = samples.front().static_features.size();
    std::string out = header.dump();
    out += '\n';
    for (const auto& s : samples) {
        nlohmann::json j;
        j["seq"] = s.sequence;
        if (!s.static_features.empty()) j["static"] = s.static_features;
        j["y"] = s.label;
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<SupervisedSample> load_supervised_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": bad header: " + e.what());
    }
    if (header.value("format", "") != "blbf-seq")
        throw DataError(path + ": not a blbf-seq file");

    std::vector<SupervisedSample> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ": row " + std::to_string(row) + ": " + e.what());
        }
        SupervisedSample s;
        s.sequence = j.at("seq").get<std::vector<std::vector<double>>>();
        if (j.contains("static")) s.static_features = j["static"].get<std::vector<double>>();
        s.label = j.at("y").get<int>();
        if (s.sequence.empty())
            throw DataError(path + ": row " + std::to_string(row) + ": empty sequence");
        if (s.label < 0)
            throw DataError(path + ": row " + std::to_string(row) + ": negative label");
        out.push_back(std::move(s));
    }
    if (out.empty()) throw DataError(path + ": no samples");
    return out;
}

void save_labels(const std::string& path, std::span<const SupervisedSample> samples) {
    std::string out;
    for (const auto& s : samples) {
        out += std::to_string(s.label);
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<int> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    std::vector<int> out;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        out.push_back(static_cast<int>(parse_int_strict(line, "label", row)));
    }
    if (out.empty()) throw DataError(path + ": no labels");
    return out;
}

// ---------------------------------------------------------------------------
// Group split
// ---------------------------------------------------------------------------

std::pair<LoggedDataset, LoggedDataset> group_split(const LoggedDataset& data,
                                                    double test_fraction,
                                                    std::uint64_t seed) {
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
        throw DataError("test_fraction must be in (0, 1)");
    const std::size_t m = data.samples.size();

    // Group key -> member indices; ungrouped samples form singleton groups.
    std::map<std::string, std::vector<std::size_t>> by_key;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& s = data.samples[i];
        const std::string key =
            s.group_id ? ("g:" + *s.group_id) : ("i:" + std::to_string(i));
        by_key[key].push_back(i);
    }
    if (by_key.size() < 2)
        throw DataError("cannot split: a single group contains every sample");

    std::vector<std::string> keys;
    keys.reserve(by_key.size());
    for (const auto& [k, v] : by_key) keys.push_back(k);
    Rng rng(seed);
    rng.shuffle(keys);

    auto target = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(m)));
    if (target < 1) target = 1;
    std::vector<bool> in_test(m, false);
    std::size_t test_count = 0;
    for (const auto& k : keys) {
        if (test_count >= target) break;
        for (std::size_t i : by_key[k]) {
            in_test[i] = true;
            ++test_count;
        }
    }

    LoggedDataset train, test;
    train.n_actions = test.n_actions = data.n_actions;
    train.feature_dim = test.feature_dim = data.feature_dim;
    for (std::size_t i = 0; i < m; ++i)
        (in_test[i] ? test : train).samples.push_back(data.samples[i]);
    if (train.samples.empty() || test.samples.empty())
        throw DataError("cannot split: group structure leaves one side empty");
    return {std::move(train), std::move(test)};
}

std::uint64_t dataset_hash(const LoggedDataset& data) {
    std::string bytes;
    bytes.reserve(data.samples.size() * (16 + 8 * data.feature_dim));
    auto push_u64 = [&bytes](std::uint64_t v) {
        char raw[8];
        std::memcpy(raw, &v, 8);
        bytes.append(raw, 8);
    };
    auto push_double = [&](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        push_u64(bits);
    };
    push_u64(static_cast<std::uint64_t>(data.n_actions));
    push_u64(static_cast<std::uint64_t>(data.feature_dim));
    for (const auto& s : data.samples) {
        push_u64(static_cast<std::uint64_t>(s.action));
        push_double(s.loss);
        push_double(s.logged_propensity.value_or(-1.0));
        for (double f : s.features) push_double(f);
        if (s.group_id) bytes += *s.group_id;
        bytes += '\x1f';
    }
    return fnv1a64(bytes);
}

}  // namespace blbf
