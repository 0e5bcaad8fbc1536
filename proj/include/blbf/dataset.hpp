#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace blbf {

/// One context/action/loss record from a logged decision process.
struct LoggedSample {
    std::vector<double> features;            // fixed dimension d, finite
    int action = 0;                          // in [0, K)
    double loss = 0.0;                       // general real; 0/1 in the binary setting
    std::optional<double> logged_propensity; // in (0, 1] when present
    std::optional<std::string> group_id;     // split key; absent = own group
};

/// Immutable after construction; validate() enforces the invariants.
struct LoggedDataset {
    std::vector<LoggedSample> samples;
    int n_actions = 0;   // K
    int feature_dim = 0; // d

    std::size_t size() const { return samples.size(); }
    void validate() const;  // throws DataError on violation

    std::vector<double> losses() const;
    std::vector<double> logged_propensities() const;  // throws if any absent
    bool has_propensities() const;
};

/// One supervised sequence-classification sample (variable length T).
struct SupervisedSample {
    std::vector<std::vector<double>> sequence;  // T rows of equal width
    std::vector<double> static_features;        // possibly empty
    int label = 0;                              // in [0, K)
};

/// Exhaustively enumerable context/action world; the brute-force risk oracle.
struct ToyEnvironment {
    std::vector<double> context_probs;              // sums to 1 within 1e-12
    std::vector<std::vector<double>> loss_table;    // [context][action], finite
    std::vector<std::vector<double>> context_features;

    std::size_t n_contexts() const { return context_probs.size(); }
    int n_actions() const;
    void validate() const;
};

// -- CSV interchange ---------------------------------------------------------

/// Column mapping for logged CSV files. Feature columns are
/// `<feature_prefix>0 .. <feature_prefix>{d-1}` and must be contiguous.
struct CsvSchema {
    std::string action = "action";
    std::string loss = "loss";
    std::string propensity = "propensity";  // optional column
    std::string group = "group_id";         // optional column
    std::string feature_prefix = "f";
    std::optional<int> n_actions_override;  // default: 1 + max action
};

LoggedDataset load_logged_csv(const std::string& path, const CsvSchema& schema = {});
std::string logged_csv_string(const LoggedDataset& data);
void save_logged_csv(const std::string& path, const LoggedDataset& data);

// -- IDX (big-endian image/label pairs) ---------------------------------------

/// Each image becomes a sample whose sequence is its pixel rows in order,
/// scaled to [0, 1]. Labels must lie in [0, 10).
std::vector<SupervisedSample> load_idx_pair(const std::string& images_path,
                                            const std::string& labels_path);

// -- Synthetic counting task ---------------------------------------------------

/// Symbolic sequences of one-hot token rows; the label is the number of
/// occurrences of token 0, capped at n_classes - 1. Classes are balanced by
/// rejection sampling (at most 100 * n draws).
std::vector<SupervisedSample> generate_counting_task(std::size_t n, int n_classes,
                                                     int vocab, int seq_len_mean,
                                                     int seq_len_spread,
                                                     std::uint64_t seed);

// -- Supervised container files (JSON lines) ----------------------------------

void save_supervised_jsonl(const std::string& path,
                           std::span<const SupervisedSample> samples);
std::vector<SupervisedSample> load_supervised_jsonl(const std::string& path);

void save_labels(const std::string& path, std::span<const SupervisedSample> samples);
std::vector<int> load_labels(const std::string& path);

// -- Splitting -----------------------------------------------------------------

/// Group-aware split: samples sharing a group_id never straddle the boundary;
/// samples without a group are their own group. Returns (train, test).
std::pair<LoggedDataset, LoggedDataset> group_split(const LoggedDataset& data,
                                                    double test_fraction,
                                                    std::uint64_t seed);

/// FNV-1a over a canonical binary serialization of the dataset.
std::uint64_t dataset_hash(const LoggedDataset& data);

}  // namespace blbf
