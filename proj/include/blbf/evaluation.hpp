#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "blbf/conversion.hpp"
#include "blbf/dataset.hpp"
#include "blbf/estimators.hpp"
#include "blbf/policy.hpp"
#include "blbf/train_config.hpp"

namespace blbf {

// -- Matching-factor diagnostic --------------------------------------------------

enum class Verdict { Healthy, Suspicious, Overfit };

/// healthy: tmf >= 0.5, suspicious: [0.1, 0.5), overfit: < 0.1.
Verdict diagnose_overfit(double tmf_value);
std::string to_string(Verdict v);

// -- Offline evaluation (logged test data) ---------------------------------------

/// A named row of the offline report: either a stochastic policy (all four
/// diagnostics) or a deterministic decision rule (ATENP only; the remaining
/// cells carry explicit not-applicable markers).
struct EvalPolicy {
    std::string name;
    std::variant<SoftmaxPolicy, LossModel> rule;  // LossModel = argmin decision rule
    bool probabilistic = true;
};

struct EvalCell {
    std::optional<double> value;
    std::string marker;  // set exactly when value is absent
};

struct EvalRow {
    std::string name;
    EvalCell atenp, ips, dr, tmf;
    std::optional<std::size_t> group_one_size, group_two_size;
    std::size_t clipped_count = 0;
    std::string verdict;  // matching-factor diagnostic, when tmf is present
};

struct EvaluationReport {
    std::vector<EvalRow> rows;
    std::uint64_t dataset_hash = 0;
    std::size_t m = 0;
    int n_actions = 0;
    double propensity_floor = 0.0;

    std::string to_table() const;  // aligned plain-text table
};

/// Table-style offline report: ATENP / IPS (estimated propensities) / DR / TMF
/// per policy. ATENP empty-group failures become marked cells rather than
/// aborting the report.
EvaluationReport evaluate_offline(const LoggedDataset& test,
                                  const std::vector<EvalPolicy>& policies,
                                  const SoftmaxPolicy& propensity_model,
                                  const LossModel& loss_model, const Featurizer& featurizer,
                                  double propensity_floor = 1e-3);

// -- Simulation study --------------------------------------------------------------

enum class Method { DM, RP, IPS, TIPS, EIPS, ETIPS, SKYLINE };

Method method_from_string(const std::string& s);
std::string to_string(Method m);

struct CountingTaskSpec {
    std::size_t n = 10000;
    int n_classes = 3;
    int vocab = 10;
    int seq_len_mean = 20;
    int seq_len_spread = 5;
};

struct TaskSpec {
    enum class Kind { Counting, Idx };
    Kind kind = Kind::Counting;
    CountingTaskSpec counting;
    std::string idx_images, idx_labels;
    double test_fraction = 0.2;
};

std::vector<SupervisedSample> realize_task(const TaskSpec& task, std::uint64_t seed);

struct StudyConfig {
    FeaturizerMode featurizer_mode = FeaturizerMode::MeanPool;
    int hidden = 64;  // policy capacity; 0 = linear
    TrainConfig train;
    double logging_subset_fraction = 0.05;
    std::pair<double, double> logging_band = {0.60, 0.72};
    /// Keep the logging-policy subset out of the bandit conversion pool.
    bool logging_subset_disjoint = true;
};

struct MethodOutcome {
    double accuracy = 0.0;
    std::optional<double> tmf;
    std::optional<double> propensity_accuracy;  // estimated-propensity methods
};

struct FoldResult {
    std::uint64_t fold_seed = 0;
    double logging_accuracy = 0.0;  // held-out greedy accuracy
    double mean_converted_loss = 0.0;
    std::map<Method, MethodOutcome> outcomes;
};

/// One fold: realize the task, train the logging policy into the accuracy
/// band, convert to bandit feedback, train every requested method, and score
/// held-out accuracy against the label sidecar. Methods IPS/TIPS consume
/// logged (true) propensities; EIPS/ETIPS estimate them.
FoldResult run_fold(const TaskSpec& task, const std::vector<Method>& methods,
                    const StudyConfig& config, std::uint64_t fold_seed);

struct MethodSummary {
    Method method = Method::RP;
    std::vector<double> fold_accuracies;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation over folds
    std::vector<double> fold_tmfs;  // empty when the method has no matching factor
};

struct SimulationReport {
    std::vector<MethodSummary> methods;
    std::vector<FoldResult> folds;
    double logging_mean = 0.0;
    double logging_std = 0.0;
    int k = 0;

    std::string to_table() const;
};

SimulationReport run_simulation_study(const TaskSpec& task,
                                      const std::vector<Method>& methods, int folds,
                                      std::uint64_t seed, const StudyConfig& config);

}  // namespace blbf
