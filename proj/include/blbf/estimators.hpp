#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blbf/dataset.hpp"
#include "blbf/featurizer.hpp"
#include "blbf/policy.hpp"

namespace blbf {

/// One estimator evaluation.
struct EstimateReport {
    std::string estimator;
    double value = 0.0;
    std::optional<double> tmf;
    std::size_t m = 0;
    std::optional<std::size_t> group_one_size;  // ATENP only
    std::optional<std::size_t> group_two_size;
    std::size_t clipped_count = 0;  // floored propensities, filled by the caller
};

// All array-based estimators take per-sample losses, the evaluated policy's
// probabilities of the logged actions, and propensities of equal length m.
// Whether the propensities are logged (true) or estimated is the caller's
// choice. Sums are pairwise reductions, so values are order-independent up
// to ~1e-12.

/// (1/m) sum delta_i * pi_i / p_i.
EstimateReport ips_risk(std::span<const double> losses, std::span<const double> policy_probs,
                        std::span<const double> propensities);
EstimateReport ips_risk(const LoggedDataset& data, std::span<const double> policy_probs,
                        std::span<const double> propensities);

/// Mean importance weight (1/m) sum pi_i / p_i; 1 in expectation under the
/// logging policy, near 0 under propensity overfitting.
double tmf(std::span<const double> policy_probs, std::span<const double> propensities);

/// ips / tmf; requires overlap (tmf > 0).
EstimateReport snips_risk(std::span<const double> losses, std::span<const double> policy_probs,
                          std::span<const double> propensities);
EstimateReport snips_risk(const LoggedDataset& data, std::span<const double> policy_probs,
                          std::span<const double> propensities);

/// (1/m) sum (delta_i - lambda) * pi_i / p_i  ==  ips - lambda * tmf.
EstimateReport translated_ips_risk(std::span<const double> losses,
                                   std::span<const double> policy_probs,
                                   std::span<const double> propensities, double lambda);
EstimateReport translated_ips_risk(const LoggedDataset& data,
                                   std::span<const double> policy_probs,
                                   std::span<const double> propensities, double lambda);

/// Doubly robust: outcome-model baseline plus propensity-weighted residual.
EstimateReport dr_risk(const LoggedDataset& data, const SoftmaxPolicy& policy,
                       std::span<const double> propensities, const LossModel& loss_model);

/// Mean loss difference between samples whose logged action matches the
/// policy's greedy choice (group one) and the rest. Throws EmptyGroupError
/// (carrying both sizes) when either group is empty.
EstimateReport atenp(const LoggedDataset& data, const SoftmaxPolicy& policy,
                     const Featurizer& featurizer);

/// ATENP where the evaluated rule is an arbitrary greedy map (e.g. the
/// Direct Method's argmin rule).
EstimateReport atenp_greedy(const LoggedDataset& data, std::span<const int> greedy_actions);

/// Exact expected risk sum_X P(X) sum_a pi(a|X) delta(X, a).
double true_risk(const ToyEnvironment& env, const SoftmaxPolicy& policy);

/// Fraction of samples whose greedy action equals the ground-truth label.
double accuracy(const SoftmaxPolicy& policy, const Featurizer& featurizer,
                std::span<const SupervisedSample> supervised);

/// Accuracy against a label sidecar for already-featurized contexts.
double accuracy_on_features(const SoftmaxPolicy& policy, std::span<const double> features,
                            std::size_t feature_dim, std::span<const int> labels);

}  // namespace blbf
