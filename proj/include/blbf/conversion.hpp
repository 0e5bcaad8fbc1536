#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "blbf/dataset.hpp"
#include "blbf/featurizer.hpp"
#include "blbf/policy.hpp"

namespace blbf {

/// Converted bandit data plus the ground-truth labels, kept in a sidecar so
/// nothing downstream of the conversion trains on them.
struct BanditConversion {
    LoggedDataset data;
    std::vector<int> labels;  // aligned 1:1 with data.samples
};

/// Supervised-to-bandit conversion: draw an action from the logging policy,
/// log its probability as the true propensity, and score loss 0 exactly when
/// the drawn action equals the ground-truth label (1 otherwise).
BanditConversion convert_to_bandit(std::span<const SupervisedSample> supervised,
                                   const Featurizer& featurizer,
                                   const SoftmaxPolicy& logging_policy,
                                   std::uint64_t seed);

/// Exhaustive enumeration of (context, action) outcomes with weights
/// P(X) * P(a|X); the weights sum to 1 and each record carries the true
/// propensity. This is the exact-expectation oracle for the estimators.
struct EnumeratedOutcomes {
    LoggedDataset data;
    std::vector<double> weights;
};

EnumeratedOutcomes enumerate_logged_outcomes(const ToyEnvironment& env,
                                             const SoftmaxPolicy& logging_policy);

}  // namespace blbf
