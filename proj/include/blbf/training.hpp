#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "blbf/dataset.hpp"
#include "blbf/policy.hpp"
#include "blbf/train_config.hpp"

namespace blbf {

/// Outcome of one translation candidate.
struct TrainRun {
    double lambda = 0.0;                  // literal translation value
    SoftmaxPolicy policy;                 // parameters at the end of the run
    double tmf_final = 0.0;               // full-dataset mean importance weight
    double snips = 0.0;                   // full-dataset self-normalized risk (NaN if flagged)
    std::vector<double> objective_trace;  // full-dataset translated objective per epoch
    bool admitted = false;                // tmf_final > 0
};

/// Batch objective of the translated importance-weighted risk and its exact
/// gradient with respect to every policy parameter.
std::pair<double, std::vector<double>> tips_objective_and_gradient(
    const SoftmaxPolicy& policy, std::span<const LoggedSample> batch,
    std::span<const double> propensities, double lambda);

/// Objective only (same reduction order as the gradient path).
double tips_objective(const SoftmaxPolicy& policy, std::span<const LoggedSample> batch,
                      std::span<const double> propensities, double lambda);

/// Mini-batch gradient descent with momentum on the translated objective for
/// one fixed lambda. Deterministic given config.seed. Records the final
/// full-dataset matching factor and self-normalized risk.
TrainRun train_tips(const LoggedDataset& data, std::span<const double> propensities,
                    double lambda, const PolicyArch& arch, const TrainConfig& config);

/// Grid of translation candidates with the outer minimization over the
/// self-normalized risk. Grid fractions map affinely onto [min loss, max loss];
/// for binary 0/1 losses that is the identity. Per-candidate seeds derive from
/// config.seed mixed with the grid index. Every candidate is returned.
///
/// By default the selection quantities (matching factor and self-normalized
/// risk) are computed on the training set, as the source procedure is
/// written. Passing `selection` evaluates them on that dataset instead,
/// decoupling candidate selection from the data the candidates trained on.
struct GridTrainResult {
    SoftmaxPolicy policy;  // winner
    int winner_index = -1;
    std::vector<TrainRun> runs;
    double loss_lo = 0.0, loss_hi = 0.0;
};

struct SelectionData {
    const LoggedDataset* data = nullptr;
    std::span<const double> propensities;
};

GridTrainResult tips_grid_train(const LoggedDataset& data,
                                std::span<const double> propensities,
                                const PolicyArch& arch, const TrainConfig& config,
                                const SelectionData* selection = nullptr);

/// Cross-entropy fit of the propensity model on (context, logged action)
/// pairs, plus the floored estimates on `data`.
struct PropensityFit {
    SoftmaxPolicy model;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    std::vector<double> propensities;  // floored estimates on `data`
    std::size_t clipped_count = 0;
};

PropensityFit fit_propensity_model(const LoggedDataset& data,
                                   const LoggedDataset& propensity_inputs,
                                   const PolicyArch& arch, const TrainConfig& config);

/// Full pipeline: fit the propensity model on (features, logged action) pairs
/// from `propensity_inputs`, floor the estimated propensities, run the
/// translation grid on `data`, and return the candidate with minimal
/// self-normalized risk plus the complete audit trail.
struct EtipsResult {
    SoftmaxPolicy policy;  // winner
    int winner_index = -1;
    std::vector<TrainRun> runs;
    double loss_lo = 0.0, loss_hi = 0.0;
    SoftmaxPolicy propensity_model;
    double propensity_train_accuracy = 0.0;
    double propensity_val_accuracy = 0.0;
    std::vector<double> propensities;  // floored estimates actually used
    std::size_t clipped_count = 0;
};

EtipsResult etips_train(const LoggedDataset& data, const LoggedDataset& propensity_inputs,
                        const PolicyArch& arch, const TrainConfig& config);

/// Max relative discrepancy between the analytic gradient and central finite
/// differences. Perturbs every parameter, or a deterministic random subset of
/// 64 when there are more than 500. Steps outside [1e-8, 1e-3] trigger a
/// cancellation warning on stderr but still run.
double finite_difference_check(const SoftmaxPolicy& policy,
                               std::span<const LoggedSample> batch,
                               std::span<const double> propensities, double lambda,
                               double step);

/// Generic central-difference check used by the above and by test surrogates:
/// perturbs params[i] in place (restoring afterwards) and compares against
/// analytic[i] for each index in `subset` (all indices when empty).
double fd_max_rel_err(std::span<double> params, const std::function<double()>& objective,
                      std::span<const double> analytic, double step,
                      std::span<const std::size_t> subset = {});

}  // namespace blbf
