#include "blbf/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "blbf/errors.hpp"
#include "blbf/estimators.hpp"
#include "blbf/kernels.hpp"
#include "blbf/report.hpp"
#include "blbf/rng.hpp"

namespace blbf {

namespace {

// Forward pass plus logit-gradient for one sample of the translated
// objective. Returns the objective term c * pi(a|x) and leaves
// scale * c * pi(a|x) * (e_a - p) in ws.dz.
double tips_forward_backward(const SoftmaxPolicy& policy, PolicyWorkspace& ws,
                             const double* x, int action, double c, double scale) {
    policy.distribution_into(x, ws);
    const double pa = ws.p[action];
    const double term = c * pa;
    const double coef = scale * term;
    for (int k = 0; k < policy.arch().n_actions; ++k) ws.dz[k] = -coef * ws.p[k];
    ws.dz[action] += coef;
    return term;
}

void check_batch(const SoftmaxPolicy& policy, std::span<const LoggedSample> batch,
                 std::span<const double> propensities) {
    if (batch.empty()) throw DataError("tips objective: empty batch");
    if (propensities.size() != batch.size())
        throw DataError("tips objective: propensity count mismatch");
    for (double p : propensities)
        if (!(p > 0.0)) throw DataError("tips objective: propensity must be > 0");
    for (const auto& s : batch)
        if (static_cast<int>(s.features.size()) != policy.arch().input_dim)
            throw DataError("tips objective: feature dimension mismatch");
}

}  // namespace

std::pair<double, std::vector<double>> tips_objective_and_gradient(
    const SoftmaxPolicy& policy, std::span<const LoggedSample> batch,
    std::span<const double> propensities, double lambda) {
    check_batch(policy, batch, propensities);
    const std::size_t b = batch.size();
    const double inv_b = 1.0 / static_cast<double>(b);

    PolicyWorkspace ws;
    ws.resize(policy.arch());
    std::vector<double> grad(policy.n_params(), 0.0);
    std::vector<double> terms(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double c = (batch[i].loss - lambda) / propensities[i];
        terms[i] = tips_forward_backward(policy, ws, batch[i].features.data(),
                                         batch[i].action, c, inv_b);
        policy.accumulate_gradient(batch[i].features.data(), ws, grad.data());
    }
    const double objective = kern::pairwise_sum(terms.data(), b) * inv_b;
    if (!std::isfinite(objective)) throw NumericError("tips objective is non-finite");
    return {objective, std::move(grad)};
}

double tips_objective(const SoftmaxPolicy& policy, std::span<const LoggedSample> batch,
                      std::span<const double> propensities, double lambda) {
    check_batch(policy, batch, propensities);
    PolicyWorkspace ws;
    ws.resize(policy.arch());
    std::vector<double> terms(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        policy.distribution_into(batch[i].features.data(), ws);
        terms[i] = (batch[i].loss - lambda) / propensities[i] * ws.p[batch[i].action];
    }
    return kern::pairwise_sum(terms.data(), terms.size()) /
           static_cast<double>(terms.size());
}

TrainRun train_tips(const LoggedDataset& data, std::span<const double> propensities,
                    double lambda, const PolicyArch& arch, const TrainConfig& config) {
    config.validate();
    arch.validate();
    const std::size_t m = data.samples.size();
    if (m == 0) throw DataError("train_tips: empty dataset");
    if (propensities.size() != m) throw DataError("train_tips: propensity count mismatch");
    for (double p : propensities)
        if (!(p > 0.0)) throw DataError("train_tips: propensity must be > 0");
    if (arch.input_dim != data.feature_dim)
        throw DataError("train_tips: arch input dim != data feature dim");

    // Pack features once; gather per batch.
    const auto d = static_cast<std::size_t>(data.feature_dim);
    std::vector<double> X(m * d);
    std::vector<int> actions(m);
    std::vector<double> coef(m);  // (loss - lambda) / p
    for (std::size_t i = 0; i < m; ++i) {
        const auto& s = data.samples[i];
        std::copy(s.features.begin(), s.features.end(), X.begin() + i * d);
        actions[i] = s.action;
        coef[i] = (s.loss - lambda) / propensities[i];
    }

    TrainRun run;
    run.lambda = lambda;
    run.policy = SoftmaxPolicy::random_init(arch, config.seed);
    run.policy.featurizer = Featurizer{FeaturizerMode::MeanPool, data.feature_dim, 0};

    PolicyWorkspace ws;
    ws.resize(arch);
    std::vector<double> velocity(run.policy.n_params(), 0.0);
    std::vector<double> grad(run.policy.n_params(), 0.0);
    std::vector<double> terms(m);

    auto full_objective = [&]() {
        for (std::size_t i = 0; i < m; ++i) {
            run.policy.distribution_into(X.data() + i * d, ws);
            terms[i] = coef[i] * ws.p[actions[i]];
        }
        return kern::pairwise_sum(terms.data(), m) / static_cast<double>(m);
    };

    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(config.seed, 0x5481e5u));
    const auto batch = static_cast<std::size_t>(config.batch_size);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < m; start += batch) {
            const std::size_t count = std::min(batch, m - start);
            const double inv_b = 1.0 / static_cast<double>(count);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t j = 0; j < count; ++j) {
                const std::size_t i = order[start + j];
                tips_forward_backward(run.policy, ws, X.data() + i * d, actions[i],
                                      coef[i], inv_b);
                run.policy.accumulate_gradient(X.data() + i * d, ws, grad.data());
            }
            kern::vscale_add(velocity.data(), config.momentum, -config.learning_rate,
                             grad.data(), grad.size());
            kern::vadd(run.policy.params().data(), velocity.data(), grad.size());
        }
        const double obj = full_objective();
        run.objective_trace.push_back(obj);
        if (!std::isfinite(obj))
            throw DivergenceError("translated-objective training diverged at epoch " +
                                      std::to_string(epoch + 1),
                                  epoch + 1);
    }
    run.policy.validate_finite();

    // Line-5 bookkeeping: matching factor and self-normalized risk of the
    // final policy on the full dataset.
    std::vector<double> probs(m);
    for (std::size_t i = 0; i < m; ++i) {
        run.policy.distribution_into(X.data() + i * d, ws);
        probs[i] = ws.p[actions[i]];
    }
    run.tmf_final = tmf(probs, propensities);
    if (run.tmf_final > 0.0) {
        run.admitted = true;
        run.snips = snips_risk(data.losses(), probs, propensities).value;
    } else {
        run.admitted = false;
        run.snips = std::numeric_limits<double>::quiet_NaN();
    }
    return run;
}

GridTrainResult tips_grid_train(const LoggedDataset& data,
                                std::span<const double> propensities,
                                const PolicyArch& arch, const TrainConfig& config,
                                const SelectionData* selection) {
    config.validate();
    if (config.lambda_grid.empty()) throw DataError("lambda grid is empty");
    if (selection &&
        (!selection->data ||
         selection->propensities.size() != selection->data->samples.size()))
        throw DataError("selection dataset and propensities disagree");

    double lo = data.samples.front().loss;
    double hi = lo;
    for (const auto& s : data.samples) {
        lo = std::min(lo, s.loss);
        hi = std::max(hi, s.loss);
    }
    if (!(lo < hi))
        throw DataError("loss range is degenerate (all losses equal " + format_double(lo) +
                        "); translation grid has no interior");

    GridTrainResult result;
    result.loss_lo = lo;
    result.loss_hi = hi;
    result.runs.reserve(config.lambda_grid.size());
    for (std::size_t j = 0; j < config.lambda_grid.size(); ++j) {
        const double lambda = lo + config.lambda_grid[j] * (hi - lo);
        TrainConfig candidate = config;
        candidate.seed = mix_seed(config.seed, j);
        TrainRun run = train_tips(data, propensities, lambda, arch, candidate);
        if (selection) {
            // Re-measure the selection quantities on the held-out data.
            const LoggedDataset& sel = *selection->data;
            std::vector<double> probs(sel.samples.size());
            PolicyWorkspace ws;
            ws.resize(arch);
            for (std::size_t i = 0; i < sel.samples.size(); ++i) {
                run.policy.distribution_into(sel.samples[i].features.data(), ws);
                probs[i] = ws.p[sel.samples[i].action];
            }
            run.tmf_final = tmf(probs, selection->propensities);
            if (run.tmf_final > 0.0) {
                run.admitted = true;
                run.snips = snips_risk(sel.losses(), probs, selection->propensities).value;
            } else {
                run.admitted = false;
                run.snips = std::numeric_limits<double>::quiet_NaN();
            }
        }
        result.runs.push_back(std::move(run));
    }
    for (std::size_t j = 0; j < result.runs.size(); ++j) {
        const TrainRun& run = result.runs[j];
        if (!run.admitted) continue;
        if (result.winner_index < 0 ||
            run.snips < result.runs[result.winner_index].snips)
            result.winner_index = static_cast<int>(j);
    }
    if (result.winner_index < 0)
        throw NumericError(
            "all translation candidates were flagged: no overlap with logged actions");
    result.policy = result.runs[result.winner_index].policy;
    return result;
}

PropensityFit fit_propensity_model(const LoggedDataset& data,
                                   const LoggedDataset& propensity_inputs,
                                   const PolicyArch& arch, const TrainConfig& config) {
    config.validate();
    if (propensity_inputs.feature_dim != data.feature_dim)
        throw DataError("propensity fit: inputs feature dim mismatch");

    const std::size_t n = propensity_inputs.samples.size();
    const auto d = static_cast<std::size_t>(propensity_inputs.feature_dim);
    std::vector<double> X(n * d);
    std::vector<int> actions(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = propensity_inputs.samples[i];
        std::copy(s.features.begin(), s.features.end(), X.begin() + i * d);
        actions[i] = s.action;
    }
    PolicyArch pm_arch = arch;
    pm_arch.n_actions = std::max(arch.n_actions, propensity_inputs.n_actions);
    TrainConfig pm_config = config;
    pm_config.seed = mix_seed(config.seed, 0x9e0du);
    SupervisedResult pm = train_supervised(X, actions, pm_arch, pm_config);

    PropensityEstimate est = estimate_propensities(pm.policy, pm.policy.featurizer, data,
                                                   config.propensity_floor);
    PropensityFit fit;
    fit.model = std::move(pm.policy);
    fit.train_accuracy = pm.train_accuracy;
    fit.val_accuracy = pm.val_accuracy;
    fit.propensities = std::move(est.values);
    fit.clipped_count = est.clipped_count;
    return fit;
}

EtipsResult etips_train(const LoggedDataset& data, const LoggedDataset& propensity_inputs,
                        const PolicyArch& arch, const TrainConfig& config) {
    config.validate();
    if (config.lambda_grid.empty()) throw DataError("lambda grid is empty");

    // Line 1 and 2: propensity model and floored estimates.
    PropensityFit fit = fit_propensity_model(data, propensity_inputs, arch, config);

    // Lines 3-7: translation grid and outer minimization.
    GridTrainResult grid = tips_grid_train(data, fit.propensities, arch, config);

    EtipsResult out;
    out.policy = std::move(grid.policy);
    out.winner_index = grid.winner_index;
    out.runs = std::move(grid.runs);
    out.loss_lo = grid.loss_lo;
    out.loss_hi = grid.loss_hi;
    out.propensity_model = std::move(fit.model);
    out.propensity_train_accuracy = fit.train_accuracy;
    out.propensity_val_accuracy = fit.val_accuracy;
    out.propensities = std::move(fit.propensities);
    out.clipped_count = fit.clipped_count;
    return out;
}

double fd_max_rel_err(std::span<double> params, const std::function<double()>& objective,
                      std::span<const double> analytic, double step,
                      std::span<const std::size_t> subset) {
    if (!(step > 0.0)) throw DataError("finite differences: step must be > 0");
    std::vector<std::size_t> all;
    if (subset.empty()) {
        all.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) all[i] = i;
        subset = all;
    }
    double worst = 0.0;
    for (std::size_t i : subset) {
        const double saved = params[i];
        params[i] = saved + step;
        const double plus = objective();
        params[i] = saved - step;
        const double minus = objective();
        params[i] = saved;
        const double fd = (plus - minus) / (2.0 * step);
        const double g = analytic[i];
        const double rel = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6});
        worst = std::max(worst, rel);
    }
    return worst;
}

double finite_difference_check(const SoftmaxPolicy& policy,
                               std::span<const LoggedSample> batch,
                               std::span<const double> propensities, double lambda,
                               double step) {
    if (!(step > 0.0)) throw DataError("finite_difference_check: step must be > 0");
    if (step < 1e-8 || step > 1e-3)
        std::cerr << "warning: finite-difference step " << format_double(step)
                  << " outside [1e-8, 1e-3]; cancellation-dominated regime\n";

    auto [objective_value, analytic] =
        tips_objective_and_gradient(policy, batch, propensities, lambda);
    (void)objective_value;

    SoftmaxPolicy probe = policy;
    std::vector<std::size_t> subset;
    if (probe.n_params() > 500) {
        Rng rng(mix_seed(0xfdc8ecu, probe.n_params()));
        std::vector<std::size_t> all(probe.n_params());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        rng.shuffle(all);
        subset.assign(all.begin(), all.begin() + 64);
    }
    auto objective = [&]() { return tips_objective(probe, batch, propensities, lambda); };
    return fd_max_rel_err(probe.params(), objective, analytic, step, subset);
}

}  // namespace blbf
