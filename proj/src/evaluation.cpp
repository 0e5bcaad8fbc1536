#include "blbf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "blbf/errors.hpp"
#include "blbf/kernels.hpp"
#include "blbf/report.hpp"
#include "blbf/rng.hpp"
#include "blbf/training.hpp"

namespace blbf {

Verdict diagnose_overfit(double tmf_value) {
    if (tmf_value >= 0.5) return Verdict::Healthy;
    if (tmf_value >= 0.1) return Verdict::Suspicious;
    return Verdict::Overfit;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Healthy: return "healthy";
        case Verdict::Suspicious: return "suspicious";
        case Verdict::Overfit: return "overfit";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Offline evaluation
// ---------------------------------------------------------------------------

namespace {

std::vector<int> greedy_actions_of(const EvalPolicy& entry, const LoggedDataset& test) {
    std::vector<int> out(test.samples.size());
    if (std::holds_alternative<SoftmaxPolicy>(entry.rule)) {
        const auto& policy = std::get<SoftmaxPolicy>(entry.rule);
        PolicyWorkspace ws;
        ws.resize(policy.arch());
        for (std::size_t i = 0; i < test.samples.size(); ++i) {
            policy.distribution_into(test.samples[i].features.data(), ws);
            int best = 0;
            for (int k = 1; k < policy.arch().n_actions; ++k)
                if (ws.p[k] > ws.p[best]) best = k;
            out[i] = best;
        }
    } else {
        const auto& model = std::get<LossModel>(entry.rule);
        for (std::size_t i = 0; i < test.samples.size(); ++i)
            out[i] = direct_method_action(model, test.samples[i].features);
    }
    return out;
}

std::string cell_text(const EvalCell& c, const char* fmt = "%.4f") {
    if (!c.value) return c.marker;
    char buf[48];
    std::snprintf(buf, sizeof(buf), fmt, *c.value);
    return buf;
}

}  // namespace

EvaluationReport evaluate_offline(const LoggedDataset& test,
                                  const std::vector<EvalPolicy>& policies,
                                  const SoftmaxPolicy& propensity_model,
                                  const LossModel& loss_model, const Featurizer& featurizer,
                                  double propensity_floor) {
    test.validate();
    if (policies.empty()) throw DataError("evaluate_offline: no policies to evaluate");

    const PropensityEstimate est =
        estimate_propensities(propensity_model, featurizer, test, propensity_floor);
    const std::vector<double> losses = test.losses();

    EvaluationReport report;
    report.dataset_hash = dataset_hash(test);
    report.m = test.samples.size();
    report.n_actions = test.n_actions;
    report.propensity_floor = propensity_floor;

    for (const auto& entry : policies) {
        EvalRow row;
        row.name = entry.name;
        row.clipped_count = est.clipped_count;

        const std::vector<int> greedy = greedy_actions_of(entry, test);
        try {
            const EstimateReport a = atenp_greedy(test, greedy);
            row.atenp.value = a.value;
            row.group_one_size = a.group_one_size;
            row.group_two_size = a.group_two_size;
        } catch (const EmptyGroupError& e) {
            row.atenp.marker = "empty-group(one=" + std::to_string(e.group_one) +
                               ",two=" + std::to_string(e.group_two) + ")";
            row.group_one_size = e.group_one;
            row.group_two_size = e.group_two;
        }

        if (entry.probabilistic && std::holds_alternative<SoftmaxPolicy>(entry.rule)) {
            const auto& policy = std::get<SoftmaxPolicy>(entry.rule);
            std::vector<double> probs(test.samples.size());
            PolicyWorkspace ws;
            ws.resize(policy.arch());
            for (std::size_t i = 0; i < test.samples.size(); ++i) {
                policy.distribution_into(test.samples[i].features.data(), ws);
                probs[i] = ws.p[test.samples[i].action];
            }
            row.ips.value = ips_risk(losses, probs, est.values).value;
            row.dr.value = dr_risk(test, policy, est.values, loss_model).value;
            const double s = tmf(probs, est.values);
            row.tmf.value = s;
            row.verdict = to_string(diagnose_overfit(s));
        } else {
            // No action probabilities: importance-weighted cells cannot be
            // computed for a deterministic rule.
            row.ips.marker = "n/a";
            row.dr.marker = "n/a";
            row.tmf.marker = "n/a";
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string EvaluationReport::to_table() const {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"policy", "ATENP", "IPS", "DR", "TMF", "group1", "group2", "verdict"});
    for (const auto& row : rows) {
        std::vector<std::string> r;
        r.push_back(row.name);
        r.push_back(cell_text(row.atenp));
        r.push_back(cell_text(row.ips));
        r.push_back(cell_text(row.dr));
        r.push_back(cell_text(row.tmf));
        r.push_back(row.group_one_size ? std::to_string(*row.group_one_size) : "-");
        r.push_back(row.group_two_size ? std::to_string(*row.group_two_size) : "-");
        r.push_back(row.verdict.empty() ? "-" : row.verdict);
        cells.push_back(std::move(r));
    }
    std::vector<std::size_t> width(cells.front().size(), 0);
    for (const auto& r : cells)
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    std::string out;
    for (const auto& r : cells) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            out += r[c];
            if (c + 1 < r.size()) out.append(width[c] - r[c].size() + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simulation study
// ---------------------------------------------------------------------------

Method method_from_string(const std::string& s) {
    if (s == "dm") return Method::DM;
    if (s == "rp") return Method::RP;
    if (s == "ips") return Method::IPS;
    if (s == "tips") return Method::TIPS;
    if (s == "eips") return Method::EIPS;
    if (s == "etips") return Method::ETIPS;
    if (s == "skyline") return Method::SKYLINE;
    throw DataError("unknown method: " + s);
}

std::string to_string(Method m) {
    switch (m) {
        case Method::DM: return "dm";
        case Method::RP: return "rp";
        case Method::IPS: return "ips";
        case Method::TIPS: return "tips";
        case Method::EIPS: return "eips";
        case Method::ETIPS: return "etips";
        case Method::SKYLINE: return "skyline";
    }
    return "?";
}

std::vector<SupervisedSample> realize_task(const TaskSpec& task, std::uint64_t seed) {
    if (task.kind == TaskSpec::Kind::Counting) {
        const auto& c = task.counting;
        return generate_counting_task(c.n, c.n_classes, c.vocab, c.seq_len_mean,
                                      c.seq_len_spread, seed);
    }
    return load_idx_pair(task.idx_images, task.idx_labels);
}

namespace {

struct FoldData {
    std::vector<SupervisedSample> train, test;
    Featurizer featurizer;
    int n_classes = 0;
};

FoldData split_task(const TaskSpec& task, const StudyConfig& config, std::uint64_t seed) {
    std::vector<SupervisedSample> all = realize_task(task, mix_seed(seed, 1));
    if (!(task.test_fraction > 0.0) || !(task.test_fraction < 1.0))
        throw DataError("test_fraction must be in (0, 1)");

    FoldData fold;
    fold.featurizer.mode = config.featurizer_mode;
    fold.featurizer.token_width = static_cast<int>(all.front().sequence.front().size());
    fold.featurizer.static_dim = static_cast<int>(all.front().static_features.size());
    for (const auto& s : all) fold.n_classes = std::max(fold.n_classes, s.label + 1);

    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, 2));
    rng.shuffle(order);
    const auto test_count = static_cast<std::size_t>(
        std::llround(task.test_fraction * static_cast<double>(all.size())));
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < test_count ? fold.test : fold.train).push_back(std::move(all[order[i]]));
    if (fold.train.empty() || fold.test.empty())
        throw DataError("task split left one side empty");
    return fold;
}

double stddev_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

FoldResult run_fold(const TaskSpec& task, const std::vector<Method>& methods,
                    const StudyConfig& config, std::uint64_t fold_seed) {
    if (methods.empty()) throw DataError("run_fold: no methods requested");
    FoldData fold = split_task(task, config, fold_seed);

    FoldResult result;
    result.fold_seed = fold_seed;

    // Logging policy on a small supervised subset, early-stopped into the band.
    LoggingPolicyResult logging =
        train_logging_policy(fold.train, fold.featurizer, config.logging_subset_fraction,
                             config.logging_band, mix_seed(fold_seed, 3));
    result.logging_accuracy = accuracy(logging.policy, fold.featurizer, fold.test);

    // Conversion pool: training samples minus (by default) the logging subset.
    std::vector<SupervisedSample> pool;
    if (config.logging_subset_disjoint) {
        std::vector<bool> used(fold.train.size(), false);
        for (std::size_t i : logging.subset_indices) used[i] = true;
        for (std::size_t i = 0; i < fold.train.size(); ++i)
            if (!used[i]) pool.push_back(fold.train[i]);
    } else {
        pool = fold.train;
    }

    BanditConversion converted =
        convert_to_bandit(pool, fold.featurizer, logging.policy, mix_seed(fold_seed, 4));
    // The logging policy may miss some classes entirely; keep K = n_classes.
    converted.data.n_actions = std::max(converted.data.n_actions, fold.n_classes);
    {
        std::vector<double> losses = converted.data.losses();
        result.mean_converted_loss =
            kern::pairwise_sum(losses.data(), losses.size()) /
            static_cast<double>(losses.size());
    }

    const int d = fold.featurizer.output_dim();
    const PolicyArch arch{d, config.hidden, fold.n_classes, true};

    // Packed training matrices for the supervised components.
    const std::vector<double> pool_X = featurize_all(fold.featurizer, pool);
    std::vector<int> pool_labels(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool_labels[i] = pool[i].label;

    const std::vector<double> logged_props = converted.data.logged_propensities();

    for (Method method : methods) {
        const std::uint64_t seed = mix_seed(fold_seed, 16 + static_cast<int>(method));
        TrainConfig cfg = config.train;
        cfg.seed = seed;
        MethodOutcome outcome;
        switch (method) {
            case Method::SKYLINE: {
                SupervisedResult sup = train_supervised(pool_X, pool_labels, arch, cfg);
                outcome.accuracy = accuracy(sup.policy, fold.featurizer, fold.test);
                break;
            }
            case Method::DM: {
                LossModelResult lm = train_loss_model(converted.data, config.hidden, cfg);
                std::size_t hits = 0;
                for (const auto& s : fold.test) {
                    const std::vector<double> x = fold.featurizer.apply(s);
                    if (direct_method_action(lm.model, x) == s.label) ++hits;
                }
                outcome.accuracy =
                    static_cast<double>(hits) / static_cast<double>(fold.test.size());
                break;
            }
            case Method::RP: {
                SoftmaxPolicy rp = baseline_policy(BaselineKind::Random, converted.data);
                outcome.accuracy = accuracy(rp, fold.featurizer, fold.test);
                std::vector<double> probs(converted.data.size(),
                                          1.0 / converted.data.n_actions);
                outcome.tmf = tmf(probs, logged_props);
                break;
            }
            case Method::IPS: {
                TrainRun run = train_tips(converted.data, logged_props, 0.0, arch, cfg);
                outcome.accuracy = accuracy(run.policy, fold.featurizer, fold.test);
                outcome.tmf = run.tmf_final;
                break;
            }
            case Method::TIPS: {
                GridTrainResult grid =
                    tips_grid_train(converted.data, logged_props, arch, cfg);
                outcome.accuracy = accuracy(grid.policy, fold.featurizer, fold.test);
                outcome.tmf = grid.runs[grid.winner_index].tmf_final;
                break;
            }
            case Method::EIPS: {
                // Estimated propensities, no translation.
                PropensityFit fit =
                    fit_propensity_model(converted.data, converted.data, arch, cfg);
                TrainRun run = train_tips(converted.data, fit.propensities, 0.0, arch, cfg);
                outcome.accuracy = accuracy(run.policy, fold.featurizer, fold.test);
                outcome.tmf = run.tmf_final;
                outcome.propensity_accuracy =
                    accuracy(fit.model, fold.featurizer, fold.test);
                break;
            }
            case Method::ETIPS: {
                EtipsResult fitted = etips_train(converted.data, converted.data, arch, cfg);
                outcome.accuracy = accuracy(fitted.policy, fold.featurizer, fold.test);
                outcome.tmf = fitted.runs[fitted.winner_index].tmf_final;
                outcome.propensity_accuracy =
                    accuracy(fitted.propensity_model, fold.featurizer, fold.test);
                break;
            }
        }
        result.outcomes[method] = std::move(outcome);
    }
    return result;
}

SimulationReport run_simulation_study(const TaskSpec& task,
                                      const std::vector<Method>& methods, int folds,
                                      std::uint64_t seed, const StudyConfig& config) {
    if (folds < 2) throw DataError("simulation study requires folds >= 2");
    SimulationReport report;
    report.k = folds;
    for (int f = 0; f < folds; ++f)
        report.folds.push_back(run_fold(task, methods, config, mix_seed(seed, 100 + f)));

    std::vector<double> logging_accs;
    for (const auto& fold : report.folds) logging_accs.push_back(fold.logging_accuracy);
    report.logging_mean = kern::pairwise_sum(logging_accs.data(), logging_accs.size()) /
                          static_cast<double>(logging_accs.size());
    report.logging_std = stddev_of(logging_accs, report.logging_mean);

    for (Method method : methods) {
        MethodSummary summary;
        summary.method = method;
        for (const auto& fold : report.folds) {
            const MethodOutcome& o = fold.outcomes.at(method);
            summary.fold_accuracies.push_back(o.accuracy);
            if (o.tmf) summary.fold_tmfs.push_back(*o.tmf);
        }
        summary.mean =
            kern::pairwise_sum(summary.fold_accuracies.data(), summary.fold_accuracies.size()) /
            static_cast<double>(summary.fold_accuracies.size());
        summary.stddev = stddev_of(summary.fold_accuracies, summary.mean);
        report.methods.push_back(std::move(summary));
    }
    return report;
}

std::string SimulationReport::to_table() const {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "logging accuracy: %.4f +- %.4f over %d folds\n",
                  logging_mean, logging_std, k);
    out += buf;
    for (const auto& m : methods) {
        double tmf_mean = 0.0;
        if (!m.fold_tmfs.empty()) {
            for (double t : m.fold_tmfs) tmf_mean += t;
            tmf_mean /= static_cast<double>(m.fold_tmfs.size());
        }
        std::snprintf(buf, sizeof(buf), "%-8s accuracy %.4f +- %.4f   tmf %s\n",
                      to_string(m.method).c_str(), m.mean, m.stddev,
                      m.fold_tmfs.empty() ? "-" : format_double(tmf_mean).c_str());
        out += buf;
    }
    return out;
}

}  // namespace blbf
