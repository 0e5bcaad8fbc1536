#include "blbf/estimators.hpp"

#include <cmath>

#include "blbf/errors.hpp"
#include "blbf/kernels.hpp"

namespace blbf {

namespace {

void check_lengths(std::span<const double> probs, std::span<const double> propensities,
                   std::size_t m) {
    if (m == 0) throw DataError("estimator: empty sample set");
    if (probs.size() != m || propensities.size() != m)
        throw DataError("estimator: array lengths disagree (" + std::to_string(m) + ", " +
                        std::to_string(probs.size()) + ", " +
                        std::to_string(propensities.size()) + ")");
    for (double p : propensities)
        if (!(p > 0.0)) throw DataError("estimator: propensity must be > 0");
}

std::vector<double> ratios(std::span<const double> probs,
                           std::span<const double> propensities) {
    std::vector<double> r(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) r[i] = probs[i] / propensities[i];
    return r;
}

double mean_pairwise(std::span<const double> terms) {
    return kern::pairwise_sum(terms.data(), terms.size()) /
           static_cast<double>(terms.size());
}

}  // namespace

EstimateReport ips_risk(std::span<const double> losses, std::span<const double> policy_probs,
                        std::span<const double> propensities) {
    check_lengths(policy_probs, propensities, losses.size());
    std::vector<double> terms = ratios(policy_probs, propensities);
    for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = losses[i] * terms[i];
    EstimateReport rep;
    rep.estimator = "ips";
    rep.m = losses.size();
    rep.value = mean_pairwise(terms);
    return rep;
}

EstimateReport ips_risk(const LoggedDataset& data, std::span<const double> policy_probs,
                        std::span<const double> propensities) {
    return ips_risk(data.losses(), policy_probs, propensities);
}

double tmf(std::span<const double> policy_probs, std::span<const double> propensities) {
    check_lengths(policy_probs, propensities, policy_probs.size());
    const std::vector<double> r = ratios(policy_probs, propensities);
    return mean_pairwise(r);
}

EstimateReport snips_risk(std::span<const double> losses, std::span<const double> policy_probs,
                          std::span<const double> propensities) {
    EstimateReport rep = ips_risk(losses, policy_probs, propensities);
    const double s = tmf(policy_probs, propensities);
    if (s == 0.0) throw NumericError("policy has no overlap with logged actions");
    rep.estimator = "snips";
    rep.value = rep.value / s;
    rep.tmf = s;
    return rep;
}

EstimateReport snips_risk(const LoggedDataset& data, std::span<const double> policy_probs,
                          std::span<const double> propensities) {
    return snips_risk(data.losses(), policy_probs, propensities);
}

EstimateReport translated_ips_risk(std::span<const double> losses,
                                   std::span<const double> policy_probs,
                                   std::span<const double> propensities, double lambda) {
    check_lengths(policy_probs, propensities, losses.size());
    std::vector<double> terms = ratios(policy_probs, propensities);
    for (std::size_t i = 0; i < terms.size(); ++i)
        terms[i] = (losses[i] - lambda) * terms[i];
    EstimateReport rep;
    rep.estimator = "tips";
    rep.m = losses.size();
    rep.value = mean_pairwise(terms);
    return rep;
}

EstimateReport translated_ips_risk(const LoggedDataset& data,
                                   std::span<const double> policy_probs,
                                   std::span<const double> propensities, double lambda) {
    return translated_ips_risk(data.losses(), policy_probs, propensities, lambda);
}

EstimateReport dr_risk(const LoggedDataset& data, const SoftmaxPolicy& policy,
                       std::span<const double> propensities, const LossModel& loss_model) {
    const std::size_t m = data.samples.size();
    if (m == 0) throw DataError("estimator: empty sample set");
    if (propensities.size() != m) throw DataError("estimator: array lengths disagree");
    if (policy.arch().input_dim != data.feature_dim ||
        loss_model.feature_dim() != data.feature_dim)
        throw DataError("dr_risk: dimension mismatch");
    if (loss_model.n_actions() < data.n_actions)
        throw DataError("dr_risk: loss model covers fewer actions than data");

    std::vector<double> terms(m);
    PolicyWorkspace ws;
    ws.resize(policy.arch());
    for (std::size_t i = 0; i < m; ++i) {
        const LoggedSample& s = data.samples[i];
        if (!(propensities[i] > 0.0)) throw DataError("estimator: propensity must be > 0");
        policy.distribution_into(s.features.data(), ws);
        const std::vector<double> predicted = loss_model.predict_all(s.features);
        double baseline = 0.0;
        for (int a = 0; a < data.n_actions; ++a) baseline += ws.p[a] * predicted[a];
        const double ratio = ws.p[s.action] / propensities[i];
        terms[i] = baseline + ratio * (s.loss - predicted[s.action]);
    }
    EstimateReport rep;
    rep.estimator = "dr";
    rep.m = m;
    rep.value = mean_pairwise(terms);
    return rep;
}

EstimateReport atenp_greedy(const LoggedDataset& data, std::span<const int> greedy_actions) {
    const std::size_t m = data.samples.size();
    if (m == 0) throw DataError("estimator: empty sample set");
    if (greedy_actions.size() != m) throw DataError("atenp: greedy action count mismatch");

    std::vector<double> one, two;
    for (std::size_t i = 0; i < m; ++i) {
        if (data.samples[i].action == greedy_actions[i])
            one.push_back(data.samples[i].loss);
        else
            two.push_back(data.samples[i].loss);
    }
    if (one.empty() || two.empty())
        throw EmptyGroupError("atenp: empty group (one=" + std::to_string(one.size()) +
                                  ", two=" + std::to_string(two.size()) + ")",
                              one.size(), two.size());
    EstimateReport rep;
    rep.estimator = "atenp";
    rep.m = m;
    rep.group_one_size = one.size();
    rep.group_two_size = two.size();
    rep.value = mean_pairwise(one) - mean_pairwise(two);
    return rep;
}

EstimateReport atenp(const LoggedDataset& data, const SoftmaxPolicy& policy,
                     const Featurizer& featurizer) {
    if (featurizer.output_dim() != data.feature_dim ||
        policy.arch().input_dim != data.feature_dim)
        throw DataError("atenp: dimension mismatch");
    std::vector<int> greedy(data.samples.size());
    PolicyWorkspace ws;
    ws.resize(policy.arch());
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        policy.distribution_into(data.samples[i].features.data(), ws);
        int best = 0;
        for (int k = 1; k < policy.arch().n_actions; ++k)
            if (ws.p[k] > ws.p[best]) best = k;
        greedy[i] = best;
    }
    return atenp_greedy(data, greedy);
}

double true_risk(const ToyEnvironment& env, const SoftmaxPolicy& policy) {
    env.validate();
    double risk = 0.0;
    for (std::size_t c = 0; c < env.n_contexts(); ++c) {
        const std::vector<double> dist = policy.action_distribution(env.context_features[c]);
        double inner = 0.0;
        for (int a = 0; a < env.n_actions(); ++a) inner += dist[a] * env.loss_table[c][a];
        risk += env.context_probs[c] * inner;
    }
    return risk;
}

double accuracy(const SoftmaxPolicy& policy, const Featurizer& featurizer,
                std::span<const SupervisedSample> supervised) {
    if (supervised.empty()) throw DataError("accuracy: empty sample set");
    std::size_t hits = 0;
    for (const auto& s : supervised) {
        const std::vector<double> x = featurizer.apply(s);
        if (policy.greedy_action(x) == s.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(supervised.size());
}

double accuracy_on_features(const SoftmaxPolicy& policy, std::span<const double> features,
                            std::size_t feature_dim, std::span<const int> labels) {
    if (labels.empty()) throw DataError("accuracy: empty sample set");
    if (features.size() != labels.size() * feature_dim)
        throw DataError("accuracy: feature matrix size mismatch");
    PolicyWorkspace ws;
    ws.resize(policy.arch());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        policy.distribution_into(features.data() + i * feature_dim, ws);
        int best = 0;
        for (int k = 1; k < policy.arch().n_actions; ++k)
            if (ws.p[k] > ws.p[best]) best = k;
        if (best == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace blbf
