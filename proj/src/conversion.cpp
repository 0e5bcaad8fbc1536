#include "blbf/conversion.hpp"

#include <cmath>

#include "blbf/errors.hpp"
#include "blbf/rng.hpp"

namespace blbf {

BanditConversion convert_to_bandit(std::span<const SupervisedSample> supervised,
                                   const Featurizer& featurizer,
                                   const SoftmaxPolicy& logging_policy,
                                   std::uint64_t seed) {
    if (supervised.empty()) throw DataError("convert_to_bandit: no samples");
    if (logging_policy.arch().input_dim != featurizer.output_dim())
        throw DataError("convert_to_bandit: policy input dim " +
                        std::to_string(logging_policy.arch().input_dim) +
                        " != featurizer output dim " +
                        std::to_string(featurizer.output_dim()));

    const int k = logging_policy.arch().n_actions;
    Rng rng(seed);
    BanditConversion out;
    out.data.n_actions = k;
    out.data.feature_dim = featurizer.output_dim();
    out.data.samples.reserve(supervised.size());
    out.labels.reserve(supervised.size());

    for (const auto& sup : supervised) {
        LoggedSample s;
        s.features = featurizer.apply(sup);
        const std::vector<double> dist = logging_policy.action_distribution(s.features);
        for (double p : dist)
            if (!std::isfinite(p)) throw NumericError("logging policy produced non-finite output");
        s.action = rng.draw_discrete(dist);
        s.logged_propensity = dist[s.action];
        s.loss = (s.action == sup.label) ? 0.0 : 1.0;
        out.data.samples.push_back(std::move(s));
        out.labels.push_back(sup.label);
    }
    out.data.validate();
    return out;
}

EnumeratedOutcomes enumerate_logged_outcomes(const ToyEnvironment& env,
                                             const SoftmaxPolicy& logging_policy) {
    env.validate();
    const std::size_t n_ctx = env.n_contexts();
    const int k = env.n_actions();
    if (n_ctx * static_cast<std::size_t>(k) > 10000)
        throw DataError("enumerate_logged_outcomes: more than 10^4 context-action pairs");
    if (logging_policy.arch().n_actions != k)
        throw DataError("enumerate_logged_outcomes: policy actions != environment actions");

    EnumeratedOutcomes out;
    out.data.n_actions = k;
    out.data.feature_dim = static_cast<int>(env.context_features.front().size());
    for (std::size_t c = 0; c < n_ctx; ++c) {
        const std::vector<double> dist =
            logging_policy.action_distribution(env.context_features[c]);
        for (int a = 0; a < k; ++a) {
            const double weight = env.context_probs[c] * dist[a];
            if (weight < 1e-300)
                throw NumericError("enumerate_logged_outcomes: weight underflow at context " +
                                   std::to_string(c) + ", action " + std::to_string(a));
            LoggedSample s;
            s.features = env.context_features[c];
            s.action = a;
            s.loss = env.loss_table[c][a];
            s.logged_propensity = dist[a];
            out.data.samples.push_back(std::move(s));
            out.weights.push_back(weight);
        }
    }
    out.data.validate();
    return out;
}

}  // namespace blbf
