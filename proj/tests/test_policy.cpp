#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "blbf/dataset.hpp"
#include "blbf/errors.hpp"
#include "blbf/featurizer.hpp"
#include "blbf/policy.hpp"
#include "blbf/rng.hpp"
#include "blbf/training.hpp"

using namespace blbf;

TEST_CASE("featurize: pooling modes") {
    Featurizer mean{FeaturizerMode::MeanPool, 3, 0};
    const std::vector<std::vector<double>> same = {{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}};
    CHECK(mean.apply(same, {}) == std::vector<double>{1.0, 2.0, 3.0});

    Featurizer last{FeaturizerMode::LastStep, 3, 0};
    const std::vector<std::vector<double>> two = {{1.0, 0.0, 0.0}, {0.0, 5.0, 1.0}};
    CHECK(last.apply(two, {}) == std::vector<double>{0.0, 5.0, 1.0});

    Featurizer cat{FeaturizerMode::MeanPoolConcatStatic, 3, 2};
    CHECK(cat.output_dim() == 5);
    const std::vector<double> out = cat.apply(two, {7.0, 8.0});
    CHECK(out.size() == 5);
    CHECK(out[3] == 7.0);
    CHECK(out[4] == 8.0);

    CHECK_THROWS_AS(mean.apply({{1.0, 2.0}}, {}), DataError);  // width mismatch
    CHECK_THROWS_AS(mean.apply({}, {}), DataError);            // empty sequence
}

TEST_CASE("action_distribution: uniform, shift invariance, closed form") {
    const PolicyArch arch{4, 0, 5, true};
    const SoftmaxPolicy zero = SoftmaxPolicy::zeros(arch);
    const std::vector<double> x{0.3, -0.2, 1.0, 0.0};
    const std::vector<double> p = zero.action_distribution(x);
    for (double v : p) CHECK(v == 1.0 / 5.0);
    CHECK(zero.greedy_action(x) == 0);  // tie rule

    // Adding a constant to every logit (via biases) barely moves anything.
    SoftmaxPolicy shifted = zero;
    for (int a = 0; a < 5; ++a) shifted.params()[20 + a] = 42.0;
    const std::vector<double> q = shifted.action_distribution(x);
    for (int a = 0; a < 5; ++a) CHECK(std::abs(q[a] - p[a]) <= 1e-12);
    CHECK(shifted.greedy_action(x) == zero.greedy_action(x));

    // Logits (0, ln 3) over two actions.
    const PolicyArch a2{1, 0, 2, true};
    SoftmaxPolicy two = SoftmaxPolicy::zeros(a2);
    two.params()[3] = std::log(3.0);  // bias of action 1
    const std::vector<double> d = two.action_distribution(std::vector<double>{0.0});
    CHECK(d[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(0.75).epsilon(1e-12));

    CHECK_THROWS_AS(zero.action_distribution(std::vector<double>{1.0, 2.0}), DataError);
    CHECK_THROWS_AS(
        zero.action_distribution(std::vector<double>{1.0, 2.0, std::nan(""), 0.0}),
        DataError);
}

TEST_CASE("normalization and stability properties") {
    Rng rng(44);
    for (int t = 0; t < 50; ++t) {
        PolicyArch arch;
        arch.input_dim = 1 + rng.below_int(6);
        arch.hidden = (t % 2 == 0) ? 0 : 1 + rng.below_int(16);
        arch.n_actions = 2 + rng.below_int(6);
        SoftmaxPolicy policy = SoftmaxPolicy::random_init(arch, rng.next_u64());
        // Stress: |feature| up to 1e3 and |parameter| up to 1e2.
        for (double& w : policy.params()) w = rng.uniform(-100.0, 100.0);
        std::vector<double> x(arch.input_dim);
        for (double& v : x) v = rng.uniform(-1e3, 1e3);
        const std::vector<double> p = policy.action_distribution(x);
        double total = 0.0;
        for (double v : p) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
    }
}

TEST_CASE("greedy tie-breaking picks the lowest action id") {
    const PolicyArch arch{1, 0, 3, true};
    SoftmaxPolicy policy = SoftmaxPolicy::zeros(arch);
    // Distribution (0.1, 0.7, 0.2) via log-probability biases.
    policy.params()[3] = std::log(0.1);
    policy.params()[4] = std::log(0.7);
    policy.params()[5] = std::log(0.2);
    CHECK(policy.greedy_action(std::vector<double>{0.0}) == 1);
}

TEST_CASE("cross-entropy gradient matches finite differences") {
    Rng rng(55);
    for (int t = 0; t < 10; ++t) {
        PolicyArch arch;
        arch.input_dim = 1 + rng.below_int(4);
        arch.hidden = (t % 2 == 0) ? 0 : 1 + rng.below_int(6);
        arch.n_actions = 2 + rng.below_int(3);
        SoftmaxPolicy policy = SoftmaxPolicy::random_init(arch, rng.next_u64());
        const std::size_t n = 1 + rng.below(6);
        std::vector<double> X(n * arch.input_dim);
        for (double& v : X) v = rng.uniform(-2.0, 2.0);
        std::vector<int> y(n);
        for (int& v : y) v = rng.below_int(arch.n_actions);

        auto [obj, grad] = ce_objective_and_gradient(policy, X, y);
        CHECK(std::isfinite(obj));
        SoftmaxPolicy probe = policy;
        const double err = fd_max_rel_err(
            probe.params(),
            [&] { return ce_objective_and_gradient(probe, X, y).first; }, grad, 1e-5);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("train_supervised: separable data, determinism, zero epochs") {
    // Linearly separable two-class set with a wide margin.
    Rng rng(66);
    const std::size_t n = 200;
    std::vector<double> X(n * 2);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        X[i * 2] = (label == 0 ? -1.0 : 1.0) + rng.uniform(-0.3, 0.3);
        X[i * 2 + 1] = rng.uniform(-1.0, 1.0);
        y[i] = label;
    }
    const PolicyArch arch{2, 0, 2, true};
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.batch_size = 32;
    cfg.epochs = 40;
    cfg.seed = 3;

    const SupervisedResult result = train_supervised(X, y, arch, cfg);
    CHECK(result.train_accuracy >= 0.95);
    CHECK(result.ce_trace.size() == 40);
    CHECK(result.ce_trace.back() < result.ce_trace.front());

    // Identical configs give bitwise-identical parameters.
    const SupervisedResult again = train_supervised(X, y, arch, cfg);
    CHECK(std::memcmp(again.policy.params().data(), result.policy.params().data(),
                      result.policy.n_params() * sizeof(double)) == 0);

    // Zero epochs returns the initialization.
    TrainConfig zero = cfg;
    zero.epochs = 0;
    const SupervisedResult init = train_supervised(X, y, arch, zero);
    const SoftmaxPolicy expected = SoftmaxPolicy::random_init(arch, cfg.seed);
    CHECK(std::memcmp(init.policy.params().data(), expected.params().data(),
                      expected.n_params() * sizeof(double)) == 0);
    CHECK(init.ce_trace.empty());
}

TEST_CASE("train_supervised: divergence raises a named epoch") {
    Rng rng(67);
    const std::size_t n = 64;
    std::vector<double> X(n * 2);
    for (double& v : X) v = rng.uniform(-1e3, 1e3);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
    const PolicyArch arch{2, 0, 2, true};
    TrainConfig cfg;
    cfg.learning_rate = 1e9;  // guaranteed blow-up
    cfg.epochs = 5;
    cfg.seed = 1;
    try {
        train_supervised(X, y, arch, cfg);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch >= 1);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("train_logging_policy lands inside the requested band") {
    const auto supervised = generate_counting_task(2000, 3, 10, 20, 5, 12);
    Featurizer f{FeaturizerMode::MeanPool, 10, 0};
    const LoggingPolicyResult result =
        train_logging_policy(supervised, f, 0.05, {0.60, 0.72}, 5);
    CHECK(result.heldout_accuracy >= 0.60);
    CHECK(result.heldout_accuracy <= 0.72);
    CHECK(result.subset_indices.size() == 100);  // 5% of 2000
    CHECK_THROWS_AS(train_logging_policy(supervised, f, 0.05, {0.2, 0.72}, 5), DataError);
    CHECK_THROWS_AS(train_logging_policy(supervised, f, 1.5, {0.6, 0.72}, 5), DataError);
}

TEST_CASE("estimate_propensities: values, fidelity, clipping") {
    const PolicyArch arch{2, 0, 3, true};
    LoggedDataset data;
    data.n_actions = 3;
    data.feature_dim = 2;
    Rng rng(8);
    for (int i = 0; i < 30; ++i) {
        LoggedSample s;
        s.features = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        s.action = rng.below_int(3);
        s.loss = 0.0;
        data.samples.push_back(std::move(s));
    }
    Featurizer f{FeaturizerMode::MeanPool, 2, 0};

    const SoftmaxPolicy uniform = SoftmaxPolicy::zeros(arch);
    const PropensityEstimate est = estimate_propensities(uniform, f, data);
    CHECK(est.clipped_count == 0);
    for (double p : est.values) CHECK(p == 1.0 / 3.0);

    // A model reproducing the logging policy exactly returns the logged values.
    SoftmaxPolicy logger = SoftmaxPolicy::random_init(arch, 77);
    for (auto& s : data.samples)
        s.logged_propensity = logger.action_distribution(s.features)[s.action];
    const PropensityEstimate same = estimate_propensities(logger, f, data);
    for (std::size_t i = 0; i < data.size(); ++i)
        CHECK(same.values[i] ==
              doctest::Approx(*data.samples[i].logged_propensity).epsilon(1e-9));

    // Saturated model: tiny probabilities get floored and counted.
    SoftmaxPolicy sharp = SoftmaxPolicy::zeros(arch);
    sharp.params()[6] = 50.0;  // action-0 bias dominates
    std::size_t below = 0;
    for (const auto& s : data.samples)
        if (sharp.action_distribution(s.features)[s.action] < 1e-3) ++below;
    REQUIRE(below > 0);
    const PropensityEstimate clipped = estimate_propensities(sharp, f, data, 1e-3);
    CHECK(clipped.clipped_count == below);
    for (double p : clipped.values) CHECK(p >= 1e-3);
}

TEST_CASE("baseline policies") {
    LoggedDataset data;
    data.n_actions = 25;
    data.feature_dim = 2;
    for (int i = 0; i < 10; ++i) {
        LoggedSample s;
        s.features = {0.0, 1.0};
        s.action = (i < 4) ? 0 : (i < 7 ? 1 : 2);
        s.loss = 0.0;
        data.samples.push_back(std::move(s));
    }
    const SoftmaxPolicy rp = baseline_policy(BaselineKind::Random, data);
    const std::vector<double> p = rp.action_distribution(std::vector<double>{3.0, -4.0});
    for (double v : p) CHECK(v == 1.0 / 25.0);

    const SoftmaxPolicy mf = baseline_policy(BaselineKind::MostFrequent, data);
    const std::vector<double> q = mf.action_distribution(std::vector<double>{3.0, -4.0});
    CHECK(q[0] == 1.0);  // modal action, exact point mass
    for (int a = 1; a < 25; ++a) CHECK(q[a] == 0.0);

    // Tie between actions 0 and 1 resolves to the lower id.
    LoggedDataset tie = data;
    tie.samples[9].action = 1;  // counts become 4, 4, 2
    const SoftmaxPolicy mft = baseline_policy(BaselineKind::MostFrequent, tie);
    CHECK(mft.greedy_action(std::vector<double>{0.0, 0.0}) == 0);
}

TEST_CASE("direct_method_action: argmin with ties to the lowest id") {
    // Linear loss model over (features ++ one-hot action); zero feature input
    // leaves only the per-action weights, so predictions are sigmoids of them.
    auto logit = [](double p) { return std::log(p / (1.0 - p)); };
    std::vector<double> params(1 + 3 + 1, 0.0);  // d=1, K=3, bias
    params[1] = logit(0.9);
    params[2] = logit(0.1);
    params[3] = logit(0.4);
    const LossModel model = make_loss_model(1, 3, 0, true, params, 0);
    const std::vector<double> x{0.0};
    CHECK(model.predict(x, 0) == doctest::Approx(0.9));
    CHECK(model.predict(x, 1) == doctest::Approx(0.1));
    CHECK(direct_method_action(model, x) == 1);

    const LossModel constant = make_loss_model(1, 3, 0, true, std::vector<double>(5, 0.0), 0);
    CHECK(direct_method_action(constant, x) == 0);  // all 0.5, tie rule

    const LossModel zero = LossModel::zero(1, 3);
    CHECK(zero.predict(x, 0) == 0.0);
    CHECK(zero.predict(x, 2) == 0.0);
}

TEST_CASE("train_loss_model fits the conversion losses") {
    // Losses depend on (feature sign, action); the model should separate them.
    LoggedDataset data;
    data.n_actions = 2;
    data.feature_dim = 1;
    Rng rng(4);
    for (int i = 0; i < 400; ++i) {
        LoggedSample s;
        s.features = {rng.uniform01() < 0.5 ? -1.0 : 1.0};
        s.action = rng.below_int(2);
        const int good = s.features[0] < 0 ? 0 : 1;
        s.loss = (s.action == good) ? 0.0 : 1.0;
        data.samples.push_back(std::move(s));
    }
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 60;
    cfg.seed = 2;
    const LossModelResult result = train_loss_model(data, 8, cfg);
    int correct = 0;
    for (const auto& s : data.samples) {
        const int good = s.features[0] < 0 ? 0 : 1;
        if (direct_method_action(result.model, s.features) == good) ++correct;
    }
    CHECK(correct >= 380);
    CHECK(result.bce_trace.back() < result.bce_trace.front());
}

TEST_CASE("policy serialization round-trips bit-exactly") {
    Rng rng(31);
    for (int t = 0; t < 6; ++t) {
        PolicyArch arch;
        arch.input_dim = 1 + rng.below_int(5);
        arch.hidden = (t % 2 == 0) ? 0 : 1 + rng.below_int(9);
        arch.n_actions = 2 + rng.below_int(5);
        arch.bias = (t % 3 != 0);
        SoftmaxPolicy policy = SoftmaxPolicy::random_init(arch, rng.next_u64());
        policy.featurizer = Featurizer{FeaturizerMode::LastStep, arch.input_dim, 0};
        const std::string text = policy_to_string(policy);
        const SoftmaxPolicy back = policy_from_string(text);
        CHECK(back.arch().input_dim == arch.input_dim);
        CHECK(back.arch().hidden == arch.hidden);
        CHECK(back.arch().bias == arch.bias);
        CHECK(back.seed() == policy.seed());
        CHECK(back.featurizer.mode == policy.featurizer.mode);
        REQUIRE(back.n_params() == policy.n_params());
        CHECK(std::memcmp(back.params().data(), policy.params().data(),
                          policy.n_params() * sizeof(double)) == 0);
        // Emitting again reproduces the document byte for byte.
        CHECK(policy_to_string(back) == text);
    }
    CHECK_THROWS_AS(policy_from_string("not a model"), DataError);

    const LossModel lm = LossModel::random_init(3, 4, 6, true, 9);
    const LossModel lback = loss_model_from_string(loss_model_to_string(lm));
    CHECK(std::memcmp(lback.params().data(), lm.params().data(),
                      lm.params().size() * sizeof(double)) == 0);
}
