#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "blbf/conversion.hpp"
#include "blbf/dataset.hpp"
#include "blbf/errors.hpp"
#include "blbf/estimators.hpp"
#include "blbf/policy.hpp"
#include "blbf/rng.hpp"

using namespace blbf;

namespace {

// Small logged world shared across cases: probs/propensities arranged so the
// importance ratios are easy to read off.
struct Fixture {
    std::vector<double> losses{0.0, 1.0};
    std::vector<double> probs{0.75, 0.25};
    std::vector<double> props{0.25, 0.25};  // ratios (3, 1)
};

LoggedDataset random_logged(Rng& rng, const SoftmaxPolicy& policy, std::size_t m) {
    LoggedDataset data;
    data.n_actions = policy.arch().n_actions;
    data.feature_dim = policy.arch().input_dim;
    for (std::size_t i = 0; i < m; ++i) {
        LoggedSample s;
        s.features.resize(data.feature_dim);
        for (double& f : s.features) f = rng.uniform(-2, 2);
        s.action = rng.below_int(data.n_actions);
        s.loss = rng.uniform(-1, 2);
        s.logged_propensity = rng.uniform(0.05, 1.0);
        data.samples.push_back(std::move(s));
    }
    return data;
}

}  // namespace

TEST_CASE("ips_risk: closed forms") {
    // Ratios all 1: the estimator is the mean loss.
    CHECK(ips_risk(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5, 0.5},
                   std::vector<double>{0.5, 0.5})
              .value == 0.5);

    // Zero mass on every logged action: the degenerate minimum.
    CHECK(ips_risk(std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 0.0},
                   std::vector<double>{0.5, 0.5})
              .value == 0.0);

    Fixture f;
    const EstimateReport r = ips_risk(f.losses, f.probs, f.props);
    CHECK(r.value == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.m == 2);

    CHECK_THROWS_AS(
        ips_risk(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5},
                 std::vector<double>{0.5, 0.5}),
        DataError);
    CHECK_THROWS_AS(ips_risk(std::vector<double>{1.0}, std::vector<double>{0.5},
                             std::vector<double>{0.0}),
                    DataError);
}

TEST_CASE("tmf: matching factor basics") {
    Fixture f;
    CHECK(tmf(f.probs, f.props) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(tmf(std::vector<double>{0.0, 0.0}, std::vector<double>{0.5, 0.5}) == 0.0);
}

TEST_CASE("snips_risk: self-normalization and equivariance") {
    Fixture f;
    const EstimateReport r = snips_risk(f.losses, f.probs, f.props);
    CHECK(r.value == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(*r.tmf == doctest::Approx(2.0).epsilon(1e-15));

    // snips(delta + c) = snips(delta) + c, exactly up to rounding.
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
        const std::size_t m = 1 + rng.below(40);
        std::vector<double> losses(m), probs(m), props(m);
        for (std::size_t i = 0; i < m; ++i) {
            losses[i] = rng.uniform(-2, 3);
            probs[i] = rng.uniform(1e-3, 1.0);
            props[i] = rng.uniform(0.05, 1.0);
        }
        const double base = snips_risk(losses, probs, props).value;
        for (double c : {-1.0, 0.3, 10.0}) {
            std::vector<double> shifted = losses;
            for (double& v : shifted) v += c;
            const double moved = snips_risk(shifted, probs, props).value;
            CHECK(std::abs(moved - (base + c)) <=
                  1e-12 * std::max({1.0, std::abs(moved), std::abs(base + c)}));
        }
    }

    CHECK_THROWS_WITH_AS(snips_risk(std::vector<double>{1.0}, std::vector<double>{0.0},
                                    std::vector<double>{0.5}),
                         doctest::Contains("no overlap"), NumericError);
}

TEST_CASE("translated_ips_risk: closed forms and decomposition") {
    Fixture f;
    // lambda = 0 reduces to ips, bitwise.
    CHECK(translated_ips_risk(f.losses, f.probs, f.props, 0.0).value ==
          ips_risk(f.losses, f.probs, f.props).value);
    // (0-0.5)*3 + (1-0.5)*1 = -1.0, mean -0.5.
    CHECK(translated_ips_risk(f.losses, f.probs, f.props, 0.5).value ==
          doctest::Approx(-0.5).epsilon(1e-15));
    // lambda = 1 with binary losses is nonpositive.
    CHECK(translated_ips_risk(f.losses, f.probs, f.props, 1.0).value <= 0.0);

    Rng rng(4);
    for (int t = 0; t < 30; ++t) {
        const std::size_t m = 1 + rng.below(40);
        std::vector<double> losses(m), probs(m), props(m);
        for (std::size_t i = 0; i < m; ++i) {
            losses[i] = rng.uniform(-2, 3);
            probs[i] = rng.uniform(1e-3, 1.0);
            props[i] = rng.uniform(0.05, 1.0);
        }
        const double lambda = rng.uniform(-1.0, 2.0);
        const double lhs = translated_ips_risk(losses, probs, props, lambda).value;
        const double rhs =
            ips_risk(losses, probs, props).value - lambda * tmf(probs, props);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max({1.0, std::abs(lhs), std::abs(rhs)}));
    }
}

TEST_CASE("estimators are order-independent within 1e-12") {
    Rng rng(5);
    const std::size_t m = 200;
    std::vector<double> losses(m), probs(m), props(m);
    for (std::size_t i = 0; i < m; ++i) {
        losses[i] = rng.uniform(-2, 3);
        probs[i] = rng.uniform(1e-3, 1.0);
        props[i] = rng.uniform(0.05, 1.0);
    }
    const double ips0 = ips_risk(losses, probs, props).value;
    const double tmf0 = tmf(probs, props);
    const double snips0 = snips_risk(losses, probs, props).value;

    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    for (int t = 0; t < 5; ++t) {
        rng.shuffle(perm);
        std::vector<double> l(m), q(m), p(m);
        for (std::size_t i = 0; i < m; ++i) {
            l[i] = losses[perm[i]];
            q[i] = probs[perm[i]];
            p[i] = props[perm[i]];
        }
        CHECK(std::abs(ips_risk(l, q, p).value - ips0) <= 1e-12 * std::max(1.0, std::abs(ips0)));
        CHECK(std::abs(tmf(q, p) - tmf0) <= 1e-12 * std::max(1.0, tmf0));
        CHECK(std::abs(snips_risk(l, q, p).value - snips0) <=
              1e-12 * std::max(1.0, std::abs(snips0)));
    }
}

TEST_CASE("dr_risk: zero model degeneracy and exact outcome model") {
    Rng rng(6);
    const PolicyArch arch{2, 4, 3, true};
    const SoftmaxPolicy policy = SoftmaxPolicy::random_init(arch, 11);
    LoggedDataset data = random_logged(rng, policy, 40);
    std::vector<double> props(40), probs(40);
    for (std::size_t i = 0; i < 40; ++i) {
        props[i] = rng.uniform(0.05, 1.0);
        probs[i] = policy.action_distribution(data.samples[i].features)[data.samples[i].action];
    }

    // Zero outcome model: DR collapses to IPS, bitwise.
    const double dr0 = dr_risk(data, policy, props, LossModel::zero(2, 3)).value;
    const double ips0 = ips_risk(data.losses(), probs, props).value;
    CHECK(std::memcmp(&dr0, &ips0, sizeof(double)) == 0);

    // Exact outcome model with per-context constant losses: DR equals the
    // mean loss (zero residuals, and the baseline sum telescopes).
    LoggedDataset ctx;
    ctx.n_actions = 2;
    ctx.feature_dim = 1;
    for (int i = 0; i < 20; ++i) {
        LoggedSample s;
        s.features = {i % 2 == 0 ? 0.0 : 1.0};
        s.action = rng.below_int(2);
        s.loss = s.features[0];  // loss 0 in context 0, loss 1 in context 1
        s.logged_propensity = 0.5;
        ctx.samples.push_back(std::move(s));
    }
    // Linear loss model: score = 2000 * x - 1000, so sigmoid is exactly 0 or 1.
    const LossModel exact =
        make_loss_model(1, 2, 0, true, std::vector<double>{2000.0, 0.0, 0.0, -1000.0}, 0);
    CHECK(exact.predict(std::vector<double>{0.0}, 0) == 0.0);
    CHECK(exact.predict(std::vector<double>{1.0}, 1) == 1.0);
    const SoftmaxPolicy uniform = SoftmaxPolicy::zeros(PolicyArch{1, 0, 2, true});
    std::vector<double> half(20, 0.5);
    const double dr = dr_risk(ctx, uniform, half, exact).value;
    std::vector<double> losses = ctx.losses();
    double mean = 0.0;
    for (double v : losses) mean += v;
    mean /= 20.0;
    CHECK(dr == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("atenp: group means, error, and sign semantics") {
    LoggedDataset data;
    data.n_actions = 2;
    data.feature_dim = 1;
    // Greedy of the always-action-0 policy groups samples by logged action.
    auto add = [&data](int action, double loss) {
        LoggedSample s;
        s.features = {0.0};
        s.action = action;
        s.loss = loss;
        data.samples.push_back(std::move(s));
    };
    add(0, 0.0);
    add(0, 0.0);
    add(1, 1.0);
    SoftmaxPolicy always0 = SoftmaxPolicy::zeros(PolicyArch{1, 0, 2, true});
    always0.params()[2] = 1000.0;  // bias action 0
    Featurizer f{FeaturizerMode::MeanPool, 1, 0};
    const EstimateReport r = atenp(data, always0, f);
    CHECK(r.value == -1.0);
    CHECK(*r.group_one_size == 2);
    CHECK(*r.group_two_size == 1);

    LoggedDataset all_same;
    all_same.n_actions = 2;
    all_same.feature_dim = 1;
    for (int i = 0; i < 4; ++i) {
        LoggedSample s;
        s.features = {0.0};
        s.action = 0;
        s.loss = 0.0;
        all_same.samples.push_back(std::move(s));
    }
    try {
        atenp(all_same, always0, f);
        FAIL("expected empty-group error");
    } catch (const EmptyGroupError& e) {
        CHECK(e.group_one == 4);
        CHECK(e.group_two == 0);
    }

    // A policy that provably selects lower-loss actions than the logger has
    // ATENP < 0 on sampled data.
    ToyEnvironment env;
    env.context_probs = {0.5, 0.5};
    env.context_features = {{-1.0}, {1.0}};
    env.loss_table = {{0.0, 1.0}, {1.0, 0.0}};
    Rng rng(12);
    LoggedDataset sampled;
    sampled.n_actions = 2;
    sampled.feature_dim = 1;
    for (int i = 0; i < 2000; ++i) {
        const int c = rng.uniform01() < 0.5 ? 0 : 1;
        LoggedSample s;
        s.features = env.context_features[c];
        s.action = rng.below_int(2);
        s.loss = env.loss_table[c][s.action];
        sampled.samples.push_back(std::move(s));
    }
    // Correct policy: action 0 for x < 0, action 1 for x > 0.
    SoftmaxPolicy correct = SoftmaxPolicy::zeros(PolicyArch{1, 0, 2, true});
    correct.params()[1] = 1000.0;  // weight of action 1 on x
    const EstimateReport sign = atenp(sampled, correct, f);
    CHECK(sign.value < 0.0);
    CHECK(sign.value == doctest::Approx(-1.0).epsilon(0.05));
}

TEST_CASE("true_risk: exact expectation") {
    ToyEnvironment env;
    env.context_probs = {0.5, 0.5};
    env.context_features = {{0.0}, {1.0}};
    env.loss_table = {{0.0, 1.0}, {1.0, 0.0}};
    const PolicyArch arch{1, 0, 2, true};

    const SoftmaxPolicy uniform = SoftmaxPolicy::zeros(arch);
    CHECK(true_risk(env, uniform) == doctest::Approx(0.5).epsilon(1e-15));

    SoftmaxPolicy always1 = SoftmaxPolicy::zeros(arch);
    always1.params()[3] = 1000.0;
    CHECK(true_risk(env, always1) == doctest::Approx(0.5).epsilon(1e-15));

    ToyEnvironment zeros = env;
    zeros.loss_table = {{0.0, 0.0}, {0.0, 0.0}};
    CHECK(true_risk(zeros, always1) == 0.0);

    // Deterministic policy: risk is the expected loss of its chosen actions.
    ToyEnvironment skew = env;
    skew.context_probs = {0.25, 0.75};
    CHECK(true_risk(skew, always1) == doctest::Approx(0.25 * 1.0 + 0.75 * 0.0).epsilon(1e-15));
}

TEST_CASE("exact IPS expectation is unbiased for true_risk on random worlds") {
    Rng rng(13);
    for (int t = 0; t < 10; ++t) {
        const int n_ctx = 1 + rng.below_int(4);
        const int k = 2 + rng.below_int(3);
        ToyEnvironment env;
        env.context_probs.assign(n_ctx, 1.0 / n_ctx);
        double acc = 0.0;
        for (int c = 0; c + 1 < n_ctx; ++c) acc += env.context_probs[c];
        env.context_probs.back() = 1.0 - acc;
        env.loss_table.assign(n_ctx, std::vector<double>(k));
        env.context_features.assign(n_ctx, std::vector<double>(2));
        for (int c = 0; c < n_ctx; ++c) {
            for (double& v : env.loss_table[c]) v = rng.uniform(-1, 2);
            for (double& v : env.context_features[c]) v = rng.uniform(-2, 2);
        }
        const PolicyArch arch{2, 0, k, true};
        const SoftmaxPolicy logging = SoftmaxPolicy::random_init(arch, rng.next_u64());
        const SoftmaxPolicy target = SoftmaxPolicy::random_init(arch, rng.next_u64());

        const EnumeratedOutcomes out = enumerate_logged_outcomes(env, logging);
        long double expectation = 0.0L;
        for (std::size_t r = 0; r < out.data.size(); ++r) {
            const LoggedSample& s = out.data.samples[r];
            const double pi = target.action_distribution(s.features)[s.action];
            expectation += (long double)out.weights[r] * s.loss * (pi / *s.logged_propensity);
        }
        CHECK(std::abs((double)expectation - true_risk(env, target)) < 1e-10);
    }
}

TEST_CASE("dataset-view overloads extract the loss column") {
    LoggedDataset data;
    data.n_actions = 2;
    data.feature_dim = 1;
    for (int i = 0; i < 2; ++i) {
        LoggedSample s;
        s.features = {0.0};
        s.action = i;
        s.loss = double(i);
        data.samples.push_back(std::move(s));
    }
    const std::vector<double> probs{0.75, 0.25};
    const std::vector<double> props{0.25, 0.25};
    CHECK(ips_risk(data, probs, props).value == ips_risk(data.losses(), probs, props).value);
    CHECK(snips_risk(data, probs, props).value ==
          snips_risk(data.losses(), probs, props).value);
    CHECK(translated_ips_risk(data, probs, props, 0.4).value ==
          translated_ips_risk(data.losses(), probs, props, 0.4).value);
}

TEST_CASE("accuracy: oracle and uniform") {
    const auto supervised = generate_counting_task(900, 3, 6, 6, 1, 2);
    Featurizer f{FeaturizerMode::MeanPool, 6, 0};
    const PolicyArch arch{6, 0, 3, true};

    // Uniform policy: greedy ties to action 0, so accuracy is the class-0
    // share, 1/3 on balanced data.
    const SoftmaxPolicy uniform = SoftmaxPolicy::zeros(arch);
    CHECK(accuracy(uniform, f, supervised) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(accuracy(uniform, f, std::vector<SupervisedSample>{}), DataError);
}
