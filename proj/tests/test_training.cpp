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
#include "blbf/training.hpp"

using namespace blbf;

namespace {

LoggedDataset small_logged(Rng& rng, int d, int k, std::size_t m) {
    LoggedDataset data;
    data.n_actions = k;
    data.feature_dim = d;
    for (std::size_t i = 0; i < m; ++i) {
        LoggedSample s;
        s.features.resize(d);
        for (double& f : s.features) f = rng.uniform(-2, 2);
        s.action = rng.below_int(k);
        s.loss = rng.uniform(0.0, 1.0) < 0.5 ? 0.0 : 1.0;
        s.logged_propensity = rng.uniform(0.1, 1.0);
        data.samples.push_back(std::move(s));
    }
    return data;
}

}  // namespace

TEST_CASE("tips objective: vanishing factor and closed form") {
    // All losses equal to lambda: objective and gradient are exactly zero.
    const PolicyArch arch{2, 3, 3, true};
    const SoftmaxPolicy policy = SoftmaxPolicy::random_init(arch, 5);
    std::vector<LoggedSample> batch(4);
    std::vector<double> props(4, 0.5);
    for (auto& s : batch) {
        s.features = {0.3, -0.7};
        s.action = 1;
        s.loss = 0.7;
    }
    auto [obj, grad] = tips_objective_and_gradient(policy, batch, props, 0.7);
    CHECK(obj == 0.0);
    for (double g : grad) CHECK(g == 0.0);

    // Single sample, zero-weight linear policy: pi = 0.5 for K = 2, so the
    // objective is (loss - lambda) * 0.5 / p.
    const SoftmaxPolicy zero2 = SoftmaxPolicy::zeros(PolicyArch{2, 0, 2, true});
    std::vector<LoggedSample> one(1);
    one[0].features = {1.0, -1.0};
    one[0].action = 0;
    one[0].loss = 1.0;
    std::vector<double> p1{0.4};
    const double expected = (1.0 - 0.3) * 0.5 / 0.4;
    CHECK(tips_objective(zero2, one, p1, 0.3) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("finite differences: tips gradient, quadratic surrogate, warning step") {
    Rng rng(6);
    for (int t = 0; t < 10; ++t) {
        PolicyArch arch;
        arch.input_dim = 1 + rng.below_int(4);
        arch.hidden = (t % 2 == 0) ? 0 : 2 + rng.below_int(5);
        arch.n_actions = 2 + rng.below_int(3);
        const SoftmaxPolicy policy = SoftmaxPolicy::random_init(arch, rng.next_u64());
        const std::size_t b = 5;
        std::vector<LoggedSample> batch(b);
        std::vector<double> props(b);
        for (std::size_t i = 0; i < b; ++i) {
            batch[i].features.resize(arch.input_dim);
            for (double& f : batch[i].features) f = rng.uniform(-2, 2);
            batch[i].action = rng.below_int(arch.n_actions);
            batch[i].loss = rng.uniform(-1, 2);
            props[i] = rng.uniform(0.05, 1.0);
        }
        CHECK(finite_difference_check(policy, batch, props, 0.4, 1e-5) < 1e-4);
    }

    // Quadratic surrogate: analytic derivative of 0.5 * ||w||^2 is w itself.
    std::vector<double> params{0.3, -1.2, 2.0, 0.01};
    std::vector<double> analytic = params;
    const double err = fd_max_rel_err(
        params,
        [&] {
            double s = 0.0;
            for (double w : params) s += w * w;
            return 0.5 * s;
        },
        analytic, 1e-5);
    CHECK(err < 1e-8);

    // A cancellation-dominated step still returns a value (warning on stderr).
    const SoftmaxPolicy policy = SoftmaxPolicy::random_init(PolicyArch{2, 0, 2, true}, 3);
    std::vector<LoggedSample> batch(2);
    for (auto& s : batch) {
        s.features = {0.5, 0.5};
        s.action = 0;
        s.loss = 1.0;
    }
    std::vector<double> props{0.5, 0.5};
    CHECK(std::isfinite(finite_difference_check(policy, batch, props, 0.5, 1e-12)));
    CHECK_THROWS_AS(finite_difference_check(policy, batch, props, 0.5, 0.0), DataError);
}

TEST_CASE("train_tips: zero epochs returns the measured initialization") {
    Rng rng(7);
    const LoggedDataset data = small_logged(rng, 3, 3, 50);
    const std::vector<double> props = data.logged_propensities();
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 21;
    const PolicyArch arch{3, 0, 3, true};
    const TrainRun run = train_tips(data, props, 0.3, arch, cfg);
    const SoftmaxPolicy init = SoftmaxPolicy::random_init(arch, 21);
    CHECK(std::memcmp(run.policy.params().data(), init.params().data(),
                      init.n_params() * sizeof(double)) == 0);
    CHECK(run.objective_trace.empty());
    CHECK(run.admitted);
    CHECK(run.tmf_final > 0.0);
    CHECK(std::isfinite(run.snips));
}

TEST_CASE("train_tips: deterministic given the config") {
    Rng rng(8);
    const LoggedDataset data = small_logged(rng, 4, 3, 120);
    const std::vector<double> props = data.logged_propensities();
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.seed = 5;
    cfg.learning_rate = 0.2;
    const PolicyArch arch{4, 8, 3, true};
    const TrainRun a = train_tips(data, props, 0.4, arch, cfg);
    const TrainRun b = train_tips(data, props, 0.4, arch, cfg);
    REQUIRE(a.objective_trace.size() == b.objective_trace.size());
    CHECK(std::memcmp(a.objective_trace.data(), b.objective_trace.data(),
                      a.objective_trace.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.policy.params().data(), b.policy.params().data(),
                      a.policy.n_params() * sizeof(double)) == 0);
    CHECK(a.tmf_final == b.tmf_final);
    CHECK(a.snips == b.snips);
}

TEST_CASE("tips_grid_train: audit completeness and outer-min correctness") {
    Rng rng(9);
    const LoggedDataset data = small_logged(rng, 3, 3, 200);
    const std::vector<double> props = data.logged_propensities();
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 3;
    const PolicyArch arch{3, 0, 3, true};
    const GridTrainResult grid = tips_grid_train(data, props, arch, cfg);

    // Monotone audit: one run per grid point, none dropped.
    CHECK(grid.runs.size() == cfg.lambda_grid.size());
    REQUIRE(grid.winner_index >= 0);

    // The winner attains the minimum admitted self-normalized risk, and the
    // returned policy's recomputed value matches it exactly.
    for (const TrainRun& run : grid.runs)
        if (run.admitted) CHECK(grid.runs[grid.winner_index].snips <= run.snips);
    std::vector<double> probs(data.size());
    PolicyWorkspace ws;
    ws.resize(arch);
    for (std::size_t i = 0; i < data.size(); ++i) {
        grid.policy.distribution_into(data.samples[i].features.data(), ws);
        probs[i] = ws.p[data.samples[i].action];
    }
    CHECK(snips_risk(data.losses(), probs, props).value ==
          grid.runs[grid.winner_index].snips);

    // Binary losses map the grid onto (0, 1) itself.
    CHECK(grid.loss_lo == 0.0);
    CHECK(grid.loss_hi == 1.0);
    CHECK(grid.runs.front().lambda == doctest::Approx(0.1));

    // Degenerate loss range is rejected.
    LoggedDataset flat = data;
    for (auto& s : flat.samples) s.loss = 0.5;
    CHECK_THROWS_WITH_AS(tips_grid_train(flat, props, arch, cfg),
                         doctest::Contains("degenerate"), DataError);
}

TEST_CASE("tips_grid_train: held-out selection mode re-measures candidates") {
    Rng rng(14);
    const LoggedDataset train = small_logged(rng, 3, 3, 150);
    const LoggedDataset held = small_logged(rng, 3, 3, 80);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.seed = 2;
    const PolicyArch arch{3, 0, 3, true};
    const std::vector<double> train_props = train.logged_propensities();
    const std::vector<double> held_props = held.logged_propensities();

    SelectionData selection{&held, held_props};
    const GridTrainResult on_held =
        tips_grid_train(train, train_props, arch, cfg, &selection);
    const GridTrainResult on_train = tips_grid_train(train, train_props, arch, cfg);

    // Same candidates (identical training), different selection quantities.
    REQUIRE(on_held.runs.size() == on_train.runs.size());
    for (std::size_t j = 0; j < on_held.runs.size(); ++j) {
        CHECK(std::memcmp(on_held.runs[j].policy.params().data(),
                          on_train.runs[j].policy.params().data(),
                          on_train.runs[j].policy.n_params() * sizeof(double)) == 0);
        CHECK(on_held.runs[j].tmf_final != on_train.runs[j].tmf_final);
    }
    // The held-out snips of the winner really is the minimum on that split.
    for (const TrainRun& run : on_held.runs)
        if (run.admitted)
            CHECK(on_held.runs[on_held.winner_index].snips <= run.snips);
}

TEST_CASE("tips_grid_train: single-candidate grid returns that run") {
    Rng rng(10);
    const LoggedDataset data = small_logged(rng, 2, 2, 80);
    const std::vector<double> props = data.logged_propensities();
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 11;
    cfg.lambda_grid = {0.5};
    const PolicyArch arch{2, 0, 2, true};
    const GridTrainResult grid = tips_grid_train(data, props, arch, cfg);
    CHECK(grid.runs.size() == 1);
    CHECK(grid.winner_index == 0);
    CHECK(std::memcmp(grid.policy.params().data(), grid.runs[0].policy.params().data(),
                      grid.policy.n_params() * sizeof(double)) == 0);
}

TEST_CASE("tips_grid_train: zero-overlap candidates are flagged, all flagged errors") {
    // Saturated contexts underflow the softmax, so a drawn action can carry
    // exactly zero probability. With mirrored contexts, whichever way the
    // random initialization tips, both logged actions underflow together for
    // about half the seeds; hunt one and check the all-flagged error.
    const PolicyArch arch{2, 0, 2, true};
    LoggedDataset data;
    data.n_actions = 2;
    data.feature_dim = 2;
    LoggedSample a;
    a.features = {1e6, 1e6};
    a.action = 0;
    a.loss = 1.0;
    data.samples.push_back(a);
    LoggedSample b;
    b.features = {-1e6, -1e6};
    b.action = 1;
    b.loss = 0.0;
    data.samples.push_back(b);
    const std::vector<double> props{0.5, 0.5};

    bool exercised = false;
    for (std::uint64_t seed = 0; seed < 64 && !exercised; ++seed) {
        const SoftmaxPolicy init = SoftmaxPolicy::random_init(arch, seed);
        const std::vector<double> p0 = init.action_distribution(data.samples[0].features);
        const std::vector<double> p1 = init.action_distribution(data.samples[1].features);
        if (p0[0] == 0.0 && p1[1] == 0.0) {
            exercised = true;
            TrainConfig cfg;
            cfg.epochs = 0;
            cfg.seed = seed;
            cfg.lambda_grid = {0.5};
            CHECK_THROWS_WITH_AS(tips_grid_train(data, props, arch, cfg),
                                 doctest::Contains("flagged"), NumericError);
        }
    }
    CHECK(exercised);
}

TEST_CASE("train_tips: mid-grid translation learns on the toy counting task") {
    const auto supervised = generate_counting_task(1200, 3, 10, 20, 5, 31);
    Featurizer f{FeaturizerMode::MeanPool, 10, 0};
    const LoggingPolicyResult logging =
        train_logging_policy(supervised, f, 0.05, {0.60, 0.72}, 7);
    const BanditConversion conv = convert_to_bandit(supervised, f, logging.policy, 9);
    const std::vector<double> props = conv.data.logged_propensities();
    std::vector<double> losses = conv.data.losses();
    double mean_loss = 0.0;
    for (double v : losses) mean_loss += v;
    mean_loss /= double(losses.size());

    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.seed = 17;
    const PolicyArch arch{10, 64, 3, true};
    const TrainRun run = train_tips(conv.data, props, 0.5, arch, cfg);
    CHECK(run.tmf_final >= 0.5);
    CHECK(run.tmf_final <= 1.5);
    CHECK(run.snips < mean_loss);
}

TEST_CASE("etips_train: full pipeline accounting") {
    Rng rng(12);
    const LoggedDataset data = small_logged(rng, 3, 3, 300);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.seed = 23;
    const PolicyArch arch{3, 0, 3, true};
    const EtipsResult result = etips_train(data, data, arch, cfg);
    CHECK(result.runs.size() == cfg.lambda_grid.size());
    CHECK(result.winner_index >= 0);
    CHECK(result.propensities.size() == data.size());
    for (double p : result.propensities) CHECK(p >= cfg.propensity_floor);
    // Winner postcondition.
    for (const TrainRun& run : result.runs)
        if (run.admitted) CHECK(result.runs[result.winner_index].snips <= run.snips);
    // Propensity model covers the action set.
    CHECK(result.propensity_model.arch().n_actions == 3);

    CHECK_THROWS_AS(
        [&] {
            TrainConfig empty = cfg;
            empty.lambda_grid.clear();
            etips_train(data, data, arch, empty);
        }(),
        DataError);
}

TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.lambda_grid = {0.0};
    CHECK_THROWS_AS(cfg.validate(), DataError);
    cfg.lambda_grid = {0.5};
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), DataError);
    cfg.learning_rate = 0.1;
    cfg.momentum = 1.0;
    CHECK_THROWS_AS(cfg.validate(), DataError);
}
