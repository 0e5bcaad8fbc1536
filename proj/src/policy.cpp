#include "blbf/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "blbf/errors.hpp"
#include "blbf/kernels.hpp"
#include "blbf/report.hpp"
#include "blbf/rng.hpp"

namespace blbf {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw DataError("learning_rate must be > 0");
    if (!(momentum >= 0.0) || momentum >= 1.0) throw DataError("momentum must be in [0, 1)");
    if (batch_size < 1) throw DataError("batch_size must be >= 1");
    if (epochs < 0) throw DataError("epochs must be >= 0");
    for (double f : lambda_grid)
        if (!(f > 0.0) || !(f < 1.0))
            throw DataError("lambda grid fraction " + format_double(f) +
                            " outside (0, 1)");
    if (!(propensity_floor >= 0.0)) throw DataError("propensity_floor must be >= 0");
}

std::size_t PolicyArch::n_params() const {
    const auto d = static_cast<std::size_t>(input_dim);
    const auto k = static_cast<std::size_t>(n_actions);
    const auto h = static_cast<std::size_t>(hidden);
    if (hidden == 0) return k * d + (bias ? k : 0);
    return h * d + (bias ? h : 0) + k * h + (bias ? k : 0);
}

void PolicyArch::validate() const {
    if (input_dim < 1) throw DataError("arch: input_dim must be >= 1");
    if (n_actions < 1) throw DataError("arch: n_actions must be >= 1");
    if (hidden < 0) throw DataError("arch: hidden must be >= 0");
}

void PolicyWorkspace::resize(const PolicyArch& arch) {
    u.assign(arch.hidden, 0.0);
    h.assign(arch.hidden, 0.0);
    z.assign(arch.n_actions, 0.0);
    p.assign(arch.n_actions, 0.0);
    dz.assign(arch.n_actions, 0.0);
    dh.assign(arch.hidden, 0.0);
    du.assign(arch.hidden, 0.0);
}

namespace {

// Parameter block offsets. Linear: [W (KxD)][b (K)]. MLP: [W1][b1][W2][b2].
struct Offsets {
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
};

Offsets layout(const PolicyArch& a) {
    Offsets o;
    const auto d = static_cast<std::size_t>(a.input_dim);
    const auto k = static_cast<std::size_t>(a.n_actions);
    const auto h = static_cast<std::size_t>(a.hidden);
    if (a.hidden == 0) {
        o.w1 = 0;
        o.b1 = k * d;  // bias block for the single layer
        return o;
    }
    o.w1 = 0;
    o.b1 = h * d;
    o.w2 = o.b1 + (a.bias ? h : 0);
    o.b2 = o.w2 + k * h;
    return o;
}

void softmax_inplace(std::vector<double>& z, std::vector<double>& p) {
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    double total = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        p[k] = std::exp(z[k] - zmax);
        total += p[k];
    }
    const double inv = 1.0 / total;
    for (double& v : p) v *= inv;
}

}  // namespace

SoftmaxPolicy make_policy(const PolicyArch& arch, std::vector<double> params,
                          std::uint64_t seed) {
    arch.validate();
    if (params.size() != arch.n_params())
        throw DataError("parameter count " + std::to_string(params.size()) +
                        " does not match architecture (" + std::to_string(arch.n_params()) +
                        ")");
    SoftmaxPolicy policy;
    policy.arch_ = arch;
    policy.params_ = std::move(params);
    policy.seed_ = seed;
    policy.featurizer = Featurizer{FeaturizerMode::MeanPool, arch.input_dim, 0};
    return policy;
}

SoftmaxPolicy SoftmaxPolicy::zeros(const PolicyArch& arch) {
    return make_policy(arch, std::vector<double>(arch.n_params(), 0.0), 0);
}

SoftmaxPolicy SoftmaxPolicy::random_init(const PolicyArch& arch, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> params(arch.n_params());
    for (double& v : params) v = rng.uniform(-0.05, 0.05);
    return make_policy(arch, std::move(params), seed);
}

void SoftmaxPolicy::distribution_into(const double* x, PolicyWorkspace& ws) const {
    const Offsets o = layout(arch_);
    const double* w = params_.data();
    const auto d = static_cast<std::size_t>(arch_.input_dim);
    const auto k = static_cast<std::size_t>(arch_.n_actions);
    const auto hh = static_cast<std::size_t>(arch_.hidden);
    if (arch_.hidden == 0) {
        kern::gemv(w + o.w1, k, d, x, ws.z.data());
        if (arch_.bias) kern::vadd(ws.z.data(), w + o.b1, k);
    } else {
        kern::gemv(w + o.w1, hh, d, x, ws.u.data());
        if (arch_.bias) kern::vadd(ws.u.data(), w + o.b1, hh);
        for (std::size_t j = 0; j < hh; ++j) ws.h[j] = std::tanh(ws.u[j]);
        kern::gemv(w + o.w2, k, hh, ws.h.data(), ws.z.data());
        if (arch_.bias) kern::vadd(ws.z.data(), w + o.b2, k);
    }
    softmax_inplace(ws.z, ws.p);
}

void SoftmaxPolicy::accumulate_gradient(const double* x, PolicyWorkspace& ws,
                                        double* grad) const {
    const Offsets o = layout(arch_);
    const double* w = params_.data();
    const auto d = static_cast<std::size_t>(arch_.input_dim);
    const auto k = static_cast<std::size_t>(arch_.n_actions);
    const auto hh = static_cast<std::size_t>(arch_.hidden);
    if (arch_.hidden == 0) {
        kern::rank1_update(grad + o.w1, k, d, 1.0, ws.dz.data(), x);
        if (arch_.bias) kern::vadd(grad + o.b1, ws.dz.data(), k);
        return;
    }
    kern::rank1_update(grad + o.w2, k, hh, 1.0, ws.dz.data(), ws.h.data());
    if (arch_.bias) kern::vadd(grad + o.b2, ws.dz.data(), k);
    kern::gemv_transposed(w + o.w2, k, hh, ws.dz.data(), ws.dh.data());
    for (std::size_t j = 0; j < hh; ++j) ws.du[j] = ws.dh[j] * (1.0 - ws.h[j] * ws.h[j]);
    kern::rank1_update(grad + o.w1, hh, d, 1.0, ws.du.data(), x);
    if (arch_.bias) kern::vadd(grad + o.b1, ws.du.data(), hh);
}

std::vector<double> SoftmaxPolicy::action_distribution(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != arch_.input_dim)
        throw DataError("input dimension " + std::to_string(x.size()) + " != " +
                        std::to_string(arch_.input_dim));
    for (double v : x)
        if (!std::isfinite(v)) throw DataError("non-finite input to policy");
    PolicyWorkspace ws;
    ws.resize(arch_);
    distribution_into(x.data(), ws);
    return ws.p;
}

int SoftmaxPolicy::greedy_action(std::span<const double> x) const {
    const std::vector<double> p = action_distribution(x);
    int best = 0;
    for (int k = 1; k < arch_.n_actions; ++k)
        if (p[k] > p[best]) best = k;
    return best;
}

void SoftmaxPolicy::validate_finite() const {
    for (double v : params_)
        if (!std::isfinite(v)) throw NumericError("policy has non-finite parameters");
}

// ---------------------------------------------------------------------------
// LossModel
// ---------------------------------------------------------------------------

namespace {

double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

std::size_t loss_model_n_params(int feature_dim, int n_actions, int hidden, bool bias) {
    const auto in = static_cast<std::size_t>(feature_dim + n_actions);
    const auto h = static_cast<std::size_t>(hidden);
    if (hidden == 0) return in + (bias ? 1 : 0);
    return h * in + (bias ? h : 0) + h + (bias ? 1 : 0);
}

}  // namespace

LossModel::LossModel(int feature_dim, int n_actions, int hidden, bool bias)
    : feature_dim_(feature_dim), n_actions_(n_actions), hidden_(hidden), bias_(bias) {
    if (feature_dim < 1 || n_actions < 1 || hidden < 0)
        throw DataError("loss model: bad shape");
    params_.assign(loss_model_n_params(feature_dim, n_actions, hidden, bias), 0.0);
}

LossModel LossModel::random_init(int feature_dim, int n_actions, int hidden, bool bias,
                                 std::uint64_t seed) {
    LossModel m(feature_dim, n_actions, hidden, bias);
    Rng rng(seed);
    for (double& v : m.params_) v = rng.uniform(-0.05, 0.05);
    m.seed_ = seed;
    return m;
}

LossModel LossModel::zero(int feature_dim, int n_actions) {
    LossModel m(feature_dim, n_actions, 0, true);
    m.params_.back() = -1000.0;  // sigmoid underflows to exactly 0
    return m;
}

LossModel make_loss_model(int feature_dim, int n_actions, int hidden, bool bias,
                          std::vector<double> params, std::uint64_t seed) {
    LossModel m(feature_dim, n_actions, hidden, bias);
    if (params.size() != m.params_.size())
        throw DataError("loss model: parameter count mismatch");
    m.params_ = std::move(params);
    m.seed_ = seed;
    return m;
}

double LossModel::forward(const double* input) const {
    const auto in = static_cast<std::size_t>(feature_dim_ + n_actions_);
    const double* w = params_.data();
    if (hidden_ == 0) {
        double s = kern::dot(w, input, in);
        if (bias_) s += w[in];
        return s;
    }
    const auto h = static_cast<std::size_t>(hidden_);
    std::vector<double> u(h);
    kern::gemv(w, h, in, input, u.data());
    const double* b1 = w + h * in;
    const double* w2 = b1 + (bias_ ? h : 0);
    const double* b2 = w2 + h;
    double s = 0.0;
    std::vector<double> hv(h);
    for (std::size_t j = 0; j < h; ++j) hv[j] = std::tanh(u[j] + (bias_ ? b1[j] : 0.0));
    s = kern::dot(w2, hv.data(), h);
    if (bias_) s += b2[0];
    return s;
}

double LossModel::predict(std::span<const double> x, int action) const {
    if (static_cast<int>(x.size()) != feature_dim_)
        throw DataError("loss model: input dimension mismatch");
    if (action < 0 || action >= n_actions_) throw DataError("loss model: bad action");
    std::vector<double> input(static_cast<std::size_t>(feature_dim_ + n_actions_), 0.0);
    std::copy(x.begin(), x.end(), input.begin());
    input[feature_dim_ + action] = 1.0;
    return sigmoid(forward(input.data()));
}

std::vector<double> LossModel::predict_all(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != feature_dim_)
        throw DataError("loss model: input dimension mismatch");
    std::vector<double> input(static_cast<std::size_t>(feature_dim_ + n_actions_), 0.0);
    std::copy(x.begin(), x.end(), input.begin());
    std::vector<double> out(n_actions_);
    for (int a = 0; a < n_actions_; ++a) {
        input[feature_dim_ + a] = 1.0;
        out[a] = sigmoid(forward(input.data()));
        input[feature_dim_ + a] = 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient-descent engine
// ---------------------------------------------------------------------------

namespace detail {

// One momentum GD loop. batch_grad(indices, grad) fills the averaged batch
// gradient; full_objective() is recorded per epoch and checked for divergence.
template <typename BatchGrad, typename FullObjective>
void run_gd(std::size_t n, std::size_t n_params, const TrainConfig& cfg,
            std::span<double> params, BatchGrad&& batch_grad,
            FullObjective&& full_objective, std::vector<double>& trace,
            const char* what) {
    std::vector<double> velocity(n_params, 0.0);
    std::vector<double> grad(n_params, 0.0);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5481e5u));

    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            batch_grad(std::span<const std::size_t>(order.data() + start, count), grad);
            kern::vscale_add(velocity.data(), cfg.momentum, -cfg.learning_rate,
                             grad.data(), n_params);
            kern::vadd(params.data(), velocity.data(), n_params);
        }
        const double obj = full_objective();
        trace.push_back(obj);
        if (!std::isfinite(obj))
            throw DivergenceError(std::string(what) + " diverged at epoch " +
                                      std::to_string(epoch + 1),
                                  epoch + 1);
    }
}

}  // namespace detail

namespace {

// Cross-entropy batch gradient over a packed feature matrix.
struct CeProblem {
    const double* X;
    const int* targets;
    std::size_t d;
    const SoftmaxPolicy* policy;
    PolicyWorkspace ws;

    void batch_grad(std::span<const std::size_t> idx, std::vector<double>& grad) {
        const int k = policy->arch().n_actions;
        const double inv = 1.0 / static_cast<double>(idx.size());
        for (std::size_t i : idx) {
            const double* x = X + i * d;
            policy->distribution_into(x, ws);
            for (int a = 0; a < k; ++a) ws.dz[a] = ws.p[a] * inv;
            ws.dz[targets[i]] -= inv;
            policy->accumulate_gradient(x, ws, grad.data());
        }
    }

    double mean_ce(std::size_t n) {
        std::vector<double> terms(n);
        for (std::size_t i = 0; i < n; ++i) {
            policy->distribution_into(X + i * d, ws);
            terms[i] = -std::log(ws.p[targets[i]]);
        }
        return kern::pairwise_sum(terms.data(), n) / static_cast<double>(n);
    }
};

double greedy_accuracy(const SoftmaxPolicy& policy, const double* X, std::size_t d,
                       std::span<const int> labels, std::span<const std::size_t> idx) {
    if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
    PolicyWorkspace ws;
    ws.resize(policy.arch());
    std::size_t hits = 0;
    for (std::size_t i : idx) {
        policy.distribution_into(X + i * d, ws);
        int best = 0;
        for (int k = 1; k < policy.arch().n_actions; ++k)
            if (ws.p[k] > ws.p[best]) best = k;
        if (best == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(idx.size());
}

}  // namespace

std::pair<double, std::vector<double>> ce_objective_and_gradient(
    const SoftmaxPolicy& policy, std::span<const double> inputs, std::span<const int> targets) {
    const auto d = static_cast<std::size_t>(policy.arch().input_dim);
    if (targets.empty() || inputs.size() != targets.size() * d)
        throw DataError("ce objective: input/target sizes disagree");
    CeProblem prob{inputs.data(), targets.data(), d, &policy, {}};
    prob.ws.resize(policy.arch());
    std::vector<double> grad(policy.n_params(), 0.0);
    std::vector<std::size_t> idx(targets.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    prob.batch_grad(idx, grad);
    return {prob.mean_ce(targets.size()), std::move(grad)};
}

SupervisedResult train_supervised(std::span<const double> inputs, std::span<const int> targets,
                                  const PolicyArch& arch, const TrainConfig& config) {
    arch.validate();
    config.validate();
    const auto d = static_cast<std::size_t>(arch.input_dim);
    if (targets.empty() || inputs.size() != targets.size() * d)
        throw DataError("train_supervised: input/target sizes disagree");
    for (int t : targets)
        if (t < 0 || t >= arch.n_actions)
            throw DataError("train_supervised: target outside [0, K)");
    const std::size_t n = targets.size();

    // 10% validation split for reporting; training uses the remainder.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng split_rng(mix_seed(config.seed, 0xa11du));
    split_rng.shuffle(order);
    const std::size_t val_count = n / 10;
    std::vector<std::size_t> val_idx(order.begin(),
                                     order.begin() + static_cast<std::ptrdiff_t>(val_count));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(val_count),
                                       order.end());

    SupervisedResult result;
    result.policy = SoftmaxPolicy::random_init(arch, config.seed);

    CeProblem prob{inputs.data(), targets.data(), d, &result.policy, {}};
    prob.ws.resize(arch);

    // Remap the GD loop onto the training indices.
    const std::size_t nt = train_idx.size();
    std::vector<std::size_t> mapped;
    detail::run_gd(
        nt, result.policy.n_params(), config, result.policy.params(),
        [&](std::span<const std::size_t> idx, std::vector<double>& grad) {
            // idx refers to positions within train_idx
            mapped.clear();
            for (std::size_t i : idx) mapped.push_back(train_idx[i]);
            prob.batch_grad(mapped, grad);
        },
        [&] {
            std::vector<double> terms(nt);
            for (std::size_t i = 0; i < nt; ++i) {
                prob.policy->distribution_into(inputs.data() + train_idx[i] * d, prob.ws);
                terms[i] = -std::log(prob.ws.p[targets[train_idx[i]]]);
            }
            return kern::pairwise_sum(terms.data(), nt) / static_cast<double>(nt);
        },
        result.ce_trace, "supervised training");

    result.policy.validate_finite();
    result.train_accuracy = greedy_accuracy(result.policy, inputs.data(), d, targets, train_idx);
    result.val_accuracy = val_idx.empty()
                              ? result.train_accuracy
                              : greedy_accuracy(result.policy, inputs.data(), d, targets, val_idx);
    return result;
}

TrainConfig logging_policy_default_config() {
    // Small steps so the accuracy trajectory moves through the band slowly
    // enough for the per-epoch checkpoints to land inside it.
    TrainConfig cfg;
    cfg.learning_rate = 0.02;
    cfg.momentum = 0.9;
    cfg.batch_size = 32;
    cfg.epochs = 400;
    return cfg;
}

LoggingPolicyResult train_logging_policy(std::span<const SupervisedSample> supervised,
                                         const Featurizer& featurizer, double subset_fraction,
                                         std::pair<double, double> accuracy_band,
                                         std::uint64_t seed, const TrainConfig& config) {
    if (supervised.empty()) throw DataError("train_logging_policy: no samples");
    if (!(subset_fraction > 0.0) || !(subset_fraction < 1.0))
        throw DataError("subset_fraction must be in (0, 1)");
    int n_actions = 0;
    for (const auto& s : supervised) n_actions = std::max(n_actions, s.label + 1);
    const auto [band_lo, band_hi] = accuracy_band;
    if (!(band_lo > 1.0 / n_actions) || !(band_hi < 1.0) || !(band_lo < band_hi))
        throw DataError("accuracy band must satisfy 1/K < lo < hi < 1");

    const std::size_t n = supervised.size();
    const auto d = static_cast<std::size_t>(featurizer.output_dim());
    const std::vector<double> X = featurize_all(featurizer, supervised);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = supervised[i].label;

    // Held-out slice first (10%), training subset drawn from the rest.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x106e01u));
    rng.shuffle(order);
    std::size_t heldout_count = std::max<std::size_t>(1, n / 10);
    auto subset_count = static_cast<std::size_t>(
        std::llround(subset_fraction * static_cast<double>(n)));
    subset_count = std::max<std::size_t>(1, std::min(subset_count, n - heldout_count));
    std::vector<std::size_t> heldout(order.begin(),
                                     order.begin() + static_cast<std::ptrdiff_t>(heldout_count));
    std::vector<std::size_t> subset(
        order.begin() + static_cast<std::ptrdiff_t>(heldout_count),
        order.begin() + static_cast<std::ptrdiff_t>(heldout_count + subset_count));

    PolicyArch arch{static_cast<int>(d), 64, n_actions, true};
    TrainConfig cfg = config;
    cfg.seed = seed;

    LoggingPolicyResult result;
    result.policy = SoftmaxPolicy::random_init(arch, seed);
    result.policy.featurizer = featurizer;
    result.subset_indices = subset;

    CeProblem prob{X.data(), labels.data(), d, &result.policy, {}};
    prob.ws.resize(arch);

    double best_acc = -1.0;
    auto check = [&](int epoch) -> bool {
        const double acc = greedy_accuracy(result.policy, X.data(), d, labels, heldout);
        best_acc = std::max(best_acc, acc);
        if (acc >= band_lo && acc <= band_hi) {
            result.checkpoint_epoch = epoch;
            result.heldout_accuracy = acc;
            return true;
        }
        return false;
    };

    if (check(0)) return result;

    std::vector<double> velocity(result.policy.n_params(), 0.0);
    std::vector<double> grad(result.policy.n_params(), 0.0);
    std::vector<std::size_t> epoch_order = subset;
    Rng shuffle_rng(mix_seed(seed, 0x5481e5u));
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(epoch_order);
        for (std::size_t start = 0; start < epoch_order.size(); start += batch) {
            const std::size_t count = std::min(batch, epoch_order.size() - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            prob.batch_grad({epoch_order.data() + start, count}, grad);
            kern::vscale_add(velocity.data(), cfg.momentum, -cfg.learning_rate, grad.data(),
                             grad.size());
            kern::vadd(result.policy.params().data(), velocity.data(), grad.size());
        }
        result.policy.validate_finite();
        if (check(epoch)) return result;
    }
    throw NumericError("no checkpoint reached accuracy band [" + format_double(band_lo) +
                       ", " + format_double(band_hi) + "] within " +
                       std::to_string(cfg.epochs) + " epochs; best held-out accuracy " +
                       format_double(best_acc));
}

// ---------------------------------------------------------------------------
// Loss model training
// ---------------------------------------------------------------------------

struct LossModelTrainer {
    LossModel* model;
    std::size_t in_dim;

    // Forward keeping hidden state; returns pre-squash score.
    double forward(const double* x, std::vector<double>& u, std::vector<double>& hv) const {
        const double* w = model->params_.data();
        if (model->hidden_ == 0) {
            double s = kern::dot(w, x, in_dim);
            if (model->bias_) s += w[in_dim];
            return s;
        }
        const auto h = static_cast<std::size_t>(model->hidden_);
        kern::gemv(w, h, in_dim, x, u.data());
        const double* b1 = w + h * in_dim;
        const double* w2 = b1 + (model->bias_ ? h : 0);
        const double* b2 = w2 + h;
        for (std::size_t j = 0; j < h; ++j)
            hv[j] = std::tanh(u[j] + (model->bias_ ? b1[j] : 0.0));
        double s = kern::dot(w2, hv.data(), h);
        if (model->bias_) s += b2[0];
        return s;
    }

    void accumulate(const double* x, double ds, const std::vector<double>& hv,
                    std::vector<double>& grad) const {
        if (model->hidden_ == 0) {
            kern::axpy(grad.data(), ds, x, in_dim);
            if (model->bias_) grad[in_dim] += ds;
            return;
        }
        const auto h = static_cast<std::size_t>(model->hidden_);
        const double* w = model->params_.data();
        const double* w2 = w + h * in_dim + (model->bias_ ? h : 0);
        double* gw1 = grad.data();
        double* gb1 = grad.data() + h * in_dim;
        double* gw2 = gb1 + (model->bias_ ? h : 0);
        double* gb2 = gw2 + h;
        kern::axpy(gw2, ds, hv.data(), h);
        if (model->bias_) gb2[0] += ds;
        for (std::size_t j = 0; j < h; ++j) {
            const double du = ds * w2[j] * (1.0 - hv[j] * hv[j]);
            kern::axpy(gw1 + j * in_dim, du, x, in_dim);
            if (model->bias_) gb1[j] += du;
        }
    }
};

namespace {

double bce_value(double score, double target) {
    // max(s,0) - s*t + log(1 + exp(-|s|)); finite for any finite score.
    return std::max(score, 0.0) - score * target + std::log1p(std::exp(-std::abs(score)));
}

}  // namespace

LossModelResult train_loss_model(const LoggedDataset& data, int hidden,
                                 const TrainConfig& config) {
    config.validate();
    const std::size_t n = data.samples.size();
    if (n == 0) throw DataError("train_loss_model: empty dataset");
    const int d = data.feature_dim;
    const int k = data.n_actions;
    const auto in_dim = static_cast<std::size_t>(d + k);

    std::vector<double> inputs(n * in_dim, 0.0);
    std::vector<double> targets(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = data.samples[i];
        std::copy(s.features.begin(), s.features.end(), inputs.begin() + i * in_dim);
        inputs[i * in_dim + d + s.action] = 1.0;
        targets[i] = s.loss;
    }

    LossModelResult result;
    result.model = LossModel::random_init(d, k, hidden, true, config.seed);
    LossModelTrainer trainer{&result.model, in_dim};

    std::vector<double> u(std::max(hidden, 1)), hv(std::max(hidden, 1));
    detail::run_gd(
        n, result.model.params().size(), config, result.model.params(),
        [&](std::span<const std::size_t> idx, std::vector<double>& grad) {
            const double inv = 1.0 / static_cast<double>(idx.size());
            for (std::size_t i : idx) {
                const double* x = inputs.data() + i * in_dim;
                const double score = trainer.forward(x, u, hv);
                const double ds = (sigmoid(score) - targets[i]) * inv;
                trainer.accumulate(x, ds, hv, grad);
            }
        },
        [&] {
            std::vector<double> terms(n);
            for (std::size_t i = 0; i < n; ++i)
                terms[i] = bce_value(trainer.forward(inputs.data() + i * in_dim, u, hv),
                                     targets[i]);
            return kern::pairwise_sum(terms.data(), n) / static_cast<double>(n);
        },
        result.bce_trace, "loss model training");
    return result;
}

// ---------------------------------------------------------------------------
// Propensities and decision rules
// ---------------------------------------------------------------------------

PropensityEstimate estimate_propensities(const SoftmaxPolicy& model,
                                         const Featurizer& featurizer,
                                         const LoggedDataset& data, double floor) {
    if (featurizer.output_dim() != data.feature_dim ||
        model.arch().input_dim != data.feature_dim)
        throw DataError("estimate_propensities: dimension mismatch (featurizer " +
                        std::to_string(featurizer.output_dim()) + ", model " +
                        std::to_string(model.arch().input_dim) + ", data " +
                        std::to_string(data.feature_dim) + ")");
    if (model.arch().n_actions < data.n_actions)
        throw DataError("estimate_propensities: model covers fewer actions than data");

    PropensityEstimate out;
    out.values.reserve(data.samples.size());
    PolicyWorkspace ws;
    ws.resize(model.arch());
    for (const auto& s : data.samples) {
        model.distribution_into(s.features.data(), ws);
        double p = ws.p[s.action];
        if (p < floor) {
            p = floor;
            ++out.clipped_count;
        }
        out.values.push_back(p);
    }
    return out;
}

int direct_method_action(const LossModel& model, std::span<const double> x) {
    const std::vector<double> pred = model.predict_all(x);
    int best = 0;
    for (int a = 1; a < model.n_actions(); ++a)
        if (pred[a] < pred[best]) best = a;
    return best;
}

SoftmaxPolicy baseline_policy(BaselineKind kind, const LoggedDataset& data) {
    data.validate();
    PolicyArch arch{data.feature_dim, 0, data.n_actions, true};
    SoftmaxPolicy policy = SoftmaxPolicy::zeros(arch);
    if (kind == BaselineKind::MostFrequent) {
        std::vector<std::size_t> counts(data.n_actions, 0);
        for (const auto& s : data.samples) ++counts[s.action];
        int modal = 0;
        for (int a = 1; a < data.n_actions; ++a)
            if (counts[a] > counts[modal]) modal = a;
        // Saturated bias: exp(-1000) underflows to zero, so the softmax is an
        // exact point mass on the modal action.
        const Offsets o = layout(arch);
        policy.params()[o.b1 + static_cast<std::size_t>(modal)] = 1000.0;
    }
    return policy;
}

}  // namespace blbf
