#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "blbf/dataset.hpp"
#include "blbf/featurizer.hpp"
#include "blbf/train_config.hpp"

namespace blbf {

/// Network shape: linear map d -> K when hidden == 0, otherwise one tanh
/// hidden layer d -> hidden -> K.
struct PolicyArch {
    int input_dim = 0;
    int hidden = 0;
    int n_actions = 0;
    bool bias = true;

    std::size_t n_params() const;
    void validate() const;
};

/// Scratch buffers for a forward/backward pass; reused across samples.
struct PolicyWorkspace {
    std::vector<double> u, h, z, p, dz, dh, du;
    void resize(const PolicyArch& arch);
};

/// Parametric stochastic policy pi(a|x) over a finite action set; the same
/// type trained on observed actions serves as the propensity model P(a|x).
class SoftmaxPolicy {
   public:
    SoftmaxPolicy() = default;

    static SoftmaxPolicy zeros(const PolicyArch& arch);
    /// Parameters uniform in [-0.05, 0.05] drawn from `seed`.
    static SoftmaxPolicy random_init(const PolicyArch& arch, std::uint64_t seed);

    const PolicyArch& arch() const { return arch_; }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    std::size_t n_params() const { return params_.size(); }

    std::uint64_t seed() const { return seed_; }
    void set_seed(std::uint64_t s) { seed_ = s; }

    /// Probabilities over all K actions; max-subtracted exponentials, so any
    /// finite logits are safe. Throws DataError on non-finite or mis-sized input.
    std::vector<double> action_distribution(std::span<const double> x) const;

    /// Argmax of action_distribution; ties go to the lowest action id.
    int greedy_action(std::span<const double> x) const;

    /// Fast paths for trainers; `x` must have input_dim entries.
    void distribution_into(const double* x, PolicyWorkspace& ws) const;
    /// Accumulates d(objective)/d(params) into `grad` given ws.dz (the
    /// gradient w.r.t. logits) and the forward state left in `ws`.
    void accumulate_gradient(const double* x, PolicyWorkspace& ws, double* grad) const;

    void validate_finite() const;  // throws NumericError on non-finite parameter

    /// Featurizer descriptor carried with the model (serialized alongside).
    Featurizer featurizer;

   private:
    PolicyArch arch_;
    std::vector<double> params_;
    std::uint64_t seed_ = 0;

    friend SoftmaxPolicy make_policy(const PolicyArch&, std::vector<double>, std::uint64_t);
};

/// Internal constructor used by deserialization and tests.
SoftmaxPolicy make_policy(const PolicyArch& arch, std::vector<double> params,
                          std::uint64_t seed);

/// Regressor mapping (features ++ one-hot action) to a predicted loss in
/// [0, 1] through a squashed scalar output. Shares the policy layer shapes.
class LossModel {
   public:
    LossModel() = default;
    LossModel(int feature_dim, int n_actions, int hidden, bool bias);

    static LossModel random_init(int feature_dim, int n_actions, int hidden, bool bias,
                                 std::uint64_t seed);
    /// Predicts exactly 0 everywhere (saturated output unit).
    static LossModel zero(int feature_dim, int n_actions);

    int feature_dim() const { return feature_dim_; }
    int n_actions() const { return n_actions_; }
    int hidden() const { return hidden_; }
    bool bias() const { return bias_; }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    std::uint64_t seed() const { return seed_; }
    void set_seed(std::uint64_t s) { seed_ = s; }

    /// delta_hat(x, a) in [0, 1].
    double predict(std::span<const double> x, int action) const;
    /// All K predictions for one context.
    std::vector<double> predict_all(std::span<const double> x) const;

   private:
    int feature_dim_ = 0;
    int n_actions_ = 0;
    int hidden_ = 0;
    bool bias_ = true;
    std::vector<double> params_;
    std::uint64_t seed_ = 0;

    double forward(const double* input) const;  // input has feature_dim + n_actions
    friend struct LossModelTrainer;
    friend LossModel make_loss_model(int, int, int, bool, std::vector<double>, std::uint64_t);
};

LossModel make_loss_model(int feature_dim, int n_actions, int hidden, bool bias,
                          std::vector<double> params, std::uint64_t seed);

// -- Training ------------------------------------------------------------------

struct SupervisedResult {
    SoftmaxPolicy policy;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    std::vector<double> ce_trace;  // mean cross-entropy per epoch
};

/// Mean cross-entropy over a packed batch and its exact parameter gradient
/// (the same code path the supervised trainer steps on).
std::pair<double, std::vector<double>> ce_objective_and_gradient(
    const SoftmaxPolicy& policy, std::span<const double> inputs, std::span<const int> targets);

/// Minimizes mean cross-entropy by mini-batch gradient descent with momentum.
/// `inputs` is row-major n x input_dim. Deterministic given config.seed.
SupervisedResult train_supervised(std::span<const double> inputs, std::span<const int> targets,
                                  const PolicyArch& arch, const TrainConfig& config);

struct LoggingPolicyResult {
    SoftmaxPolicy policy;
    int checkpoint_epoch = 0;
    double heldout_accuracy = 0.0;
    std::vector<std::size_t> subset_indices;  // samples used for training
};

TrainConfig logging_policy_default_config();

/// Trains on `subset_fraction` of the samples, checkpointing every epoch, and
/// returns the first checkpoint whose held-out greedy accuracy falls inside
/// `accuracy_band`. Throws NumericError (reporting the best accuracy reached)
/// if no checkpoint lands in the band within the epoch budget.
LoggingPolicyResult train_logging_policy(std::span<const SupervisedSample> supervised,
                                         const Featurizer& featurizer, double subset_fraction,
                                         std::pair<double, double> accuracy_band,
                                         std::uint64_t seed,
                                         const TrainConfig& config = logging_policy_default_config());

struct LossModelResult {
    LossModel model;
    std::vector<double> bce_trace;
};

/// Fits delta_hat on (features ++ one-hot action) -> loss with the logistic
/// objective; the Direct Method / DR outcome component.
LossModelResult train_loss_model(const LoggedDataset& data, int hidden,
                                 const TrainConfig& config);

// -- Propensities and decision rules -------------------------------------------

struct PropensityEstimate {
    std::vector<double> values;
    std::size_t clipped_count = 0;
};

/// p_hat_i = model probability of the logged action, floored at `floor`.
PropensityEstimate estimate_propensities(const SoftmaxPolicy& model,
                                         const Featurizer& featurizer,
                                         const LoggedDataset& data, double floor = 1e-3);

/// Argmin over predicted losses; ties go to the lowest action id.
int direct_method_action(const LossModel& model, std::span<const double> x);

enum class BaselineKind { Random, MostFrequent };

/// Random: the exact uniform policy. MostFrequent: a point mass on the modal
/// logged action (ties to the lowest id).
SoftmaxPolicy baseline_policy(BaselineKind kind, const LoggedDataset& data);

// -- Serialization ---------------------------------------------------------------

/// Text document: architecture descriptor, flat parameters at 17 significant
/// digits, and the training seed. Round-trips are bit-exact.
std::string policy_to_string(const SoftmaxPolicy& policy);
SoftmaxPolicy policy_from_string(const std::string& text);
void save_policy(const std::string& path, const SoftmaxPolicy& policy);
SoftmaxPolicy load_policy(const std::string& path);

std::string loss_model_to_string(const LossModel& model);
LossModel loss_model_from_string(const std::string& text);
void save_loss_model(const std::string& path, const LossModel& model);
LossModel load_loss_model(const std::string& path);

}  // namespace blbf
