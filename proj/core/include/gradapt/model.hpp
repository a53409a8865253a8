#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gradapt/dataset.hpp"
#include "gradapt/linalg.hpp"

namespace gradapt {

enum class Activation { Relu, Tanh };

/// Binary scorer: either a linear model or a small fully-connected net with
/// a linear output. Predicted label is sign(score) with sign(0) := +1.
struct Classifier {
    enum class Kind { Linear, Mlp };
    Kind kind = Kind::Linear;

    // Linear
    Vec w;
    double b = 0.0;

    // Mlp: weights[l] maps layer l input to layer l output; last layer has a
    // single output unit. Hidden layers use `activation`, output is linear.
    std::vector<Matrix> weights;
    std::vector<Vec> biases;
    Activation activation = Activation::Relu;

    int input_dim() const;
    std::size_t param_count() const;
    Vec get_params() const;
    void set_params(const Vec& flat);

    static Classifier make_linear(int dim);
    static Classifier make_linear(Vec w, double b);
    /// layer_sizes = {in, hidden..., 1}; weights and biases initialized
    /// uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from the seed.
    static Classifier make_mlp(const std::vector<int>& layer_sizes, Activation act, std::uint64_t seed);
};

double predict_score(const Classifier& h, const Vec& x);
inline int predict_label(const Classifier& h, const Vec& x) { return predict_score(h, x) >= 0.0 ? 1 : -1; }

/// Hidden-layer pre-activations of an MLP forward pass (used by the
/// gradient checker to keep probes away from relu kinks).
std::vector<Vec> mlp_preactivations(const Classifier& h, const Vec& x);

enum class LossKind { Logistic, Hinge, Ramp, Squared };

/// A loss together with a valid Lipschitz constant in its score argument.
/// Margin losses take targets in {-1, +1}; squared loss accepts real-valued
/// targets, and its constant holds for scores within [-score_bound, score_bound].
struct LossSpec {
    LossKind kind = LossKind::Logistic;
    double rho = 1.0;
    double score_bound = 3.0;  // only meaningful for squared

    static LossSpec logistic() { return {LossKind::Logistic, 1.0, 0.0}; }
    static LossSpec hinge() { return {LossKind::Hinge, 1.0, 0.0}; }
    static LossSpec ramp() { return {LossKind::Ramp, 1.0, 0.0}; }
    static LossSpec squared(double score_bound = 3.0) {
        return {LossKind::Squared, 2.0 * (score_bound + 1.0), score_bound};
    }
    std::string name() const;
};

LossSpec loss_from_name(const std::string& name);

double loss_eval(const LossSpec& loss, double score, double target);
/// d loss / d score. At hinge/ramp kinks the flat side's derivative (zero)
/// is taken.
double loss_grad(const LossSpec& loss, double score, double target);

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
    Optimizer optimizer = Optimizer::Adam;
    double lr = 0.01;
    int epochs = 100;
    int batch_size = 32;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;
    std::uint64_t seed = 0;
};

/// A training point: feature vector plus target (a hard label in {-1, +1},
/// or a raw score target for the squared loss).
struct TrainExample {
    Vec x;
    double target = 1.0;
};

std::vector<TrainExample> to_train_examples(const std::vector<LabeledSample>& samples);

/// Minibatch ERM from the given initial parameters. Deterministic in
/// (init, data, cfg); epoch-mean training losses are appended to loss_trace
/// when provided. Throws on NaN/Inf parameters (lr too high).
Classifier train_erm(const Classifier& init, const std::vector<TrainExample>& data, const LossSpec& loss,
                     const TrainConfig& cfg, std::vector<double>* loss_trace = nullptr);

/// Mean loss of h over a labeled evaluation set.
double population_error(const Classifier& h, const std::vector<LabeledSample>& eval_set,
                        const LossSpec& loss);
/// Misclassification rate.
double zero_one_error(const Classifier& h, const std::vector<LabeledSample>& eval_set);

/// Upper bound on the Lipschitz constant of h: ||w||_2 for linear models,
/// product of layer spectral norms (power iteration to 1e-6 relative
/// tolerance; relu/tanh are 1-Lipschitz) for MLPs.
double lipschitz_upper_bound(const Classifier& h);

/// Spectral norm of a matrix by power iteration.
double spectral_norm(const Matrix& m, double rel_tol = 1e-6, int max_iter = 10000);

/// Compares analytic parameter gradients of the mean batch loss against
/// central finite differences. Samples whose margin sits within 10*step of
/// a loss kink, or whose relu pre-activations sit within 10*step of zero,
/// are skipped (checked_count reports how many remained). Relative error
/// uses denominator max(|analytic|, |numeric|, 1e-6).
double grad_check(const Classifier& h, const LossSpec& loss, const std::vector<TrainExample>& batch,
                  double step, int* checked_count = nullptr);

/// Mean analytic gradient of the loss over a batch, flattened in parameter
/// order (exposed for the checker and tests).
Vec batch_gradient(const Classifier& h, const std::vector<TrainExample>& batch, const LossSpec& loss);
double batch_loss(const Classifier& h, const std::vector<TrainExample>& batch, const LossSpec& loss);

// Checkpoint container: text format with shapes, full-precision parameters
// and the TrainConfig used.
void save_classifier(const Classifier& h, const TrainConfig& cfg, std::ostream& out);
void save_classifier_file(const Classifier& h, const TrainConfig& cfg, const std::string& filename);
std::pair<Classifier, TrainConfig> load_classifier(std::istream& in);
std::pair<Classifier, TrainConfig> load_classifier_file(const std::string& filename);

}  // namespace gradapt
