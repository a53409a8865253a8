#include "gradapt/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gradapt/csv.hpp"
#include "gradapt/rng.hpp"

namespace gradapt {

namespace {

bool finite(double v) { return std::isfinite(v); }

double activate(Activation a, double z) {
    return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double activate_grad(Activation a, double z) {
    if (a == Activation::Relu) return z > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

}  // namespace

int Classifier::input_dim() const {
    if (kind == Kind::Linear) return static_cast<int>(w.size());
    return weights.empty() ? 0 : weights[0].cols;
}

std::size_t Classifier::param_count() const {
    if (kind == Kind::Linear) return w.size() + 1;
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].data.size() + biases[l].size();
    return n;
}

Vec Classifier::get_params() const {
    Vec flat;
    flat.reserve(param_count());
    if (kind == Kind::Linear) {
        flat.insert(flat.end(), w.begin(), w.end());
        flat.push_back(b);
    } else {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            flat.insert(flat.end(), weights[l].data.begin(), weights[l].data.end());
            flat.insert(flat.end(), biases[l].begin(), biases[l].end());
        }
    }
    return flat;
}

void Classifier::set_params(const Vec& flat) {
    if (flat.size() != param_count()) throw std::invalid_argument("set_params: size mismatch");
    std::size_t pos = 0;
    if (kind == Kind::Linear) {
        std::copy(flat.begin(), flat.begin() + w.size(), w.begin());
        b = flat[w.size()];
        return;
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        std::copy(flat.begin() + pos, flat.begin() + pos + weights[l].data.size(), weights[l].data.begin());
        pos += weights[l].data.size();
        std::copy(flat.begin() + pos, flat.begin() + pos + biases[l].size(), biases[l].begin());
        pos += biases[l].size();
    }
}

Classifier Classifier::make_linear(int dim) {
    Classifier h;
    h.kind = Kind::Linear;
    h.w.assign(dim, 0.0);
    h.b = 0.0;
    return h;
}

Classifier Classifier::make_linear(Vec w, double b) {
    Classifier h;
    h.kind = Kind::Linear;
    h.w = std::move(w);
    h.b = b;
    return h;
}

Classifier Classifier::make_mlp(const std::vector<int>& layer_sizes, Activation act, std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output sizes");
    if (layer_sizes.back() != 1) throw std::invalid_argument("make_mlp: output layer must have one unit");
    Classifier h;
    h.kind = Kind::Mlp;
    h.activation = act;
    Rng rng(derive_seed(seed, {0x31f7}));
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("make_mlp: non-positive layer size");
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Matrix w(fan_out, fan_in);
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        Vec bias(fan_out);
        for (double& v : bias) v = rng.uniform(-bound, bound);
        h.weights.push_back(std::move(w));
        h.biases.push_back(std::move(bias));
    }
    return h;
}

double predict_score(const Classifier& h, const Vec& x) {
    if (static_cast<int>(x.size()) != h.input_dim())
        throw std::invalid_argument("predict_score: input dimension mismatch");
    if (h.kind == Classifier::Kind::Linear) return dot(h.w, x) + h.b;
    Vec cur = x, next;
    for (std::size_t l = 0; l < h.weights.size(); ++l) {
        matvec(h.weights[l], cur, next);
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += h.biases[l][i];
        if (l + 1 < h.weights.size())
            for (double& v : next) v = activate(h.activation, v);
        cur.swap(next);
    }
    return cur[0];
}

std::vector<Vec> mlp_preactivations(const Classifier& h, const Vec& x) {
    std::vector<Vec> pre;
    if (h.kind != Classifier::Kind::Mlp) return pre;
    Vec cur = x, next;
    for (std::size_t l = 0; l < h.weights.size(); ++l) {
        matvec(h.weights[l], cur, next);
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += h.biases[l][i];
        if (l + 1 < h.weights.size()) {
            pre.push_back(next);
            for (double& v : next) v = activate(h.activation, v);
        }
        cur.swap(next);
    }
    return pre;
}

std::string LossSpec::name() const {
    switch (kind) {
        case LossKind::Logistic: return "logistic";
        case LossKind::Hinge: return "hinge";
        case LossKind::Ramp: return "ramp";
        case LossKind::Squared: return "squared";
    }
    return "?";
}

LossSpec loss_from_name(const std::string& name) {
    if (name == "logistic") return LossSpec::logistic();
    if (name == "hinge") return LossSpec::hinge();
    if (name == "ramp") return LossSpec::ramp();
    if (name == "squared") return LossSpec::squared();
    throw std::invalid_argument("unknown loss: " + name);
}

namespace {

void check_margin_target(const LossSpec& loss, double target) {
    if (loss.kind != LossKind::Squared && target != 1.0 && target != -1.0)
        throw std::invalid_argument("loss target must be -1 or +1 for " + loss.name());
}

double stable_log1pexp(double z) {
    // log(1 + e^z) without overflow.
    if (z > 35.0) return z;
    if (z < -35.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

}  // namespace

double loss_eval(const LossSpec& loss, double score, double target) {
    check_margin_target(loss, target);
    switch (loss.kind) {
        case LossKind::Logistic: return stable_log1pexp(-target * score);
        case LossKind::Hinge: return std::max(0.0, 1.0 - target * score);
        case LossKind::Ramp: return std::min(1.0, std::max(0.0, 1.0 - target * score));
        case LossKind::Squared: {
            const double d = score - target;
            return d * d;
        }
    }
    return 0.0;
}

double loss_grad(const LossSpec& loss, double score, double target) {
    check_margin_target(loss, target);
    switch (loss.kind) {
        case LossKind::Logistic: {
            const double z = target * score;
            // d/ds log(1+e^{-z}) = -y * sigmoid(-z)
            const double s = z > 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
            return -target * s;
        }
        case LossKind::Hinge: {
            const double z = target * score;
            return z < 1.0 ? -target : 0.0;  // 0 at the kink (flat side)
        }
        case LossKind::Ramp: {
            const double z = target * score;
            return (z > 0.0 && z < 1.0) ? -target : 0.0;  // 0 at both kinks
        }
        case LossKind::Squared: return 2.0 * (score - target);
    }
    return 0.0;
}

std::vector<TrainExample> to_train_examples(const std::vector<LabeledSample>& samples) {
    std::vector<TrainExample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({s.x, static_cast<double>(s.y)});
    return out;
}

namespace {

// Backprop of d(loss)/d(score) * d(score)/d(params) into a flat gradient
// buffer laid out as get_params(). Returns the score.
double accumulate_gradient(const Classifier& h, const Vec& x, double dscore, Vec& grad) {
    if (h.kind == Classifier::Kind::Linear) {
        for (std::size_t j = 0; j < x.size(); ++j) grad[j] += dscore * x[j];
        grad[x.size()] += dscore;
        return dot(h.w, x) + h.b;
    }
    const std::size_t L = h.weights.size();
    std::vector<Vec> activations(L + 1);  // activations[0] = x
    std::vector<Vec> preacts(L);
    activations[0] = x;
    for (std::size_t l = 0; l < L; ++l) {
        matvec(h.weights[l], activations[l], preacts[l]);
        for (std::size_t i = 0; i < preacts[l].size(); ++i) preacts[l][i] += h.biases[l][i];
        activations[l + 1] = preacts[l];
        if (l + 1 < L)
            for (double& v : activations[l + 1]) v = activate(h.activation, v);
    }
    const double score = activations[L][0];

    Vec delta{dscore};  // d loss / d preact of the output layer
    std::size_t offset_end = h.param_count();
    for (std::size_t l = L; l-- > 0;) {
        const Matrix& w = h.weights[l];
        offset_end -= w.data.size() + h.biases[l].size();
        double* wgrad = grad.data() + offset_end;
        double* bgrad = wgrad + w.data.size();
        const Vec& input = activations[l];
        for (int i = 0; i < w.rows; ++i) {
            const double di = delta[i];
            double* row = wgrad + static_cast<std::size_t>(i) * w.cols;
            for (int j = 0; j < w.cols; ++j) row[j] += di * input[j];
            bgrad[i] += di;
        }
        if (l > 0) {
            Vec prev(w.cols, 0.0);
            for (int i = 0; i < w.rows; ++i) {
                const double di = delta[i];
                for (int j = 0; j < w.cols; ++j) prev[j] += di * w(i, j);
            }
            for (int j = 0; j < w.cols; ++j) prev[j] *= activate_grad(h.activation, preacts[l - 1][j]);
            delta.swap(prev);
        }
    }
    return score;
}

}  // namespace

Vec batch_gradient(const Classifier& h, const std::vector<TrainExample>& batch, const LossSpec& loss) {
    Vec grad(h.param_count(), 0.0);
    for (const auto& ex : batch) {
        const double score = predict_score(h, ex.x);
        const double d = loss_grad(loss, score, ex.target) / static_cast<double>(batch.size());
        accumulate_gradient(h, ex.x, d, grad);
    }
    return grad;
}

double batch_loss(const Classifier& h, const std::vector<TrainExample>& batch, const LossSpec& loss) {
    double total = 0.0;
    for (const auto& ex : batch) total += loss_eval(loss, predict_score(h, ex.x), ex.target);
    return total / static_cast<double>(batch.size());
}

Classifier train_erm(const Classifier& init, const std::vector<TrainExample>& data, const LossSpec& loss,
                     const TrainConfig& cfg, std::vector<double>* loss_trace) {
    if (data.empty()) throw std::invalid_argument("train_erm: empty training data");
    if (cfg.lr <= 0.0) throw std::invalid_argument("train_erm: lr must be positive");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_erm: batch_size must be >= 1");
    for (const auto& ex : data)
        if (static_cast<int>(ex.x.size()) != init.input_dim())
            throw std::invalid_argument("train_erm: sample dimension mismatch");

    Classifier h = init;
    const std::size_t P = h.param_count();
    Vec params = h.get_params();
    Vec grad(P), m(P, 0.0), v(P, 0.0);
    Rng rng(derive_seed(cfg.seed, {0x7e41}));
    long adam_step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order = rng.permutation(static_cast<int>(data.size()));
        double epoch_loss = 0.0;
        std::size_t processed = 0;
        while (processed < order.size()) {
            const std::size_t batch_end = std::min(processed + cfg.batch_size, order.size());
            const std::size_t bs = batch_end - processed;
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss_sum = 0.0;
            for (std::size_t k = processed; k < batch_end; ++k) {
                const TrainExample& ex = data[order[k]];
                const double score = predict_score(h, ex.x);
                batch_loss_sum += loss_eval(loss, score, ex.target);
                const double d = loss_grad(loss, score, ex.target) / static_cast<double>(bs);
                accumulate_gradient(h, ex.x, d, grad);
            }
            epoch_loss += batch_loss_sum;

            if (cfg.optimizer == Optimizer::Sgd) {
                // Classic L2: decay folded into the gradient.
                if (cfg.weight_decay > 0.0)
                    for (std::size_t i = 0; i < P; ++i) grad[i] += cfg.weight_decay * params[i];
                for (std::size_t i = 0; i < P; ++i) params[i] -= cfg.lr * grad[i];
            } else {
                // Adam with decoupled weight decay; folding L2 into the
                // gradient would be rescaled by 1/sqrt(v) and blow up once
                // the data gradient vanishes.
                ++adam_step;
                const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_step));
                const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_step));
                for (std::size_t i = 0; i < P; ++i) {
                    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
                    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                    params[i] -= cfg.lr * ((m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps_hat) +
                                           cfg.weight_decay * params[i]);
                }
            }
            for (std::size_t i = 0; i < P; ++i)
                if (!finite(params[i]))
                    throw std::runtime_error("train_erm: parameters diverged (NaN/Inf); reduce lr");
            h.set_params(params);
            processed = batch_end;
        }
        if (loss_trace) loss_trace->push_back(epoch_loss / static_cast<double>(data.size()));
    }
    return h;
}

double population_error(const Classifier& h, const std::vector<LabeledSample>& eval_set,
                        const LossSpec& loss) {
    if (eval_set.empty()) throw std::invalid_argument("population_error: empty evaluation set");
    double total = 0.0;
    for (const auto& s : eval_set)
        total += loss_eval(loss, predict_score(h, s.x), static_cast<double>(s.y));
    return total / static_cast<double>(eval_set.size());
}

double zero_one_error(const Classifier& h, const std::vector<LabeledSample>& eval_set) {
    if (eval_set.empty()) throw std::invalid_argument("zero_one_error: empty evaluation set");
    std::size_t wrong = 0;
    for (const auto& s : eval_set)
        if (predict_label(h, s.x) != s.y) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(eval_set.size());
}

double spectral_norm(const Matrix& mat, double rel_tol, int max_iter) {
    if (mat.rows == 0 || mat.cols == 0) return 0.0;
    Rng rng(0x5bec7 /* fixed: deterministic estimate */);
    Vec v(mat.cols);
    for (double& x : v) x = rng.normal();
    double nv = norm2(v);
    for (double& x : v) x /= nv;
    Vec mv, mtmv;
    double sigma = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        matvec(mat, v, mv);
        matvec_transposed(mat, mv, mtmv);
        const double norm_mtmv = norm2(mtmv);
        if (norm_mtmv == 0.0) return 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = mtmv[i] / norm_mtmv;
        const double next = std::sqrt(norm_mtmv);  // ||M^T M v|| -> sigma^2 when v is normalized
        if (it > 0 && std::abs(next - sigma) <= rel_tol * std::max(next, 1e-300)) return next;
        sigma = next;
    }
    return sigma;
}

double lipschitz_upper_bound(const Classifier& h) {
    if (h.kind == Classifier::Kind::Linear) return norm2(h.w);
    double product = 1.0;
    for (const Matrix& w : h.weights) product *= spectral_norm(w);
    return product;  // relu/tanh have Lipschitz constant 1
}

double grad_check(const Classifier& h, const LossSpec& loss, const std::vector<TrainExample>& batch,
                  double step, int* checked_count) {
    if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
    std::vector<TrainExample> probes;
    for (const auto& ex : batch) {
        const double score = predict_score(h, ex.x);
        if (loss.kind == LossKind::Hinge || loss.kind == LossKind::Ramp) {
            const double z = ex.target * score;
            double kink_dist = std::abs(z - 1.0);
            if (loss.kind == LossKind::Ramp) kink_dist = std::min(kink_dist, std::abs(z));
            if (kink_dist <= 10.0 * step) continue;
        }
        if (h.kind == Classifier::Kind::Mlp && h.activation == Activation::Relu) {
            bool near_relu_kink = false;
            for (const Vec& pre : mlp_preactivations(h, ex.x))
                for (double z : pre)
                    if (std::abs(z) <= 10.0 * step * (1.0 + norm2(ex.x))) near_relu_kink = true;
            if (near_relu_kink) continue;
        }
        probes.push_back(ex);
    }
    if (checked_count) *checked_count = static_cast<int>(probes.size());
    if (probes.empty()) return 0.0;

    const Vec analytic = batch_gradient(h, probes, loss);
    Classifier work = h;
    Vec params = h.get_params();
    double max_rel = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        work.set_params(params);
        const double up = batch_loss(work, probes, loss);
        params[i] = saved - step;
        work.set_params(params);
        const double down = batch_loss(work, probes, loss);
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
    }
    return max_rel;
}

// ---------------------------------------------------------------------------
// Checkpoint format

void save_classifier(const Classifier& h, const TrainConfig& cfg, std::ostream& out) {
    out << "gradapt-classifier v1\n";
    out << "optimizer=" << (cfg.optimizer == Optimizer::Adam ? "adam" : "sgd") << " lr=" << fmt_g17(cfg.lr)
        << " epochs=" << cfg.epochs << " batch_size=" << cfg.batch_size
        << " weight_decay=" << fmt_g17(cfg.weight_decay) << " beta1=" << fmt_g17(cfg.beta1)
        << " beta2=" << fmt_g17(cfg.beta2) << " eps_hat=" << fmt_g17(cfg.eps_hat) << " seed=" << cfg.seed
        << "\n";
    if (h.kind == Classifier::Kind::Linear) {
        out << "linear dim=" << h.w.size() << "\n";
        for (double v : h.w) out << fmt_g17(v) << "\n";
        out << fmt_g17(h.b) << "\n";
        return;
    }
    out << "mlp layers=" << h.weights.size()
        << " activation=" << (h.activation == Activation::Relu ? "relu" : "tanh") << "\n";
    for (std::size_t l = 0; l < h.weights.size(); ++l) {
        const Matrix& w = h.weights[l];
        out << "layer " << l << " rows=" << w.rows << " cols=" << w.cols << "\n";
        for (double v : w.data) out << fmt_g17(v) << "\n";
        for (double v : h.biases[l]) out << fmt_g17(v) << "\n";
    }
}

void save_classifier_file(const Classifier& h, const TrainConfig& cfg, const std::string& filename) {
    std::ofstream out(filename, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + filename);
    save_classifier(h, cfg, out);
}

std::pair<Classifier, TrainConfig> load_classifier(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "gradapt-classifier v1")
        throw std::runtime_error("classifier file: bad magic line");
    if (!std::getline(in, line)) throw std::runtime_error("classifier file: missing train config");
    TrainConfig cfg;
    {
        char opt[16] = {0};
        unsigned long long seed = 0;
        if (std::sscanf(line.c_str(),
                        "optimizer=%15s lr=%lf epochs=%d batch_size=%d weight_decay=%lf beta1=%lf "
                        "beta2=%lf eps_hat=%lf seed=%llu",
                        opt, &cfg.lr, &cfg.epochs, &cfg.batch_size, &cfg.weight_decay, &cfg.beta1,
                        &cfg.beta2, &cfg.eps_hat, &seed) != 9)
            throw std::runtime_error("classifier file: malformed train config: " + line);
        cfg.optimizer = std::string(opt) == "adam" ? Optimizer::Adam : Optimizer::Sgd;
        cfg.seed = seed;
    }
    if (!std::getline(in, line)) throw std::runtime_error("classifier file: missing model header");
    auto read_value = [&in]() {
        std::string s;
        if (!std::getline(in, s)) throw std::runtime_error("classifier file: truncated parameters");
        return std::stod(s);
    };
    Classifier h;
    if (line.rfind("linear", 0) == 0) {
        unsigned long dim = 0;
        if (std::sscanf(line.c_str(), "linear dim=%lu", &dim) != 1)
            throw std::runtime_error("classifier file: malformed linear header");
        h = Classifier::make_linear(static_cast<int>(dim));
        for (auto& v : h.w) v = read_value();
        h.b = read_value();
        return {h, cfg};
    }
    unsigned long layers = 0;
    char act[16] = {0};
    if (std::sscanf(line.c_str(), "mlp layers=%lu activation=%15s", &layers, act) != 2)
        throw std::runtime_error("classifier file: malformed mlp header");
    h.kind = Classifier::Kind::Mlp;
    h.activation = std::string(act) == "tanh" ? Activation::Tanh : Activation::Relu;
    for (unsigned long l = 0; l < layers; ++l) {
        if (!std::getline(in, line)) throw std::runtime_error("classifier file: missing layer header");
        unsigned long idx = 0, rows = 0, cols = 0;
        if (std::sscanf(line.c_str(), "layer %lu rows=%lu cols=%lu", &idx, &rows, &cols) != 3 || idx != l)
            throw std::runtime_error("classifier file: malformed layer header: " + line);
        Matrix w(static_cast<int>(rows), static_cast<int>(cols));
        for (double& v : w.data) v = read_value();
        Vec bias(rows);
        for (double& v : bias) v = read_value();
        h.weights.push_back(std::move(w));
        h.biases.push_back(std::move(bias));
    }
    return {h, cfg};
}

std::pair<Classifier, TrainConfig> load_classifier_file(const std::string& filename) {
    std::ifstream in(filename, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open classifier file: " + filename);
    return load_classifier(in);
}

}  // namespace gradapt
