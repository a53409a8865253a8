#include "gradapt/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gradapt/csv.hpp"
#include "gradapt/rng.hpp"

namespace gradapt {

void BoundConstants::validate() const {
    if (rho < 0 || R < 0 || B < 0) throw std::invalid_argument("bound constants: rho, R, B must be >= 0");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("bound constants: delta must be in (0,1)");
    if (num_layers < 1) throw std::invalid_argument("bound constants: num_layers must be >= 1");
    for (double ci : c)
        if (!std::isfinite(ci)) throw std::invalid_argument("bound constants: non-finite scale");
}

WeightVector WeightVector::uniform(int t) {
    if (t < 1) throw std::invalid_argument("weight vector: t must be >= 1");
    WeightVector w;
    w.q.assign(t, 1.0 / static_cast<double>(t));
    return w;
}

WeightVector WeightVector::one_hot(int t, int index) {
    if (t < 1 || index < 0 || index >= t) throw std::invalid_argument("weight vector: bad one-hot index");
    WeightVector w;
    w.q.assign(t, 0.0);
    w.q[index] = 1.0;
    return w;
}

void WeightVector::validate() const {
    if (q.empty()) throw std::invalid_argument("weight vector: empty");
    double sum = 0.0;
    for (double v : q) {
        if (v < -1e-15) throw std::invalid_argument("weight vector: negative entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("weight vector: entries must sum to 1");
}

double error_diff_bound(double rho, double R, double wp) {
    if (rho < 0 || R < 0 || wp < 0) throw std::invalid_argument("error_diff_bound: negative argument");
    return rho * std::sqrt(R * R + 1.0) * wp;
}

double disc_estimate(const DomainPath& path, const WeightVector& q, const LossSpec& loss,
                     const std::vector<Classifier>& bank) {
    q.validate();
    if (bank.empty()) throw std::invalid_argument("disc_estimate: empty hypothesis bank");
    const int t = q.t();
    if (t > static_cast<int>(path.domains.size()))
        throw std::invalid_argument("disc_estimate: q longer than the path");
    double best = -std::numeric_limits<double>::infinity();
    for (const Classifier& h : bank) {
        std::vector<double> eps(t);
        for (int tau = 0; tau < t; ++tau)
            eps[tau] = population_error(h, path.domains[tau].eval_samples(), loss);
        double weighted = 0.0;
        for (int tau = 0; tau < t; ++tau) weighted += q.q[tau] * eps[tau];
        best = std::max(best, eps[t - 1] - weighted);
    }
    return best;
}

double disc_upper_bound(const WeightVector& q, double rho, double R, double delta_avg) {
    q.validate();
    if (delta_avg < 0) throw std::invalid_argument("disc_upper_bound: negative delta");
    const int t = q.t();
    double sum = 0.0;
    for (int tau = 0; tau < t; ++tau) sum += q.q[tau] * static_cast<double>(t - tau - 1) * delta_avg;
    return rho * std::sqrt(R * R + 1.0) * sum;
}

std::vector<Classifier> make_hypothesis_bank(const DomainPath& path, const LossSpec& loss,
                                             const TrainConfig& cfg, int n_random, std::uint64_t seed) {
    std::vector<Classifier> bank;
    const int d = path.domains[0].dim();
    // (a) classifiers fitted on each domain's evaluation samples
    for (std::size_t t = 0; t < path.domains.size(); ++t) {
        TrainConfig domain_cfg = cfg;
        domain_cfg.seed = derive_seed(seed, {0xba6e, t});
        bank.push_back(train_erm(Classifier::make_linear(d),
                                 to_train_examples(path.domains[t].eval_samples()), loss, domain_cfg));
    }
    // (b) random-parameter classifiers
    Rng rng(derive_seed(seed, {0xba6e, 0xffff}));
    for (int k = 0; k < n_random; ++k) {
        Vec w(d);
        for (double& v : w) v = rng.normal();
        bank.push_back(Classifier::make_linear(std::move(w), rng.normal()));
    }
    // (c) sign-flipped copies
    const std::size_t base = bank.size();
    for (std::size_t k = 0; k < base; ++k) {
        Classifier flipped = bank[k];
        Vec params = flipped.get_params();
        for (double& v : params) v = -v;
        flipped.set_params(params);
        bank.push_back(std::move(flipped));
    }
    return bank;
}

double seq_rademacher_bound(ModelClassKind kind, double t, double R, int num_layers, double scale) {
    if (t < 1.0) throw std::invalid_argument("seq_rademacher_bound: t must be >= 1");
    if (R < 0.0) throw std::invalid_argument("seq_rademacher_bound: R must be >= 0");
    if (kind == ModelClassKind::Linear) return R / std::sqrt(t);
    if (num_layers < 1) throw std::invalid_argument("seq_rademacher_bound: num_layers must be >= 1");
    if (t == 1.0) return scale * R;  // convention: the polylog form vanishes at t = 1
    const double lt = std::log(t);
    return scale * R * std::sqrt(std::pow(lt, 3.0 * (num_layers - 1)) / t);
}

double gen_bound_total(const BoundConstants& k, double eps0, double T_real, int n, double delta_avg) {
    k.validate();
    if (T_real <= 0.0) throw std::invalid_argument("gen_bound_total: T must be positive");
    if (n < 1) throw std::invalid_argument("gen_bound_total: n must be >= 1");
    const double nT = static_cast<double>(n) * T_real;
    const double log_inv_delta = std::log(1.0 / k.delta);
    const double path_term = T_real * delta_avg;
    const double estimation_term = T_real / std::sqrt(static_cast<double>(n));
    const double confidence_term = T_real * std::sqrt(log_inv_delta / n);
    const double sample_term = 1.0 / std::sqrt(nT);
    const double complexity_term =
        nT >= 2.0 ? std::sqrt(std::pow(std::log(nT), 3.0 * k.num_layers - 2.0) / nT) : 0.0;
    const double tail_term = std::sqrt(log_inv_delta / nT);
    return eps0 + k.c[0] * path_term + k.c[1] * estimation_term + k.c[2] * confidence_term +
           k.c[3] * sample_term + k.c[4] * complexity_term + k.c[5] * tail_term;
}

BoundReport gen_bound(const BoundConstants& k, double eps0, int T, int n, double delta_avg,
                      double source_target_distance) {
    k.validate();
    if (T < 1) throw std::invalid_argument("gen_bound: T must be >= 1");
    if (n < 1) throw std::invalid_argument("gen_bound: n must be >= 1");
    BoundReport r;
    r.eps0 = eps0;
    const double nT = static_cast<double>(n) * T;
    const double log_inv_delta = std::log(1.0 / k.delta);
    r.path_term = T * delta_avg;
    r.estimation_term = T / std::sqrt(static_cast<double>(n));
    r.confidence_term = T * std::sqrt(log_inv_delta / n);
    r.sample_term = 1.0 / std::sqrt(nT);
    r.complexity_term = nT >= 2.0 ? std::sqrt(std::pow(std::log(nT), 3.0 * k.num_layers - 2.0) / nT) : 0.0;
    r.tail_term = std::sqrt(log_inv_delta / nT);
    r.total = eps0 + k.c[0] * r.path_term + k.c[1] * r.estimation_term + k.c[2] * r.confidence_term +
              k.c[3] * r.sample_term + k.c[4] * r.complexity_term + k.c[5] * r.tail_term;
    r.comparison_exponential_total =
        T >= 2 ? exponential_bound(k, eps0, T, n, k.comparison_rate)
               : std::exp(k.comparison_rate) * (eps0 + k.c_comparison / std::sqrt(static_cast<double>(n)));
    if (delta_avg > 0.0 || source_target_distance == 0.0) {
        OptimalT opt = optimal_T(delta_avg, n, source_target_distance);
        r.t_star_real = opt.t_star_real;
        r.t_star_int = opt.t_star_int;
    }
    return r;
}

double exponential_bound(const BoundConstants& k, double eps0, int T, int n, double rate) {
    if (T < 2) throw std::invalid_argument("exponential_bound: T must be >= 2 (log T > 0)");
    if (n < 1) throw std::invalid_argument("exponential_bound: n must be >= 1");
    const double inner =
        eps0 + k.c_comparison * (1.0 / std::sqrt(static_cast<double>(n)) +
                                 std::sqrt(std::log(static_cast<double>(T)) / static_cast<double>(n)));
    return std::exp(rate * T) * inner;
}

OptimalT optimal_T(double delta_max, int n, double source_target_distance, double scale) {
    if (n < 1) throw std::invalid_argument("optimal_T: n must be >= 1");
    if (delta_max < 0 || source_target_distance < 0)
        throw std::invalid_argument("optimal_T: negative argument");
    if (scale <= 0) throw std::invalid_argument("optimal_T: scale must be positive");
    OptimalT result;
    if (delta_max == 0.0) {
        if (source_target_distance > 0.0)
            throw std::invalid_argument(
                "optimal_T: zero step size cannot cover a positive source-target distance");
        result.geodesic_branch = 0.0;
    } else {
        result.geodesic_branch = source_target_distance / delta_max;
    }
    result.asymptotic_branch =
        scale * std::pow(1.0 / (2.0 * (1.0 + delta_max * std::sqrt(static_cast<double>(n)))), 2.0 / 3.0);
    result.t_star_real = std::max(result.geodesic_branch, result.asymptotic_branch);
    result.t_star_int = std::max(1, static_cast<int>(std::llround(result.t_star_real)));
    return result;
}

EmpiricalT empirical_optimal_T(std::vector<SweepPoint> sweep) {
    if (sweep.size() < 3) throw std::invalid_argument("empirical_optimal_T: need at least 3 sweep points");
    std::sort(sweep.begin(), sweep.end(), [](const SweepPoint& a, const SweepPoint& b) { return a.T < b.T; });
    std::size_t best = 0;
    for (std::size_t i = 1; i < sweep.size(); ++i)
        if (sweep[i].mean_error < sweep[best].mean_error) best = i;  // ties keep the smaller T
    EmpiricalT r;
    r.t_argmin = sweep[best].T;
    r.interior = best > 0 && best + 1 < sweep.size();
    return r;
}

void BoundReport::write_csv(std::ostream& out) const {
    out << "term,value\n";
    write_csv_row(out, {"eps0", fmt_g17(eps0)});
    write_csv_row(out, {"path_term", fmt_g17(path_term)});
    write_csv_row(out, {"estimation_term", fmt_g17(estimation_term)});
    write_csv_row(out, {"confidence_term", fmt_g17(confidence_term)});
    write_csv_row(out, {"sample_term", fmt_g17(sample_term)});
    write_csv_row(out, {"complexity_term", fmt_g17(complexity_term)});
    write_csv_row(out, {"tail_term", fmt_g17(tail_term)});
    write_csv_row(out, {"total", fmt_g17(total)});
    write_csv_row(out, {"comparison_exponential_total", fmt_g17(comparison_exponential_total)});
    write_csv_row(out, {"t_star_real", fmt_g17(t_star_real)});
    write_csv_row(out, {"t_star_int", std::to_string(t_star_int)});
}

void BoundReport::write_table(std::ostream& out) const {
    const std::pair<const char*, double> rows[] = {
        {"eps0", eps0},
        {"path term (T*delta)", path_term},
        {"estimation term (T/sqrt n)", estimation_term},
        {"confidence term", confidence_term},
        {"sample term (1/sqrt nT)", sample_term},
        {"complexity term", complexity_term},
        {"tail term", tail_term},
        {"total", total},
        {"exponential comparison", comparison_exponential_total},
        {"T* (real)", t_star_real},
    };
    for (const auto& [name, value] : rows) {
        std::ostringstream line;
        line.width(28);
        line.setf(std::ios::left);
        line << name;
        out << line.str() << ' ' << fmt_g17(value) << '\n';
    }
    out << "T* (int)                     " << t_star_int << '\n';
}

}  // namespace gradapt
