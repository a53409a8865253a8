#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gradapt/dataset.hpp"
#include "gradapt/model.hpp"

namespace gradapt {

/// Explicit constants for the bound formulas. The asymptotic notation of
/// the underlying analysis hides constants; here every one is visible and
/// defaults to 1 so that evaluations are reproducible and honest about what
/// is assumed. Logarithms are natural throughout.
struct BoundConstants {
    double rho = 1.0;    // loss Lipschitz constant
    double R = 1.0;      // classifier Lipschitz constant
    double B = 1.0;      // hypothesis-class Rademacher constant (user-supplied)
    double delta = 0.1;  // confidence level, in (0, 1)
    int num_layers = 3;  // L for the fully-connected complexity term
    std::optional<double> M;  // loss upper bound, reporting only
    std::array<double, 6> c{1, 1, 1, 1, 1, 1};  // scales of the six bound terms
    double c_comparison = 1.0;  // inner scale of the exponential comparison bound
    double comparison_rate = 0.1;  // default rate of the e^(rate*T) factor

    void validate() const;
};

/// Probability vector over domain indices 0..t-1.
struct WeightVector {
    std::vector<double> q;

    static WeightVector uniform(int t);
    static WeightVector one_hot(int t, int index);
    int t() const { return static_cast<int>(q.size()); }
    void validate() const;  // simplex membership within 1e-12
};

struct BoundReport {
    double eps0 = 0;
    // Raw term values before their c_i scales are applied:
    double path_term = 0;        // T * delta_avg
    double estimation_term = 0;  // T / sqrt(n)
    double confidence_term = 0;  // T * sqrt(log(1/delta) / n)
    double sample_term = 0;      // 1 / sqrt(nT)
    double complexity_term = 0;  // sqrt((log nT)^(3L-2) / (nT))
    double tail_term = 0;        // sqrt(log(1/delta) / (nT))
    double total = 0;            // eps0 + sum of c_i * term_i
    double comparison_exponential_total = 0;
    double t_star_real = 0;
    int t_star_int = 1;

    void write_csv(std::ostream& out) const;
    void write_table(std::ostream& out) const;  // aligned plain text
};

/// rho * sqrt(R^2 + 1) * wp — the error-difference bound between two
/// domains at p-Wasserstein distance wp.
double error_diff_bound(double rho, double R, double wp);

/// Empirical lower estimate of the discrepancy
///   sup_h ( eps_{t-1}(h) - sum_tau q_tau eps_tau(h) )
/// over the given hypothesis bank, with losses measured on the first t
/// domains' evaluation samples.
double disc_estimate(const DomainPath& path, const WeightVector& q, const LossSpec& loss,
                     const std::vector<Classifier>& bank);

/// Upper bound rho * sqrt(R^2+1) * sum_tau q_tau (t - tau - 1) * delta_avg.
/// Uniform q reduces to rho*sqrt(R^2+1)*(t-1)*delta_avg/2, but the value is
/// always computed from the general summation.
double disc_upper_bound(const WeightVector& q, double rho, double R, double delta_avg);

/// Hypothesis bank for disc_estimate: classifiers fitted on each domain,
/// random-parameter classifiers, and sign-flipped copies of all of those.
std::vector<Classifier> make_hypothesis_bank(const DomainPath& path, const LossSpec& loss,
                                             const TrainConfig& cfg, int n_random, std::uint64_t seed);

enum class ModelClassKind { Linear, Mlp };

/// Closed-form sequential-complexity bounds: R/sqrt(t) for linear models,
/// scale * R * sqrt((ln t)^(3(L-1)) / t) for L-layer nets with 1-Lipschitz
/// activations. t is real-valued; t = 1 for the net case returns scale * R
/// by convention. The scale applies to the net form only.
double seq_rademacher_bound(ModelClassKind kind, double t, double R, int num_layers, double scale = 1.0);

/// Total of the additive generalization bound at real-valued T (used for
/// convexity checks and curve emission).
double gen_bound_total(const BoundConstants& k, double eps0, double T_real, int n, double delta_avg);

/// Itemized evaluation of the additive bound, the exponential comparison
/// bound (at k.comparison_rate), and the optimal step count derived from
/// delta_avg (treated as the max average step) and source_target_distance.
BoundReport gen_bound(const BoundConstants& k, double eps0, int T, int n, double delta_avg,
                      double source_target_distance = 0.0);

/// Prior-style comparison bound e^(rate*T) * (eps0 + c * (1/sqrt(n) + sqrt(ln T / n))).
/// The inner constant c is k.c_comparison. Requires T >= 2.
double exponential_bound(const BoundConstants& k, double eps0, int T, int n, double rate);

struct OptimalT {
    double t_star_real = 0;
    int t_star_int = 1;
    double geodesic_branch = 0;    // L / delta_max
    double asymptotic_branch = 0;  // scale * (1 / (2 (1 + delta_max sqrt(n))))^(2/3)
};

/// Optimal step count: max of the geodesic-feasibility branch L/delta_max
/// and the closed-form minimizer of T*delta_max + T/sqrt(n) + 1/sqrt(nT).
/// The integer value is the nearest integer floored at 1.
OptimalT optimal_T(double delta_max, int n, double source_target_distance, double scale = 1.0);

struct SweepPoint {
    int T = 0;
    double mean_error = 0;
};

struct EmpiricalT {
    int t_argmin = 0;
    bool interior = false;  // argmin strictly inside the swept grid
};

/// Argmin of mean error over a T sweep; ties break toward the smaller T.
EmpiricalT empirical_optimal_T(std::vector<SweepPoint> sweep);

}  // namespace gradapt
