#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gradapt/dataset.hpp"
#include "gradapt/linalg.hpp"

namespace gradapt {

/// Uniformly weighted empirical point cloud.
struct PointCloud {
    std::vector<Vec> points;

    std::size_t size() const { return points.size(); }
    int dim() const { return points.empty() ? 0 : static_cast<int>(points[0].size()); }
    double diameter() const;
};

/// Feature cloud of a domain, or the joint (x, label_weight * y) cloud when
/// joint is true (uses ground-truth labels; evaluation-only).
PointCloud cloud_from_domain(const Domain& d, bool joint = false, double label_weight = 1.0);

/// Transport plan between two equal-weight clouds. Exact equal-size results
/// use the assignment representation; Sinkhorn results use the dense plan.
struct Coupling {
    std::vector<int> assignment;  // source index i -> target index assignment[i]; empty in plan mode
    Matrix plan;                  // n x m, entries sum to 1; empty in assignment mode
    double cost = 0.0;            // realized W_p value
    double p = 2.0;
    bool bijective = true;   // false when a class-conditional map had to reuse points
    bool resampled = false;  // true when unequal sizes forced subsampling

    bool is_assignment() const { return !assignment.empty(); }
    /// Recomputes the transport cost from the stored plan/assignment.
    double recompute_cost(const PointCloud& a, const PointCloud& b) const;
    /// Writes (i, j, mass) triples as CSV.
    void write_triples(std::ostream& out) const;
};

struct ExactResult {
    double distance = 0.0;
    Coupling coupling;
};

/// Exact p-Wasserstein distance between equal-weight empirical clouds,
/// realized as a minimum-cost perfect assignment on cost |a_i - b_j|^p.
/// Unequal sizes are handled by deterministically subsampling the larger
/// cloud without replacement (seeded by subsample_seed) and flagged in the
/// result. Among equally optimal assignments the lexicographically smallest
/// one is returned.
ExactResult exact_wasserstein(const PointCloud& a, const PointCloud& b, double p,
                              std::uint64_t subsample_seed = 0);

struct SinkhornResult {
    double distance = 0.0;  // transport cost of the rounded plan, without the entropy term
    Coupling coupling;
    bool converged = false;
    int iterations = 0;
    double marginal_violation = 0.0;  // pre-rounding L1 violation
};

/// Entropic-regularized approximation of the same distance. Log-domain
/// updates; the returned plan is rounded onto the transport polytope, so
/// its cost always upper-bounds the exact distance. Non-convergence within
/// max_iter is flagged, not fatal.
SinkhornResult sinkhorn_wasserstein(const PointCloud& a, const PointCloud& b, double p, double reg,
                                    int max_iter = 10000, double tol = 1e-9);

/// Default regularization: 0.01 * median pairwise p-power cost.
double sinkhorn_default_reg(const PointCloud& a, const PointCloud& b, double p);

/// Per-step shifts of a domain path.
struct ShiftProfile {
    std::vector<double> deltas;  // deltas[t-1] = W_p(mu_{t-1}, mu_t), t = 1..T
    double delta_avg = 0.0;
    double path_length = 0.0;  // T * delta_avg
    double p = 2.0;
    bool joint = false;

    void write_csv(std::ostream& out) const;  // rows (t, delta_t) plus a summary row
};

ShiftProfile path_shift_profile(const DomainPath& path, double p, bool joint = false,
                                double label_weight = 1.0);

/// Builds the optimal coupling between two domains' feature clouds. With
/// class_conditional the assignment is computed separately within each
/// label; unbalanced per-class counts are padded by reusing target points
/// (flagged via bijective = false).
Coupling optimal_domain_coupling(const Domain& source, const Domain& target, double p,
                                 bool class_conditional);

/// Displacement interpolation at parameter t in [0, 1]: sample i moves to
/// (1-t) x_i + t x'_{sigma(i)}. With class_conditional the label is the
/// shared class label; otherwise the source label is carried and the domain
/// is flagged as heuristically labeled.
Domain geodesic_interpolate(const Domain& source, const Domain& target, double t,
                            const Coupling& coupling, bool class_conditional);

/// T+1 domains at parameters t/T along the displacement interpolation of
/// the exact optimal coupling. On the coupled clouds the construction gives
/// W_p(mu_s, mu_t) = |t-s|/T * W_p(mu_0, mu_T).
DomainPath make_geodesic_path(const Domain& source, const Domain& target, int T, bool class_conditional,
                              double p);

/// Geodesic path with a smooth perpendicular displacement bump, peak
/// magnitude `detour`, applied to interior domains; endpoints unchanged.
/// For p = 2 the constructor verifies that the measured path length strictly
/// exceeds the geodesic one whenever detour > 0.
DomainPath make_detour_path(const Domain& source, const Domain& target, int T, double detour,
                            std::uint64_t seed, double p, bool class_conditional = true);

}  // namespace gradapt
