#include "gradapt/transport.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gradapt/csv.hpp"
#include "gradapt/rng.hpp"

namespace gradapt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.141592653589793238462643383279502884;

double pow_cost(double dist, double p) {
    if (p == 1.0) return dist;
    if (p == 2.0) return dist * dist;
    return std::pow(dist, p);
}

double cost_root(double cost, double p) {
    if (cost <= 0.0) return 0.0;
    if (p == 1.0) return cost;
    if (p == 2.0) return std::sqrt(cost);
    return std::pow(cost, 1.0 / p);
}

Matrix pairwise_cost(const PointCloud& a, const PointCloud& b, double p) {
    Matrix c(static_cast<int>(a.size()), static_cast<int>(b.size()));
    for (int i = 0; i < c.rows; ++i)
        for (int j = 0; j < c.cols; ++j) c(i, j) = pow_cost(distance(a.points[i], b.points[j]), p);
    return c;
}

// Shortest-augmenting-path assignment solver (Jonker-Volgenant style,
// O(n^3)). Returns the optimal row -> column assignment and the dual
// potentials certifying optimality.
struct AssignmentSolution {
    std::vector<int> row_to_col;
    std::vector<double> u, v;  // duals, 1-based internally, returned 0-based
};

AssignmentSolution solve_assignment(const Matrix& cost) {
    const int n = cost.rows;
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    AssignmentSolution sol;
    sol.row_to_col.assign(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j]) sol.row_to_col[p[j] - 1] = j - 1;
    sol.u.assign(n, 0.0);
    sol.v.assign(n, 0.0);
    for (int i = 1; i <= n; ++i) sol.u[i - 1] = u[i];
    for (int j = 1; j <= n; ++j) sol.v[j - 1] = v[j];
    return sol;
}

// Lexicographically smallest assignment among the optimal ones. An
// assignment is optimal iff every edge has zero reduced cost w.r.t. optimal
// duals; this walks rows in order and greedily picks the smallest
// admissible column that still leaves the remaining rows matchable.
std::vector<int> lexicographic_refine(const Matrix& cost, const AssignmentSolution& sol) {
    const int n = cost.rows;
    double max_abs = 0.0;
    for (double c : cost.data) max_abs = std::max(max_abs, std::abs(c));
    const double tie_eps = 1e-12 * (1.0 + max_abs);

    std::vector<std::vector<int>> admissible(n);
    bool any_tie = false;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            if (std::abs(cost(i, j) - sol.u[i] - sol.v[j]) <= tie_eps) admissible[i].push_back(j);
        if (admissible[i].size() > 1) any_tie = true;
    }
    if (!any_tie) return sol.row_to_col;

    std::vector<int> match_col(n);  // row -> col, mutated as we commit rows
    std::vector<int> match_row(n, -1);
    for (int i = 0; i < n; ++i) {
        match_col[i] = sol.row_to_col[i];
        match_row[match_col[i]] = i;
    }

    // Kuhn augmentation restricted to admissible edges of rows > committed.
    std::vector<char> seen(n, 0);
    std::function<bool(int, int)> try_augment = [&](int row, int committed) -> bool {
        for (int j : admissible[row]) {
            if (seen[j]) continue;
            seen[j] = 1;
            const int other = match_row[j];
            if (other == -1 || (other > committed && try_augment(other, committed))) {
                match_row[j] = row;
                match_col[row] = j;
                return true;
            }
        }
        return false;
    };

    for (int i = 0; i < n; ++i) {
        for (int j : admissible[i]) {
            if (j >= match_col[i]) break;  // admissible lists are ascending
            const int displaced = match_row[j];
            const int old_col = match_col[i];
            if (displaced == -1) {
                match_row[old_col] = -1;
                match_row[j] = i;
                match_col[i] = j;
                break;
            }
            if (displaced <= i) continue;  // column held by a committed row
            // Tentatively give column j to row i and re-seat the displaced row.
            match_row[j] = i;
            match_col[i] = j;
            match_row[old_col] = -1;
            match_col[displaced] = -1;
            std::fill(seen.begin(), seen.end(), 0);
            seen[j] = 1;
            if (try_augment(displaced, i)) break;
            // Revert.
            match_row[j] = displaced;
            match_col[displaced] = j;
            match_row[old_col] = i;
            match_col[i] = old_col;
        }
    }
    return match_col;
}

PointCloud subsample_cloud(const PointCloud& big, std::size_t target, std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0x5ab5a317}));
    std::vector<int> perm = rng.permutation(static_cast<int>(big.size()));
    PointCloud out;
    out.points.reserve(target);
    for (std::size_t k = 0; k < target; ++k) out.points.push_back(big.points[perm[k]]);
    return out;
}

void check_clouds(const PointCloud& a, const PointCloud& b, double p, const char* who) {
    if (a.size() == 0 || b.size() == 0)
        throw std::invalid_argument(std::string(who) + ": empty point cloud");
    if (a.dim() != b.dim()) throw std::invalid_argument(std::string(who) + ": dimension mismatch");
    if (p < 1.0) throw std::invalid_argument(std::string(who) + ": p must be >= 1");
}

}  // namespace

double PointCloud::diameter() const {
    double d = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            d = std::max(d, distance(points[i], points[j]));
    return d;
}

PointCloud cloud_from_domain(const Domain& d, bool joint, double label_weight) {
    PointCloud c;
    c.points.reserve(d.size());
    for (const auto& s : d.eval_samples()) {
        Vec x = s.x;
        if (joint) x.push_back(label_weight * s.y);
        c.points.push_back(std::move(x));
    }
    return c;
}

double Coupling::recompute_cost(const PointCloud& a, const PointCloud& b) const {
    double total = 0.0;
    if (is_assignment()) {
        for (std::size_t i = 0; i < assignment.size(); ++i)
            total += pow_cost(distance(a.points[i], b.points[assignment[i]]), p);
        total /= static_cast<double>(assignment.size());
    } else {
        for (int i = 0; i < plan.rows; ++i)
            for (int j = 0; j < plan.cols; ++j)
                if (plan(i, j) > 0.0) total += plan(i, j) * pow_cost(distance(a.points[i], b.points[j]), p);
    }
    return cost_root(total, p);
}

void Coupling::write_triples(std::ostream& out) const {
    out << "i,j,mass\n";
    if (is_assignment()) {
        const double mass = 1.0 / static_cast<double>(assignment.size());
        for (std::size_t i = 0; i < assignment.size(); ++i)
            out << i << ',' << assignment[i] << ',' << fmt_g17(mass) << '\n';
    } else {
        for (int i = 0; i < plan.rows; ++i)
            for (int j = 0; j < plan.cols; ++j)
                if (plan(i, j) > 0.0) out << i << ',' << j << ',' << fmt_g17(plan(i, j)) << '\n';
    }
}

ExactResult exact_wasserstein(const PointCloud& a, const PointCloud& b, double p,
                              std::uint64_t subsample_seed) {
    check_clouds(a, b, p, "exact_wasserstein");
    const PointCloud* pa = &a;
    const PointCloud* pb = &b;
    PointCloud shrunk;
    bool resampled = false;
    if (a.size() != b.size()) {
        const std::size_t target = std::min(a.size(), b.size());
        resampled = true;
        if (a.size() > target) {
            shrunk = subsample_cloud(a, target, subsample_seed);
            pa = &shrunk;
        } else {
            shrunk = subsample_cloud(b, target, subsample_seed);
            pb = &shrunk;
        }
    }
    const int n = static_cast<int>(pa->size());
    Matrix cost = pairwise_cost(*pa, *pb, p);
    AssignmentSolution sol = solve_assignment(cost);
    std::vector<int> assignment = lexicographic_refine(cost, sol);

    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, assignment[i]);
    total /= n;

    ExactResult result;
    result.distance = cost_root(total, p);
    result.coupling.assignment = std::move(assignment);
    result.coupling.cost = result.distance;
    result.coupling.p = p;
    result.coupling.resampled = resampled;
    return result;
}

double sinkhorn_default_reg(const PointCloud& a, const PointCloud& b, double p) {
    check_clouds(a, b, p, "sinkhorn_default_reg");
    std::vector<double> costs;
    costs.reserve(a.size() * b.size());
    for (const auto& x : a.points)
        for (const auto& y : b.points) costs.push_back(pow_cost(distance(x, y), p));
    std::nth_element(costs.begin(), costs.begin() + costs.size() / 2, costs.end());
    const double median = costs[costs.size() / 2];
    return std::max(0.01 * median, 1e-12);
}

namespace {

double logsumexp_row(const Matrix& m, int row) {
    const double* data = &m.data[static_cast<std::size_t>(row) * m.cols];
    double mx = -kInf;
    for (int j = 0; j < m.cols; ++j) mx = std::max(mx, data[j]);
    if (mx == -kInf) return -kInf;
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += std::exp(data[j] - mx);
    return mx + std::log(s);
}

// Rounds an approximately feasible plan onto the transport polytope
// (row sums 1/n, column sums 1/m): scale offending rows and columns down,
// then spread the missing mass as a rank-one correction.
void round_to_polytope(Matrix& plan) {
    const int n = plan.rows, m = plan.cols;
    const double ra = 1.0 / n, cb = 1.0 / m;
    std::vector<double> row_sum(n, 0.0), col_sum(m, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) row_sum[i] += plan(i, j);
    for (int i = 0; i < n; ++i) {
        const double scale = row_sum[i] > ra ? ra / row_sum[i] : 1.0;
        if (scale < 1.0)
            for (int j = 0; j < m; ++j) plan(i, j) *= scale;
    }
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i) col_sum[j] += plan(i, j);
    for (int j = 0; j < m; ++j) {
        const double scale = col_sum[j] > cb ? cb / col_sum[j] : 1.0;
        if (scale < 1.0)
            for (int i = 0; i < n; ++i) plan(i, j) *= scale;
    }
    std::vector<double> row_err(n, 0.0), col_err(m, 0.0);
    double total_err = 0.0;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += plan(i, j);
        row_err[i] = ra - s;
        total_err += row_err[i];
    }
    for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += plan(i, j);
        col_err[j] = cb - s;
    }
    if (total_err > 0.0) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) plan(i, j) += row_err[i] * col_err[j] / total_err;
    }
}

}  // namespace

SinkhornResult sinkhorn_wasserstein(const PointCloud& a, const PointCloud& b, double p, double reg,
                                    int max_iter, double tol) {
    check_clouds(a, b, p, "sinkhorn_wasserstein");
    if (reg <= 0.0) throw std::invalid_argument("sinkhorn_wasserstein: reg must be positive");
    if (tol <= 0.0) throw std::invalid_argument("sinkhorn_wasserstein: tol must be positive");
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    Matrix cost = pairwise_cost(a, b, p);
    const double log_alpha = -std::log(static_cast<double>(n));
    const double log_beta = -std::log(static_cast<double>(m));

    Vec f(n, 0.0), g(m, 0.0);
    Matrix work(n, m);
    auto fill_work = [&]() {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) work(i, j) = (g[j] - cost(i, j)) / reg;
    };
    Matrix work_t(m, n);
    auto fill_work_t = [&]() {
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < n; ++i) work_t(j, i) = (f[i] - cost(i, j)) / reg;
    };

    SinkhornResult result;
    double violation = kInf;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        fill_work();
        for (int i = 0; i < n; ++i) f[i] = reg * (log_alpha - logsumexp_row(work, i));
        fill_work_t();
        for (int j = 0; j < m; ++j) g[j] = reg * (log_beta - logsumexp_row(work_t, j));

        // Row marginals are exact right after the f update; check columns.
        violation = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) work(i, j) = (f[i] + g[j] - cost(i, j)) / reg;
        std::vector<double> col_sum(m, 0.0), row_sum(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                const double v = std::exp(work(i, j));
                col_sum[j] += v;
                row_sum[i] += v;
            }
        for (int j = 0; j < m; ++j) violation += std::abs(col_sum[j] - 1.0 / m);
        for (int i = 0; i < n; ++i) violation += std::abs(row_sum[i] - 1.0 / n);
        if (violation <= tol) {
            ++iter;
            break;
        }
    }

    Matrix plan(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) plan(i, j) = std::exp((f[i] + g[j] - cost(i, j)) / reg);
    round_to_polytope(plan);

    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) total += plan(i, j) * cost(i, j);

    result.distance = cost_root(total, p);
    result.coupling.plan = std::move(plan);
    result.coupling.cost = result.distance;
    result.coupling.p = p;
    result.converged = violation <= tol;
    result.iterations = iter;
    result.marginal_violation = violation;
    return result;
}

void ShiftProfile::write_csv(std::ostream& out) const {
    out << "t,delta_t,delta_avg,path_length\n";
    for (std::size_t i = 0; i < deltas.size(); ++i)
        out << (i + 1) << ',' << fmt_g17(deltas[i]) << ",,\n";
    out << "summary,," << fmt_g17(delta_avg) << ',' << fmt_g17(path_length) << '\n';
}

ShiftProfile path_shift_profile(const DomainPath& path, double p, bool joint, double label_weight) {
    if (path.domains.size() < 2)
        throw std::invalid_argument("path_shift_profile: path needs at least 2 domains");
    ShiftProfile profile;
    profile.p = p;
    profile.joint = joint;
    const int T = path.T();
    profile.deltas.resize(T);
    for (int t = 1; t <= T; ++t) {
        PointCloud a = cloud_from_domain(path.domains[t - 1], joint, label_weight);
        PointCloud b = cloud_from_domain(path.domains[t], joint, label_weight);
        profile.deltas[t - 1] = exact_wasserstein(a, b, p, /*subsample_seed=*/t).distance;
    }
    profile.delta_avg = std::accumulate(profile.deltas.begin(), profile.deltas.end(), 0.0) / T;
    profile.path_length = profile.delta_avg * T;
    return profile;
}

Coupling optimal_domain_coupling(const Domain& source, const Domain& target, double p,
                                 bool class_conditional) {
    PointCloud a = cloud_from_domain(source);
    PointCloud b = cloud_from_domain(target);
    if (a.size() != b.size())
        throw std::invalid_argument("optimal_domain_coupling: domains must have equal sizes");
    if (!class_conditional) return exact_wasserstein(a, b, p).coupling;

    // Separate assignments within each class; when the class counts differ,
    // leftover source points reuse target points of their class (the map is
    // then no longer a bijection, which is recorded).
    const auto& sa = source.eval_samples();
    const auto& sb = target.eval_samples();
    Coupling coupling;
    coupling.p = p;
    coupling.assignment.assign(a.size(), -1);
    bool bijective = true;
    for (int label : {-1, +1}) {
        std::vector<int> ia, ib;
        for (std::size_t i = 0; i < sa.size(); ++i)
            if (sa[i].y == label) ia.push_back(static_cast<int>(i));
        for (std::size_t j = 0; j < sb.size(); ++j)
            if (sb[j].y == label) ib.push_back(static_cast<int>(j));
        if (ia.empty()) continue;
        if (ib.empty())
            throw std::invalid_argument("optimal_domain_coupling: target has no samples of class " +
                                        std::to_string(label));
        if (ia.size() != ib.size()) bijective = false;
        // Equalize the two sides deterministically before matching: drop
        // surplus target points, or pad the target side by reusing points.
        std::vector<int> ib_used = ib;
        if (ib_used.size() > ia.size()) {
            Rng rng(derive_seed(0xc1a55, {static_cast<std::uint64_t>(label + 2)}));
            std::vector<int> perm = rng.permutation(static_cast<int>(ib_used.size()));
            std::vector<int> kept;
            for (std::size_t k = 0; k < ia.size(); ++k) kept.push_back(ib_used[perm[k]]);
            ib_used = std::move(kept);
        } else if (ib_used.size() < ia.size()) {
            Rng rng(derive_seed(0xc1a55, {static_cast<std::uint64_t>(label + 2)}));
            while (ib_used.size() < ia.size())
                ib_used.push_back(ib[rng.below(ib.size())]);
        }
        PointCloud ca, cb;
        for (int i : ia) ca.points.push_back(sa[i].x);
        for (int j : ib_used) cb.points.push_back(sb[j].x);
        ExactResult r = exact_wasserstein(ca, cb, p);
        for (std::size_t k = 0; k < ia.size(); ++k)
            coupling.assignment[ia[k]] = ib_used[r.coupling.assignment[k]];
    }
    coupling.bijective = bijective;
    coupling.resampled = !bijective;
    PointCloud target_cloud = cloud_from_domain(target);
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        total += pow_cost(distance(a.points[i], target_cloud.points[coupling.assignment[i]]), p);
    coupling.cost = cost_root(total / static_cast<double>(a.size()), p);
    return coupling;
}

Domain geodesic_interpolate(const Domain& source, const Domain& target, double t,
                            const Coupling& coupling, bool class_conditional) {
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("geodesic_interpolate: t must be in [0, 1]");
    if (!coupling.is_assignment())
        throw std::invalid_argument("geodesic_interpolate: coupling must be an assignment");
    const auto& sa = source.eval_samples();
    const auto& sb = target.eval_samples();
    if (coupling.assignment.size() != sa.size())
        throw std::invalid_argument("geodesic_interpolate: coupling size mismatch");

    std::vector<LabeledSample> samples;
    samples.reserve(sa.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
        const LabeledSample& from = sa[i];
        const LabeledSample& to = sb[coupling.assignment[i]];
        LabeledSample s;
        s.x.resize(from.x.size());
        for (std::size_t j = 0; j < from.x.size(); ++j)
            s.x[j] = (1.0 - t) * from.x[j] + t * to.x[j];
        s.y = from.y;  // shared label in class-conditional mode, heuristic otherwise
        samples.push_back(std::move(s));
    }
    std::ostringstream text;
    text << "geodesic t=" << t << (class_conditional ? " class_conditional" : " heuristic_labels");
    Domain out(std::move(samples), {text.str(), t}, false);
    out.set_labels_heuristic(!class_conditional);
    return out;
}

DomainPath make_geodesic_path(const Domain& source, const Domain& target, int T, bool class_conditional,
                              double p) {
    if (T < 1) throw std::invalid_argument("make_geodesic_path: T must be >= 1");
    Coupling coupling = optimal_domain_coupling(source, target, p, class_conditional);
    DomainPath path;
    path.n_per_domain = static_cast<int>(source.size());
    path.normalization_scale = 1.0;  // endpoints are used as-is
    for (int t = 0; t <= T; ++t) {
        if (t == 0) {
            Domain d = source;
            path.domains.push_back(std::move(d));
            continue;
        }
        Domain d = geodesic_interpolate(source, target, static_cast<double>(t) / T, coupling,
                                        class_conditional);
        d.descriptor().shift = static_cast<double>(t) / T;
        path.domains.push_back(std::move(d));
    }
    path.validate();
    return path;
}

DomainPath make_detour_path(const Domain& source, const Domain& target, int T, double detour,
                            std::uint64_t seed, double p, bool class_conditional) {
    if (T < 2) throw std::invalid_argument("make_detour_path: T must be >= 2");
    if (detour < 0.0) throw std::invalid_argument("make_detour_path: detour must be >= 0");
    const int d = source.dim();
    if (d < 2) throw std::invalid_argument("make_detour_path: needs dimension >= 2");

    DomainPath path = make_geodesic_path(source, target, T, class_conditional, p);
    if (detour == 0.0) return path;

    // Unit direction orthogonal to the mean source->target displacement,
    // drawn deterministically from the seed.
    Vec mean_disp(d, 0.0);
    {
        Coupling coupling = optimal_domain_coupling(source, target, p, class_conditional);
        const auto& sa = source.eval_samples();
        const auto& sb = target.eval_samples();
        for (std::size_t i = 0; i < sa.size(); ++i)
            for (int j = 0; j < d; ++j)
                mean_disp[j] += (sb[coupling.assignment[i]].x[j] - sa[i].x[j]) / sa.size();
    }
    Rng rng(derive_seed(seed, {0xde7049}));
    Vec dir(d);
    double dir_norm = 0.0;
    for (int attempt = 0; attempt < 64 && dir_norm < 1e-9; ++attempt) {
        for (int j = 0; j < d; ++j) dir[j] = rng.normal();
        const double mm = dot(mean_disp, mean_disp);
        if (mm > 0.0) {
            const double proj = dot(dir, mean_disp) / mm;
            for (int j = 0; j < d; ++j) dir[j] -= proj * mean_disp[j];
        }
        dir_norm = norm2(dir);
    }
    if (dir_norm < 1e-9) throw std::runtime_error("make_detour_path: could not find a perpendicular direction");
    for (double& v : dir) v /= dir_norm;

    for (int t = 1; t < T; ++t) {
        const double bump = detour * std::sin(kPi * static_cast<double>(t) / T);
        Domain& dom = path.domains[t];
        for (auto& s : dom.mutable_samples())
            for (int j = 0; j < d; ++j) s.x[j] += bump * dir[j];
        std::ostringstream text;
        text << dom.descriptor().text << " detour(bump=" << bump << ")";
        dom.descriptor().text = text.str();
    }

    // The perpendicular bump must strictly lengthen the path; for p = 2 this
    // is an identity of the construction, so verify it.
    if (p == 2.0) {
        const double bumped = path_shift_profile(path, p).path_length;
        const double straight =
            path_shift_profile(make_geodesic_path(source, target, T, class_conditional, p), p).path_length;
        if (!(bumped > straight))
            throw std::logic_error("make_detour_path: bumped path is not longer than the geodesic");
    }
    return path;
}

}  // namespace gradapt
