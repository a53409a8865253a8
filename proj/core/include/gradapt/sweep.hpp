#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gradapt/config.hpp"
#include "gradapt/dataset.hpp"
#include "gradapt/model.hpp"
#include "gradapt/selftrain.hpp"
#include "gradapt/theory.hpp"
#include "gradapt/transport.hpp"

namespace gradapt {

enum class PathKind { Rotation, Translation, Geodesic, Detour, Csv };

std::string path_kind_name(PathKind k);

struct ModelSpec {
    bool mlp = true;
    std::vector<int> hidden{32, 32};
    Activation activation = Activation::Relu;
};

/// Full description of a sweep: dataset, path construction, grids of T, n
/// and seeds, model/loss/training settings and the W_p measurement knobs.
/// Parsed from the [dataset] / [path] / [sweep] / [model] / [loss] /
/// [train] / [wasserstein] / [bounds] / [verify] sections of a config file.
struct ExperimentConfig {
    // dataset
    std::string generator = "two_moons";
    TwoMoonsSpec moons;
    CsvPathSpec csv;  // generator == "csv"

    // path
    PathKind path_kind = PathKind::Rotation;
    double start_deg = 0.0;
    double end_deg = 120.0;
    Vec offset;                           // translation
    std::vector<double> detour_magnitudes{0.0};  // detour / compare-paths
    bool class_conditional = true;        // geodesic coupling mode

    // sweep grids
    std::vector<int> T_values{10};
    std::vector<int> n_values{50};
    std::vector<std::uint64_t> seeds{0};
    int source_n = 0;  // 0 -> same as n
    int eval_n = 500;  // fresh labeled target draw for generator-backed paths
    bool record_timing = true;

    // model / loss / training
    ModelSpec model;
    LossSpec loss = LossSpec::ramp();
    TrainConfig train;
    SelfTrainOptions selftrain;

    // W_p measurement
    double p = 2.0;
    bool joint = false;
    double label_weight = 1.0;

    // bound evaluation (bounds subcommand)
    BoundConstants bounds;
    double bounds_eps0 = 0.1;
    int bounds_n = 100;
    double bounds_delta_avg = 0.05;
    double bounds_distance = 0.0;  // source-target distance L for T*
    std::vector<int> bounds_T_grid;  // default 1..200

    // verify subcommand
    int verify_trials = 1000;
    int verify_eval_n = 64;
    std::vector<std::string> verify_batteries;  // empty -> all

    static ExperimentConfig from_config(const ConfigFile& cfg);
    static ExperimentConfig from_file(const std::string& filename);
};

struct SweepRecord {
    int T = 0;
    int n = 0;
    std::uint64_t seed = 0;
    std::string path_kind;
    double source_acc = 0;
    double target_acc_gradual = 0;
    double target_acc_vanilla_st = 0;
    double target_acc_source_only = 0;
    double delta_avg = 0;
    double path_length = 0;
    double runtime_seconds = 0;
    std::string status = "ok";
};

struct AggregateRow {
    int T = 0;
    int n = 0;
    std::string stat;  // "mean" or "std"
    std::string path_kind;
    double source_acc = 0, target_acc_gradual = 0, target_acc_vanilla_st = 0, target_acc_source_only = 0;
    double delta_avg = 0, path_length = 0, runtime_seconds = 0;
};

struct SweepResult {
    std::vector<SweepRecord> records;       // ordered by (path_kind, T, n, seed)
    std::vector<AggregateRow> aggregates;   // mean and sample std per (path_kind, T, n)
    void write_csv(std::ostream& out) const;
    /// Mean gradual-ST target error per T (single n assumed), for
    /// empirical_optimal_T.
    std::vector<SweepPoint> error_by_T(const std::string& path_kind, int n) const;
};

/// Runs every (T, n, seed, path kind) combination. A failing trial becomes a
/// row with status != ok. Results are identical regardless of worker count.
SweepResult run_sweep(const ExperimentConfig& cfg, std::uint64_t master_seed, int workers = 1);

struct PathComparisonRow {
    std::string path_kind;
    double magnitude = 0;
    int T = 0;
    int n = 0;
    int seeds = 0;
    double t_delta_mean = 0;  // mean measured path length
    double target_err_mean = 0;
    double target_err_std = 0;
};

struct PathComparison {
    std::vector<PathComparisonRow> rows;  // sorted by t_delta_mean
    void write_csv(std::ostream& out) const;
};

/// Geodesic vs detour paths between the configured endpoints: measured path
/// length against mean target error.
PathComparison compare_paths(const ExperimentConfig& cfg, std::uint64_t master_seed, int workers = 1);

struct BatteryResult {
    std::string name;
    int trials = 0;
    int passes = 0;
    double pass_rate = 0;
    double threshold = 0;    // required pass rate
    double worst_slack = 0;  // most negative slack observed (bound - value)
    bool passed = false;
};

struct VerifyReport {
    std::vector<BatteryResult> batteries;
    bool all_passed() const;
    void write_csv(std::ostream& out) const;
    void write_text(std::ostream& out) const;
};

/// Empirical inequality batteries: identical-domain sanity checks, the
/// error-difference bound on shifted Gaussian pairs (with the p-monotonicity
/// cross-check), the self-training stability bound along the rotation
/// benchmark, and the affine-vs-exponential growth comparison.
VerifyReport verify_inequalities(const ExperimentConfig& cfg, std::uint64_t master_seed, int workers = 1);

struct BoundCurves {
    std::vector<int> T_grid;
    std::vector<double> gen_totals;
    std::vector<double> exp_totals;
    double t_star_real = 0;
    int t_star_int = 1;
    std::optional<double> crossover_T;  // beyond it the exponential bound stays above
    void write_csv(std::ostream& out) const;
};

/// (T, additive-bound total, exponential-bound total, T* marker) over the
/// configured T grid, plus the crossover point found by bisection.
BoundCurves emit_bound_curves(const ExperimentConfig& cfg);

// Model-fit helpers for the growth comparison (exposed for tests).
struct FitResult {
    double rss = 0;
    double a = 0, b = 0;  // affine: a + b t; exponential: a * exp(b t)
};
FitResult fit_affine(const std::vector<double>& ys);
/// Best a * exp(b t), a > 0, b >= 0 (golden-section over b, closed-form a).
FitResult fit_exponential_growth(const std::vector<double>& ys);

}  // namespace gradapt
