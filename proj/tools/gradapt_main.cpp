// gradapt command line: domain-path generation, shift measurement, gradual
// self-training sweeps, path comparison, bound curves and inequality checks.

#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "gradapt/csv.hpp"
#include "gradapt/dataset.hpp"
#include "gradapt/rng.hpp"
#include "gradapt/sweep.hpp"
#include "gradapt/theory.hpp"
#include "gradapt/transport.hpp"

using namespace gradapt;

namespace {

struct GlobalOpts {
    std::string config_file;
    std::uint64_t seed = 0;
    int workers = 0;  // 0 -> hardware concurrency
    std::string out_file;
};

int effective_workers(const GlobalOpts& g) {
    if (g.workers > 0) return g.workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Writes to --out when given, stdout otherwise.
void emit(const GlobalOpts& g, const std::function<void(std::ostream&)>& writer) {
    if (g.out_file.empty()) {
        writer(std::cout);
        return;
    }
    std::ofstream out(g.out_file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + g.out_file);
    writer(out);
}

ExperimentConfig load_experiment(const GlobalOpts& g) {
    if (g.config_file.empty()) throw std::runtime_error("this subcommand requires --config <file>");
    return ExperimentConfig::from_file(g.config_file);
}

DomainPath build_path_from_config(const ExperimentConfig& cfg, std::uint64_t master) {
    const int T = cfg.T_values.front();
    const int n = cfg.n_values.front();
    const std::uint64_t data_seed = derive_seed(master, {0x9e4e, cfg.seeds.front()});
    switch (cfg.path_kind) {
        case PathKind::Rotation:
            return make_rotation_path(cfg.moons, cfg.start_deg, cfg.end_deg, T, n, data_seed, cfg.source_n);
        case PathKind::Translation:
            return make_translation_path(cfg.moons, cfg.offset, T, n, data_seed, cfg.source_n);
        case PathKind::Geodesic:
        case PathKind::Detour: {
            Domain src = make_two_moons(n, cfg.moons.noise_sigma, derive_seed(data_seed, {0xe0d, 0}));
            Domain tgt = rotate_domain(
                make_two_moons(n, cfg.moons.noise_sigma, derive_seed(data_seed, {0xe0d, 1})),
                cfg.end_deg - cfg.start_deg);
            if (cfg.path_kind == PathKind::Geodesic)
                return make_geodesic_path(src, tgt, T, cfg.class_conditional, cfg.p);
            return make_detour_path(src, tgt, T, cfg.detour_magnitudes.front(), data_seed, cfg.p,
                                    cfg.class_conditional);
        }
        case PathKind::Csv: {
            CsvPathSpec spec = cfg.csv;
            spec.T = T;
            spec.n = n;
            return load_csv_path(spec);
        }
    }
    throw std::logic_error("unreachable path kind");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradual self-training laboratory"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--config", g.config_file, "experiment config file");
    app.add_option("--seed", g.seed, "master seed (default 0)");
    app.add_option("--workers", g.workers, "worker threads (default: hardware)");
    app.add_option("--out", g.out_file, "output file (default: stdout)");

    auto* cmd_generate = app.add_subcommand("generate", "build a domain path and write its container file");

    auto* cmd_distance = app.add_subcommand("distance", "shift profile of a stored domain path");
    std::string distance_in;
    double distance_p = 2.0;
    bool distance_joint = false;
    double distance_label_weight = 1.0;
    bool distance_sinkhorn = false;
    double distance_reg = 0.0;
    cmd_distance->add_option("--in", distance_in, "path container file")->required();
    cmd_distance->add_option("--p", distance_p, "Wasserstein exponent (default 2)");
    cmd_distance->add_flag("--joint", distance_joint, "measure on the joint (x, y) clouds");
    cmd_distance->add_option("--label-weight", distance_label_weight, "label coordinate weight");
    cmd_distance->add_flag("--sinkhorn", distance_sinkhorn, "also report the entropic approximation");
    cmd_distance->add_option("--reg", distance_reg, "sinkhorn regularization (default: from data)");

    auto* cmd_run = app.add_subcommand("run", "gradual self-training sweep over (T, n, seed)");
    auto* cmd_compare = app.add_subcommand("compare-paths", "geodesic vs detour paths");
    auto* cmd_bounds = app.add_subcommand("bounds", "bound curves over a T grid");

    auto* cmd_optimal = app.add_subcommand("optimal-t", "optimal step count from the closed form");
    double opt_delta_max = 0.0;
    int opt_n = 1;
    double opt_distance = 0.0;
    double opt_scale = 1.0;
    cmd_optimal->add_option("--delta-max", opt_delta_max, "max average per-step shift")->required();
    cmd_optimal->add_option("--n", opt_n, "samples per domain")->required();
    cmd_optimal->add_option("--distance", opt_distance, "source-target W_p distance L");
    cmd_optimal->add_option("--scale", opt_scale, "scale of the asymptotic branch (default 1)");

    auto* cmd_verify = app.add_subcommand("verify", "empirical inequality batteries");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_generate->parsed()) {
            ExperimentConfig cfg = load_experiment(g);
            DomainPath path = build_path_from_config(cfg, g.seed);
            emit(g, [&](std::ostream& out) { save_path(path, out); });
        } else if (cmd_distance->parsed()) {
            DomainPath path = load_path_file(distance_in);
            ShiftProfile profile =
                path_shift_profile(path, distance_p, distance_joint, distance_label_weight);
            emit(g, [&](std::ostream& out) {
                profile.write_csv(out);
                if (distance_sinkhorn) {
                    out << "sinkhorn_t,distance,converged,iterations\n";
                    for (int t = 1; t <= path.T(); ++t) {
                        PointCloud a =
                            cloud_from_domain(path.domains[t - 1], distance_joint, distance_label_weight);
                        PointCloud b =
                            cloud_from_domain(path.domains[t], distance_joint, distance_label_weight);
                        const double reg =
                            distance_reg > 0.0 ? distance_reg : sinkhorn_default_reg(a, b, distance_p);
                        SinkhornResult r = sinkhorn_wasserstein(a, b, distance_p, reg);
                        out << t << ',' << fmt_g17(r.distance) << ',' << (r.converged ? 1 : 0) << ','
                            << r.iterations << '\n';
                    }
                }
            });
        } else if (cmd_run->parsed()) {
            ExperimentConfig cfg = load_experiment(g);
            SweepResult result = run_sweep(cfg, g.seed, effective_workers(g));
            emit(g, [&](std::ostream& out) { result.write_csv(out); });
        } else if (cmd_compare->parsed()) {
            ExperimentConfig cfg = load_experiment(g);
            PathComparison cmp = compare_paths(cfg, g.seed, effective_workers(g));
            emit(g, [&](std::ostream& out) { cmp.write_csv(out); });
        } else if (cmd_bounds->parsed()) {
            ExperimentConfig cfg = load_experiment(g);
            BoundCurves curves = emit_bound_curves(cfg);
            emit(g, [&](std::ostream& out) { curves.write_csv(out); });
        } else if (cmd_optimal->parsed()) {
            OptimalT t = optimal_T(opt_delta_max, opt_n, opt_distance, opt_scale);
            emit(g, [&](std::ostream& out) {
                out << "geodesic_branch," << fmt_g17(t.geodesic_branch) << "\n";
                out << "asymptotic_branch," << fmt_g17(t.asymptotic_branch) << "\n";
                out << "t_star_real," << fmt_g17(t.t_star_real) << "\n";
                out << "t_star_int," << t.t_star_int << "\n";
            });
        } else if (cmd_verify->parsed()) {
            ExperimentConfig cfg = load_experiment(g);
            VerifyReport report = verify_inequalities(cfg, g.seed, effective_workers(g));
            emit(g, [&](std::ostream& out) { report.write_csv(out); });
            report.write_text(std::cerr);
            if (!report.all_passed()) return 3;
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
