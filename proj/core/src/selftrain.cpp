#include "gradapt/selftrain.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "gradapt/csv.hpp"
#include "gradapt/rng.hpp"

namespace gradapt {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

Classifier self_train_step(const Classifier& h, const UnlabeledView& s, const LossSpec& loss,
                           const TrainConfig& cfg, const SelfTrainOptions& opts, StepStats* stats) {
    if (s.size() == 0) throw std::invalid_argument("self_train_step: empty sample set");
    if (!opts.hard && loss.kind != LossKind::Squared)
        throw std::invalid_argument(
            "self_train_step: soft pseudo-labels are only supported with the squared loss");

    std::vector<TrainExample> pseudo;
    pseudo.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double score = predict_score(h, s.x(i));
        if (opts.conf_threshold && std::abs(score) < *opts.conf_threshold) continue;
        TrainExample ex;
        ex.x = s.x(i);
        ex.target = opts.hard ? (score >= 0.0 ? 1.0 : -1.0) : score;
        pseudo.push_back(std::move(ex));
    }
    if (pseudo.empty())
        throw std::runtime_error("self_train_step: confidence threshold filtered out every sample");

    Classifier init = opts.warm_start
                          ? h
                          : (h.kind == Classifier::Kind::Linear
                                 ? Classifier::make_linear(h.input_dim())
                                 : Classifier::make_mlp(
                                       [&] {
                                           std::vector<int> sizes{h.input_dim()};
                                           for (std::size_t l = 0; l + 1 < h.weights.size(); ++l)
                                               sizes.push_back(h.weights[l].rows);
                                           sizes.push_back(1);
                                           return sizes;
                                       }(),
                                       h.activation, cfg.seed));

    std::vector<double> trace;
    Classifier fitted = train_erm(init, pseudo, loss, cfg, &trace);

    if (stats) {
        stats->used_samples = static_cast<int>(pseudo.size());
        stats->train_loss = trace.empty() ? batch_loss(fitted, pseudo, loss) : trace.back();
        std::size_t agree = 0;
        for (const auto& ex : pseudo) {
            const int pred = predict_label(fitted, ex.x);
            const int target_sign = ex.target >= 0.0 ? 1 : -1;
            if (pred == target_sign) ++agree;
        }
        stats->pseudo_agreement = static_cast<double>(agree) / static_cast<double>(pseudo.size());
    }
    return fitted;
}

void AdaptationTrace::write_csv(std::ostream& out, bool include_timing) const {
    out << "t,descriptor,pseudo_agreement,train_loss,eval_zero_one,eval_loss,seconds\n";
    for (const auto& r : rows)
        write_csv_row(out, {std::to_string(r.t), r.descriptor, fmt_g17(r.pseudo_agreement),
                            fmt_g17(r.train_loss), fmt_g17(r.eval_zero_one), fmt_g17(r.eval_loss),
                            fmt_g17(include_timing ? r.seconds : 0.0)});
}

std::pair<Classifier, AdaptationTrace> gradual_self_train(const Classifier& h0, const DomainPath& path,
                                                          const LossSpec& loss, const TrainConfig& cfg,
                                                          const SelfTrainOptions& opts) {
    if (path.domains.size() < 2)
        throw std::invalid_argument("gradual_self_train: path needs at least source and target");
    Classifier h = h0;
    AdaptationTrace trace;
    for (int t = 1; t <= path.T(); ++t) {
        const auto start = std::chrono::steady_clock::now();
        TrainConfig step_cfg = cfg;
        step_cfg.seed = derive_seed(cfg.seed, {0x57e9, static_cast<std::uint64_t>(t)});
        StepStats stats;
        h = self_train_step(h, path.domains[t].unlabeled(), loss, step_cfg, opts, &stats);

        TraceRow row;
        row.t = t;
        row.descriptor = path.domains[t].descriptor().text;
        row.pseudo_agreement = stats.pseudo_agreement;
        row.train_loss = stats.train_loss;
        row.eval_zero_one = zero_one_error(h, path.domains[t].eval_samples());
        row.eval_loss = population_error(h, path.domains[t].eval_samples(), loss);
        row.seconds = seconds_since(start);
        trace.rows.push_back(std::move(row));
    }
    return {std::move(h), std::move(trace)};
}

Classifier fit_source(const Classifier& init, const Domain& source, const LossSpec& loss,
                      const TrainConfig& cfg) {
    if (!source.labels_visible())
        throw std::invalid_argument("fit_source: source labels must be visible");
    return train_erm(init, to_train_examples(source.eval_samples()), loss, cfg);
}

BaselineResult baselines(const Classifier& h0, const Domain& source, const Domain& target,
                         const LossSpec& loss, const TrainConfig& cfg, const SelfTrainOptions& opts) {
    (void)source;  // h0 is assumed fitted on it
    BaselineResult result;
    result.source_only_error = zero_one_error(h0, target.eval_samples());
    TrainConfig st_cfg = cfg;
    st_cfg.seed = derive_seed(cfg.seed, {0x57e9, 1});
    Classifier vanilla = self_train_step(h0, target.unlabeled(), loss, st_cfg, opts);
    result.vanilla_st_error = zero_one_error(vanilla, target.eval_samples());
    return result;
}

}  // namespace gradapt
