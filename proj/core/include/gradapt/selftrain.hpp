#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gradapt/dataset.hpp"
#include "gradapt/model.hpp"

namespace gradapt {

struct SelfTrainOptions {
    bool hard = true;  // pseudo-labels sign(h(x)); soft targets require the squared loss
    std::optional<double> conf_threshold;  // keep only |h(x)| >= threshold when set
    bool warm_start = true;                // cold start exists for ablation
};

struct StepStats {
    int used_samples = 0;         // after confidence filtering
    double pseudo_agreement = 0;  // fraction of pseudo-labels the new model reproduces
    double train_loss = 0;        // final epoch mean
};

/// One self-training step: fit to the current model's pseudo-labels on an
/// unlabeled sample view, warm-started from that model.
Classifier self_train_step(const Classifier& h, const UnlabeledView& s, const LossSpec& loss,
                           const TrainConfig& cfg, const SelfTrainOptions& opts = {},
                           StepStats* stats = nullptr);

struct TraceRow {
    int t = 0;
    std::string descriptor;
    double pseudo_agreement = 0;
    double train_loss = 0;
    double eval_zero_one = 0;  // against evaluation labels
    double eval_loss = 0;
    double seconds = 0;
};

struct AdaptationTrace {
    std::vector<TraceRow> rows;
    /// Columns: t, descriptor, pseudo_agreement, train_loss, eval_zero_one,
    /// eval_loss, seconds. Timing can be suppressed for byte-reproducible output.
    void write_csv(std::ostream& out, bool include_timing = true) const;
};

/// Gradual self-training: h_t = ST(h_{t-1}, S_t) for t = 1..T. h0 must
/// already be fitted on the source domain. Only the unlabeled views of
/// domains t >= 1 are consumed; evaluation labels feed the trace only.
std::pair<Classifier, AdaptationTrace> gradual_self_train(const Classifier& h0, const DomainPath& path,
                                                          const LossSpec& loss, const TrainConfig& cfg,
                                                          const SelfTrainOptions& opts = {});

/// Fits a classifier to the labeled source domain (convenience for h0).
Classifier fit_source(const Classifier& init, const Domain& source, const LossSpec& loss,
                      const TrainConfig& cfg);

struct BaselineResult {
    double source_only_error = 0;  // zero-one error of h0 on the target
    double vanilla_st_error = 0;   // zero-one error after one ST step on the target
};

BaselineResult baselines(const Classifier& h0, const Domain& source, const Domain& target,
                         const LossSpec& loss, const TrainConfig& cfg, const SelfTrainOptions& opts = {});

}  // namespace gradapt
