#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gradapt/linalg.hpp"

namespace gradapt {

/// One labeled point. Features are expected to live in the unit L2 ball
/// after path-level normalization; labels are exactly -1 or +1.
struct LabeledSample {
    Vec x;
    int y = 1;
};

struct DomainDescriptor {
    std::string text;
    double shift = 0.0;  // numeric shift parameter (angle in degrees, offset magnitude, t, ...)
};

class Domain;

/// Adaptation-facing view of a domain: features only. The type has no label
/// accessor at all, so code written against it cannot read labels.
class UnlabeledView {
public:
    explicit UnlabeledView(const Domain& d) : domain_(&d) {}
    std::size_t size() const;
    int dim() const;
    const Vec& x(std::size_t i) const;

private:
    const Domain* domain_;
};

class Domain {
public:
    Domain() = default;
    Domain(std::vector<LabeledSample> samples, DomainDescriptor descriptor, bool labels_visible);

    std::size_t size() const { return samples_.size(); }
    int dim() const { return samples_.empty() ? 0 : static_cast<int>(samples_[0].x.size()); }
    bool labels_visible() const { return labels_visible_; }
    bool labels_heuristic() const { return labels_heuristic_; }
    void set_labels_heuristic(bool v) { labels_heuristic_ = v; }

    const DomainDescriptor& descriptor() const { return descriptor_; }
    DomainDescriptor& descriptor() { return descriptor_; }

    /// Ground-truth samples. Evaluation-only for domains with hidden labels;
    /// the adaptation loop must go through unlabeled() instead.
    const std::vector<LabeledSample>& eval_samples() const { return samples_; }
    std::vector<LabeledSample>& mutable_samples() { return samples_; }

    UnlabeledView unlabeled() const { return UnlabeledView(*this); }

private:
    std::vector<LabeledSample> samples_;
    DomainDescriptor descriptor_;
    bool labels_visible_ = true;
    bool labels_heuristic_ = false;  // set when labels were carried over heuristically
};

inline std::size_t UnlabeledView::size() const { return domain_->size(); }
inline int UnlabeledView::dim() const { return domain_->dim(); }
inline const Vec& UnlabeledView::x(std::size_t i) const { return domain_->eval_samples()[i].x; }

/// An ordered sequence of T+1 domains. Index 0 is the labeled source; the
/// labels of indices 1..T are retained for evaluation only.
struct DomainPath {
    std::vector<Domain> domains;
    int n_per_domain = 0;
    double normalization_scale = 1.0;  // raw features were divided by this

    int T() const { return static_cast<int>(domains.size()) - 1; }
    const Domain& source() const { return domains.front(); }
    const Domain& target() const { return domains.back(); }
    void validate() const;
};

// ---------------------------------------------------------------------------
// Synthetic generators

/// Two interleaved semicircular arcs: upper arc (radius 1, centered at the
/// origin) carries label +1, lower arc (radius 1, centered at (1, 0.5),
/// lower half) carries label -1. Class counts are balanced to within one,
/// +1 taking the extra point for odd n. Gaussian noise of the given sigma
/// is added per coordinate, then the whole set is divided by its max sample
/// norm so it lies in the unit ball; that divisor is recorded.
Domain make_two_moons(int n, double noise_sigma, std::uint64_t seed);

/// Same arcs without the final normalization; used by path builders that
/// normalize once per path.
Domain make_two_moons_raw(int n, double noise_sigma, std::uint64_t seed);

/// Isotropic Gaussian cloud labeled by sign(label_w . x + label_b).
/// Verification plumbing for the inequality batteries; not normalized.
Domain make_gaussian_domain(int n, const Vec& mean, double sigma, const Vec& label_w, double label_b,
                            std::uint64_t seed);

/// Rotates every sample in the (axis0, axis1) coordinate plane. Labels are
/// unchanged and norms are preserved.
Domain rotate_domain(const Domain& domain, double angle_deg, int axis0 = 0, int axis1 = 1);

/// Adds `offset` to every sample. No renormalization: the shift is the
/// object of study. If the result leaves the unit ball, the violation is
/// recorded in the descriptor text.
Domain translate_domain(const Domain& domain, const Vec& offset);

struct TwoMoonsSpec {
    double noise_sigma = 0.1;
};

/// T+1 fresh two-moons draws, domain t rotated by start + (end-start)*t/T.
/// Every domain gets its own derived RNG stream. Features are divided by
/// the max sample norm of the source draw (one factor for the whole path,
/// so the shift itself is not erased). n_source = 0 means n.
DomainPath make_rotation_path(const TwoMoonsSpec& base, double start_deg, double end_deg, int T, int n,
                              std::uint64_t seed, int n_source = 0);

/// T+1 fresh two-moons draws, domain t translated by offset * t/T
/// (post-normalization, so the offset is in unit-ball units).
DomainPath make_translation_path(const TwoMoonsSpec& base, const Vec& offset, int T, int n,
                                 std::uint64_t seed, int n_source = 0);

struct CsvPathSpec {
    std::string file;
    std::string sort_column;
    std::string label_column;
    int source_size = 0;
    int target_size = 0;
    int T = 1;
    int n = 0;
};

/// Splits a sorted tabular dataset into source / T-1 intermediate / target
/// domains. Rows are sorted ascending by sort_column; the two most frequent
/// label values map to {+1, -1} (most frequent -> +1) and other rows are
/// dropped (count recorded in the source descriptor). Features (including
/// the sort column) are min-max scaled per column over all kept rows, then
/// divided by the max sample norm of the source domain.
DomainPath load_csv_path(const CsvPathSpec& spec);

// ---------------------------------------------------------------------------
// Path container file (single text file: header, per-domain descriptors,
// then one sample row per line). Round-trips exactly.

void save_path(const DomainPath& path, std::ostream& out);
void save_path_file(const DomainPath& path, const std::string& filename);
DomainPath load_path(std::istream& in);
DomainPath load_path_file(const std::string& filename);

}  // namespace gradapt
