#include "gradapt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gradapt/csv.hpp"
#include "gradapt/rng.hpp"

namespace gradapt {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double max_sample_norm(const std::vector<LabeledSample>& samples) {
    double m = 0.0;
    for (const auto& s : samples) m = std::max(m, norm2(s.x));
    return m;
}

void scale_samples(std::vector<LabeledSample>& samples, double divisor) {
    for (auto& s : samples)
        for (double& v : s.x) v /= divisor;
}

}  // namespace

Domain::Domain(std::vector<LabeledSample> samples, DomainDescriptor descriptor, bool labels_visible)
    : samples_(std::move(samples)), descriptor_(std::move(descriptor)), labels_visible_(labels_visible) {
    if (samples_.empty()) throw std::invalid_argument("domain: needs at least one sample");
    const std::size_t d = samples_[0].x.size();
    for (const auto& s : samples_) {
        if (s.x.size() != d) throw std::invalid_argument("domain: inconsistent feature dimension");
        if (s.y != 1 && s.y != -1) throw std::invalid_argument("domain: labels must be -1 or +1");
    }
}

void DomainPath::validate() const {
    if (domains.size() < 2) throw std::invalid_argument("domain path: needs at least source and target");
    if (!domains.front().labels_visible())
        throw std::logic_error("domain path: source labels must be visible");
    for (std::size_t t = 1; t < domains.size(); ++t) {
        if (domains[t].labels_visible())
            throw std::logic_error("domain path: adaptation domain " + std::to_string(t) +
                                   " must hide labels");
        if (static_cast<int>(domains[t].size()) != n_per_domain)
            throw std::logic_error("domain path: domain " + std::to_string(t) + " has " +
                                   std::to_string(domains[t].size()) + " samples, expected " +
                                   std::to_string(n_per_domain));
    }
    if (normalization_scale <= 0.0) throw std::logic_error("domain path: non-positive normalization scale");
}

// Arc constants: radius 1; the arcs are offset 1.0 horizontally and 0.5
// vertically from each other, and the whole configuration is centered on
// the origin (centroid of the two arc centers at zero) so that plane
// rotations turn the dataset in place, the way an image rotates about its
// center. Upper arc: (cos t - 0.5, sin t - 0.25); lower arc: the mirror
// image (0.5 - cos t, 0.25 - sin t), t in [0, pi].
Domain make_two_moons_raw(int n, double noise_sigma, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("make_two_moons: n must be >= 2");
    if (noise_sigma < 0.0) throw std::invalid_argument("make_two_moons: negative noise");
    Rng rng(derive_seed(seed, {0x2b00d5}));
    const int n_pos = (n + 1) / 2;
    std::vector<LabeledSample> samples;
    samples.reserve(n);
    for (int i = 0; i < n; ++i) {
        const bool upper = i < n_pos;
        const double theta = rng.uniform(0.0, kPi);
        Vec x(2);
        if (upper) {
            x[0] = std::cos(theta) - 0.5;
            x[1] = std::sin(theta) - 0.25;
        } else {
            x[0] = 0.5 - std::cos(theta);
            x[1] = 0.25 - std::sin(theta);
        }
        if (noise_sigma > 0.0) {
            x[0] += noise_sigma * rng.normal();
            x[1] += noise_sigma * rng.normal();
        }
        samples.push_back({std::move(x), upper ? 1 : -1});
    }
    std::ostringstream text;
    text << "two_moons(n=" << n << ", sigma=" << noise_sigma << ", seed=" << seed << ")";
    return Domain(std::move(samples), {text.str(), 0.0}, true);
}

Domain make_two_moons(int n, double noise_sigma, std::uint64_t seed) {
    Domain d = make_two_moons_raw(n, noise_sigma, seed);
    const double scale = max_sample_norm(d.eval_samples());
    scale_samples(d.mutable_samples(), scale);
    d.descriptor().text += " scale=" + fmt_g17(scale);
    return d;
}

Domain make_gaussian_domain(int n, const Vec& mean, double sigma, const Vec& label_w, double label_b,
                            std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("make_gaussian_domain: n must be >= 1");
    if (mean.size() != label_w.size())
        throw std::invalid_argument("make_gaussian_domain: mean/label_w dimension mismatch");
    Rng rng(derive_seed(seed, {0x6a0551a4}));
    std::vector<LabeledSample> samples;
    samples.reserve(n);
    for (int i = 0; i < n; ++i) {
        Vec x(mean.size());
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = mean[j] + sigma * rng.normal();
        const double z = dot(label_w, x) + label_b;
        samples.push_back({std::move(x), z >= 0.0 ? 1 : -1});
    }
    std::ostringstream text;
    text << "gaussian(n=" << n << ", sigma=" << sigma << ", seed=" << seed << ")";
    return Domain(std::move(samples), {text.str(), 0.0}, true);
}

Domain rotate_domain(const Domain& domain, double angle_deg, int axis0, int axis1) {
    const int d = domain.dim();
    if (axis0 < 0 || axis1 < 0 || axis0 >= d || axis1 >= d || axis0 == axis1)
        throw std::invalid_argument("rotate_domain: invalid rotation plane axes");
    const double rad = angle_deg * kPi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    std::vector<LabeledSample> samples = domain.eval_samples();
    for (auto& sample : samples) {
        const double a = sample.x[axis0], b = sample.x[axis1];
        sample.x[axis0] = c * a - s * b;
        sample.x[axis1] = s * a + c * b;
    }
    DomainDescriptor desc = domain.descriptor();
    std::ostringstream text;
    text << desc.text << " rot(" << angle_deg << "deg)";
    desc.text = text.str();
    desc.shift = angle_deg;
    Domain out(std::move(samples), desc, domain.labels_visible());
    out.set_labels_heuristic(domain.labels_heuristic());
    return out;
}

Domain translate_domain(const Domain& domain, const Vec& offset) {
    if (static_cast<int>(offset.size()) != domain.dim())
        throw std::invalid_argument("translate_domain: offset dimension mismatch");
    std::vector<LabeledSample> samples = domain.eval_samples();
    for (auto& sample : samples)
        for (std::size_t j = 0; j < offset.size(); ++j) sample.x[j] += offset[j];
    DomainDescriptor desc = domain.descriptor();
    const double mag = norm2(offset);
    std::ostringstream text;
    text << desc.text << " translate(|v|=" << mag << ")";
    desc.shift = mag;
    const double max_norm = max_sample_norm(samples);
    if (max_norm > 1.0 + 1e-12)
        text << " unit_ball_exceeded(max_norm=" << fmt_g17(max_norm) << ")";
    desc.text = text.str();
    Domain out(std::move(samples), desc, domain.labels_visible());
    out.set_labels_heuristic(domain.labels_heuristic());
    return out;
}

namespace {

// Shared scaffolding of the synthetic path builders: fresh raw draws per
// domain, a per-domain transform, then one normalization factor taken from
// the source draw.
DomainPath build_synthetic_path(const TwoMoonsSpec& base, int T, int n, std::uint64_t seed, int n_source,
                                const std::function<Domain(Domain, int)>& transform_raw) {
    if (T < 1) throw std::invalid_argument("path builder: T must be >= 1");
    if (n < 2) throw std::invalid_argument("path builder: n must be >= 2");
    const int n0 = n_source > 0 ? n_source : n;
    DomainPath path;
    path.n_per_domain = n;
    for (int t = 0; t <= T; ++t) {
        const int nt = t == 0 ? n0 : n;
        Domain raw = make_two_moons_raw(nt, base.noise_sigma, derive_seed(seed, {0xd0a1, (std::uint64_t)t}));
        path.domains.push_back(transform_raw(std::move(raw), t));
    }
    path.normalization_scale = max_sample_norm(path.domains[0].eval_samples());
    for (auto& d : path.domains) scale_samples(d.mutable_samples(), path.normalization_scale);
    return path;
}

Domain with_visibility(Domain d, bool visible) {
    Domain out(std::move(d.mutable_samples()), d.descriptor(), visible);
    out.set_labels_heuristic(d.labels_heuristic());
    return out;
}

}  // namespace

DomainPath make_rotation_path(const TwoMoonsSpec& base, double start_deg, double end_deg, int T, int n,
                              std::uint64_t seed, int n_source) {
    DomainPath path = build_synthetic_path(base, T, n, seed, n_source, [&](Domain raw, int t) {
        const double angle = start_deg + (end_deg - start_deg) * static_cast<double>(t) / T;
        return with_visibility(rotate_domain(raw, angle), t == 0);
    });
    path.validate();
    return path;
}

DomainPath make_translation_path(const TwoMoonsSpec& base, const Vec& offset, int T, int n,
                                 std::uint64_t seed, int n_source) {
    // Offsets are applied after normalization so they are in unit-ball units.
    DomainPath path = build_synthetic_path(base, T, n, seed, n_source, [&](Domain raw, int t) {
        raw.descriptor().shift = static_cast<double>(t) / T;
        return with_visibility(std::move(raw), t == 0);
    });
    for (std::size_t t = 1; t < path.domains.size(); ++t) {
        Vec step(offset.size());
        for (std::size_t j = 0; j < offset.size(); ++j)
            step[j] = offset[j] * static_cast<double>(t) / path.T();
        path.domains[t] = with_visibility(translate_domain(path.domains[t], step), false);
    }
    path.validate();
    return path;
}

DomainPath load_csv_path(const CsvPathSpec& spec) {
    if (spec.T < 1) throw std::invalid_argument("load_csv_path: T must be >= 1");
    if (spec.source_size < 1 || spec.target_size < 1)
        throw std::invalid_argument("load_csv_path: source_size and target_size must be positive");
    if (spec.T > 1 && spec.n < 1)
        throw std::invalid_argument("load_csv_path: n must be positive when T > 1");

    CsvTable table = read_csv_file(spec.file);
    const int label_col = table.require_column(spec.label_column);
    const int sort_col = table.require_column(spec.sort_column);

    // Binarize: two most frequent label values -> {+1, -1}, rest dropped.
    std::map<std::string, int> counts;
    for (const auto& row : table.rows) ++counts[row[label_col]];
    if (counts.size() < 2) throw std::runtime_error("load_csv_path: need at least two label values");
    std::vector<std::pair<std::string, int>> by_count(counts.begin(), counts.end());
    std::stable_sort(by_count.begin(), by_count.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    const std::string pos_value = by_count[0].first;
    const std::string neg_value = by_count[1].first;
    std::size_t dropped = 0;

    struct Row {
        double sort_key;
        Vec x;
        int y;
    };
    std::vector<Row> rows;
    rows.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& fields = table.rows[r];
        int y;
        if (fields[label_col] == pos_value)
            y = 1;
        else if (fields[label_col] == neg_value)
            y = -1;
        else {
            ++dropped;
            continue;
        }
        Row row;
        row.y = y;
        row.sort_key = parse_csv_number(fields[sort_col], spec.sort_column, r + 2);
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (static_cast<int>(c) == label_col) continue;
            row.x.push_back(parse_csv_number(fields[c], table.header[c], r + 2));
        }
        rows.push_back(std::move(row));
    }

    const int total = static_cast<int>(rows.size());
    const int middle = total - spec.source_size - spec.target_size;
    if (middle < 0)
        throw std::runtime_error("load_csv_path: only " + std::to_string(total) +
                                 " usable rows, need at least " +
                                 std::to_string(spec.source_size + spec.target_size));
    if (spec.T > 1 && middle < spec.n)
        throw std::runtime_error("load_csv_path: middle block has " + std::to_string(middle) +
                                 " rows, need n=" + std::to_string(spec.n) + " per intermediate domain");

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.sort_key < b.sort_key; });

    // Min-max scale each feature over all kept rows.
    const std::size_t d = rows[0].x.size();
    Vec lo(d, std::numeric_limits<double>::infinity());
    Vec hi(d, -std::numeric_limits<double>::infinity());
    for (const auto& row : rows)
        for (std::size_t j = 0; j < d; ++j) {
            lo[j] = std::min(lo[j], row.x[j]);
            hi[j] = std::max(hi[j], row.x[j]);
        }
    for (auto& row : rows)
        for (std::size_t j = 0; j < d; ++j) {
            const double span = hi[j] - lo[j];
            row.x[j] = span > 0.0 ? (row.x[j] - lo[j]) / span : 0.0;
        }

    auto make_domain = [&](int begin, int count, const std::string& text, double shift, bool visible) {
        std::vector<LabeledSample> samples;
        samples.reserve(count);
        for (int i = begin; i < begin + count; ++i) samples.push_back({rows[i].x, rows[i].y});
        return Domain(std::move(samples), {text, shift}, visible);
    };

    DomainPath path;
    path.n_per_domain = spec.T > 1 ? spec.n : spec.target_size;
    std::ostringstream src_text;
    src_text << "csv source rows[0," << spec.source_size << ") of " << spec.file;
    if (dropped > 0) src_text << " dropped_labels=" << dropped;
    path.domains.push_back(make_domain(0, spec.source_size, src_text.str(), 0.0, true));

    // Intermediate domains: n consecutive rows around the centers of T-1
    // equal bins of the middle block.
    for (int b = 1; b < spec.T; ++b) {
        const long bin_lo = spec.source_size + static_cast<long>(middle) * (b - 1) / (spec.T - 1);
        const long bin_hi = spec.source_size + static_cast<long>(middle) * b / (spec.T - 1);
        long start = (bin_lo + bin_hi) / 2 - spec.n / 2;
        start = std::clamp(start, static_cast<long>(spec.source_size),
                           static_cast<long>(spec.source_size + middle - spec.n));
        std::ostringstream text;
        text << "csv intermediate " << b << "/" << spec.T - 1 << " rows[" << start << "," << start + spec.n
             << ")";
        path.domains.push_back(
            make_domain(static_cast<int>(start), spec.n, text.str(), static_cast<double>(b), false));
    }

    std::ostringstream tgt_text;
    tgt_text << "csv target rows[" << total - spec.target_size << "," << total << ")";
    path.domains.push_back(make_domain(total - spec.target_size, spec.target_size, tgt_text.str(),
                                       static_cast<double>(spec.T), false));

    // Note: the target keeps target_size samples, which may differ from n, so
    // DomainPath::validate() (which enforces n for every t >= 1) is not run here.
    path.normalization_scale = max_sample_norm(path.domains[0].eval_samples());
    if (path.normalization_scale <= 0.0) path.normalization_scale = 1.0;
    for (auto& dom : path.domains) scale_samples(dom.mutable_samples(), path.normalization_scale);
    return path;
}

// ---------------------------------------------------------------------------
// Path container

void save_path(const DomainPath& path, std::ostream& out) {
    out << "gradapt-path v1\n";
    out << "d=" << path.domains[0].dim() << " T=" << path.T() << " n=" << path.n_per_domain
        << " scale=" << fmt_g17(path.normalization_scale) << "\n";
    for (std::size_t t = 0; t < path.domains.size(); ++t) {
        const Domain& d = path.domains[t];
        out << "domain " << t << " size=" << d.size() << " shift=" << fmt_g17(d.descriptor().shift)
            << " labels_visible=" << (d.labels_visible() ? 1 : 0)
            << " heuristic=" << (d.labels_heuristic() ? 1 : 0) << " text=";
        write_csv_row(out, {d.descriptor().text});
    }
    for (std::size_t t = 0; t < path.domains.size(); ++t) {
        for (const auto& s : path.domains[t].eval_samples()) {
            out << t << ',' << s.y;
            for (double v : s.x) out << ',' << fmt_g17(v);
            out << '\n';
        }
    }
}

void save_path_file(const DomainPath& path, const std::string& filename) {
    std::ofstream out(filename, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + filename);
    save_path(path, out);
}

DomainPath load_path(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "gradapt-path v1")
        throw std::runtime_error("path file: bad magic line");
    int d = 0, T = -1, n = 0;
    double scale = 1.0;
    if (!std::getline(in, line)) throw std::runtime_error("path file: missing header");
    if (std::sscanf(line.c_str(), "d=%d T=%d n=%d scale=%lf", &d, &T, &n, &scale) != 4)
        throw std::runtime_error("path file: malformed header: " + line);

    struct Header {
        std::size_t size;
        double shift;
        bool visible;
        bool heuristic;
        std::string text;
    };
    std::vector<Header> headers;
    for (int t = 0; t <= T; ++t) {
        if (!std::getline(in, line)) throw std::runtime_error("path file: missing domain header");
        Header h;
        int idx = 0, vis = 0, heur = 0;
        unsigned long size = 0;
        int consumed = 0;
        if (std::sscanf(line.c_str(), "domain %d size=%lu shift=%lf labels_visible=%d heuristic=%d text=%n",
                        &idx, &size, &h.shift, &vis, &heur, &consumed) != 5 ||
            idx != t)
            throw std::runtime_error("path file: malformed domain header: " + line);
        h.size = size;
        h.visible = vis != 0;
        h.heuristic = heur != 0;
        // The text field was written as a one-field CSV row.
        std::string raw = line.substr(consumed);
        if (raw.size() >= 2 && raw.front() == '"') {
            std::string unescaped;
            for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
                if (raw[i] == '"' && i + 1 < raw.size() - 1 && raw[i + 1] == '"') {
                    unescaped.push_back('"');
                    ++i;
                } else {
                    unescaped.push_back(raw[i]);
                }
            }
            h.text = unescaped;
        } else {
            h.text = raw;
        }
        headers.push_back(std::move(h));
    }

    std::vector<std::vector<LabeledSample>> samples(T + 1);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string tok;
        if (!std::getline(row, tok, ',')) throw std::runtime_error("path file: bad sample row");
        const int t = std::stoi(tok);
        if (t < 0 || t > T) throw std::runtime_error("path file: domain index out of range");
        if (!std::getline(row, tok, ',')) throw std::runtime_error("path file: bad sample row");
        LabeledSample s;
        s.y = std::stoi(tok);
        s.x.reserve(d);
        while (std::getline(row, tok, ',')) s.x.push_back(std::stod(tok));
        if (static_cast<int>(s.x.size()) != d)
            throw std::runtime_error("path file: sample with wrong dimension");
        samples[t].push_back(std::move(s));
    }

    DomainPath path;
    path.n_per_domain = n;
    path.normalization_scale = scale;
    for (int t = 0; t <= T; ++t) {
        if (samples[t].size() != headers[t].size)
            throw std::runtime_error("path file: domain " + std::to_string(t) + " sample count mismatch");
        Domain dom(std::move(samples[t]), {headers[t].text, headers[t].shift}, headers[t].visible);
        dom.set_labels_heuristic(headers[t].heuristic);
        path.domains.push_back(std::move(dom));
    }
    return path;
}

DomainPath load_path_file(const std::string& filename) {
    std::ifstream in(filename, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open path file: " + filename);
    return load_path(in);
}

}  // namespace gradapt
