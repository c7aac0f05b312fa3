#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sefvc {

/// Frames x dim matrix of upstream self-supervised features (row-major).
struct FeatureMatrix {
    std::vector<double> values;
    int frames = 0;
    int dim = 0;
    int hop_ms = 20;
    std::string source_id;

    const double* row(int t) const { return values.data() + static_cast<size_t>(t) * dim; }
};

/// Discrete semantic token ids at 20 ms hop.
struct SemanticTokenSequence {
    std::vector<int> tokens;
    int hop_ms = 20;

    int size() const { return static_cast<int>(tokens.size()); }
};

struct Codebook {
    std::vector<double> centroids;  // k x dim, row-major
    int k = 0;
    int dim = 0;
    int iterations = 0;
    double inertia = 0.0;
    uint64_t seed = 0;

    const double* centroid(int j) const { return centroids.data() + static_cast<size_t>(j) * dim; }
};

struct KMeansConfig {
    int max_iterations = 100;
    double rel_tol = 1e-4;  // relative inertia change
};

namespace detail {

inline double sq_dist(const double* a, const double* b, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

}  // namespace detail

/// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
inline int nearest_centroid(const double* x, const Codebook& cb) {
    int best = 0;
    double best_d = detail::sq_dist(x, cb.centroid(0), cb.dim);
    for (int j = 1; j < cb.k; ++j) {
        const double d = detail::sq_dist(x, cb.centroid(j), cb.dim);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

/// Lloyd iterations with k-means++ seeding over the concatenated frames of
/// all feature matrices. Empty clusters are reseeded to the point farthest
/// from its assigned centroid.
inline Codebook fit_codebook(const std::vector<FeatureMatrix>& features, int k, uint64_t seed,
                             const KMeansConfig& cfg = {}) {
    if (k < 2) throw std::invalid_argument("fit_codebook: k must be >= 2");
    if (features.empty()) throw std::invalid_argument("fit_codebook: no features");
    const int d = features[0].dim;
    int64_t n = 0;
    for (const auto& f : features) {
        if (f.dim != d) throw std::invalid_argument("fit_codebook: inconsistent feature dims");
        n += f.frames;
    }
    if (n < k) throw std::invalid_argument("fit_codebook: fewer frames than clusters");

    std::vector<const double*> pts;
    pts.reserve(static_cast<size_t>(n));
    for (const auto& f : features) {
        for (int t = 0; t < f.frames; ++t) {
            const double* p = f.row(t);
            for (int i = 0; i < d; ++i)
                if (!std::isfinite(p[i])) throw std::invalid_argument("fit_codebook: non-finite feature value");
            pts.push_back(p);
        }
    }

    Codebook cb;
    cb.k = k;
    cb.dim = d;
    cb.seed = seed;
    cb.centroids.assign(static_cast<size_t>(k) * d, 0.0);
    std::mt19937_64 rng(seed);

    // k-means++ seeding
    std::vector<double> min_d2(pts.size(), std::numeric_limits<double>::max());
    {
        std::uniform_int_distribution<size_t> first(0, pts.size() - 1);
        size_t pick = first(rng);
        std::copy(pts[pick], pts[pick] + d, cb.centroids.begin());
        for (int j = 1; j < k; ++j) {
            double total = 0.0;
            for (size_t i = 0; i < pts.size(); ++i) {
                min_d2[i] = std::min(min_d2[i], detail::sq_dist(pts[i], cb.centroid(j - 1), d));
                total += min_d2[i];
            }
            size_t next = 0;
            if (total > 0.0) {
                std::uniform_real_distribution<double> u(0.0, total);
                double r = u(rng), acc = 0.0;
                for (size_t i = 0; i < pts.size(); ++i) {
                    acc += min_d2[i];
                    if (acc >= r) { next = i; break; }
                }
            } else {
                std::uniform_int_distribution<size_t> any(0, pts.size() - 1);
                next = any(rng);
            }
            std::copy(pts[next], pts[next] + d, cb.centroids.begin() + static_cast<size_t>(j) * d);
        }
    }

    std::vector<int> assign(pts.size(), 0);
    std::vector<double> point_d2(pts.size(), 0.0);
    double prev_inertia = std::numeric_limits<double>::max();
    std::vector<double> sums(static_cast<size_t>(k) * d);
    std::vector<int64_t> counts(static_cast<size_t>(k));
    int it = 0;
    for (; it < cfg.max_iterations; ++it) {
        double inertia = 0.0;
        for (size_t i = 0; i < pts.size(); ++i) {
            assign[i] = nearest_centroid(pts[i], cb);
            point_d2[i] = detail::sq_dist(pts[i], cb.centroid(assign[i]), d);
            inertia += point_d2[i];
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (size_t i = 0; i < pts.size(); ++i) {
            double* s = sums.data() + static_cast<size_t>(assign[i]) * d;
            for (int c = 0; c < d; ++c) s[c] += pts[i][c];
            ++counts[assign[i]];
        }
        for (int j = 0; j < k; ++j) {
            if (counts[j] > 0) {
                for (int c = 0; c < d; ++c)
                    cb.centroids[static_cast<size_t>(j) * d + c] = sums[static_cast<size_t>(j) * d + c] / counts[j];
            } else {
                size_t far = 0;
                for (size_t i = 1; i < pts.size(); ++i)
                    if (point_d2[i] > point_d2[far]) far = i;
                std::copy(pts[far], pts[far] + d, cb.centroids.begin() + static_cast<size_t>(j) * d);
                point_d2[far] = 0.0;
            }
        }
        cb.inertia = inertia;
        if (prev_inertia < std::numeric_limits<double>::max()) {
            const double rel = std::abs(prev_inertia - inertia) / std::max(inertia, 1e-12);
            if (rel < cfg.rel_tol) { ++it; break; }
        }
        prev_inertia = inertia;
    }
    cb.iterations = it;

    // final inertia under the final centroids
    double inertia = 0.0;
    for (size_t i = 0; i < pts.size(); ++i)
        inertia += detail::sq_dist(pts[i], cb.centroid(nearest_centroid(pts[i], cb)), d);
    cb.inertia = inertia;
    return cb;
}

inline SemanticTokenSequence quantize(const FeatureMatrix& f, const Codebook& cb) {
    if (f.dim != cb.dim) throw std::invalid_argument("quantize: feature dim != codebook dim");
    SemanticTokenSequence seq;
    seq.hop_ms = f.hop_ms;
    seq.tokens.resize(static_cast<size_t>(f.frames));
    for (int t = 0; t < f.frames; ++t) seq.tokens[static_cast<size_t>(t)] = nearest_centroid(f.row(t), cb);
    return seq;
}

}  // namespace sefvc
