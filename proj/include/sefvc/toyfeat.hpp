#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "sefvc/dsp.hpp"
#include "sefvc/kmeans.hpp"

namespace sefvc {

/// Deterministic stand-in for an external self-supervised feature
/// extractor: stacked log-mel + delta at 20 ms hop, projected to the
/// target dimensionality by a fixed seeded random matrix. Lets the full
/// pipeline train end-to-end without any pretrained artifacts.
struct ToyFeatureConfig {
    int n_mels = 80;
    int out_dim = 1024;
    uint64_t projection_seed = 0x5EFC;
};

inline FeatureMatrix extract_toy_features(const Waveform& w, const ToyFeatureConfig& cfg = {}) {
    MelSpectrogram mel = compute_mel(w, 20, cfg.n_mels);
    const int T = mel.frames, M = cfg.n_mels;
    const int stacked = 2 * M;
    std::vector<double> feat(static_cast<size_t>(T) * stacked);
    for (int t = 0; t < T; ++t) {
        const int prev = std::max(0, t - 1), next = std::min(T - 1, t + 1);
        for (int m = 0; m < M; ++m) {
            feat[static_cast<size_t>(t) * stacked + m] = mel.at(t, m);
            feat[static_cast<size_t>(t) * stacked + M + m] = 0.5 * (mel.at(next, m) - mel.at(prev, m));
        }
    }
    std::mt19937_64 rng(cfg.projection_seed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(stacked)));
    std::vector<double> proj(static_cast<size_t>(stacked) * cfg.out_dim);
    for (double& v : proj) v = dist(rng);

    FeatureMatrix out;
    out.frames = T;
    out.dim = cfg.out_dim;
    out.hop_ms = 20;
    out.source_id = w.source_id;
    out.values.assign(static_cast<size_t>(T) * cfg.out_dim, 0.0);
    for (int t = 0; t < T; ++t)
        for (int s = 0; s < stacked; ++s) {
            const double v = feat[static_cast<size_t>(t) * stacked + s];
            if (v == 0.0) continue;
            const double* pr = proj.data() + static_cast<size_t>(s) * cfg.out_dim;
            double* orow = out.values.data() + static_cast<size_t>(t) * cfg.out_dim;
            for (int d = 0; d < cfg.out_dim; ++d) orow[d] += v * pr[d];
        }
    return out;
}

/// Deterministic toy speaker embedder: per-bin mean and standard deviation
/// of the 20 ms log-mel. Used by the evaluation harness when no external
/// embedder command is supplied.
inline std::vector<double> toy_speaker_embedding(const Waveform& w, int n_mels = 80) {
    MelSpectrogram mel = compute_mel(w, 20, n_mels);
    std::vector<double> emb(static_cast<size_t>(2) * n_mels, 0.0);
    for (int m = 0; m < n_mels; ++m) {
        double mean = 0.0;
        for (int t = 0; t < mel.frames; ++t) mean += mel.at(t, m);
        mean /= mel.frames;
        double var = 0.0;
        for (int t = 0; t < mel.frames; ++t) var += (mel.at(t, m) - mean) * (mel.at(t, m) - mean);
        var /= mel.frames;
        emb[static_cast<size_t>(m)] = mean;
        emb[static_cast<size_t>(n_mels + m)] = std::sqrt(var);
    }
    return emb;
}

}  // namespace sefvc
