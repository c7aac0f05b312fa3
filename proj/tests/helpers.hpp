#pragma once

// Shared fixtures for the test suite: synthetic audio, tiny model/run
// configs sized so each test finishes in seconds.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sefvc/sefvc.hpp"

namespace testutil {

inline sefvc::Waveform sine_wave(double freq_hz, double seconds, double amp = 0.5,
                                 int sr = 16000, const std::string& id = "sine") {
    sefvc::Waveform w;
    w.sample_rate = sr;
    w.source_id = id;
    const int64_t n = static_cast<int64_t>(seconds * sr);
    w.samples.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
        w.samples[static_cast<size_t>(i)] =
            amp * std::sin(2.0 * std::numbers::pi * freq_hz * i / sr);
    return w;
}

/// Harmonic signal with a slowly wandering F0 and amplitude envelope plus a
/// little noise: enough spectral structure for mels, pitch and tokens to be
/// non-trivial while staying fully deterministic.
inline sefvc::Waveform speech_like(double seconds, uint64_t seed, int sr = 16000,
                                   const std::string& id = "speech_like") {
    sefvc::Waveform w;
    w.sample_rate = sr;
    w.source_id = id;
    const int64_t n = static_cast<int64_t>(seconds * sr);
    w.samples.resize(static_cast<size_t>(n));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double f_base = 110.0 + 40.0 * (seed % 5);
    double phase1 = 0.0, phase2 = 0.0, phase3 = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        const double f0 = f_base * (1.0 + 0.15 * std::sin(2.0 * std::numbers::pi * 0.7 * t));
        phase1 += 2.0 * std::numbers::pi * f0 / sr;
        phase2 += 2.0 * std::numbers::pi * 2.0 * f0 / sr;
        phase3 += 2.0 * std::numbers::pi * 3.0 * f0 / sr;
        const double env = 0.55 + 0.35 * std::sin(2.0 * std::numbers::pi * 1.3 * t + 0.5);
        w.samples[static_cast<size_t>(i)] =
            env * (0.6 * std::sin(phase1) + 0.25 * std::sin(phase2) + 0.1 * std::sin(phase3)) +
            0.01 * u(rng);
    }
    return w;
}

inline sefvc::Waveform noise_wave(double seconds, uint64_t seed, double amp = 0.3, int sr = 16000) {
    sefvc::Waveform w;
    w.sample_rate = sr;
    w.source_id = "noise";
    const int64_t n = static_cast<int64_t>(seconds * sr);
    w.samples.resize(static_cast<size_t>(n));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amp, amp);
    for (auto& s : w.samples) s = u(rng);
    return w;
}

inline sefvc::MelSpectrogram random_mel(int frames, int n_mels, uint64_t seed) {
    sefvc::MelSpectrogram m;
    m.frames = frames;
    m.n_mels = n_mels;
    m.hop_ms = 10;
    m.values.resize(static_cast<size_t>(frames) * n_mels);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(-3.0, 2.0);
    for (auto& v : m.values) v = g(rng);
    return m;
}

/// Small model: real layout, desk-test widths.
inline sefvc::ModelConfig tiny_model_config() {
    sefvc::ModelConfig c;
    c.attn_dim = 8;
    c.attn_heads = 2;
    c.conformer_blocks_per_encoder = 1;
    c.conformer_ff_mult = 2;
    c.conformer_conv_kernel = 7;
    c.mel_encoder_channels = 2;
    c.vocab_size = 11;
    c.gen_channels = 8;
    c.n_mels = 16;
    c.adaptor_hidden = 8;
    return c;
}

inline sefvc::DiscriminatorConfig tiny_disc_config() {
    sefvc::DiscriminatorConfig c;
    c.periods = {2, 3};
    c.mpd_channels = {2, 4};
    c.msd_channels = {2, 4};
    c.msd_scales = 2;
    return c;
}

inline std::vector<int> random_tokens(int count, int vocab, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(0, vocab - 1);
    std::vector<int> t(static_cast<size_t>(count));
    for (auto& v : t) v = d(rng);
    return t;
}

inline sefvc::FeatureMatrix random_features(int frames, int dim, uint64_t seed,
                                            const std::string& id = "feat") {
    sefvc::FeatureMatrix f;
    f.frames = frames;
    f.dim = dim;
    f.hop_ms = 20;
    f.source_id = id;
    f.values.resize(static_cast<size_t>(frames) * dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : f.values) v = g(rng);
    return f;
}

/// Trainer setup small enough for multi-step tests: one synthetic utterance
/// with random features aligned to its 20 ms frames.
inline sefvc::RunConfig tiny_run_config() {
    sefvc::RunConfig c;
    c.model = tiny_model_config();
    c.disc = tiny_disc_config();
    c.train.batch_size = 1;
    c.train.seed = 7;
    c.train.ref_len_min_s = 1.0;
    c.train.ref_len_max_s = 1.5;
    c.train.content_min_s = 0.3;
    c.train.feature_dim = 12;
    return c;
}

inline std::vector<sefvc::UtteranceData> tiny_dataset(const sefvc::RunConfig& cfg,
                                                      double seconds = 2.6, uint64_t seed = 3) {
    sefvc::UtteranceData u;
    u.wav = speech_like(seconds, seed);
    const int frames = static_cast<int>(u.wav.size() / 320);
    u.features = random_features(frames, cfg.train.feature_dim, seed + 1, u.wav.source_id);
    u.features.source_id = u.wav.source_id;
    std::vector<sefvc::UtteranceData> d;
    d.push_back(std::move(u));
    return d;
}

inline sefvc::Codebook tiny_codebook(const sefvc::RunConfig& cfg,
                                     const std::vector<sefvc::UtteranceData>& data) {
    std::vector<sefvc::FeatureMatrix> feats;
    for (const auto& u : data) feats.push_back(u.features);
    return sefvc::fit_codebook(feats, cfg.model.vocab_size, 99);
}

}  // namespace testutil
