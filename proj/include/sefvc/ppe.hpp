#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sefvc/wav.hpp"

namespace sefvc {

/// Per-frame pitch / probability-of-voicing / energy at 20 ms hop.
struct ProsodyTrack {
    std::vector<double> pitch;   // F0 in Hz, 0 when unvoiced
    std::vector<double> pov;     // in [0, 1]
    std::vector<double> energy;  // RMS, >= 0
    int hop_ms = 20;

    int frames() const { return static_cast<int>(pitch.size()); }
};

struct PpeConfig {
    int sample_rate = 16000;
    int hop_length = 320;      // 20 ms
    int win_length = 400;      // 25 ms analysis window
    double fmin = 60.0;        // pitch search range
    double fmax = 400.0;
    double voicing_threshold = 0.45;
    double silence_floor = 1e-6;  // RMS below this is treated as silence
};

/// Normalized-autocorrelation F0 tracker.
///
/// For each frame the window is correlated against itself shifted by the
/// candidate lag; the peak value doubles as the voicing probability. Among
/// lags whose score is within 3% of the maximum, the shortest lag wins,
/// which suppresses octave-down errors on strongly periodic input.
inline ProsodyTrack extract_ppe(const Waveform& w, const PpeConfig& cfg = {}) {
    const int64_t n = w.size();
    if (n < cfg.win_length) throw std::invalid_argument("waveform shorter than one pitch window");
    const int frames = static_cast<int>(n / cfg.hop_length);
    const int lag_min = static_cast<int>(cfg.sample_rate / cfg.fmax);
    const int lag_max = static_cast<int>(cfg.sample_rate / cfg.fmin);
    const int half = cfg.win_length / 2;

    auto sample = [&](int64_t i) -> double {
        return (i >= 0 && i < n) ? w.samples[static_cast<size_t>(i)] : 0.0;
    };

    ProsodyTrack out;
    out.pitch.assign(frames, 0.0);
    out.pov.assign(frames, 0.0);
    out.energy.assign(frames, 0.0);

    std::vector<double> score(lag_max + 1, 0.0);
    for (int t = 0; t < frames; ++t) {
        const int64_t start = static_cast<int64_t>(t) * cfg.hop_length - half;
        double e2 = 0.0;
        for (int j = 0; j < cfg.win_length; ++j) {
            const double v = sample(start + j);
            e2 += v * v;
        }
        const double rms = std::sqrt(e2 / cfg.win_length);
        out.energy[t] = rms;
        if (rms < cfg.silence_floor) continue;

        double best = 0.0;
        for (int lag = lag_min; lag <= lag_max; ++lag) {
            double num = 0.0, den2 = 0.0;
            for (int j = 0; j < cfg.win_length; ++j) {
                const double b = sample(start + j + lag);
                num += sample(start + j) * b;
                den2 += b * b;
            }
            const double den = std::sqrt(e2 * den2);
            score[lag] = den > 0.0 ? num / den : 0.0;
            best = std::max(best, score[lag]);
        }
        out.pov[t] = std::clamp(best, 0.0, 1.0);
        if (best >= cfg.voicing_threshold) {
            int lag_pick = lag_max;
            for (int lag = lag_min; lag <= lag_max; ++lag) {
                if (score[lag] >= 0.97 * best) { lag_pick = lag; break; }
            }
            // parabolic refinement around the integer peak
            double refined = lag_pick;
            if (lag_pick > lag_min && lag_pick < lag_max) {
                const double a = score[lag_pick - 1], b = score[lag_pick], c = score[lag_pick + 1];
                const double denom = a - 2.0 * b + c;
                if (std::abs(denom) > 1e-12) {
                    const double delta = 0.5 * (a - c) / denom;
                    if (std::abs(delta) <= 1.0) refined += delta;
                }
            }
            out.pitch[t] = cfg.sample_rate / refined;
        }
    }
    return out;
}

/// Pitch channel used for regression targets: log(1+F0) voiced, 0 unvoiced.
inline double pitch_to_feature(double f0_hz) { return f0_hz > 0.0 ? std::log1p(f0_hz) : 0.0; }

}  // namespace sefvc
