#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "sefvc/wav.hpp"

namespace sefvc {

/// In-place iterative radix-2 FFT. Unnormalized in both directions.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft size must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                auto u = a[i + j];
                auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

struct MelConfig {
    int sample_rate = 16000;
    int n_fft = 1024;
    int win_length = 800;  // 50 ms
    int hop_length = 160;  // 10 ms; 320 for the 20 ms loss-target rate
    int n_mels = 80;
    double fmin = 0.0;
    double fmax = 8000.0;
    double log_eps = 1e-5;
};

inline MelConfig mel_config_for_hop_ms(int hop_ms, int n_mels = 80) {
    if (hop_ms != 10 && hop_ms != 20) throw std::invalid_argument("hop_ms must be 10 or 20");
    MelConfig c;
    c.hop_length = 16 * hop_ms;
    c.n_mels = n_mels;
    return c;
}

/// Log-mel energies, frames x n_mels, row-major.
struct MelSpectrogram {
    std::vector<double> values;
    int frames = 0;
    int n_mels = 0;
    int hop_ms = 0;

    double at(int t, int m) const { return values[static_cast<size_t>(t) * n_mels + m]; }
};

namespace detail {

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Triangular mel filterbank over the one-sided spectrum, (n_mels x (n_fft/2+1)).
inline std::vector<double> mel_filterbank(const MelConfig& cfg) {
    const int n_bins = cfg.n_fft / 2 + 1;
    std::vector<double> fb(static_cast<size_t>(cfg.n_mels) * n_bins, 0.0);
    const double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax);
    std::vector<double> edges(cfg.n_mels + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double f_lo = edges[m], f_c = edges[m + 1], f_hi = edges[m + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
            double w = 0.0;
            if (f > f_lo && f < f_c) w = (f - f_lo) / (f_c - f_lo);
            else if (f >= f_c && f < f_hi) w = (f_hi - f) / (f_hi - f_c);
            fb[static_cast<size_t>(m) * n_bins + k] = w;
        }
    }
    return fb;
}

inline std::vector<double> hann_window(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    return w;
}

/// Reflected index into [0, n) for center padding.
inline int64_t reflect_index(int64_t i, int64_t n) {
    if (n == 1) return 0;
    const int64_t period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

}  // namespace detail

inline int mel_frame_count(int64_t num_samples, int hop_length) {
    return static_cast<int>(num_samples / hop_length);
}

/// Shared STFT front end for forward mel and its adjoint.
class MelAnalyzer {
public:
    explicit MelAnalyzer(const MelConfig& cfg)
        : cfg_(cfg), fb_(detail::mel_filterbank(cfg)), window_(detail::hann_window(cfg.win_length)) {
        if (cfg.win_length > cfg.n_fft) throw std::invalid_argument("win_length > n_fft");
    }

    const MelConfig& config() const { return cfg_; }

    /// frames = floor(len / hop), center-padded by reflection.
    MelSpectrogram compute(const std::vector<double>& wav) const {
        if (static_cast<int>(wav.size()) < cfg_.win_length)
            throw std::invalid_argument("waveform shorter than one analysis window");
        const int frames = mel_frame_count(static_cast<int64_t>(wav.size()), cfg_.hop_length);
        MelSpectrogram mel;
        mel.frames = frames;
        mel.n_mels = cfg_.n_mels;
        mel.hop_ms = cfg_.hop_length * 1000 / cfg_.sample_rate;
        mel.values.assign(static_cast<size_t>(frames) * cfg_.n_mels, 0.0);
        const int n_bins = cfg_.n_fft / 2 + 1;
        std::vector<std::complex<double>> buf(cfg_.n_fft);
        std::vector<double> power(n_bins);
        for (int t = 0; t < frames; ++t) {
            frame_fft(wav, t, buf);
            for (int k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
            for (int m = 0; m < cfg_.n_mels; ++m) {
                double e = 0.0;
                const double* w = fb_.data() + static_cast<size_t>(m) * n_bins;
                for (int k = 0; k < n_bins; ++k) e += w[k] * power[k];
                mel.values[static_cast<size_t>(t) * cfg_.n_mels + m] = std::log(std::max(e, cfg_.log_eps));
            }
        }
        return mel;
    }

    /// Adjoint of compute(): accumulates d(loss)/d(wav) given d(loss)/d(mel).
    void backward(const std::vector<double>& wav, const std::vector<double>& grad_mel,
                  std::vector<double>& grad_wav) const {
        const int frames = mel_frame_count(static_cast<int64_t>(wav.size()), cfg_.hop_length);
        const int n_bins = cfg_.n_fft / 2 + 1;
        const int64_t n = static_cast<int64_t>(wav.size());
        std::vector<std::complex<double>> buf(cfg_.n_fft), gspec(cfg_.n_fft);
        std::vector<double> gpower(n_bins);
        for (int t = 0; t < frames; ++t) {
            frame_fft(wav, t, buf);
            std::fill(gpower.begin(), gpower.end(), 0.0);
            for (int m = 0; m < cfg_.n_mels; ++m) {
                const double* w = fb_.data() + static_cast<size_t>(m) * n_bins;
                double e = 0.0;
                for (int k = 0; k < n_bins; ++k) e += w[k] * std::norm(buf[k]);
                if (e <= cfg_.log_eps) continue;  // clamped, no gradient
                const double g = grad_mel[static_cast<size_t>(t) * cfg_.n_mels + m] / e;
                for (int k = 0; k < n_bins; ++k) gpower[k] += g * w[k];
            }
            // d(power)/d(spectrum), then the adjoint DFT back to the frame.
            std::fill(gspec.begin(), gspec.end(), std::complex<double>(0.0, 0.0));
            for (int k = 0; k < n_bins; ++k)
                gspec[k] = 2.0 * gpower[k] * buf[k];
            fft_inplace(gspec, /*inverse=*/true);
            const int half = cfg_.win_length / 2;
            for (int j = 0; j < cfg_.win_length; ++j) {
                const int64_t idx = detail::reflect_index(
                    static_cast<int64_t>(t) * cfg_.hop_length + j - half, n);
                grad_wav[static_cast<size_t>(idx)] += gspec[j].real() * window_[j];
            }
        }
    }

private:
    void frame_fft(const std::vector<double>& wav, int t, std::vector<std::complex<double>>& buf) const {
        const int64_t n = static_cast<int64_t>(wav.size());
        const int half = cfg_.win_length / 2;
        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
        for (int j = 0; j < cfg_.win_length; ++j) {
            const int64_t idx = detail::reflect_index(
                static_cast<int64_t>(t) * cfg_.hop_length + j - half, n);
            buf[j] = wav[static_cast<size_t>(idx)] * window_[j];
        }
        fft_inplace(buf);
    }

    MelConfig cfg_;
    std::vector<double> fb_;
    std::vector<double> window_;
};

/// Log-mel spectrogram at 10 or 20 ms hop.
inline MelSpectrogram compute_mel(const Waveform& w, int hop_ms, int n_mels = 80) {
    MelAnalyzer a(mel_config_for_hop_ms(hop_ms, n_mels));
    return a.compute(w.samples);
}

}  // namespace sefvc
