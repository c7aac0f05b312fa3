#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace sefvc {

/// Mono waveform, always 16 kHz after load_waveform().
struct Waveform {
    std::vector<double> samples;  // in [-1, 1]
    int sample_rate = 16000;
    std::string source_id;

    int64_t size() const { return static_cast<int64_t>(samples.size()); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct WavLoadOptions {
    int target_rate = 16000;
    bool average_stereo = false;  // false: reject multi-channel input
    bool peak_normalize = true;
};

namespace detail {

inline uint32_t read_u32(std::istream& s) {
    unsigned char b[4];
    s.read(reinterpret_cast<char*>(b), 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24);
}
inline uint16_t read_u16(std::istream& s) {
    unsigned char b[2];
    s.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

/// Windowed-sinc low-pass interpolation; cutoff at the narrower Nyquist.
inline std::vector<double> resample(const std::vector<double>& in, int in_rate, int out_rate) {
    if (in_rate == out_rate) return in;
    const int64_t n_in = static_cast<int64_t>(in.size());
    const int64_t n_out = n_in * out_rate / in_rate;
    const double ratio = static_cast<double>(in_rate) / out_rate;
    const double cutoff = std::min(1.0, 1.0 / ratio);  // relative to input Nyquist
    const int half_taps = 32;
    std::vector<double> out(static_cast<size_t>(n_out));
    for (int64_t i = 0; i < n_out; ++i) {
        const double center = i * ratio;
        const int64_t lo = static_cast<int64_t>(std::ceil(center - half_taps / cutoff));
        const int64_t hi = static_cast<int64_t>(std::floor(center + half_taps / cutoff));
        double acc = 0.0;
        for (int64_t j = std::max<int64_t>(0, lo); j <= std::min(n_in - 1, hi); ++j) {
            const double x = (j - center) * cutoff;
            double sinc = (x == 0.0) ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
            const double w = 0.5 + 0.5 * std::cos(std::numbers::pi * x / half_taps);  // Hann taper
            acc += in[static_cast<size_t>(j)] * sinc * w * cutoff;
        }
        out[static_cast<size_t>(i)] = acc;
    }
    return out;
}

}  // namespace detail

/// Loads a PCM WAV file, converts to mono 16 kHz, peak-normalizes to <= 1.
inline Waveform load_waveform(const std::string& path, const WavLoadOptions& opt = {}) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open wav file: " + path);

    char tag[4];
    f.read(tag, 4);
    if (!f || std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("not a RIFF file: " + path);
    detail::read_u32(f);  // riff size
    f.read(tag, 4);
    if (!f || std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("not a WAVE file: " + path);

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    std::vector<double> samples;
    bool got_fmt = false, got_data = false;
    while (f && !(got_fmt && got_data)) {
        f.read(tag, 4);
        uint32_t chunk_size = detail::read_u32(f);
        if (!f) break;
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = detail::read_u16(f);
            channels = detail::read_u16(f);
            rate = detail::read_u32(f);
            detail::read_u32(f);  // byte rate
            detail::read_u16(f);  // block align
            bits = detail::read_u16(f);
            f.seekg(chunk_size - 16, std::ios::cur);
            got_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!got_fmt) throw std::runtime_error("wav data chunk before fmt: " + path);
            if (format != 1 && format != 3)
                throw std::runtime_error("unsupported wav encoding (want PCM): " + path);
            if (channels == 0) throw std::runtime_error("wav has zero channels: " + path);
            if (channels > 1 && !opt.average_stereo)
                throw std::runtime_error("multi-channel wav rejected (set average_stereo): " + path);
            const uint32_t bytes_per_sample = bits / 8;
            const uint32_t n_frames = chunk_size / (bytes_per_sample * channels);
            samples.resize(n_frames);
            std::vector<unsigned char> raw(chunk_size);
            f.read(reinterpret_cast<char*>(raw.data()), chunk_size);
            if (!f) throw std::runtime_error("truncated wav data: " + path);
            for (uint32_t i = 0; i < n_frames; ++i) {
                double acc = 0.0;
                for (uint16_t c = 0; c < channels; ++c) {
                    const unsigned char* p = raw.data() + (size_t(i) * channels + c) * bytes_per_sample;
                    double v;
                    if (format == 3 && bits == 32) {
                        float fv;
                        std::memcpy(&fv, p, 4);
                        v = fv;
                    } else if (bits == 16) {
                        int16_t s = static_cast<int16_t>(p[0] | (p[1] << 8));
                        v = s / 32768.0;
                    } else if (bits == 32 && format == 1) {
                        int32_t s;
                        std::memcpy(&s, p, 4);
                        v = s / 2147483648.0;
                    } else if (bits == 24) {
                        int32_t s = (p[0] << 8) | (p[1] << 16) | (int32_t(p[2]) << 24);
                        v = (s >> 8) / 8388608.0;
                    } else {
                        throw std::runtime_error("unsupported wav bit depth: " + path);
                    }
                    acc += v;
                }
                samples[i] = acc / channels;
            }
            got_data = true;
        } else {
            f.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
        }
    }
    if (!got_data) throw std::runtime_error("wav has no data chunk: " + path);
    if (samples.empty()) throw std::runtime_error("zero-length audio: " + path);

    Waveform w;
    w.samples = detail::resample(samples, static_cast<int>(rate), opt.target_rate);
    if (w.samples.empty()) throw std::runtime_error("audio empty after resampling: " + path);
    w.sample_rate = opt.target_rate;
    w.source_id = path;
    double peak = 0.0;
    for (double v : w.samples) {
        if (!std::isfinite(v)) throw std::runtime_error("non-finite sample in: " + path);
        peak = std::max(peak, std::abs(v));
    }
    if (opt.peak_normalize && peak > 1.0)
        for (double& v : w.samples) v /= peak;
    return w;
}

/// Writes 16-bit PCM mono.
inline void save_waveform(const std::string& path, const Waveform& w) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write wav file: " + path);
    const uint32_t n = static_cast<uint32_t>(w.samples.size());
    const uint32_t data_bytes = n * 2;
    auto u32 = [&](uint32_t v) { f.put(char(v)); f.put(char(v >> 8)); f.put(char(v >> 16)); f.put(char(v >> 24)); };
    auto u16 = [&](uint16_t v) { f.put(char(v)); f.put(char(v >> 8)); };
    f.write("RIFF", 4);
    u32(36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    u32(16);
    u16(1);  // PCM
    u16(1);  // mono
    u32(static_cast<uint32_t>(w.sample_rate));
    u32(static_cast<uint32_t>(w.sample_rate) * 2);
    u16(2);
    u16(16);
    f.write("data", 4);
    u32(data_bytes);
    for (double v : w.samples) {
        double c = std::clamp(v, -1.0, 1.0);
        int16_t s = static_cast<int16_t>(std::lround(c * 32767.0));
        u16(static_cast<uint16_t>(s));
    }
    if (!f) throw std::runtime_error("failed writing wav: " + path);
}

}  // namespace sefvc
