#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sefvc/tensorfile.hpp"
#include "sefvc/toyfeat.hpp"
#include "sefvc/trainer.hpp"

namespace sefvc {

// ---- tensor-file adapters ----

inline void save_features(const std::string& path, const FeatureMatrix& f) {
    TensorFile t;
    t.dtype = "f32";
    t.shape = {f.frames, f.dim};
    t.meta = {{"hop_ms", f.hop_ms}, {"source_id", f.source_id}, {"kind", "features"}};
    t.values = f.values;
    save_tensor(path, t);
}

inline FeatureMatrix load_features(const std::string& path) {
    TensorFile t = load_tensor(path);
    if (t.shape.size() != 2) throw std::runtime_error("feature file is not 2-D: " + path);
    FeatureMatrix f;
    f.frames = static_cast<int>(t.shape[0]);
    f.dim = static_cast<int>(t.shape[1]);
    f.hop_ms = t.meta.value("hop_ms", 20);
    f.source_id = t.meta.value("source_id", path);
    f.values = std::move(t.values);
    return f;
}

inline void save_codebook(const std::string& path, const Codebook& cb) {
    TensorFile t;
    t.dtype = "f32";
    t.shape = {cb.k, cb.dim};
    t.meta = {{"kind", "codebook"}, {"k", cb.k}, {"d", cb.dim}, {"seed", cb.seed},
              {"inertia", cb.inertia}, {"iterations", cb.iterations}};
    t.values = cb.centroids;
    save_tensor(path, t);
}

inline Codebook load_codebook(const std::string& path) {
    TensorFile t = load_tensor(path);
    if (t.shape.size() != 2) throw std::runtime_error("codebook file is not 2-D: " + path);
    Codebook cb;
    cb.k = static_cast<int>(t.shape[0]);
    cb.dim = static_cast<int>(t.shape[1]);
    cb.seed = t.meta.value("seed", 0);
    cb.inertia = t.meta.value("inertia", 0.0);
    cb.iterations = t.meta.value("iterations", 0);
    cb.centroids = std::move(t.values);
    return cb;
}

inline void save_embedding(const std::string& path, const std::vector<double>& emb) {
    TensorFile t;
    t.dtype = "f32";
    t.shape = {static_cast<int64_t>(emb.size())};
    t.meta = {{"kind", "embedding"}};
    t.values = emb;
    save_tensor(path, t);
}

// ---- training manifest: JSON lines {"audio": ..., "features": ...} ----

struct ManifestEntry {
    std::string audio;
    std::string features;
};

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open manifest: " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        out.push_back({j.at("audio").get<std::string>(), j.at("features").get<std::string>()});
    }
    if (out.empty()) throw std::runtime_error("manifest is empty: " + path);
    return out;
}

inline std::vector<UtteranceData> load_dataset(const std::vector<ManifestEntry>& manifest) {
    std::vector<UtteranceData> out;
    for (const ManifestEntry& e : manifest) {
        UtteranceData u;
        u.wav = load_waveform(e.audio);
        u.features = load_features(e.features);
        out.push_back(std::move(u));
    }
    return out;
}

// ---- voice conversion ----

struct ConvertOptions {
    bool shuffle_reference = false;  // demo hook for the permutation invariance
    uint64_t shuffle_seed = 0;
    std::optional<double> truncate_reference_s;  // for reference-length sweeps
};

/// Source speech supplies the semantic tokens; the reference supplies the
/// timbre via its mel-spectrogram only. Output length is tokens * 20 ms.
inline Waveform convert_voice(const SefVcModel& model, const Codebook& codebook,
                              const FeatureMatrix& source_features, const Waveform& reference,
                              const ConvertOptions& opt = {}) {
    Waveform ref = reference;
    if (opt.truncate_reference_s) {
        const int64_t n = std::min<int64_t>(ref.size(),
                                            static_cast<int64_t>(*opt.truncate_reference_s * ref.sample_rate));
        ref.samples.resize(static_cast<size_t>(n));
    }
    if (ref.duration_s() < 0.5)
        std::cerr << "warning: reference shorter than 0.5 s; conversion quality may degrade\n";
    SemanticTokenSequence tokens = quantize(source_features, codebook);
    MelSpectrogram ref_mel = compute_mel(ref, 10, model.config().n_mels);
    if (opt.shuffle_reference) {
        std::mt19937_64 rng(opt.shuffle_seed);
        std::vector<int> order(static_cast<size_t>(ref_mel.frames));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        MelSpectrogram shuffled = ref_mel;
        for (int t = 0; t < ref_mel.frames; ++t)
            std::copy(ref_mel.values.begin() + static_cast<size_t>(order[t]) * ref_mel.n_mels,
                      ref_mel.values.begin() + static_cast<size_t>(order[t] + 1) * ref_mel.n_mels,
                      shuffled.values.begin() + static_cast<size_t>(t) * ref_mel.n_mels);
        ref_mel = std::move(shuffled);
    }
    BackboneOutput out = model.forward(tokens, ref_mel);
    Waveform result;
    result.sample_rate = 16000;
    result.source_id = "converted";
    result.samples.assign(out.waveform.data(), out.waveform.data() + out.waveform.numel());
    return result;
}

// ---- evaluation ----

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine_similarity: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Runs `cmd <wav> <out.tensor>` and reads back the embedding. An empty cmd
/// selects the built-in toy embedder (mean/std mel statistics).
inline std::vector<double> compute_embedding(const std::string& embedder_cmd, const std::string& wav_path) {
    if (embedder_cmd.empty()) return toy_speaker_embedding(load_waveform(wav_path));
    namespace fs = std::filesystem;
    const fs::path out = fs::temp_directory_path() /
                         ("sefvc_emb_" + std::to_string(std::hash<std::string>{}(wav_path)) + ".tensor");
    const std::string cmd = embedder_cmd + " \"" + wav_path + "\" \"" + out.string() + "\"";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) throw std::runtime_error("embedder command failed (" + std::to_string(rc) + "): " + cmd);
    TensorFile t = load_tensor(out.string());
    fs::remove(out);
    return t.values;
}

struct SecsPair {
    std::string a, b;
    double secs = 0.0;
    bool ok = false;
    std::string error;
};

struct SecsReport {
    std::vector<SecsPair> pairs;
    double mean_secs = 0.0;
    int failures = 0;
};

/// Pairs manifest: JSON lines {"a": wav, "b": wav}. Failed embedder calls
/// are recorded and excluded from the mean.
inline SecsReport evaluate_secs(const std::vector<std::pair<std::string, std::string>>& pairs,
                                const std::string& embedder_cmd) {
    SecsReport rep;
    double sum = 0.0;
    int n = 0;
    for (const auto& [a, b] : pairs) {
        SecsPair p{a, b};
        try {
            p.secs = cosine_similarity(compute_embedding(embedder_cmd, a), compute_embedding(embedder_cmd, b));
            p.ok = true;
            sum += p.secs;
            ++n;
        } catch (const std::exception& e) {
            p.error = e.what();
            ++rep.failures;
        }
        rep.pairs.push_back(std::move(p));
    }
    rep.mean_secs = n > 0 ? sum / n : 0.0;
    return rep;
}

/// Character error rate between two transcripts: edit distance over
/// reference length. (Transcription itself is out of scope; this is the
/// scoring half only.)
inline double character_error_rate(const std::string& reference, const std::string& hypothesis) {
    const size_t n = reference.size(), m = hypothesis.size();
    if (n == 0) throw std::invalid_argument("character_error_rate: empty reference");
    std::vector<size_t> prev(m + 1), cur(m + 1);
    std::iota(prev.begin(), prev.end(), size_t{0});
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            const size_t sub = prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]) / static_cast<double>(n);
}

}  // namespace sefvc
