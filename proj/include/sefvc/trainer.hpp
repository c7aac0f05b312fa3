#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sefvc/config.hpp"
#include "sefvc/dsp.hpp"
#include "sefvc/kmeans.hpp"
#include "sefvc/losses.hpp"
#include "sefvc/model.hpp"
#include "sefvc/ppe.hpp"
#include "sefvc/wav.hpp"

namespace sefvc {

inline double lr_at(int64_t step, const TrainConfig& cfg) {
    if (step < 0) throw std::invalid_argument("lr_at: negative step");
    return cfg.lr_init * std::pow(cfg.lr_decay_factor,
                                  static_cast<double>(step / cfg.lr_decay_every));
}

struct UtteranceTooShort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Crops a reference segment of uniform length in [ref_len_min, ref_len_max]
/// seconds from a random start; the content segment is the suffix strictly
/// after the crop. Draws are rejected until the suffix keeps at least
/// content_min_s of audio.
inline std::pair<Waveform, Waveform> split_utterance(const Waveform& w, std::mt19937_64& rng,
                                                     const TrainConfig& cfg) {
    const int sr = w.sample_rate;
    const int64_t n = w.size();
    const int64_t min_needed = static_cast<int64_t>((cfg.ref_len_min_s + cfg.content_min_s) * sr);
    if (n < min_needed)
        throw UtteranceTooShort("utterance too short to split: " + w.source_id);
    std::uniform_real_distribution<double> len_dist(cfg.ref_len_min_s, cfg.ref_len_max_s);
    const int64_t content_min = static_cast<int64_t>(cfg.content_min_s * sr);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const int64_t ref_len = static_cast<int64_t>(len_dist(rng) * sr);
        const int64_t max_start = n - ref_len - content_min;
        if (max_start < 0) continue;  // this length leaves no valid start
        std::uniform_int_distribution<int64_t> start_dist(0, max_start);
        const int64_t start = start_dist(rng);
        Waveform ref{std::vector<double>(w.samples.begin() + start, w.samples.begin() + start + ref_len),
                     sr, w.source_id};
        Waveform content{std::vector<double>(w.samples.begin() + start + ref_len, w.samples.end()),
                         sr, w.source_id};
        return {std::move(ref), std::move(content)};
    }
    throw UtteranceTooShort("no valid reference crop found: " + w.source_id);
}

struct UtteranceData {
    Waveform wav;
    FeatureMatrix features;  // 20 ms hop, aligned to the utterance start
};

struct TrainingSample {
    MelSpectrogram ref_mel;        // 10 ms hop, first segment
    SemanticTokenSequence tokens;  // second segment
    ag::Tensor gt_ppe;             // tokens x 3
    std::vector<double> target;    // second-segment samples, 320 * tokens
    std::string source_id;
};

/// Builds one training sample from an utterance. The content segment is
/// snapped to 20 ms frame boundaries of the whole utterance so semantic
/// feature frames, PPE frames and target samples stay aligned.
inline TrainingSample make_training_sample(const UtteranceData& u, const Codebook& cb,
                                           std::mt19937_64& rng, const TrainConfig& cfg,
                                           int n_mels = 80) {
    auto [ref, content] = split_utterance(u.wav, rng, cfg);
    const int hop = 320;
    const int64_t content_start = u.wav.size() - content.size();
    const int64_t f0 = (content_start + hop - 1) / hop;
    int64_t frames = u.wav.size() / hop - f0;
    frames = std::min<int64_t>(frames, u.features.frames - f0);
    if (frames < 1) throw UtteranceTooShort("content segment has no full frames: " + u.wav.source_id);

    TrainingSample s;
    s.source_id = u.wav.source_id;
    s.ref_mel = compute_mel(ref, 10, n_mels);

    FeatureMatrix slice;
    slice.frames = static_cast<int>(frames);
    slice.dim = u.features.dim;
    slice.hop_ms = 20;
    slice.source_id = u.features.source_id;
    slice.values.assign(u.features.values.begin() + static_cast<size_t>(f0) * u.features.dim,
                        u.features.values.begin() + static_cast<size_t>(f0 + frames) * u.features.dim);
    s.tokens = quantize(slice, cb);

    const int64_t t0 = f0 * hop;
    s.target.assign(u.wav.samples.begin() + t0, u.wav.samples.begin() + t0 + frames * hop);
    Waveform content_wav{s.target, u.wav.sample_rate, u.wav.source_id};
    s.gt_ppe = ppe_to_tensor(extract_ppe(content_wav));
    return s;
}

struct StepResult {
    LossBreakdown gen;
    double d_loss = 0.0;
    double lr = 0.0;
    bool skipped = false;
};

class Trainer {
public:
    Trainer(const RunConfig& cfg, Codebook codebook, std::vector<UtteranceData> dataset)
        : cfg_(cfg),
          codebook_(std::move(codebook)),
          dataset_(std::move(dataset)),
          model_(cfg.model, cfg.train.seed),
          disc_(cfg.disc, cfg.train.seed + 1),
          rng_(cfg.train.seed),
          adam_g_(model_.params(), cfg.train.beta1, cfg.train.beta2),
          adam_d_(disc_.params(), cfg.train.beta1, cfg.train.beta2) {
        if (dataset_.empty()) throw std::invalid_argument("trainer: empty dataset");
    }

    SefVcModel& model() { return model_; }
    const SefVcModel& model() const { return model_; }
    DiscriminatorSet& discriminators() { return disc_; }
    const Codebook& codebook() const { return codebook_; }
    int64_t step() const { return step_; }
    const RunConfig& config() const { return cfg_; }

    std::vector<TrainingSample> next_batch() {
        std::vector<TrainingSample> batch;
        int guard = 0;
        while (static_cast<int>(batch.size()) < cfg_.train.batch_size) {
            const UtteranceData& u = dataset_[cursor_ % dataset_.size()];
            ++cursor_;
            try {
                batch.push_back(make_training_sample(u, codebook_, rng_, cfg_.train, cfg_.model.n_mels));
            } catch (const UtteranceTooShort& e) {
                std::cerr << "warning: skipping sample: " << e.what() << "\n";
                if (++guard > 16 * cfg_.train.batch_size)
                    throw std::runtime_error("trainer: no usable utterances in dataset");
            }
        }
        return batch;
    }

    /// One discriminator update on detached fakes, then one generator
    /// update with the full weighted objective.
    StepResult train_step(const std::vector<TrainingSample>& batch) {
        StepResult res;
        res.lr = lr_at(step_, cfg_.train);
        const bool adv_on = step_ >= cfg_.train.adv_start_step;
        const double inv_b = 1.0 / static_cast<double>(batch.size());

        ag::Tape tape_g;
        std::vector<ag::Tensor> fakes, ppe_preds, mel_heads;
        {
            ag::TapeScope scope(&tape_g);
            for (const TrainingSample& s : batch) {
                ReferenceMemory mem = model_.mel_encode(s.ref_mel);
                BackboneOutput out = model_.forward(s.tokens, &mem, &s.gt_ppe);
                fakes.push_back(out.waveform);
                ppe_preds.push_back(out.ppe_pred);
                mel_heads.push_back(out.mel_head);
            }
        }

        // discriminator update (fakes detached)
        {
            ag::Tape tape_d;
            ag::Tensor d_total;
            {
                ag::TapeScope scope(&tape_d);
                std::vector<ag::Tensor> d_terms;
                for (size_t i = 0; i < batch.size(); ++i) {
                    ag::Tensor real = ag::Tensor::from(batch[i].target,
                                                       {static_cast<int>(batch[i].target.size()), 1});
                    DiscriminatorOutput dr = disc_.forward(real);
                    DiscriminatorOutput df = disc_.forward(fakes[i].detach());
                    d_terms.push_back(discriminator_loss(dr, df));
                }
                d_total = ag::weighted_sum(d_terms, std::vector<double>(d_terms.size(), inv_b));
            }
            res.d_loss = d_total.item();
            if (!std::isfinite(res.d_loss)) {
                std::cerr << "warning: non-finite discriminator loss at step " << step_
                          << " (" << batch[0].source_id << "), step skipped\n";
                res.skipped = true;
                return res;
            }
            nn::ParamMap dp = disc_.params();
            dp.zero_grad();
            {
                ag::TapeScope scope(&tape_d);
                tape_d.backward(d_total);
            }
            nn::clip_grad_norm(dp, cfg_.train.grad_clip_norm);
            adam_d_.step(res.lr);
        }

        // generator update
        {
            std::vector<ag::Tensor> totals;
            LossBreakdown avg;
            {
                ag::TapeScope scope(&tape_g);
                for (size_t i = 0; i < batch.size(); ++i) {
                    const TrainingSample& s = batch[i];
                    ag::Tensor real = ag::Tensor::from(s.target, {static_cast<int>(s.target.size()), 1});
                    ag::Tensor l_rec = reconstruction_loss(real, fakes[i]);
                    ag::Tensor target_mel = ag::mel_spectrogram(real, mel_config_for_hop_ms(20, cfg_.model.n_mels));
                    ag::Tensor l_mel = encoder_mel_loss(mel_heads[i], target_mel);
                    ag::Tensor l_aux = aux_loss(ppe_preds[i], s.gt_ppe);
                    ag::Tensor l_feat, l_adv;
                    if (adv_on) {
                        DiscriminatorOutput dr = disc_.forward(real);
                        DiscriminatorOutput df = disc_.forward(fakes[i]);
                        l_feat = feature_matching_loss(dr, df);
                        l_adv = generator_adversarial_loss(df);
                    } else {
                        l_feat = ag::Tensor::scalar(0.0);
                        l_adv = ag::Tensor::scalar(0.0);
                    }
                    LossBreakdown b = total_generator_loss(l_rec, l_feat, l_mel, l_aux, l_adv, cfg_.loss);
                    totals.push_back(b.total_tensor);
                    avg.l_rec += b.l_rec * inv_b;
                    avg.l_feat += b.l_feat * inv_b;
                    avg.l_mel += b.l_mel * inv_b;
                    avg.l_aux += b.l_aux * inv_b;
                    avg.l_adv += b.l_adv * inv_b;
                    avg.total += b.total * inv_b;
                }
            }
            if (!std::isfinite(avg.total)) {
                std::cerr << "warning: non-finite generator loss at step " << step_
                          << " (" << batch[0].source_id << "), step skipped\n";
                res.skipped = true;
                return res;
            }
            ag::Tensor g_total;
            {
                ag::TapeScope scope(&tape_g);
                g_total = ag::weighted_sum(totals, std::vector<double>(totals.size(), inv_b));
            }
            nn::ParamMap gp = adam_g_.params();
            gp.zero_grad();
            {
                ag::TapeScope scope(&tape_g);
                tape_g.backward(g_total);
            }
            nn::clip_grad_norm(gp, cfg_.train.grad_clip_norm);
            adam_g_.step(res.lr);
            res.gen = avg;
        }
        ++step_;
        return res;
    }

    StepResult run_step() { return train_step(next_batch()); }

    // ---- checkpointing ----

    void save_checkpoint(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
        nlohmann::json hdr;
        hdr["version"] = 1;
        hdr["step"] = step_;
        hdr["cursor"] = cursor_;
        hdr["config"] = run_config_to_json(cfg_);
        hdr["config_hash"] = run_config_hash(cfg_);
        std::ostringstream rng_ss;
        rng_ss << rng_;
        hdr["rng"] = rng_ss.str();
        hdr["adam_g_steps"] = adam_g_.step_count();
        hdr["adam_d_steps"] = adam_d_.step_count();
        hdr["codebook"] = {{"k", codebook_.k}, {"dim", codebook_.dim},
                           {"seed", codebook_.seed}, {"inertia", codebook_.inertia}};

        std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> mg, md;
        int64_t tg = 0, td = 0;
        adam_g_.export_state(mg, tg);
        adam_d_.export_state(md, td);

        nlohmann::json tensors = nlohmann::json::array();
        std::vector<std::pair<std::vector<int64_t>, const std::vector<double>*>> payloads;
        auto add = [&](const std::string& name, const std::vector<int>& shape, const std::vector<double>& vals) {
            std::vector<int64_t> sh(shape.begin(), shape.end());
            tensors.push_back({{"name", name}, {"shape", sh}});
            payloads.emplace_back(sh, &vals);
        };
        nn::ParamMap gp = model_.params();
        nn::ParamMap dp = disc_.params();
        for (const auto& [name, t] : gp.items()) add("gen." + name, t.shape(), t.impl()->val);
        for (const auto& [name, t] : dp.items()) add("disc." + name, t.shape(), t.impl()->val);
        for (const auto& [name, t] : gp.items()) {
            add("adam_g." + name + ".m", t.shape(), mg.at(name).first);
            add("adam_g." + name + ".v", t.shape(), mg.at(name).second);
        }
        for (const auto& [name, t] : dp.items()) {
            add("adam_d." + name + ".m", t.shape(), md.at(name).first);
            add("adam_d." + name + ".v", t.shape(), md.at(name).second);
        }
        std::vector<int> cb_shape = {codebook_.k, codebook_.dim};
        add("codebook.centroids", cb_shape, codebook_.centroids);
        hdr["tensors"] = tensors;
        f << hdr.dump() << "\n";
        for (const auto& [shape, vals] : payloads)
            f.write(reinterpret_cast<const char*>(vals->data()), vals->size() * sizeof(double));
        if (!f) throw std::runtime_error("checkpoint write failed: " + path);
    }

    static Trainer load_checkpoint(const std::string& path, std::vector<UtteranceData> dataset,
                                   const RunConfig* expect_config = nullptr) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
        std::string line;
        if (!std::getline(f, line)) throw std::runtime_error("checkpoint: missing header");
        nlohmann::json hdr = nlohmann::json::parse(line);
        if (hdr.at("version") != 1) throw std::runtime_error("checkpoint: unsupported version");
        RunConfig cfg = run_config_from_json(hdr.at("config"));
        if (hdr.at("config_hash").get<std::string>() != run_config_hash(cfg))
            throw std::runtime_error("checkpoint: config hash mismatch (corrupt header)");
        if (expect_config && run_config_hash(*expect_config) != hdr.at("config_hash").get<std::string>())
            throw std::runtime_error("checkpoint: config hash does not match requested config; refusing load");

        std::map<std::string, std::vector<double>> blobs;
        for (const auto& t : hdr.at("tensors")) {
            int64_t n = 1;
            for (int64_t s : t.at("shape").get<std::vector<int64_t>>()) n *= s;
            std::vector<double> v(static_cast<size_t>(n));
            f.read(reinterpret_cast<char*>(v.data()), n * sizeof(double));
            if (!f) throw std::runtime_error("checkpoint: truncated payload");
            blobs[t.at("name").get<std::string>()] = std::move(v);
        }

        Codebook cb;
        cb.k = hdr.at("codebook").at("k");
        cb.dim = hdr.at("codebook").at("dim");
        cb.seed = hdr.at("codebook").at("seed");
        cb.inertia = hdr.at("codebook").at("inertia");
        cb.centroids = blobs.at("codebook.centroids");

        Trainer tr(cfg, std::move(cb), std::move(dataset));
        tr.step_ = hdr.at("step");
        tr.cursor_ = hdr.at("cursor");
        std::istringstream rng_ss(hdr.at("rng").get<std::string>());
        rng_ss >> tr.rng_;

        auto restore = [&](const std::string& prefix, nn::ParamMap pm) {
            for (const auto& [name, t] : pm.items()) {
                auto it = blobs.find(prefix + name);
                if (it == blobs.end()) throw std::runtime_error("checkpoint: missing tensor " + prefix + name);
                if (it->second.size() != t.impl()->val.size())
                    throw std::runtime_error("checkpoint: shape mismatch for " + prefix + name);
                t.impl()->val = it->second;
            }
        };
        restore("gen.", tr.model_.params());
        restore("disc.", tr.disc_.params());

        std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> mg, md;
        const nn::ParamMap gen_params = tr.model_.params();
        const nn::ParamMap disc_params = tr.disc_.params();
        for (const auto& [name, t] : gen_params.items())
            mg[name] = {blobs.at("adam_g." + name + ".m"), blobs.at("adam_g." + name + ".v")};
        for (const auto& [name, t] : disc_params.items())
            md[name] = {blobs.at("adam_d." + name + ".m"), blobs.at("adam_d." + name + ".v")};
        tr.adam_g_.import_state(mg, hdr.at("adam_g_steps"));
        tr.adam_d_.import_state(md, hdr.at("adam_d_steps"));
        return tr;
    }

private:
    RunConfig cfg_;
    Codebook codebook_;
    std::vector<UtteranceData> dataset_;
    SefVcModel model_;
    DiscriminatorSet disc_;
    std::mt19937_64 rng_;
    nn::Adam adam_g_, adam_d_;
    int64_t step_ = 0;
    uint64_t cursor_ = 0;
};

/// Inference-side view of a checkpoint: generator weights plus the codebook.
struct ModelCheckpoint {
    RunConfig config;
    SefVcModel model;
    Codebook codebook;
    int64_t step = 0;
};

inline ModelCheckpoint load_model_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("checkpoint: missing header");
    nlohmann::json hdr = nlohmann::json::parse(line);
    if (hdr.at("version") != 1) throw std::runtime_error("checkpoint: unsupported version");
    ModelCheckpoint ck;
    ck.config = run_config_from_json(hdr.at("config"));
    if (hdr.at("config_hash").get<std::string>() != run_config_hash(ck.config))
        throw std::runtime_error("checkpoint: config hash mismatch (corrupt header)");
    ck.step = hdr.at("step");
    ck.model = SefVcModel(ck.config.model, ck.config.train.seed);

    std::map<std::string, std::vector<double>> blobs;
    for (const auto& t : hdr.at("tensors")) {
        int64_t n = 1;
        for (int64_t s : t.at("shape").get<std::vector<int64_t>>()) n *= s;
        std::vector<double> v(static_cast<size_t>(n));
        f.read(reinterpret_cast<char*>(v.data()), n * sizeof(double));
        if (!f) throw std::runtime_error("checkpoint: truncated payload");
        blobs[t.at("name").get<std::string>()] = std::move(v);
    }
    const nn::ParamMap model_params = ck.model.params();
    for (const auto& [name, t] : model_params.items()) {
        auto it = blobs.find("gen." + name);
        if (it == blobs.end()) throw std::runtime_error("checkpoint: missing tensor gen." + name);
        if (it->second.size() != t.impl()->val.size())
            throw std::runtime_error("checkpoint: shape mismatch for gen." + name);
        t.impl()->val = it->second;
    }
    ck.codebook.k = hdr.at("codebook").at("k");
    ck.codebook.dim = hdr.at("codebook").at("dim");
    ck.codebook.seed = hdr.at("codebook").at("seed");
    ck.codebook.inertia = hdr.at("codebook").at("inertia");
    ck.codebook.centroids = blobs.at("codebook.centroids");
    return ck;
}

inline std::string metrics_json_line(int64_t step, const StepResult& r) {
    nlohmann::json j = {{"step", step},       {"l_rec", r.gen.l_rec}, {"l_feat", r.gen.l_feat},
                        {"l_mel", r.gen.l_mel}, {"l_aux", r.gen.l_aux}, {"l_adv", r.gen.l_adv},
                        {"g_total", r.gen.total}, {"d_loss", r.d_loss},   {"lr", r.lr}};
    return j.dump();
}

}  // namespace sefvc
