#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "sefvc/dsp.hpp"
#include "sefvc/kmeans.hpp"
#include "sefvc/nn.hpp"
#include "sefvc/ppe.hpp"

namespace sefvc {

using ag::Tensor;

struct ModelConfig {
    int attn_dim = 184;
    int attn_heads = 2;
    int conformer_blocks_per_encoder = 2;
    int conformer_ff_mult = 2;
    int conformer_conv_kernel = 15;
    int conv_kernel_mel_encoder = 5;
    int mel_encoder_channels = 8;
    int vocab_size = 2000;
    std::vector<int> upsample_rates = {5, 4, 4, 4};
    int gen_channels = 128;
    std::vector<int> resblock_kernels = {3, 7};
    std::vector<int> resblock_dilations = {1, 3};
    int n_mels = 80;
    int adaptor_hidden = 64;
    bool use_speaker_embedding = false;  // ablation: cross-attention off
    int speaker_embedding_dim = 192;

    int samples_per_frame() const {
        int p = 1;
        for (int r : upsample_rates) p *= r;
        return p;
    }
    void validate() const {
        if (attn_dim % attn_heads != 0) throw std::invalid_argument("attn_dim must divide by attn_heads");
        if (samples_per_frame() != 320)
            throw std::invalid_argument("product of upsample_rates must be 320 (20 ms at 16 kHz)");
        if (vocab_size < 2 || n_mels < 1 || conformer_blocks_per_encoder < 1)
            throw std::invalid_argument("bad model config");
        if (conformer_conv_kernel % 2 == 0) throw std::invalid_argument("conformer conv kernel must be odd");
    }
};

/// Encoded reference mel plus validity mask. Carries no positional
/// information: every frame is encoded independently, so downstream
/// attention is exactly invariant to frame permutation.
struct ReferenceMemory {
    Tensor encoded;             // frames x attn_dim
    std::vector<char> mask;     // true where the frame is real (not padding)
};

inline std::vector<char> make_padding_mask(int valid, int total) {
    std::vector<char> m(static_cast<size_t>(total), 0);
    for (int i = 0; i < valid && i < total; ++i) m[static_cast<size_t>(i)] = 1;
    return m;
}

struct BackboneOutput {
    Tensor waveform;   // [320 * tokens, 1]
    Tensor mel_head;   // tokens x n_mels, input to the encoder-mel loss
    Tensor ppe_pred;   // tokens x 3: log1p(F0), POV, energy
};

namespace detail {

inline Tensor sinusoidal_positions(int T, int C) {
    Tensor pe = Tensor::zeros({T, C});
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c) {
            const double angle = t / std::pow(10000.0, 2.0 * (c / 2) / C);
            pe.data()[static_cast<size_t>(t) * C + c] = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

}  // namespace detail

class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(int dim, int heads, std::mt19937_64& rng)
        : heads_(heads), head_dim_(dim / heads),
          wq_(dim, dim, rng), wk_(dim, dim, rng), wv_(dim, dim, rng), wo_(dim, dim, rng) {}

    Tensor forward(Tensor queries, Tensor memory, const std::vector<char>& mask = {}) const {
        Tensor q = wq_.forward(queries);
        Tensor k = wk_.forward(memory);
        Tensor v = wv_.forward(memory);
        const double scl = 1.0 / std::sqrt(static_cast<double>(head_dim_));
        std::vector<Tensor> ctx;
        for (int h = 0; h < heads_; ++h) {
            Tensor qh = ag::slice_cols(q, h * head_dim_, head_dim_);
            Tensor kh = ag::slice_cols(k, h * head_dim_, head_dim_);
            Tensor vh = ag::slice_cols(v, h * head_dim_, head_dim_);
            Tensor scores = ag::scale(ag::matmul(qh, kh, false, true), scl);
            Tensor attn = ag::softmax_rows(scores, mask);
            ctx.push_back(ag::matmul(attn, vh));
        }
        return wo_.forward(ag::concat_cols(ctx));
    }

    void collect(const std::string& p, nn::ParamMap& m) const {
        wq_.collect(p + ".q", m);
        wk_.collect(p + ".k", m);
        wv_.collect(p + ".v", m);
        wo_.collect(p + ".o", m);
    }

private:
    int heads_ = 1, head_dim_ = 0;
    nn::Linear wq_, wk_, wv_, wo_;
};

/// Frame-wise reference encoder. The kernel-5 convolution runs along the
/// frequency axis so each mel frame is encoded independently of its
/// neighbours, keeping the reference path free of temporal structure.
class MelEncoder {
public:
    MelEncoder() = default;
    MelEncoder(const ModelConfig& cfg, std::mt19937_64& rng)
        : n_mels_(cfg.n_mels),
          conv_(1, cfg.mel_encoder_channels, cfg.conv_kernel_mel_encoder, rng,
                /*stride=*/2, /*pad=*/cfg.conv_kernel_mel_encoder / 2),
          norm_(cfg.attn_dim) {
        const int pos = ag::conv1d_out_len(cfg.n_mels, cfg.conv_kernel_mel_encoder, 2,
                                           cfg.conv_kernel_mel_encoder / 2);
        proj_ = nn::Linear(pos * cfg.mel_encoder_channels, cfg.attn_dim, rng);
    }

    ReferenceMemory encode(const MelSpectrogram& mel) const {
        if (mel.frames < 1) throw std::invalid_argument("mel_encode: empty mel");
        if (mel.n_mels != n_mels_) throw std::invalid_argument("mel_encode: n_mels mismatch");
        std::vector<Tensor> rows;
        rows.reserve(static_cast<size_t>(mel.frames));
        for (int t = 0; t < mel.frames; ++t) {
            std::vector<double> frame(mel.values.begin() + static_cast<size_t>(t) * n_mels_,
                                      mel.values.begin() + static_cast<size_t>(t + 1) * n_mels_);
            Tensor x = Tensor::from(std::move(frame), {n_mels_, 1});
            Tensor h = ag::silu(conv_.forward(x));
            rows.push_back(ag::reshape(h, {1, static_cast<int>(h.numel())}));
        }
        ReferenceMemory mem;
        mem.encoded = norm_.forward(proj_.forward(ag::concat_rows(rows)));
        mem.mask = make_padding_mask(mel.frames, mel.frames);
        return mem;
    }

    void collect(const std::string& p, nn::ParamMap& m) const {
        conv_.collect(p + ".conv", m);
        proj_.collect(p + ".proj", m);
        norm_.collect(p + ".norm", m);
    }

private:
    int n_mels_ = 80;
    nn::Conv1d conv_;
    nn::Linear proj_;
    nn::LayerNorm norm_;
};

class FeedForward {
public:
    FeedForward() = default;
    FeedForward(int dim, int mult, std::mt19937_64& rng)
        : norm_(dim), in_(dim, dim * mult, rng), out_(dim * mult, dim, rng) {}

    Tensor forward(Tensor x) const { return out_.forward(ag::silu(in_.forward(norm_.forward(x)))); }
    void collect(const std::string& p, nn::ParamMap& m) const {
        norm_.collect(p + ".norm", m);
        in_.collect(p + ".in", m);
        out_.collect(p + ".out", m);
    }

private:
    nn::LayerNorm norm_;
    nn::Linear in_, out_;
};

class ConvModule {
public:
    ConvModule() = default;
    ConvModule(int dim, int kernel, std::mt19937_64& rng)
        : norm_(dim), pw_in_(dim, 2 * dim, rng),
          dw_(dim, dim, kernel, rng, 1, kernel / 2, 1, /*groups=*/dim),
          pw_out_(dim, dim, rng) {}

    Tensor forward(Tensor x) const {
        Tensor h = pw_in_.forward(norm_.forward(x));
        const int dim = h.dim(1) / 2;
        Tensor gated = ag::mul(ag::slice_cols(h, 0, dim), ag::sigmoid(ag::slice_cols(h, dim, dim)));
        return pw_out_.forward(ag::silu(dw_.forward(gated)));
    }
    void collect(const std::string& p, nn::ParamMap& m) const {
        norm_.collect(p + ".norm", m);
        pw_in_.collect(p + ".pw_in", m);
        dw_.collect(p + ".dw", m);
        pw_out_.collect(p + ".pw_out", m);
    }

private:
    nn::LayerNorm norm_;
    nn::Linear pw_in_;
    nn::Conv1d dw_;
    nn::Linear pw_out_;
};

/// Macaron conformer block with the cross-attention layer placed between
/// self-attention and the convolution module.
class ConformerBlock {
public:
    ConformerBlock() = default;
    ConformerBlock(const ModelConfig& cfg, bool use_cross, std::mt19937_64& rng)
        : use_cross_(use_cross),
          ff1_(cfg.attn_dim, cfg.conformer_ff_mult, rng),
          self_norm_(cfg.attn_dim),
          self_attn_(cfg.attn_dim, cfg.attn_heads, rng),
          cross_norm_(cfg.attn_dim),
          conv_(cfg.attn_dim, cfg.conformer_conv_kernel, rng),
          ff2_(cfg.attn_dim, cfg.conformer_ff_mult, rng),
          final_norm_(cfg.attn_dim) {
        if (use_cross) cross_attn_ = MultiHeadAttention(cfg.attn_dim, cfg.attn_heads, rng);
    }

    Tensor forward(Tensor x, const ReferenceMemory* memory) const {
        x = ag::add(x, ag::scale(ff1_.forward(x), 0.5));
        Tensor sn = self_norm_.forward(x);
        x = ag::add(x, self_attn_.forward(sn, sn));
        if (use_cross_) {
            if (!memory) throw std::invalid_argument("conformer block needs reference memory");
            bool any = false;
            for (char c : memory->mask) any = any || c;
            if (!any) throw std::invalid_argument("cross_attend: fully masked memory");
            x = ag::add(x, cross_attn_.forward(cross_norm_.forward(x), memory->encoded, memory->mask));
        }
        x = ag::add(x, conv_.forward(x));
        x = ag::add(x, ag::scale(ff2_.forward(x), 0.5));
        return final_norm_.forward(x);
    }

    void collect(const std::string& p, nn::ParamMap& m) const {
        ff1_.collect(p + ".ff1", m);
        self_norm_.collect(p + ".self_norm", m);
        self_attn_.collect(p + ".self_attn", m);
        if (use_cross_) {
            cross_norm_.collect(p + ".cross_norm", m);
            cross_attn_.collect(p + ".cross_attn", m);
        }
        conv_.collect(p + ".conv", m);
        ff2_.collect(p + ".ff2", m);
        final_norm_.collect(p + ".final_norm", m);
    }

private:
    bool use_cross_ = true;
    FeedForward ff1_;
    nn::LayerNorm self_norm_;
    MultiHeadAttention self_attn_;
    nn::LayerNorm cross_norm_;
    MultiHeadAttention cross_attn_;
    ConvModule conv_;
    FeedForward ff2_;
    nn::LayerNorm final_norm_;
};

/// Predicts per-frame PPE and projects a PPE track back into the residual
/// stream. During training the projected track is the ground truth one.
class FeatureAdaptor {
public:
    FeatureAdaptor() = default;
    FeatureAdaptor(const ModelConfig& cfg, std::mt19937_64& rng)
        : hidden_(cfg.attn_dim, cfg.adaptor_hidden, rng),
          head_(cfg.adaptor_hidden, 3, rng),
          proj_(3, cfg.attn_dim, rng) {}

    Tensor predict(Tensor x) const { return head_.forward(ag::silu(hidden_.forward(x))); }
    Tensor project(Tensor ppe) const { return proj_.forward(ppe); }

    void collect(const std::string& p, nn::ParamMap& m) const {
        hidden_.collect(p + ".hidden", m);
        head_.collect(p + ".head", m);
        proj_.collect(p + ".proj", m);
    }

private:
    nn::Linear hidden_, head_, proj_;
};

class ResBlock {
public:
    ResBlock() = default;
    ResBlock(int channels, int kernel, const std::vector<int>& dilations, std::mt19937_64& rng) {
        for (int d : dilations) {
            convs1_.emplace_back(channels, channels, kernel, rng, 1, (kernel - 1) * d / 2, d);
            convs2_.emplace_back(channels, channels, kernel, rng, 1, (kernel - 1) / 2, 1);
        }
    }

    Tensor forward(Tensor x) const {
        for (size_t i = 0; i < convs1_.size(); ++i) {
            Tensor h = convs1_[i].forward(ag::leaky_relu(x));
            h = convs2_[i].forward(ag::leaky_relu(h));
            x = ag::add(x, h);
        }
        return x;
    }

    void collect(const std::string& p, nn::ParamMap& m) const {
        for (size_t i = 0; i < convs1_.size(); ++i) {
            convs1_[i].collect(p + ".c1_" + std::to_string(i), m);
            convs2_[i].collect(p + ".c2_" + std::to_string(i), m);
        }
    }

private:
    std::vector<nn::Conv1d> convs1_, convs2_;
};

/// Transposed-convolution upsampling stack with multi-receptive-field
/// residual blocks; emits exactly 320 samples per input frame, squashed
/// into (-1, 1) by the final tanh.
class WaveGenerator {
public:
    WaveGenerator() = default;
    WaveGenerator(const ModelConfig& cfg, std::mt19937_64& rng) {
        int ch = cfg.gen_channels;
        pre_ = nn::Conv1d(cfg.attn_dim, ch, 7, rng, 1, 3);
        for (int r : cfg.upsample_rates) {
            const int k = (r % 2 == 0) ? 2 * r : 2 * r + 1;
            const int pad = (k - r) / 2;
            const int next = std::max(ch / 2, 4);
            ups_.emplace_back(ch, next, k, r, pad, rng);
            std::vector<ResBlock> mrf;
            for (int kr : cfg.resblock_kernels) mrf.emplace_back(next, kr, cfg.resblock_dilations, rng);
            mrfs_.push_back(std::move(mrf));
            ch = next;
        }
        post_ = nn::Conv1d(ch, 1, 7, rng, 1, 3);
    }

    Tensor forward(Tensor hidden) const {
        Tensor x = pre_.forward(hidden);
        for (size_t i = 0; i < ups_.size(); ++i) {
            x = ups_[i].forward(ag::leaky_relu(x));
            Tensor acc;
            for (const ResBlock& rb : mrfs_[i]) {
                Tensor y = rb.forward(x);
                acc = acc.defined() ? ag::add(acc, y) : y;
            }
            x = ag::scale(acc, 1.0 / static_cast<double>(mrfs_[i].size()));
        }
        return ag::tanh_op(post_.forward(ag::leaky_relu(x)));
    }

    void collect(const std::string& p, nn::ParamMap& m) const {
        pre_.collect(p + ".pre", m);
        for (size_t i = 0; i < ups_.size(); ++i) {
            ups_[i].collect(p + ".up_" + std::to_string(i), m);
            for (size_t j = 0; j < mrfs_[i].size(); ++j)
                mrfs_[i][j].collect(p + ".mrf_" + std::to_string(i) + "_" + std::to_string(j), m);
        }
        post_.collect(p + ".post", m);
    }

private:
    nn::Conv1d pre_;
    std::vector<nn::ConvTranspose1d> ups_;
    std::vector<std::vector<ResBlock>> mrfs_;
    nn::Conv1d post_;
};

/// The SEF-VC generator: token embedding, two cross-attending semantic
/// encoders with an auxiliary feature adaptor between them, a token-rate
/// mel head and the upsampling waveform generator.
class SefVcModel {
public:
    SefVcModel() = default;
    SefVcModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        std::mt19937_64 rng(seed);
        embedding_ = nn::Embedding(cfg.vocab_size, cfg.attn_dim, rng);
        mel_encoder_ = MelEncoder(cfg, rng);
        const bool cross = !cfg.use_speaker_embedding;
        for (int i = 0; i < cfg.conformer_blocks_per_encoder; ++i)
            encoder1_.emplace_back(cfg, cross, rng);
        adaptor_ = FeatureAdaptor(cfg, rng);
        for (int i = 0; i < cfg.conformer_blocks_per_encoder; ++i)
            encoder2_.emplace_back(cfg, cross, rng);
        mel_head_ = nn::Linear(cfg.attn_dim, cfg.n_mels, rng);
        generator_ = WaveGenerator(cfg, rng);
        if (cfg.use_speaker_embedding)
            spk_proj_ = nn::Linear(cfg.speaker_embedding_dim, cfg.attn_dim, rng);
    }

    const ModelConfig& config() const { return cfg_; }

    ReferenceMemory mel_encode(const MelSpectrogram& mel) const { return mel_encoder_.encode(mel); }

    Tensor encoder_forward(int which, Tensor hidden, const ReferenceMemory* memory) const {
        const auto& blocks = which == 1 ? encoder1_ : encoder2_;
        for (const ConformerBlock& b : blocks) hidden = b.forward(hidden, memory);
        return hidden;
    }

    /// gt_ppe selects training mode (the projected track is ground truth);
    /// without it the adaptor's own prediction is projected instead.
    /// spk_embed is only consulted in the speaker-embedding ablation.
    BackboneOutput forward(const SemanticTokenSequence& tokens, const ReferenceMemory* memory,
                           const Tensor* gt_ppe = nullptr, const Tensor* spk_embed = nullptr) const {
        if (tokens.size() < 1) throw std::invalid_argument("forward: empty token sequence");
        if (!cfg_.use_speaker_embedding && !memory)
            throw std::invalid_argument("forward: reference memory required");
        if (cfg_.use_speaker_embedding && !spk_embed)
            throw std::invalid_argument("forward: speaker embedding required in ablation mode");
        for (int t : tokens.tokens)
            if (t < 0 || t >= cfg_.vocab_size) throw std::invalid_argument("forward: token out of vocab");

        const int T = tokens.size();
        Tensor x = ag::add(embedding_.forward(tokens.tokens),
                           detail::sinusoidal_positions(T, cfg_.attn_dim));
        x = encoder_forward(1, x, memory);
        Tensor ppe_pred = adaptor_.predict(x);
        if (gt_ppe) {
            if (gt_ppe->numel() != static_cast<int64_t>(T) * 3)
                throw std::invalid_argument("forward: gt_ppe must be tokens x 3");
            x = ag::add(x, adaptor_.project(*gt_ppe));
        } else {
            x = ag::add(x, adaptor_.project(ppe_pred));
        }
        x = encoder_forward(2, x, memory);
        BackboneOutput out;
        out.mel_head = mel_head_.forward(x);
        out.ppe_pred = ppe_pred;
        Tensor gen_in = x;
        if (cfg_.use_speaker_embedding) {
            Tensor row = ag::reshape(
                spk_proj_.forward(ag::reshape(*spk_embed, {1, cfg_.speaker_embedding_dim})),
                {cfg_.attn_dim});
            gen_in = ag::add_row_broadcast(gen_in, row);
        }
        out.waveform = generator_.forward(gen_in);
        return out;
    }

    BackboneOutput forward(const SemanticTokenSequence& tokens, const MelSpectrogram& ref_mel,
                           const Tensor* gt_ppe = nullptr) const {
        ReferenceMemory mem = mel_encode(ref_mel);
        return forward(tokens, &mem, gt_ppe);
    }

    nn::ParamMap params() const {
        nn::ParamMap m;
        embedding_.collect("embedding", m);
        mel_encoder_.collect("mel_encoder", m);
        for (size_t i = 0; i < encoder1_.size(); ++i)
            encoder1_[i].collect("encoder1.block" + std::to_string(i), m);
        adaptor_.collect("adaptor", m);
        for (size_t i = 0; i < encoder2_.size(); ++i)
            encoder2_[i].collect("encoder2.block" + std::to_string(i), m);
        mel_head_.collect("mel_head", m);
        generator_.collect("generator", m);
        if (cfg_.use_speaker_embedding) spk_proj_.collect("spk_proj", m);
        return m;
    }

private:
    ModelConfig cfg_;
    nn::Embedding embedding_;
    MelEncoder mel_encoder_;
    std::vector<ConformerBlock> encoder1_;
    FeatureAdaptor adaptor_;
    std::vector<ConformerBlock> encoder2_;
    nn::Linear mel_head_;
    WaveGenerator generator_;
    nn::Linear spk_proj_;
};

/// Ground-truth PPE as a tokens x 3 tensor in loss feature space.
inline Tensor ppe_to_tensor(const ProsodyTrack& p) {
    const int T = p.frames();
    Tensor t = Tensor::zeros({T, 3});
    for (int i = 0; i < T; ++i) {
        t.data()[static_cast<size_t>(i) * 3 + 0] = pitch_to_feature(p.pitch[i]);
        t.data()[static_cast<size_t>(i) * 3 + 1] = p.pov[i];
        t.data()[static_cast<size_t>(i) * 3 + 2] = p.energy[i];
    }
    return t;
}

}  // namespace sefvc
