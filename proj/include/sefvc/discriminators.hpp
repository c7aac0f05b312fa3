#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sefvc/nn.hpp"

namespace sefvc {

using ag::Tensor;

/// Per-sub-discriminator score maps plus every intermediate activation,
/// kept structurally parallel between real and fake passes.
struct DiscriminatorOutput {
    std::vector<Tensor> scores;
    std::vector<std::vector<Tensor>> feature_maps;
};

struct DiscriminatorConfig {
    std::vector<int> periods = {2, 3, 5, 7, 11};
    std::vector<int> mpd_channels = {16, 32, 64, 64};  // desk-scale widths
    std::vector<int> msd_channels = {16, 32, 64, 64};
    int msd_scales = 3;
};

/// Multi-period discriminator: the waveform is folded to [frames, period]
/// (reflect-padded to a period multiple) and convolved along frames only,
/// one sub-discriminator per period.
class MultiPeriodDiscriminator {
public:
    MultiPeriodDiscriminator() = default;
    MultiPeriodDiscriminator(const DiscriminatorConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
        for (size_t p = 0; p < cfg.periods.size(); ++p) {
            Sub sub;
            int cin = 1;
            for (size_t i = 0; i < cfg.mpd_channels.size(); ++i) {
                const int cout = cfg.mpd_channels[i];
                const int stride = i + 1 < cfg.mpd_channels.size() ? 3 : 1;
                sub.convs.push_back(make_conv(cin, cout, 5, rng));
                sub.strides.push_back(stride);
                cin = cout;
            }
            sub.post = make_conv(cin, 1, 3, rng);
            subs_.push_back(std::move(sub));
        }
    }

    DiscriminatorOutput forward(Tensor wav) const {
        int max_period = 0;
        for (int p : cfg_.periods) max_period = std::max(max_period, p);
        if (wav.dim(0) < max_period)
            throw std::invalid_argument("mpd_forward: input shorter than max period");
        DiscriminatorOutput out;
        for (size_t s = 0; s < subs_.size(); ++s) {
            const int period = cfg_.periods[s];
            Tensor x = ag::period_fold(wav, period);
            std::vector<Tensor> maps;
            for (size_t i = 0; i < subs_[s].convs.size(); ++i) {
                x = ag::leaky_relu(ag::conv2d_h(x, period, subs_[s].convs[i].first,
                                                subs_[s].convs[i].second, subs_[s].strides[i], 2));
                maps.push_back(x);
            }
            x = ag::conv2d_h(x, period, subs_[s].post.first, subs_[s].post.second, 1, 1);
            maps.push_back(x);
            out.scores.push_back(x);
            out.feature_maps.push_back(std::move(maps));
        }
        return out;
    }

    void collect(const std::string& p, nn::ParamMap& m) const {
        for (size_t s = 0; s < subs_.size(); ++s) {
            const std::string base = p + ".p" + std::to_string(cfg_.periods[s]);
            for (size_t i = 0; i < subs_[s].convs.size(); ++i) {
                m.add(base + ".conv" + std::to_string(i) + ".weight", subs_[s].convs[i].first);
                m.add(base + ".conv" + std::to_string(i) + ".bias", subs_[s].convs[i].second);
            }
            m.add(base + ".post.weight", subs_[s].post.first);
            m.add(base + ".post.bias", subs_[s].post.second);
        }
    }

private:
    using ConvParams = std::pair<Tensor, Tensor>;  // weight [Cout,Cin,K], bias [Cout]
    static ConvParams make_conv(int cin, int cout, int k, std::mt19937_64& rng) {
        const double b = 1.0 / std::sqrt(static_cast<double>(cin * k));
        return {nn::init_uniform({cout, cin, k}, b, rng), nn::init_uniform({cout}, b, rng)};
    }
    struct Sub {
        std::vector<ConvParams> convs;
        std::vector<int> strides;
        ConvParams post;
    };
    DiscriminatorConfig cfg_;
    std::vector<Sub> subs_;
};

/// Multi-scale discriminator over the raw waveform and average-pooled
/// copies at 1/2 and 1/4 rate (pool k=3 s=2 p=1, so lengths are ceil(n/2)
/// and ceil(n/4)).
class MultiScaleDiscriminator {
public:
    MultiScaleDiscriminator() = default;
    MultiScaleDiscriminator(const DiscriminatorConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
        for (int s = 0; s < cfg.msd_scales; ++s) {
            Sub sub;
            int cin = 1;
            const std::vector<int> kernels = {15, 21, 21, 5};
            const std::vector<int> strides = {1, 4, 4, 1};
            for (size_t i = 0; i < cfg.msd_channels.size(); ++i) {
                const int k = kernels[i % kernels.size()];
                sub.convs.emplace_back(cin, cfg.msd_channels[i], k, rng, strides[i % strides.size()], k / 2);
                cin = cfg.msd_channels[i];
            }
            sub.post = nn::Conv1d(cin, 1, 3, rng, 1, 1);
            subs_.push_back(std::move(sub));
        }
    }

    DiscriminatorOutput forward(Tensor wav) const {
        if (wav.dim(0) < 4) throw std::invalid_argument("msd_forward: input too short");
        DiscriminatorOutput out;
        Tensor x_scale = wav;
        for (size_t s = 0; s < subs_.size(); ++s) {
            if (s > 0) x_scale = ag::avg_pool1d(x_scale, 3, 2, 1);
            Tensor x = x_scale;
            std::vector<Tensor> maps;
            for (const nn::Conv1d& c : subs_[s].convs) {
                x = ag::leaky_relu(c.forward(x));
                maps.push_back(x);
            }
            x = subs_[s].post.forward(x);
            maps.push_back(x);
            out.scores.push_back(x);
            out.feature_maps.push_back(std::move(maps));
        }
        return out;
    }

    void collect(const std::string& p, nn::ParamMap& m) const {
        for (size_t s = 0; s < subs_.size(); ++s) {
            const std::string base = p + ".s" + std::to_string(s);
            for (size_t i = 0; i < subs_[s].convs.size(); ++i)
                subs_[s].convs[i].collect(base + ".conv" + std::to_string(i), m);
            subs_[s].post.collect(base + ".post", m);
        }
    }

private:
    struct Sub {
        std::vector<nn::Conv1d> convs;
        nn::Conv1d post;
    };
    DiscriminatorConfig cfg_;
    std::vector<Sub> subs_;
};

/// MPD + MSD bundle trained jointly against the generator.
class DiscriminatorSet {
public:
    DiscriminatorSet() = default;
    DiscriminatorSet(const DiscriminatorConfig& cfg, uint64_t seed) {
        std::mt19937_64 rng(seed);
        mpd_ = MultiPeriodDiscriminator(cfg, rng);
        msd_ = MultiScaleDiscriminator(cfg, rng);
    }

    DiscriminatorOutput forward(Tensor wav) const {
        DiscriminatorOutput a = mpd_.forward(wav);
        DiscriminatorOutput b = msd_.forward(wav);
        for (auto& s : b.scores) a.scores.push_back(s);
        for (auto& f : b.feature_maps) a.feature_maps.push_back(std::move(f));
        return a;
    }

    const MultiPeriodDiscriminator& mpd() const { return mpd_; }
    const MultiScaleDiscriminator& msd() const { return msd_; }

    nn::ParamMap params() const {
        nn::ParamMap m;
        mpd_.collect("mpd", m);
        msd_.collect("msd", m);
        return m;
    }

private:
    MultiPeriodDiscriminator mpd_;
    MultiScaleDiscriminator msd_;
};

}  // namespace sefvc
