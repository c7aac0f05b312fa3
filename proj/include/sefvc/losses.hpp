#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sefvc/autograd.hpp"
#include "sefvc/discriminators.hpp"

namespace sefvc {

/// Generator loss weights from the training objective.
struct LossWeights {
    double rec = 45.0;
    double feat = 2.0;
    double mel = 60.0;
    double aux = 5.0;
    double adv = 1.0;
};

struct LossBreakdown {
    double l_rec = 0.0, l_feat = 0.0, l_mel = 0.0, l_aux = 0.0, l_adv = 0.0, total = 0.0;
    ag::Tensor total_tensor;  // differentiable total for the backward pass
};

/// L1 between 20 ms-hop log-mels of real and synthetic waveforms.
inline ag::Tensor reconstruction_loss(ag::Tensor real_wav, ag::Tensor fake_wav) {
    if (real_wav.numel() != fake_wav.numel())
        throw std::invalid_argument("reconstruction_loss: length mismatch");
    const MelConfig cfg = mel_config_for_hop_ms(20);
    return ag::mean_abs_diff(ag::mel_spectrogram(real_wav, cfg), ag::mel_spectrogram(fake_wav, cfg));
}

/// Mean absolute difference averaged over every feature map of every
/// sub-discriminator.
inline ag::Tensor feature_matching_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
    if (real.feature_maps.size() != fake.feature_maps.size())
        throw std::invalid_argument("feature_matching_loss: sub-discriminator count mismatch");
    std::vector<ag::Tensor> terms;
    for (size_t s = 0; s < real.feature_maps.size(); ++s) {
        if (real.feature_maps[s].size() != fake.feature_maps[s].size())
            throw std::invalid_argument("feature_matching_loss: map structure mismatch");
        for (size_t i = 0; i < real.feature_maps[s].size(); ++i)
            terms.push_back(ag::mean_abs_diff(real.feature_maps[s][i], fake.feature_maps[s][i]));
    }
    return ag::weighted_sum(terms, std::vector<double>(terms.size(), 1.0 / terms.size()));
}

inline ag::Tensor encoder_mel_loss(ag::Tensor mel_head_output, ag::Tensor target_mel_20ms) {
    if (mel_head_output.shape() != target_mel_20ms.shape())
        throw std::invalid_argument("encoder_mel_loss: shape mismatch");
    return ag::mean_abs_diff(mel_head_output, target_mel_20ms);
}

inline ag::Tensor aux_loss(ag::Tensor ppe_pred, ag::Tensor ppe_gt) {
    if (ppe_pred.shape() != ppe_gt.shape())
        throw std::invalid_argument("aux_loss: shape mismatch");
    return ag::mean_abs_diff(ppe_pred, ppe_gt);
}

/// Least-squares GAN objectives, averaged over sub-discriminators.
inline ag::Tensor generator_adversarial_loss(const DiscriminatorOutput& fake) {
    std::vector<ag::Tensor> terms;
    for (const ag::Tensor& s : fake.scores) terms.push_back(ag::mean_sq_offset(s, 1.0));
    return ag::weighted_sum(terms, std::vector<double>(terms.size(), 1.0 / terms.size()));
}

inline ag::Tensor discriminator_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
    if (real.scores.size() != fake.scores.size())
        throw std::invalid_argument("discriminator_loss: score structure mismatch");
    std::vector<ag::Tensor> terms;
    for (size_t i = 0; i < real.scores.size(); ++i) {
        terms.push_back(ag::mean_sq_offset(real.scores[i], 1.0));
        terms.push_back(ag::mean_sq_offset(fake.scores[i], 0.0));
    }
    return ag::weighted_sum(terms, std::vector<double>(terms.size(), 1.0 / real.scores.size()));
}

inline LossBreakdown total_generator_loss(ag::Tensor l_rec, ag::Tensor l_feat, ag::Tensor l_mel,
                                          ag::Tensor l_aux, ag::Tensor l_adv, const LossWeights& w) {
    LossBreakdown b;
    b.l_rec = l_rec.item();
    b.l_feat = l_feat.item();
    b.l_mel = l_mel.item();
    b.l_aux = l_aux.item();
    b.l_adv = l_adv.item();
    for (double v : {b.l_rec, b.l_feat, b.l_mel, b.l_aux, b.l_adv})
        if (!std::isfinite(v)) throw std::runtime_error("total_generator_loss: non-finite component");
    b.total_tensor = ag::weighted_sum({l_rec, l_feat, l_mel, l_aux, l_adv},
                                      {w.rec, w.feat, w.mel, w.aux, w.adv});
    b.total = b.total_tensor.item();
    return b;
}

}  // namespace sefvc
