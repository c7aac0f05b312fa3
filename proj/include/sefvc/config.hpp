#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sefvc/discriminators.hpp"
#include "sefvc/losses.hpp"
#include "sefvc/model.hpp"

namespace sefvc {

struct TrainConfig {
    double lr_init = 0.0002;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double lr_decay_factor = 0.5;
    int64_t lr_decay_every = 200000;
    int batch_size = 8;
    int64_t max_steps = 50000;
    uint64_t seed = 1234;
    double ref_len_min_s = 2.0;
    double ref_len_max_s = 3.0;
    double content_min_s = 1.0;
    double grad_clip_norm = 10.0;
    int64_t adv_start_step = 0;  // 0 = adversarial terms on from the start
    int64_t checkpoint_every = 1000;
    int64_t log_every = 10;
    int feature_dim = 1024;

    void validate() const {
        if (lr_init <= 0.0) throw std::invalid_argument("lr_init must be > 0");
        if (ref_len_min_s <= 0.0 || ref_len_max_s < ref_len_min_s)
            throw std::invalid_argument("bad reference length range");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    }
};

/// Everything a run needs; parsed from a flat key=value file.
struct RunConfig {
    ModelConfig model;
    DiscriminatorConfig disc;
    TrainConfig train;
    LossWeights loss;
};

namespace cfgdetail {

inline std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    if (out.empty()) throw std::invalid_argument("empty integer list");
    return out;
}
inline std::string join(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}
inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("expected true/false, got '" + s + "'");
}

}  // namespace cfgdetail

/// Parses `key = value` lines ('#' comments). Unknown keys are rejected
/// with their exact names so typos never silently fall back to defaults.
inline RunConfig parse_run_config(std::istream& is) {
    RunConfig c;
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
            if (!blank) throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    auto take = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        if (it == kv.end()) return nullptr;
        return &it->second;
    };
    auto geti = [&](const char* key, auto& field) { if (auto* v = take(key)) field = static_cast<std::decay_t<decltype(field)>>(std::stoll(*v)); };
    auto getd = [&](const char* key, double& field) { if (auto* v = take(key)) field = std::stod(*v); };
    auto getb = [&](const char* key, bool& field) { if (auto* v = take(key)) field = cfgdetail::parse_bool(*v); };
    auto getl = [&](const char* key, std::vector<int>& field) { if (auto* v = take(key)) field = cfgdetail::parse_int_list(*v); };

    geti("attn_dim", c.model.attn_dim);
    geti("attn_heads", c.model.attn_heads);
    geti("conformer_blocks_per_encoder", c.model.conformer_blocks_per_encoder);
    geti("conformer_ff_mult", c.model.conformer_ff_mult);
    geti("conformer_conv_kernel", c.model.conformer_conv_kernel);
    geti("conv_kernel_mel_encoder", c.model.conv_kernel_mel_encoder);
    geti("mel_encoder_channels", c.model.mel_encoder_channels);
    geti("vocab_size", c.model.vocab_size);
    getl("upsample_rates", c.model.upsample_rates);
    geti("gen_channels", c.model.gen_channels);
    getl("resblock_kernels", c.model.resblock_kernels);
    getl("resblock_dilations", c.model.resblock_dilations);
    geti("n_mels", c.model.n_mels);
    geti("adaptor_hidden", c.model.adaptor_hidden);
    getb("use_speaker_embedding", c.model.use_speaker_embedding);
    geti("speaker_embedding_dim", c.model.speaker_embedding_dim);

    getl("disc_periods", c.disc.periods);
    getl("mpd_channels", c.disc.mpd_channels);
    getl("msd_channels", c.disc.msd_channels);
    geti("msd_scales", c.disc.msd_scales);

    getd("lr_init", c.train.lr_init);
    getd("beta1", c.train.beta1);
    getd("beta2", c.train.beta2);
    getd("lr_decay_factor", c.train.lr_decay_factor);
    geti("lr_decay_every", c.train.lr_decay_every);
    geti("batch_size", c.train.batch_size);
    geti("max_steps", c.train.max_steps);
    geti("seed", c.train.seed);
    getd("ref_len_min_s", c.train.ref_len_min_s);
    getd("ref_len_max_s", c.train.ref_len_max_s);
    getd("content_min_s", c.train.content_min_s);
    getd("grad_clip_norm", c.train.grad_clip_norm);
    geti("adv_start_step", c.train.adv_start_step);
    geti("checkpoint_every", c.train.checkpoint_every);
    geti("log_every", c.train.log_every);
    geti("feature_dim", c.train.feature_dim);

    getd("lambda_rec", c.loss.rec);
    getd("lambda_feat", c.loss.feat);
    getd("lambda_mel", c.loss.mel);
    getd("lambda_aux", c.loss.aux);
    getd("lambda_adv", c.loss.adv);

    static const std::vector<std::string> known = {
        "attn_dim", "attn_heads", "conformer_blocks_per_encoder", "conformer_ff_mult",
        "conformer_conv_kernel", "conv_kernel_mel_encoder", "mel_encoder_channels", "vocab_size",
        "upsample_rates", "gen_channels", "resblock_kernels", "resblock_dilations", "n_mels",
        "adaptor_hidden", "use_speaker_embedding", "speaker_embedding_dim", "disc_periods",
        "mpd_channels", "msd_channels", "msd_scales", "lr_init", "beta1", "beta2",
        "lr_decay_factor", "lr_decay_every", "batch_size", "max_steps", "seed", "ref_len_min_s",
        "ref_len_max_s", "content_min_s", "grad_clip_norm", "adv_start_step", "checkpoint_every",
        "log_every", "feature_dim", "lambda_rec", "lambda_feat", "lambda_mel", "lambda_aux",
        "lambda_adv"};
    std::string unknown;
    for (const auto& [k, v] : kv)
        if (std::find(known.begin(), known.end(), k) == known.end())
            unknown += (unknown.empty() ? "" : ", ") + k;
    if (!unknown.empty()) throw std::invalid_argument("unknown config keys: " + unknown);

    c.model.validate();
    c.train.validate();
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    return parse_run_config(f);
}

// JSON round-trip used by the checkpoint header.
inline nlohmann::json run_config_to_json(const RunConfig& c) {
    return nlohmann::json{
        {"model",
         {{"attn_dim", c.model.attn_dim}, {"attn_heads", c.model.attn_heads},
          {"conformer_blocks_per_encoder", c.model.conformer_blocks_per_encoder},
          {"conformer_ff_mult", c.model.conformer_ff_mult},
          {"conformer_conv_kernel", c.model.conformer_conv_kernel},
          {"conv_kernel_mel_encoder", c.model.conv_kernel_mel_encoder},
          {"mel_encoder_channels", c.model.mel_encoder_channels},
          {"vocab_size", c.model.vocab_size}, {"upsample_rates", c.model.upsample_rates},
          {"gen_channels", c.model.gen_channels}, {"resblock_kernels", c.model.resblock_kernels},
          {"resblock_dilations", c.model.resblock_dilations}, {"n_mels", c.model.n_mels},
          {"adaptor_hidden", c.model.adaptor_hidden},
          {"use_speaker_embedding", c.model.use_speaker_embedding},
          {"speaker_embedding_dim", c.model.speaker_embedding_dim}}},
        {"disc",
         {{"periods", c.disc.periods}, {"mpd_channels", c.disc.mpd_channels},
          {"msd_channels", c.disc.msd_channels}, {"msd_scales", c.disc.msd_scales}}},
        {"train",
         {{"lr_init", c.train.lr_init}, {"beta1", c.train.beta1}, {"beta2", c.train.beta2},
          {"lr_decay_factor", c.train.lr_decay_factor}, {"lr_decay_every", c.train.lr_decay_every},
          {"batch_size", c.train.batch_size}, {"max_steps", c.train.max_steps},
          {"seed", c.train.seed}, {"ref_len_min_s", c.train.ref_len_min_s},
          {"ref_len_max_s", c.train.ref_len_max_s}, {"content_min_s", c.train.content_min_s},
          {"grad_clip_norm", c.train.grad_clip_norm}, {"adv_start_step", c.train.adv_start_step},
          {"checkpoint_every", c.train.checkpoint_every}, {"log_every", c.train.log_every},
          {"feature_dim", c.train.feature_dim}}},
        {"loss",
         {{"rec", c.loss.rec}, {"feat", c.loss.feat}, {"mel", c.loss.mel}, {"aux", c.loss.aux},
          {"adv", c.loss.adv}}}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    const auto& m = j.at("model");
    c.model.attn_dim = m.at("attn_dim");
    c.model.attn_heads = m.at("attn_heads");
    c.model.conformer_blocks_per_encoder = m.at("conformer_blocks_per_encoder");
    c.model.conformer_ff_mult = m.at("conformer_ff_mult");
    c.model.conformer_conv_kernel = m.at("conformer_conv_kernel");
    c.model.conv_kernel_mel_encoder = m.at("conv_kernel_mel_encoder");
    c.model.mel_encoder_channels = m.at("mel_encoder_channels");
    c.model.vocab_size = m.at("vocab_size");
    c.model.upsample_rates = m.at("upsample_rates").get<std::vector<int>>();
    c.model.gen_channels = m.at("gen_channels");
    c.model.resblock_kernels = m.at("resblock_kernels").get<std::vector<int>>();
    c.model.resblock_dilations = m.at("resblock_dilations").get<std::vector<int>>();
    c.model.n_mels = m.at("n_mels");
    c.model.adaptor_hidden = m.at("adaptor_hidden");
    c.model.use_speaker_embedding = m.at("use_speaker_embedding");
    c.model.speaker_embedding_dim = m.at("speaker_embedding_dim");
    const auto& d = j.at("disc");
    c.disc.periods = d.at("periods").get<std::vector<int>>();
    c.disc.mpd_channels = d.at("mpd_channels").get<std::vector<int>>();
    c.disc.msd_channels = d.at("msd_channels").get<std::vector<int>>();
    c.disc.msd_scales = d.at("msd_scales");
    const auto& t = j.at("train");
    c.train.lr_init = t.at("lr_init");
    c.train.beta1 = t.at("beta1");
    c.train.beta2 = t.at("beta2");
    c.train.lr_decay_factor = t.at("lr_decay_factor");
    c.train.lr_decay_every = t.at("lr_decay_every");
    c.train.batch_size = t.at("batch_size");
    c.train.max_steps = t.at("max_steps");
    c.train.seed = t.at("seed");
    c.train.ref_len_min_s = t.at("ref_len_min_s");
    c.train.ref_len_max_s = t.at("ref_len_max_s");
    c.train.content_min_s = t.at("content_min_s");
    c.train.grad_clip_norm = t.at("grad_clip_norm");
    c.train.adv_start_step = t.at("adv_start_step");
    c.train.checkpoint_every = t.at("checkpoint_every");
    c.train.log_every = t.at("log_every");
    c.train.feature_dim = t.at("feature_dim");
    const auto& l = j.at("loss");
    c.loss.rec = l.at("rec");
    c.loss.feat = l.at("feat");
    c.loss.mel = l.at("mel");
    c.loss.aux = l.at("aux");
    c.loss.adv = l.at("adv");
    return c;
}

inline std::string run_config_hash(const RunConfig& c) {
    // run-length and logging knobs may legitimately change between resumes
    // (e.g. extending max_steps), so they are excluded from the identity hash
    RunConfig n = c;
    n.train.max_steps = 0;
    n.train.checkpoint_every = 0;
    n.train.log_every = 0;
    return std::to_string(std::hash<std::string>{}(run_config_to_json(n).dump()));
}

}  // namespace sefvc
