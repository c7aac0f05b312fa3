#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sefvc/autograd.hpp"

namespace sefvc::nn {

using ag::Tensor;

/// Ordered name -> parameter map shared by checkpointing and the optimizer.
class ParamMap {
public:
    void add(const std::string& name, Tensor t) { items_.emplace_back(name, t); }
    void merge(const std::string& prefix, const ParamMap& other) {
        for (const auto& [n, t] : other.items_) items_.emplace_back(prefix + "." + n, t);
    }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::vector<Tensor> tensors() const {
        std::vector<Tensor> out;
        for (const auto& [n, t] : items_) out.push_back(t);
        return out;
    }
    void zero_grad() {
        for (auto& [n, t] : items_) t.zero_grad();
    }

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

inline Tensor init_uniform(std::vector<int> shape, double bound, std::mt19937_64& rng) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = dist(rng);
    return t;
}

struct Linear {
    Tensor weight, bias;

    Linear() = default;
    Linear(int in, int out, std::mt19937_64& rng, bool with_bias = true) {
        const double b = 1.0 / std::sqrt(static_cast<double>(in));
        weight = init_uniform({out, in}, b, rng);
        if (with_bias) bias = init_uniform({out}, b, rng);
    }
    Tensor forward(Tensor x) const { return ag::linear(x, weight, bias); }
    void collect(const std::string& p, ParamMap& m) const {
        m.add(p + ".weight", weight);
        if (bias.defined()) m.add(p + ".bias", bias);
    }
};

struct Conv1d {
    Tensor weight, bias;
    int stride = 1, pad = 0, dilation = 1, groups = 1;

    Conv1d() = default;
    Conv1d(int cin, int cout, int k, std::mt19937_64& rng, int stride_ = 1, int pad_ = 0,
           int dilation_ = 1, int groups_ = 1)
        : stride(stride_), pad(pad_), dilation(dilation_), groups(groups_) {
        const double b = 1.0 / std::sqrt(static_cast<double>(cin / groups_ * k));
        weight = init_uniform({cout, cin / groups_, k}, b, rng);
        bias = init_uniform({cout}, b, rng);
    }
    Tensor forward(Tensor x) const { return ag::conv1d(x, weight, bias, stride, pad, dilation, groups); }
    void collect(const std::string& p, ParamMap& m) const {
        m.add(p + ".weight", weight);
        m.add(p + ".bias", bias);
    }
};

struct ConvTranspose1d {
    Tensor weight, bias;
    int stride = 1, pad = 0;

    ConvTranspose1d() = default;
    ConvTranspose1d(int cin, int cout, int k, int stride_, int pad_, std::mt19937_64& rng)
        : stride(stride_), pad(pad_) {
        const double b = 1.0 / std::sqrt(static_cast<double>(cin * k) / stride_);
        weight = init_uniform({cin, cout, k}, b, rng);
        bias = init_uniform({cout}, b, rng);
    }
    Tensor forward(Tensor x) const { return ag::conv_transpose1d(x, weight, bias, stride, pad); }
    void collect(const std::string& p, ParamMap& m) const {
        m.add(p + ".weight", weight);
        m.add(p + ".bias", bias);
    }
};

struct LayerNorm {
    Tensor gamma, beta;

    LayerNorm() = default;
    explicit LayerNorm(int dim) {
        gamma = Tensor::zeros({dim}, true);
        beta = Tensor::zeros({dim}, true);
        for (int i = 0; i < dim; ++i) gamma.data()[i] = 1.0;
    }
    Tensor forward(Tensor x) const { return ag::layer_norm(x, gamma, beta); }
    void collect(const std::string& p, ParamMap& m) const {
        m.add(p + ".gamma", gamma);
        m.add(p + ".beta", beta);
    }
};

struct Embedding {
    Tensor table;

    Embedding() = default;
    Embedding(int vocab, int dim, std::mt19937_64& rng) {
        std::normal_distribution<double> dist(0.0, 0.02);
        table = Tensor::zeros({vocab, dim}, true);
        for (int64_t i = 0; i < table.numel(); ++i) table.data()[i] = dist(rng);
    }
    Tensor forward(const std::vector<int>& ids) const { return ag::embedding(ids, table); }
    void collect(const std::string& p, ParamMap& m) const { m.add(p + ".table", table); }
};

/// Global-norm gradient clipping; returns the pre-clip norm.
inline double clip_grad_norm(ParamMap& params, double max_norm) {
    double sq = 0.0;
    for (auto& [n, t] : const_cast<std::vector<std::pair<std::string, Tensor>>&>(params.items())) {
        if (!t.has_grad()) continue;
        for (int64_t i = 0; i < t.numel(); ++i) sq += t.grad()[i] * t.grad()[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& [n, t] : const_cast<std::vector<std::pair<std::string, Tensor>>&>(params.items())) {
            if (!t.has_grad()) continue;
            for (int64_t i = 0; i < t.numel(); ++i) t.grad()[i] *= s;
        }
    }
    return norm;
}

class Adam {
public:
    Adam(ParamMap params, double beta1, double beta2, double eps = 1e-8)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& [n, t] : params_.items()) {
            m_.push_back(std::vector<double>(static_cast<size_t>(t.numel()), 0.0));
            v_.push_back(std::vector<double>(static_cast<size_t>(t.numel()), 0.0));
        }
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        size_t idx = 0;
        for (const auto& [name, p] : params_.items()) {
            Tensor t = p;
            if (!t.has_grad()) { ++idx; continue; }
            auto& m = m_[idx];
            auto& v = v_[idx];
            for (int64_t i = 0; i < t.numel(); ++i) {
                const double g = t.grad()[i];
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                t.data()[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            }
            ++idx;
        }
    }

    ParamMap& params() { return params_; }
    int64_t step_count() const { return t_; }

    /// Optimizer state for checkpointing: moments keyed by parameter name.
    void export_state(std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>& out,
                      int64_t& step_count) const {
        out.clear();
        size_t idx = 0;
        for (const auto& [name, p] : params_.items()) {
            out[name] = {m_[idx], v_[idx]};
            ++idx;
        }
        step_count = t_;
    }
    void import_state(const std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>& in,
                      int64_t step_count) {
        size_t idx = 0;
        for (const auto& [name, p] : params_.items()) {
            auto it = in.find(name);
            if (it != in.end()) {
                m_[idx] = it->second.first;
                v_[idx] = it->second.second;
            }
            ++idx;
        }
        t_ = step_count;
    }

private:
    ParamMap params_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace sefvc::nn
