#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sefvc/dsp.hpp"

namespace sefvc::ag {

/// Reverse-mode autodiff on dense double tensors. Ops executed while a Tape
/// is active record backward closures; Tape::backward replays them in
/// reverse. Creation order is a valid topological order since graphs are
/// built by sequential forward execution.
struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> val;
    std::vector<double> grad;  // allocated lazily
    bool requires_grad = false;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        Tensor t;
        t.p_ = std::make_shared<TensorImpl>();
        t.p_->shape = std::move(shape);
        t.p_->val.assign(static_cast<size_t>(t.numel()), 0.0);
        t.p_->requires_grad = requires_grad;
        return t;
    }
    static Tensor from(std::vector<double> v, std::vector<int> shape) {
        Tensor t = zeros(std::move(shape));
        if (t.p_->val.size() != v.size()) throw std::invalid_argument("tensor data/shape mismatch");
        t.p_->val = std::move(v);
        return t;
    }
    static Tensor scalar(double v) { return from({v}, {1}); }

    bool defined() const { return p_ != nullptr; }
    const std::vector<int>& shape() const { return p_->shape; }
    int dim(int i) const { return p_->shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(p_->shape.size()); }
    int64_t numel() const {
        int64_t n = 1;
        for (int s : p_->shape) n *= s;
        return n;
    }
    double* data() { return p_->val.data(); }
    const double* data() const { return p_->val.data(); }
    double item() const {
        if (numel() != 1) throw std::logic_error("item() on non-scalar tensor");
        return p_->val[0];
    }
    bool requires_grad() const { return p_->requires_grad; }
    void set_requires_grad(bool b) { p_->requires_grad = b; }

    double* grad() {
        if (p_->grad.size() != p_->val.size()) p_->grad.assign(p_->val.size(), 0.0);
        return p_->grad.data();
    }
    bool has_grad() const { return p_->grad.size() == p_->val.size(); }
    void zero_grad() {
        if (has_grad()) std::fill(p_->grad.begin(), p_->grad.end(), 0.0);
    }

    /// Value copy that does not participate in any graph.
    Tensor detach() const {
        Tensor t = zeros(p_->shape);
        t.p_->val = p_->val;
        return t;
    }

    std::shared_ptr<TensorImpl> impl() const { return p_; }

private:
    std::shared_ptr<TensorImpl> p_;
};

class Tape {
public:
    void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

    void backward(Tensor loss) {
        if (loss.numel() != 1) throw std::logic_error("backward() needs a scalar loss");
        loss.grad()[0] = 1.0;
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }

    size_t size() const { return ops_.size(); }

    static Tape*& active() {
        thread_local Tape* t = nullptr;
        return t;
    }

private:
    std::vector<std::function<void()>> ops_;
};

/// RAII activation of a tape (pass nullptr for a no-grad scope).
struct TapeScope {
    explicit TapeScope(Tape* t) : prev_(Tape::active()) { Tape::active() = t; }
    ~TapeScope() { Tape::active() = prev_; }

private:
    Tape* prev_;
};

namespace detail {
inline bool track(std::initializer_list<Tensor> inputs) {
    if (!Tape::active()) return false;
    for (const Tensor& t : inputs)
        if (t.requires_grad()) return true;
    return false;
}
inline void check(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

// ---- elementwise ----

inline Tensor add(Tensor a, Tensor b) {
    detail::check(a.shape() == b.shape(), "add: shape mismatch");
    Tensor out = Tensor::zeros(a.shape(), detail::track({a, b}));
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (out.requires_grad())
        Tape::active()->record([a, b, out]() mutable {
            const int64_t n = out.numel();
            if (a.requires_grad()) for (int64_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i];
            if (b.requires_grad()) for (int64_t i = 0; i < n; ++i) b.grad()[i] += out.grad()[i];
        });
    return out;
}

inline Tensor sub(Tensor a, Tensor b) {
    detail::check(a.shape() == b.shape(), "sub: shape mismatch");
    Tensor out = Tensor::zeros(a.shape(), detail::track({a, b}));
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
    if (out.requires_grad())
        Tape::active()->record([a, b, out]() mutable {
            const int64_t n = out.numel();
            if (a.requires_grad()) for (int64_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i];
            if (b.requires_grad()) for (int64_t i = 0; i < n; ++i) b.grad()[i] -= out.grad()[i];
        });
    return out;
}

inline Tensor mul(Tensor a, Tensor b) {
    detail::check(a.shape() == b.shape(), "mul: shape mismatch");
    Tensor out = Tensor::zeros(a.shape(), detail::track({a, b}));
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (out.requires_grad())
        Tape::active()->record([a, b, out]() mutable {
            const int64_t n = out.numel();
            if (a.requires_grad()) for (int64_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i] * b.data()[i];
            if (b.requires_grad()) for (int64_t i = 0; i < n; ++i) b.grad()[i] += out.grad()[i] * a.data()[i];
        });
    return out;
}

inline Tensor scale(Tensor a, double s) {
    Tensor out = Tensor::zeros(a.shape(), detail::track({a}));
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * s;
    if (out.requires_grad())
        Tape::active()->record([a, out, s]() mutable {
            const int64_t n = out.numel();
            for (int64_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i] * s;
        });
    return out;
}

template <class F, class DF>
inline Tensor unary_op(Tensor a, F f, DF dfdx) {
    Tensor out = Tensor::zeros(a.shape(), detail::track({a}));
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) out.data()[i] = f(a.data()[i]);
    if (out.requires_grad())
        Tape::active()->record([a, out, dfdx]() mutable {
            const int64_t n = out.numel();
            for (int64_t i = 0; i < n; ++i)
                a.grad()[i] += out.grad()[i] * dfdx(a.data()[i], out.data()[i]);
        });
    return out;
}

inline Tensor tanh_op(Tensor a) {
    return unary_op(a, [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}
inline Tensor sigmoid(Tensor a) {
    return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](double, double y) { return y * (1.0 - y); });
}
inline Tensor silu(Tensor a) {
    return unary_op(a, [](double x) { return x / (1.0 + std::exp(-x)); },
                    [](double x, double) {
                        const double s = 1.0 / (1.0 + std::exp(-x));
                        return s * (1.0 + x * (1.0 - s));
                    });
}
inline Tensor leaky_relu(Tensor a, double slope = 0.1) {
    return unary_op(a, [slope](double x) { return x >= 0.0 ? x : slope * x; },
                    [slope](double x, double) { return x >= 0.0 ? 1.0 : slope; });
}

// ---- matmul / linear ----

/// out = A B, optionally transposing either factor. A is [m,k] (or [k,m] if
/// trans_a), B is [k,n] (or [n,k] if trans_b).
inline Tensor matmul(Tensor a, Tensor b, bool trans_a = false, bool trans_b = false) {
    detail::check(a.ndim() == 2 && b.ndim() == 2, "matmul: need 2-D tensors");
    const int m = trans_a ? a.dim(1) : a.dim(0);
    const int k = trans_a ? a.dim(0) : a.dim(1);
    const int kb = trans_b ? b.dim(1) : b.dim(0);
    const int n = trans_b ? b.dim(0) : b.dim(1);
    detail::check(k == kb, "matmul: inner dims mismatch");
    auto A = [&](const double* p, int i, int j) { return trans_a ? p[static_cast<size_t>(j) * a.dim(1) + i] : p[static_cast<size_t>(i) * a.dim(1) + j]; };
    auto B = [&](const double* p, int i, int j) { return trans_b ? p[static_cast<size_t>(j) * b.dim(1) + i] : p[static_cast<size_t>(i) * b.dim(1) + j]; };
    Tensor out = Tensor::zeros({m, n}, detail::track({a, b}));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += A(a.data(), i, t) * B(b.data(), t, j);
            out.data()[static_cast<size_t>(i) * n + j] = acc;
        }
    if (out.requires_grad())
        Tape::active()->record([a, b, out, m, n, k, trans_a, trans_b]() mutable {
            const double* go = out.grad();
            if (a.requires_grad()) {
                double* ga = a.grad();
                for (int i = 0; i < m; ++i)
                    for (int t = 0; t < k; ++t) {
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) {
                            const double bv = trans_b ? b.data()[static_cast<size_t>(j) * b.dim(1) + t]
                                                      : b.data()[static_cast<size_t>(t) * b.dim(1) + j];
                            acc += go[static_cast<size_t>(i) * n + j] * bv;
                        }
                        if (trans_a) ga[static_cast<size_t>(t) * a.dim(1) + i] += acc;
                        else ga[static_cast<size_t>(i) * a.dim(1) + t] += acc;
                    }
            }
            if (b.requires_grad()) {
                double* gb = b.grad();
                for (int t = 0; t < k; ++t)
                    for (int j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i) {
                            const double av = trans_a ? a.data()[static_cast<size_t>(t) * a.dim(1) + i]
                                                      : a.data()[static_cast<size_t>(i) * a.dim(1) + t];
                            acc += av * go[static_cast<size_t>(i) * n + j];
                        }
                        if (trans_b) gb[static_cast<size_t>(j) * b.dim(1) + t] += acc;
                        else gb[static_cast<size_t>(t) * b.dim(1) + j] += acc;
                    }
            }
        });
    return out;
}

/// x [T,in] with weight [out,in] and optional bias [out] -> [T,out].
inline Tensor linear(Tensor x, Tensor w, Tensor b = {}) {
    Tensor out = matmul(x, w, false, true);
    if (!b.defined()) return out;
    detail::check(b.ndim() == 1 && b.dim(0) == out.dim(1), "linear: bias shape");
    Tensor res = Tensor::zeros(out.shape(), detail::track({out, b}));
    const int T = out.dim(0), C = out.dim(1);
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c)
            res.data()[static_cast<size_t>(t) * C + c] = out.data()[static_cast<size_t>(t) * C + c] + b.data()[c];
    if (res.requires_grad())
        Tape::active()->record([out, b, res, T, C]() mutable {
            if (out.requires_grad())
                for (int64_t i = 0; i < res.numel(); ++i) out.grad()[i] += res.grad()[i];
            if (b.requires_grad())
                for (int t = 0; t < T; ++t)
                    for (int c = 0; c < C; ++c) b.grad()[c] += res.grad()[static_cast<size_t>(t) * C + c];
        });
    return res;
}

inline Tensor embedding(const std::vector<int>& ids, Tensor table) {
    detail::check(table.ndim() == 2, "embedding: table must be 2-D");
    const int C = table.dim(1), V = table.dim(0);
    const int T = static_cast<int>(ids.size());
    for (int id : ids) detail::check(id >= 0 && id < V, "embedding: id out of range");
    Tensor out = Tensor::zeros({T, C}, detail::track({table}));
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c)
            out.data()[static_cast<size_t>(t) * C + c] = table.data()[static_cast<size_t>(ids[t]) * C + c];
    if (out.requires_grad())
        Tape::active()->record([ids, table, out, T, C]() mutable {
            for (int t = 0; t < T; ++t)
                for (int c = 0; c < C; ++c)
                    table.grad()[static_cast<size_t>(ids[t]) * C + c] += out.grad()[static_cast<size_t>(t) * C + c];
        });
    return out;
}

inline Tensor layer_norm(Tensor x, Tensor gamma, Tensor beta, double eps = 1e-5) {
    detail::check(x.ndim() == 2, "layer_norm: 2-D input");
    const int T = x.dim(0), C = x.dim(1);
    detail::check(gamma.dim(0) == C && beta.dim(0) == C, "layer_norm: affine shape");
    Tensor out = Tensor::zeros({T, C}, detail::track({x, gamma, beta}));
    std::vector<double> mu(T), invstd(T);
    for (int t = 0; t < T; ++t) {
        const double* row = x.data() + static_cast<size_t>(t) * C;
        double m = 0.0;
        for (int c = 0; c < C; ++c) m += row[c];
        m /= C;
        double v = 0.0;
        for (int c = 0; c < C; ++c) v += (row[c] - m) * (row[c] - m);
        v /= C;
        mu[t] = m;
        invstd[t] = 1.0 / std::sqrt(v + eps);
        for (int c = 0; c < C; ++c)
            out.data()[static_cast<size_t>(t) * C + c] = gamma.data()[c] * (row[c] - m) * invstd[t] + beta.data()[c];
    }
    if (out.requires_grad())
        Tape::active()->record([x, gamma, beta, out, mu, invstd, T, C]() mutable {
            for (int t = 0; t < T; ++t) {
                const double* row = x.data() + static_cast<size_t>(t) * C;
                const double* go = out.grad() + static_cast<size_t>(t) * C;
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (int c = 0; c < C; ++c) {
                    const double xhat = (row[c] - mu[t]) * invstd[t];
                    const double dxhat = go[c] * gamma.data()[c];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    if (gamma.requires_grad()) gamma.grad()[c] += go[c] * xhat;
                    if (beta.requires_grad()) beta.grad()[c] += go[c];
                }
                if (x.requires_grad())
                    for (int c = 0; c < C; ++c) {
                        const double xhat = (row[c] - mu[t]) * invstd[t];
                        const double dxhat = go[c] * gamma.data()[c];
                        x.grad()[static_cast<size_t>(t) * C + c] +=
                            invstd[t] * (dxhat - sum_dxhat / C - xhat * sum_dxhat_xhat / C);
                    }
            }
        });
    return out;
}

/// Row-wise softmax; columns where mask[j] == false get zero weight.
inline Tensor softmax_rows(Tensor x, const std::vector<char>& mask = {}) {
    detail::check(x.ndim() == 2, "softmax_rows: 2-D input");
    const int R = x.dim(0), C = x.dim(1);
    detail::check(mask.empty() || static_cast<int>(mask.size()) == C, "softmax_rows: mask size");
    Tensor out = Tensor::zeros({R, C}, detail::track({x}));
    for (int r = 0; r < R; ++r) {
        const double* row = x.data() + static_cast<size_t>(r) * C;
        double mx = -1e300;
        bool any = false;
        for (int c = 0; c < C; ++c)
            if (mask.empty() || mask[c]) { mx = std::max(mx, row[c]); any = true; }
        detail::check(any, "softmax_rows: fully masked row");
        double z = 0.0;
        for (int c = 0; c < C; ++c) {
            double e = (mask.empty() || mask[c]) ? std::exp(row[c] - mx) : 0.0;
            out.data()[static_cast<size_t>(r) * C + c] = e;
            z += e;
        }
        for (int c = 0; c < C; ++c) out.data()[static_cast<size_t>(r) * C + c] /= z;
    }
    if (out.requires_grad())
        Tape::active()->record([x, out, R, C]() mutable {
            for (int r = 0; r < R; ++r) {
                const double* y = out.data() + static_cast<size_t>(r) * C;
                const double* gy = out.grad() + static_cast<size_t>(r) * C;
                double dot = 0.0;
                for (int c = 0; c < C; ++c) dot += y[c] * gy[c];
                for (int c = 0; c < C; ++c)
                    x.grad()[static_cast<size_t>(r) * C + c] += y[c] * (gy[c] - dot);
            }
        });
    return out;
}

// ---- shape ops ----

inline Tensor slice_cols(Tensor x, int c0, int count) {
    detail::check(x.ndim() == 2 && c0 >= 0 && c0 + count <= x.dim(1), "slice_cols: bad range");
    const int T = x.dim(0), C = x.dim(1);
    Tensor out = Tensor::zeros({T, count}, detail::track({x}));
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < count; ++c)
            out.data()[static_cast<size_t>(t) * count + c] = x.data()[static_cast<size_t>(t) * C + c0 + c];
    if (out.requires_grad())
        Tape::active()->record([x, out, c0, count, T, C]() mutable {
            for (int t = 0; t < T; ++t)
                for (int c = 0; c < count; ++c)
                    x.grad()[static_cast<size_t>(t) * C + c0 + c] += out.grad()[static_cast<size_t>(t) * count + c];
        });
    return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    detail::check(!parts.empty(), "concat_cols: empty");
    const int T = parts[0].dim(0);
    int C = 0;
    bool need = false;
    for (const Tensor& p : parts) {
        detail::check(p.ndim() == 2 && p.dim(0) == T, "concat_cols: row mismatch");
        C += p.dim(1);
        need = need || p.requires_grad();
    }
    Tensor out = Tensor::zeros({T, C}, need && Tape::active());
    int off = 0;
    for (const Tensor& p : parts) {
        const int pc = p.dim(1);
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < pc; ++c)
                out.data()[static_cast<size_t>(t) * C + off + c] = p.data()[static_cast<size_t>(t) * pc + c];
        off += pc;
    }
    if (out.requires_grad())
        Tape::active()->record([parts, out, T, C]() mutable {
            int off = 0;
            for (Tensor p : parts) {
                const int pc = p.dim(1);
                if (p.requires_grad())
                    for (int t = 0; t < T; ++t)
                        for (int c = 0; c < pc; ++c)
                            p.grad()[static_cast<size_t>(t) * pc + c] += out.grad()[static_cast<size_t>(t) * C + off + c];
                off += pc;
            }
        });
    return out;
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
    detail::check(!parts.empty(), "concat_rows: empty");
    const int C = parts[0].dim(1);
    int T = 0;
    bool need = false;
    for (const Tensor& p : parts) {
        detail::check(p.ndim() == 2 && p.dim(1) == C, "concat_rows: col mismatch");
        T += p.dim(0);
        need = need || p.requires_grad();
    }
    Tensor out = Tensor::zeros({T, C}, need && Tape::active());
    int64_t off = 0;
    for (const Tensor& p : parts) {
        std::copy(p.data(), p.data() + p.numel(), out.data() + off);
        off += p.numel();
    }
    if (out.requires_grad())
        Tape::active()->record([parts, out]() mutable {
            int64_t off = 0;
            for (Tensor p : parts) {
                if (p.requires_grad())
                    for (int64_t i = 0; i < p.numel(); ++i) p.grad()[i] += out.grad()[off + i];
                off += p.numel();
            }
        });
    return out;
}

inline Tensor reshape(Tensor x, std::vector<int> shape) {
    Tensor out = Tensor::zeros(shape, detail::track({x}));
    detail::check(out.numel() == x.numel(), "reshape: element count mismatch");
    for (int64_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i];
    if (out.requires_grad())
        Tape::active()->record([x, out]() mutable {
            for (int64_t i = 0; i < x.numel(); ++i) x.grad()[i] += out.grad()[i];
        });
    return out;
}

/// Adds a row vector [C] to every row of x [T,C].
inline Tensor add_row_broadcast(Tensor x, Tensor row) {
    detail::check(x.ndim() == 2 && row.ndim() == 1 && row.dim(0) == x.dim(1), "add_row_broadcast: shapes");
    const int T = x.dim(0), C = x.dim(1);
    Tensor out = Tensor::zeros({T, C}, detail::track({x, row}));
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c)
            out.data()[static_cast<size_t>(t) * C + c] = x.data()[static_cast<size_t>(t) * C + c] + row.data()[c];
    if (out.requires_grad())
        Tape::active()->record([x, row, out, T, C]() mutable {
            if (x.requires_grad())
                for (int64_t i = 0; i < out.numel(); ++i) x.grad()[i] += out.grad()[i];
            if (row.requires_grad())
                for (int t = 0; t < T; ++t)
                    for (int c = 0; c < C; ++c) row.grad()[c] += out.grad()[static_cast<size_t>(t) * C + c];
        });
    return out;
}

// ---- convolutions (time-major layout: x is [T, C]) ----

inline int conv1d_out_len(int T, int K, int stride, int pad, int dilation = 1) {
    return (T + 2 * pad - dilation * (K - 1) - 1) / stride + 1;
}

/// x [T,Cin], w [Cout,Cin/groups,K], optional bias [Cout]; zero padding.
inline Tensor conv1d(Tensor x, Tensor w, Tensor b, int stride, int pad, int dilation = 1, int groups = 1) {
    detail::check(x.ndim() == 2 && w.ndim() == 3, "conv1d: ranks");
    const int T = x.dim(0), Cin = x.dim(1);
    const int Cout = w.dim(0), Cg = w.dim(1), K = w.dim(2);
    detail::check(Cin % groups == 0 && Cout % groups == 0 && Cg == Cin / groups, "conv1d: group shapes");
    const int To = conv1d_out_len(T, K, stride, pad, dilation);
    detail::check(To > 0, "conv1d: output would be empty");
    Tensor out = Tensor::zeros({To, Cout}, detail::track({x, w, b.defined() ? b : x}));
    const int cin_per_g = Cin / groups, cout_per_g = Cout / groups;
    for (int to = 0; to < To; ++to)
        for (int co = 0; co < Cout; ++co) {
            const int g = co / cout_per_g;
            double acc = b.defined() ? b.data()[co] : 0.0;
            for (int k = 0; k < K; ++k) {
                const int ti = to * stride + k * dilation - pad;
                if (ti < 0 || ti >= T) continue;
                const double* xr = x.data() + static_cast<size_t>(ti) * Cin + g * cin_per_g;
                const double* wr = w.data() + (static_cast<size_t>(co) * Cg + 0) * K + k;
                for (int ci = 0; ci < cin_per_g; ++ci) acc += xr[ci] * wr[static_cast<size_t>(ci) * K];
            }
            out.data()[static_cast<size_t>(to) * Cout + co] = acc;
        }
    if (out.requires_grad())
        Tape::active()->record([x, w, b, out, T, Cin, Cout, Cg, K, To, stride, pad, dilation, groups]() mutable {
            const int cin_per_g = Cin / groups, cout_per_g = Cout / groups;
            for (int to = 0; to < To; ++to)
                for (int co = 0; co < Cout; ++co) {
                    const int g = co / cout_per_g;
                    const double go = out.grad()[static_cast<size_t>(to) * Cout + co];
                    if (go == 0.0) continue;
                    if (b.defined() && b.requires_grad()) b.grad()[co] += go;
                    for (int k = 0; k < K; ++k) {
                        const int ti = to * stride + k * dilation - pad;
                        if (ti < 0 || ti >= T) continue;
                        for (int ci = 0; ci < cin_per_g; ++ci) {
                            const size_t xi = static_cast<size_t>(ti) * Cin + g * cin_per_g + ci;
                            const size_t wi = (static_cast<size_t>(co) * Cg + ci) * K + k;
                            if (w.requires_grad()) w.grad()[wi] += go * x.data()[xi];
                            if (x.requires_grad()) x.grad()[xi] += go * w.data()[wi];
                        }
                    }
                }
        });
    return out;
}

/// x [T,Cin], w [Cin,Cout,K]; output length (T-1)*stride - 2*pad + K.
inline Tensor conv_transpose1d(Tensor x, Tensor w, Tensor b, int stride, int pad) {
    detail::check(x.ndim() == 2 && w.ndim() == 3, "conv_transpose1d: ranks");
    const int T = x.dim(0), Cin = x.dim(1);
    detail::check(w.dim(0) == Cin, "conv_transpose1d: channel mismatch");
    const int Cout = w.dim(1), K = w.dim(2);
    const int To = (T - 1) * stride - 2 * pad + K;
    detail::check(To > 0, "conv_transpose1d: output would be empty");
    Tensor out = Tensor::zeros({To, Cout}, detail::track({x, w, b.defined() ? b : x}));
    if (b.defined())
        for (int to = 0; to < To; ++to)
            for (int co = 0; co < Cout; ++co)
                out.data()[static_cast<size_t>(to) * Cout + co] = b.data()[co];
    for (int t = 0; t < T; ++t)
        for (int k = 0; k < K; ++k) {
            const int to = t * stride + k - pad;
            if (to < 0 || to >= To) continue;
            const double* xr = x.data() + static_cast<size_t>(t) * Cin;
            for (int co = 0; co < Cout; ++co) {
                double acc = 0.0;
                for (int ci = 0; ci < Cin; ++ci)
                    acc += xr[ci] * w.data()[(static_cast<size_t>(ci) * Cout + co) * K + k];
                out.data()[static_cast<size_t>(to) * Cout + co] += acc;
            }
        }
    if (out.requires_grad())
        Tape::active()->record([x, w, b, out, T, Cin, Cout, K, To, stride, pad]() mutable {
            if (b.defined() && b.requires_grad())
                for (int to = 0; to < To; ++to)
                    for (int co = 0; co < Cout; ++co) b.grad()[co] += out.grad()[static_cast<size_t>(to) * Cout + co];
            for (int t = 0; t < T; ++t)
                for (int k = 0; k < K; ++k) {
                    const int to = t * stride + k - pad;
                    if (to < 0 || to >= To) continue;
                    const double* go = out.grad() + static_cast<size_t>(to) * Cout;
                    for (int ci = 0; ci < Cin; ++ci) {
                        const size_t xi = static_cast<size_t>(t) * Cin + ci;
                        for (int co = 0; co < Cout; ++co) {
                            const size_t wi = (static_cast<size_t>(ci) * Cout + co) * K + k;
                            if (x.requires_grad()) x.grad()[xi] += go[co] * w.data()[wi];
                            if (w.requires_grad()) w.grad()[wi] += go[co] * x.data()[xi];
                        }
                    }
                }
        });
    return out;
}

/// k=3, stride 2, pad 1 gives ceil(T/2) output frames; zero padding, /k norm.
inline Tensor avg_pool1d(Tensor x, int k, int stride, int pad) {
    detail::check(x.ndim() == 2, "avg_pool1d: 2-D input");
    const int T = x.dim(0), C = x.dim(1);
    const int To = (T + 2 * pad - k) / stride + 1;
    detail::check(To > 0, "avg_pool1d: output would be empty");
    Tensor out = Tensor::zeros({To, C}, detail::track({x}));
    for (int to = 0; to < To; ++to)
        for (int j = 0; j < k; ++j) {
            const int ti = to * stride + j - pad;
            if (ti < 0 || ti >= T) continue;
            for (int c = 0; c < C; ++c)
                out.data()[static_cast<size_t>(to) * C + c] += x.data()[static_cast<size_t>(ti) * C + c] / k;
        }
    if (out.requires_grad())
        Tape::active()->record([x, out, T, C, To, k, stride, pad]() mutable {
            for (int to = 0; to < To; ++to)
                for (int j = 0; j < k; ++j) {
                    const int ti = to * stride + j - pad;
                    if (ti < 0 || ti >= T) continue;
                    for (int c = 0; c < C; ++c)
                        x.grad()[static_cast<size_t>(ti) * C + c] += out.grad()[static_cast<size_t>(to) * C + c] / k;
                }
        });
    return out;
}

/// Reshapes a waveform [N,1] into [H, period] for the period discriminators,
/// reflect-padding the tail to a period multiple.
inline Tensor period_fold(Tensor x, int period) {
    detail::check(x.ndim() == 2 && x.dim(1) == 1, "period_fold: [N,1] input");
    const int N = x.dim(0);
    detail::check(N >= period, "period_fold: input shorter than period");
    const int H = (N + period - 1) / period;
    const int padded = H * period;
    auto src = [N](int i) { return i < N ? i : 2 * N - 2 - i; };  // reflect
    Tensor out = Tensor::zeros({H, period}, detail::track({x}));
    for (int i = 0; i < padded; ++i) out.data()[i] = x.data()[src(i)];
    if (out.requires_grad())
        Tape::active()->record([x, out, padded, N, src]() mutable {
            for (int i = 0; i < padded; ++i) x.grad()[src(i)] += out.grad()[i];
        });
    return out;
}

/// 2-D convolution over the height axis only (kernel KHx1), as used after
/// period folding: x is [H, W*Cin] with W independent phase columns, weight
/// is [Cout, Cin, KH], output [Ho, W*Cout]. Columns never mix.
inline Tensor conv2d_h(Tensor x, int W, Tensor w, Tensor b, int stride, int pad) {
    detail::check(x.ndim() == 2 && w.ndim() == 3, "conv2d_h: ranks");
    const int H = x.dim(0);
    detail::check(x.dim(1) % W == 0, "conv2d_h: width does not divide columns");
    const int Cin = x.dim(1) / W;
    const int Cout = w.dim(0), KH = w.dim(2);
    detail::check(w.dim(1) == Cin, "conv2d_h: channel mismatch");
    const int Ho = conv1d_out_len(H, KH, stride, pad);
    detail::check(Ho > 0, "conv2d_h: output would be empty");
    Tensor out = Tensor::zeros({Ho, W * Cout}, detail::track({x, w, b.defined() ? b : x}));
    for (int ho = 0; ho < Ho; ++ho)
        for (int col = 0; col < W; ++col)
            for (int co = 0; co < Cout; ++co) {
                double acc = b.defined() ? b.data()[co] : 0.0;
                for (int k = 0; k < KH; ++k) {
                    const int hi = ho * stride + k - pad;
                    if (hi < 0 || hi >= H) continue;
                    for (int ci = 0; ci < Cin; ++ci)
                        acc += x.data()[static_cast<size_t>(hi) * W * Cin + col * Cin + ci] *
                               w.data()[(static_cast<size_t>(co) * Cin + ci) * KH + k];
                }
                out.data()[static_cast<size_t>(ho) * W * Cout + col * Cout + co] = acc;
            }
    if (out.requires_grad())
        Tape::active()->record([x, w, b, out, W, H, Cin, Cout, KH, Ho, stride, pad]() mutable {
            for (int ho = 0; ho < Ho; ++ho)
                for (int col = 0; col < W; ++col)
                    for (int co = 0; co < Cout; ++co) {
                        const double go = out.grad()[static_cast<size_t>(ho) * W * Cout + col * Cout + co];
                        if (go == 0.0) continue;
                        if (b.defined() && b.requires_grad()) b.grad()[co] += go;
                        for (int k = 0; k < KH; ++k) {
                            const int hi = ho * stride + k - pad;
                            if (hi < 0 || hi >= H) continue;
                            for (int ci = 0; ci < Cin; ++ci) {
                                const size_t xi = static_cast<size_t>(hi) * W * Cin + col * Cin + ci;
                                const size_t wi = (static_cast<size_t>(co) * Cin + ci) * KH + k;
                                if (w.requires_grad()) w.grad()[wi] += go * x.data()[xi];
                                if (x.requires_grad()) x.grad()[xi] += go * w.data()[wi];
                            }
                        }
                    }
        });
    return out;
}

// ---- reductions / losses ----

inline Tensor mean_all(Tensor x) {
    const int64_t n = x.numel();
    Tensor out = Tensor::zeros({1}, detail::track({x}));
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += x.data()[i];
    out.data()[0] = acc / static_cast<double>(n);
    if (out.requires_grad())
        Tape::active()->record([x, out, n]() mutable {
            const double g = out.grad()[0] / static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) x.grad()[i] += g;
        });
    return out;
}

inline Tensor mean_abs_diff(Tensor a, Tensor b) {
    detail::check(a.shape() == b.shape(), "mean_abs_diff: shape mismatch");
    const int64_t n = a.numel();
    Tensor out = Tensor::zeros({1}, detail::track({a, b}));
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += std::abs(a.data()[i] - b.data()[i]);
    out.data()[0] = acc / static_cast<double>(n);
    if (out.requires_grad())
        Tape::active()->record([a, b, out, n]() mutable {
            const double g = out.grad()[0] / static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) {
                const double d = a.data()[i] - b.data()[i];
                const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                if (a.requires_grad()) a.grad()[i] += g * s;
                if (b.requires_grad()) b.grad()[i] -= g * s;
            }
        });
    return out;
}

/// mean((x - c)^2)
inline Tensor mean_sq_offset(Tensor x, double c) {
    const int64_t n = x.numel();
    Tensor out = Tensor::zeros({1}, detail::track({x}));
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += (x.data()[i] - c) * (x.data()[i] - c);
    out.data()[0] = acc / static_cast<double>(n);
    if (out.requires_grad())
        Tape::active()->record([x, out, n, c]() mutable {
            const double g = out.grad()[0] * 2.0 / static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) x.grad()[i] += g * (x.data()[i] - c);
        });
    return out;
}

/// Weighted sum of scalar tensors.
inline Tensor weighted_sum(const std::vector<Tensor>& terms, const std::vector<double>& weights) {
    detail::check(terms.size() == weights.size(), "weighted_sum: size mismatch");
    bool need = false;
    for (const Tensor& t : terms) {
        detail::check(t.numel() == 1, "weighted_sum: scalar terms only");
        need = need || t.requires_grad();
    }
    Tensor out = Tensor::zeros({1}, need && Tape::active());
    double acc = 0.0;
    for (size_t i = 0; i < terms.size(); ++i) acc += weights[i] * terms[i].item();
    out.data()[0] = acc;
    if (out.requires_grad())
        Tape::active()->record([terms, weights, out]() mutable {
            for (size_t i = 0; i < terms.size(); ++i) {
                Tensor t = terms[i];
                if (t.requires_grad()) t.grad()[0] += out.grad()[0] * weights[i];
            }
        });
    return out;
}

/// Differentiable log-mel spectrogram of a waveform tensor [N,1] or [N].
inline Tensor mel_spectrogram(Tensor wav, const MelConfig& cfg) {
    detail::check(wav.ndim() == 1 || (wav.ndim() == 2 && wav.dim(1) == 1), "mel_spectrogram: 1-D input");
    const int64_t n = wav.numel();
    std::vector<double> samples(wav.data(), wav.data() + n);
    MelAnalyzer analyzer(cfg);
    MelSpectrogram mel = analyzer.compute(samples);
    Tensor out = Tensor::zeros({mel.frames, mel.n_mels}, detail::track({wav}));
    std::copy(mel.values.begin(), mel.values.end(), out.data());
    if (out.requires_grad())
        Tape::active()->record([wav, out, samples = std::move(samples), cfg]() mutable {
            MelAnalyzer analyzer(cfg);
            std::vector<double> gw(samples.size(), 0.0);
            std::vector<double> gm(out.grad(), out.grad() + out.numel());
            analyzer.backward(samples, gm, gw);
            for (size_t i = 0; i < gw.size(); ++i) wav.grad()[i] += gw[i];
        });
    return out;
}

}  // namespace sefvc::ag
