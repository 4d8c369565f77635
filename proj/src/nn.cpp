#include "turntaking/nn.hpp"

#include <cmath>
#include <cstring>

namespace turntaking::nn {

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

LstmParams::LstmParams(std::size_t in, std::size_t hidden)
    : input_dim(in), hidden_dim(hidden), W(4 * hidden, in), U(4 * hidden, hidden),
      b(4 * hidden, 0.0) {
    // Forget-gate bias slice starts at 1.0.
    for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
}

void LstmParams::init_weights(Rng& rng) {
    const double ws = 1.0 / std::sqrt(static_cast<double>(input_dim > 0 ? input_dim : 1));
    for (double& w : W.values) w = rng.uniform(-ws, ws);
    const double us = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (double& u : U.values) u = rng.uniform(-us, us);
    std::fill(b.begin(), b.end(), 0.0);
    for (std::size_t j = hidden_dim; j < 2 * hidden_dim; ++j) b[j] = 1.0;
}

LstmState lstm_forward(const LstmParams& params, std::span<const double> x,
                       const LstmState& state, LstmStepCache* cache) {
    const std::size_t H = params.hidden_dim;
    if (x.size() != params.input_dim)
        throw ConfigError("lstm_forward: input size " + std::to_string(x.size()) +
                          " != input_dim " + std::to_string(params.input_dim));
    if (state.h.size() != H || state.c.size() != H)
        throw ConfigError("lstm_forward: state size mismatch");

    Vector pre(params.b);  // 4H pre-activations, seeded with the bias
    matvec_acc(params.W, x, pre);
    matvec_acc(params.U, state.h, pre);

    LstmState next(H);
    Vector i(H), f(H), g(H), o(H), tanh_c(H);
    for (std::size_t j = 0; j < H; ++j) {
        i[j] = sigmoid(pre[j]);
        f[j] = sigmoid(pre[H + j]);
        g[j] = std::tanh(pre[2 * H + j]);
        o[j] = sigmoid(pre[3 * H + j]);
        next.c[j] = f[j] * state.c[j] + i[j] * g[j];
        tanh_c[j] = std::tanh(next.c[j]);
        next.h[j] = o[j] * tanh_c[j];
    }
    require_finite(next.h, "lstm_forward h");
    require_finite(next.c, "lstm_forward c");

    if (cache) {
        cache->x.assign(x.begin(), x.end());
        cache->h_prev = state.h;
        cache->c_prev = state.c;
        cache->i = std::move(i);
        cache->f = std::move(f);
        cache->g = std::move(g);
        cache->o = std::move(o);
        cache->c_new = next.c;
        cache->tanh_c_new = std::move(tanh_c);
    }
    return next;
}

LstmState lstm_backward(const LstmParams& params, const LstmStepCache& cache,
                        std::span<const double> grad_h_next, std::span<const double> grad_c_next,
                        LstmParams& grads, Vector& grad_x) {
    const std::size_t H = params.hidden_dim;
    if (cache.h_prev.size() != H || cache.x.size() != params.input_dim)
        throw ConfigError("lstm_backward: cache does not match params");
    if (grad_h_next.size() != H || grad_c_next.size() != H)
        throw ConfigError("lstm_backward: upstream gradient size mismatch");

    Vector d_pre(4 * H, 0.0);
    LstmState prev(H);
    for (std::size_t j = 0; j < H; ++j) {
        const double dh = grad_h_next[j];
        const double tc = cache.tanh_c_new[j];
        const double d_o = dh * tc;
        const double dc = dh * cache.o[j] * (1.0 - tc * tc) + grad_c_next[j];
        const double d_i = dc * cache.g[j];
        const double d_f = dc * cache.c_prev[j];
        const double d_g = dc * cache.i[j];
        prev.c[j] = dc * cache.f[j];
        d_pre[j] = d_i * cache.i[j] * (1.0 - cache.i[j]);
        d_pre[H + j] = d_f * cache.f[j] * (1.0 - cache.f[j]);
        d_pre[2 * H + j] = d_g * (1.0 - cache.g[j] * cache.g[j]);
        d_pre[3 * H + j] = d_o * cache.o[j] * (1.0 - cache.o[j]);
    }

    outer_acc(grads.W, d_pre, cache.x);
    outer_acc(grads.U, d_pre, cache.h_prev);
    for (std::size_t j = 0; j < 4 * H; ++j) grads.b[j] += d_pre[j];

    grad_x.assign(params.input_dim, 0.0);
    matvec_transpose_acc(params.W, d_pre, grad_x);
    matvec_transpose_acc(params.U, d_pre, prev.h);
    return prev;
}

void EmbeddingTable::init_weights(Rng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& w : rows.values) w = rng.uniform(-s, s);
}

std::span<const double> embedding_lookup(const EmbeddingTable& table, std::size_t index) {
    if (index >= table.vocab_size)
        throw DataError("embedding_lookup: index " + std::to_string(index) +
                        " out of range (vocab " + std::to_string(table.vocab_size) + ")");
    return {table.rows.row(index), table.dim};
}

void DenseSigmoidParams::init_weights(Rng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(W.cols > 0 ? W.cols : 1));
    for (double& w : W.values) w = rng.uniform(-s, s);
    std::fill(b.begin(), b.end(), 0.0);
}

Vector dense_sigmoid_forward(const DenseSigmoidParams& params, std::span<const double> h) {
    if (h.size() != params.in_dim()) throw ConfigError("dense_sigmoid_forward: input size mismatch");
    Vector y(params.b);
    matvec_acc(params.W, h, y);
    for (double& v : y) v = sigmoid(v);
    return y;
}

Vector dense_sigmoid_backward(const DenseSigmoidParams& params, std::span<const double> h,
                              std::span<const double> y, std::span<const double> grad_y,
                              DenseSigmoidParams& grads) {
    const std::size_t out = params.out_dim();
    if (y.size() != out || grad_y.size() != out)
        throw ConfigError("dense_sigmoid_backward: size mismatch");
    Vector d_logit(out);
    for (std::size_t j = 0; j < out; ++j) d_logit[j] = grad_y[j] * y[j] * (1.0 - y[j]);
    outer_acc(grads.W, d_logit, h);
    for (std::size_t j = 0; j < out; ++j) grads.b[j] += d_logit[j];
    Vector grad_h(params.in_dim(), 0.0);
    matvec_transpose_acc(params.W, d_logit, grad_h);
    return grad_h;
}

BceResult bce_loss(std::span<const double> y, std::span<const double> target) {
    if (y.size() != target.size()) throw ConfigError("bce_loss: size mismatch");
    const std::size_t n = y.size();
    if (n == 0) throw ConfigError("bce_loss: empty input");
    BceResult r;
    r.grad_y.assign(n, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double p = y[j];
        if (p < kBceClampEps) {
            p = kBceClampEps;
            ++r.clamped;
        } else if (p > 1.0 - kBceClampEps) {
            p = 1.0 - kBceClampEps;
            ++r.clamped;
        }
        const double t = target[j];
        total += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
        r.grad_y[j] = (p - t) / (p * (1.0 - p)) / static_cast<double>(n);
    }
    r.loss = total / static_cast<double>(n);
    return r;
}

void AdamState::init_like(const std::vector<TensorRef>& tensors) {
    step = 0;
    m.assign(tensors.size(), {});
    v.assign(tensors.size(), {});
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        m[k].assign(tensors[k].size(), 0.0);
        v[k].assign(tensors[k].size(), 0.0);
    }
}

void adam_step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
               AdamState& state, double l2_lambda) {
    if (params.size() != grads.size()) throw ConfigError("adam_step: tensor list mismatch");
    if (state.m.size() != params.size()) state.init_like(params);
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != grads[k].size() || params[k].size() != state.m[k].size())
            throw ConfigError("adam_step: shape mismatch on tensor " + params[k].name);
        double* p = params[k].data;
        const double* g = grads[k].data;
        double* mk = state.m[k].data();
        double* vk = state.v[k].data();
        const std::size_t n = params[k].size();
        for (std::size_t j = 0; j < n; ++j) {
            const double gj = g[j] + l2_lambda * p[j];
            mk[j] = state.beta1 * mk[j] + (1.0 - state.beta1) * gj;
            vk[j] = state.beta2 * vk[j] + (1.0 - state.beta2) * gj * gj;
            const double mhat = mk[j] / bc1;
            const double vhat = vk[j] / bc2;
            p[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

Vector dropout_mask(std::size_t dim, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout_mask: p must be in [0, 1)");
    Vector mask(dim, 1.0);
    if (p == 0.0) return mask;
    const double keep_scale = 1.0 / (1.0 - p);
    for (double& m : mask) m = rng.bernoulli(p) ? 0.0 : keep_scale;
    return mask;
}

std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>& loss_fn,
                                                  const std::vector<TensorRef>& params,
                                                  double eps) {
    std::vector<std::vector<double>> out(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        const std::size_t n = params[k].size();
        out[k].assign(n, 0.0);
        double* p = params[k].data;
        for (std::size_t j = 0; j < n; ++j) {
            const double saved = p[j];
            p[j] = saved + eps;
            const double up = loss_fn();
            p[j] = saved - eps;
            const double down = loss_fn();
            p[j] = saved;
            out[k][j] = (up - down) / (2.0 * eps);
        }
    }
    return out;
}

double grad_rel_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    return std::abs(analytic - numeric) / scale;
}

double max_grad_rel_error(const std::vector<TensorRef>& analytic,
                          const std::vector<std::vector<double>>& numeric) {
    if (analytic.size() != numeric.size())
        throw ConfigError("max_grad_rel_error: tensor list mismatch");
    double worst = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        if (analytic[k].size() != numeric[k].size())
            throw ConfigError("max_grad_rel_error: shape mismatch on " + analytic[k].name);
        const double* a = analytic[k].data;
        for (std::size_t j = 0; j < numeric[k].size(); ++j)
            worst = std::max(worst, grad_rel_error(a[j], numeric[k][j]));
    }
    return worst;
}

}  // namespace turntaking::nn
