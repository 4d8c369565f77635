#pragma once

#include <functional>
#include <span>
#include <vector>

#include "turntaking/matrix.hpp"
#include "turntaking/rng.hpp"

namespace turntaking::nn {

// Standard LSTM cell, gate order [input, forget, candidate, output]:
//   i = sigmoid(W_i x + U_i h + b_i)
//   f = sigmoid(W_f x + U_f h + b_f)
//   g = tanh   (W_g x + U_g h + b_g)
//   o = sigmoid(W_o x + U_o h + b_o)
//   c' = f*c + i*g
//   h' = o*tanh(c')
struct LstmParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    Matrix W;  // 4H x I
    Matrix U;  // 4H x H
    Vector b;  // 4H, forget slice starts at 1.0

    LstmParams() = default;
    LstmParams(std::size_t in, std::size_t hidden);

    void init_weights(Rng& rng);
};

struct LstmState {
    Vector h;
    Vector c;

    LstmState() = default;
    explicit LstmState(std::size_t hidden) : h(hidden, 0.0), c(hidden, 0.0) {}
};

// Everything the backward pass needs from one forward step.
struct LstmStepCache {
    Vector x;
    Vector h_prev;
    Vector c_prev;
    Vector i, f, g, o;  // post-activation gates
    Vector c_new;
    Vector tanh_c_new;
};

LstmState lstm_forward(const LstmParams& params, std::span<const double> x,
                       const LstmState& state, LstmStepCache* cache);

// Accumulates parameter gradients into `grads` (a zeroed params-shaped
// store); returns gradient w.r.t. the previous state and writes the gradient
// w.r.t. x into grad_x (assign, not accumulate).
LstmState lstm_backward(const LstmParams& params, const LstmStepCache& cache,
                        std::span<const double> grad_h_next, std::span<const double> grad_c_next,
                        LstmParams& grads, Vector& grad_x);

struct EmbeddingTable {
    std::size_t vocab_size = 0;
    std::size_t dim = 0;
    Matrix rows;  // vocab_size x dim, row 0 reserved for out-of-vocabulary

    EmbeddingTable() = default;
    EmbeddingTable(std::size_t vocab, std::size_t d) : vocab_size(vocab), dim(d), rows(vocab, d) {}

    void init_weights(Rng& rng);
};

std::span<const double> embedding_lookup(const EmbeddingTable& table, std::size_t index);

// Sigmoid output head: y = sigmoid(W h + b), 60 future frames by default.
struct DenseSigmoidParams {
    Matrix W;  // out x in
    Vector b;  // out

    DenseSigmoidParams() = default;
    DenseSigmoidParams(std::size_t out, std::size_t in) : W(out, in), b(out, 0.0) {}

    void init_weights(Rng& rng);
    std::size_t out_dim() const { return b.size(); }
    std::size_t in_dim() const { return W.cols; }
};

Vector dense_sigmoid_forward(const DenseSigmoidParams& params, std::span<const double> h);

// grad_y is d(loss)/d(y); returns d(loss)/d(h) and accumulates into `grads`,
// a zeroed params-shaped store.
Vector dense_sigmoid_backward(const DenseSigmoidParams& params, std::span<const double> h,
                              std::span<const double> y, std::span<const double> grad_y,
                              DenseSigmoidParams& grads);

struct BceResult {
    double loss = 0.0;
    Vector grad_y;      // d(mean BCE)/dy
    int clamped = 0;    // entries that hit the numeric clamp
};

// Mean binary cross entropy over the vector, with gradient w.r.t. y.
// y outside (0,1) is clamped to [eps, 1-eps], eps = 1e-7, and counted.
BceResult bce_loss(std::span<const double> y, std::span<const double> target);

inline constexpr double kBceClampEps = 1e-7;

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<std::vector<double>> m;  // first moments, one buffer per tensor
    std::vector<std::vector<double>> v;  // second moments

    void init_like(const std::vector<TensorRef>& tensors);
};

// One Adam update over all tensors. The L2 penalty enters as an additive
// lambda*theta gradient term before the moment updates.
void adam_step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
               AdamState& state, double l2_lambda);

// Inverted dropout: entries are 0 with probability p, else 1/(1-p).
Vector dropout_mask(std::size_t dim, double p, Rng& rng);

// Central finite differences of loss_fn w.r.t. every tensor coordinate.
std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>& loss_fn,
                                                  const std::vector<TensorRef>& params,
                                                  double eps);

// Relative error with a small floor so near-zero gradient pairs compare
// on an absolute scale.
double grad_rel_error(double analytic, double numeric);

// Max grad_rel_error over aligned tensor lists.
double max_grad_rel_error(const std::vector<TensorRef>& analytic,
                          const std::vector<std::vector<double>>& numeric);

double sigmoid(double x);

}  // namespace turntaking::nn
