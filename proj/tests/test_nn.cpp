#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "turntaking/matrix.hpp"
#include "turntaking/nn.hpp"
#include "turntaking/rng.hpp"

using namespace turntaking;

namespace {

Vector random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Gradient sink shaped like the cell; the ctor seeds the forget bias, so wipe it.
nn::LstmParams zeroed_like(const nn::LstmParams& p) {
    nn::LstmParams g(p.input_dim, p.hidden_dim);
    std::fill(g.b.begin(), g.b.end(), 0.0);
    return g;
}

// Second LSTM implementation, scalar loops only, used as the forward oracle.
void slow_lstm_step(const nn::LstmParams& p, const Vector& x, const Vector& h_prev,
                    const Vector& c_prev, Vector& h_out, Vector& c_out) {
    const std::size_t H = p.hidden_dim;
    auto dot_row = [](const Matrix& m, std::size_t r, const Vector& v) {
        double s = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) s += m.at(r, c) * v[c];
        return s;
    };
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    h_out.assign(H, 0.0);
    c_out.assign(H, 0.0);
    for (std::size_t j = 0; j < H; ++j) {
        const double i = sig(p.b[j] + dot_row(p.W, j, x) + dot_row(p.U, j, h_prev));
        const double f = sig(p.b[H + j] + dot_row(p.W, H + j, x) + dot_row(p.U, H + j, h_prev));
        const double g =
            std::tanh(p.b[2 * H + j] + dot_row(p.W, 2 * H + j, x) + dot_row(p.U, 2 * H + j, h_prev));
        const double o =
            sig(p.b[3 * H + j] + dot_row(p.W, 3 * H + j, x) + dot_row(p.U, 3 * H + j, h_prev));
        c_out[j] = f * c_prev[j] + i * g;
        h_out[j] = o * std::tanh(c_out[j]);
    }
}

}  // namespace

TEST_CASE("matvec, transpose matvec and outer product on hand values") {
    Matrix m(2, 2);
    m.at(0, 0) = 1;
    m.at(0, 1) = 2;
    m.at(1, 0) = 3;
    m.at(1, 1) = 4;
    Vector x = {5, 6};

    Vector y(2, 0.0);
    matvec_acc(m, x, y);
    CHECK(y[0] == doctest::Approx(17).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(39).epsilon(1e-15));

    Vector yt(2, 0.0);
    matvec_transpose_acc(m, x, yt);
    CHECK(yt[0] == doctest::Approx(23).epsilon(1e-15));
    CHECK(yt[1] == doctest::Approx(34).epsilon(1e-15));

    Matrix o(2, 2);
    Vector a = {1, 2}, b = {3, 4};
    outer_acc(o, a, b);
    CHECK(o.at(0, 0) == 3);
    CHECK(o.at(0, 1) == 4);
    CHECK(o.at(1, 0) == 6);
    CHECK(o.at(1, 1) == 8);

    CHECK_THROWS_AS(matvec_acc(m, Vector{1.0}, y), ConfigError);
}

TEST_CASE("finiteness guards catch NaN and Inf") {
    Vector ok = {1.0, -2.0, 0.0};
    CHECK(all_finite(ok));
    Vector bad = {1.0, std::nan("")};
    CHECK(!all_finite(bad));
    bad[1] = std::numeric_limits<double>::infinity();
    CHECK(!all_finite(bad));
    CHECK_THROWS_AS(require_finite(bad, "test"), NumericError);
}

TEST_CASE("rng determinism and distribution moments") {
    Rng a(42), b(42);
    for (int k = 0; k < 100; ++k) CHECK(a.next_u64() == b.next_u64());

    Rng rng(1);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int k = 0; k < n; ++k) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sumsq += u * u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sumsq / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12.0).epsilon(0.05));

    double esum = 0.0;
    for (int k = 0; k < n; ++k) esum += rng.exponential(2.5);
    CHECK(esum / n == doctest::Approx(2.5).epsilon(0.02));

    double nsum = 0.0, nsq = 0.0;
    for (int k = 0; k < n; ++k) {
        const double z = rng.normal();
        nsum += z;
        nsq += z * z;
    }
    CHECK(nsum / n == doctest::Approx(0.0).scale(1.0).epsilon(0.02));
    CHECK(nsq / n == doctest::Approx(1.0).epsilon(0.03));

    for (int k = 0; k < 1000; ++k) CHECK(rng.below(7) < 7);
    CHECK(Rng::derive(1, 0) != Rng::derive(1, 1));
    CHECK(Rng::derive(1, 0) != Rng::derive(2, 0));
}

TEST_CASE("lstm forward matches a scalar reference implementation") {
    Rng rng(11);
    nn::LstmParams params(3, 5);
    params.init_weights(rng);

    nn::LstmState st(5);
    Vector h_ref(5, 0.0), c_ref(5, 0.0);
    for (int t = 0; t < 20; ++t) {
        const Vector x = random_vec(rng, 3);
        st = nn::lstm_forward(params, x, st, nullptr);
        Vector h2, c2;
        slow_lstm_step(params, x, h_ref, c_ref, h2, c2);
        h_ref = h2;
        c_ref = c2;
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(std::abs(st.h[j] - h_ref[j]) < 1e-12);
            CHECK(std::abs(st.c[j] - c_ref[j]) < 1e-12);
        }
    }
}

TEST_CASE("lstm forward stays finite on extreme inputs") {
    Rng rng(3);
    nn::LstmParams params(2, 3);
    params.init_weights(rng);
    nn::LstmState st(3);
    const Vector x = {1e3, -1e3};
    for (int t = 0; t < 5; ++t) st = nn::lstm_forward(params, x, st, nullptr);
    CHECK(all_finite(st.h));
    CHECK(all_finite(st.c));
    CHECK_THROWS_AS(nn::lstm_forward(params, Vector{1.0}, st, nullptr), ConfigError);
}

TEST_CASE("lstm backward matches finite differences, single step") {
    Rng rng(5);
    nn::LstmParams params(3, 4);
    params.init_weights(rng);
    Vector x = random_vec(rng, 3);
    const Vector w = random_vec(rng, 4);

    auto loss_fn = [&]() {
        nn::LstmState st = nn::lstm_forward(params, x, nn::LstmState(4), nullptr);
        double L = 0.0;
        for (std::size_t j = 0; j < 4; ++j) L += w[j] * st.h[j];
        return L;
    };

    nn::LstmStepCache cache;
    nn::lstm_forward(params, x, nn::LstmState(4), &cache);
    nn::LstmParams grads = zeroed_like(params);
    Vector dc(4, 0.0), dx;
    nn::lstm_backward(params, cache, w, dc, grads, dx);

    std::vector<TensorRef> prefs = {
        {"W", params.W.values.data(), params.W.rows, params.W.cols},
        {"U", params.U.values.data(), params.U.rows, params.U.cols},
        {"b", params.b.data(), params.b.size(), 1},
        {"x", x.data(), x.size(), 1},
    };
    auto fd = nn::finite_diff_grad(loss_fn, prefs, 1e-5);
    std::vector<TensorRef> grefs = {
        {"W", grads.W.values.data(), grads.W.rows, grads.W.cols},
        {"U", grads.U.values.data(), grads.U.rows, grads.U.cols},
        {"b", grads.b.data(), grads.b.size(), 1},
        {"x", dx.data(), dx.size(), 1},
    };
    CHECK(nn::max_grad_rel_error(grefs, fd) < 1e-4);
}

TEST_CASE("lstm backward matches finite differences over a 10-step chain") {
    Rng rng(7);
    const std::size_t T = 10, I = 3, H = 4;
    nn::LstmParams params(I, H);
    params.init_weights(rng);
    std::vector<Vector> xs(T), ws(T);
    for (std::size_t t = 0; t < T; ++t) {
        xs[t] = random_vec(rng, I);
        ws[t] = random_vec(rng, H);
    }

    // L = sum_t w_t . h_t
    auto loss_fn = [&]() {
        nn::LstmState st(H);
        double L = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            st = nn::lstm_forward(params, xs[t], st, nullptr);
            for (std::size_t j = 0; j < H; ++j) L += ws[t][j] * st.h[j];
        }
        return L;
    };

    std::vector<nn::LstmStepCache> caches(T);
    {
        nn::LstmState st(H);
        for (std::size_t t = 0; t < T; ++t) st = nn::lstm_forward(params, xs[t], st, &caches[t]);
    }
    nn::LstmParams grads = zeroed_like(params);
    std::vector<Vector> dxs(T);
    Vector dh(H, 0.0), dc(H, 0.0);
    for (std::size_t t = T; t-- > 0;) {
        Vector dh_t = ws[t];
        for (std::size_t j = 0; j < H; ++j) dh_t[j] += dh[j];
        auto prev = nn::lstm_backward(params, caches[t], dh_t, dc, grads, dxs[t]);
        dh = prev.h;
        dc = prev.c;
    }

    std::vector<TensorRef> prefs = {
        {"W", params.W.values.data(), params.W.rows, params.W.cols},
        {"U", params.U.values.data(), params.U.rows, params.U.cols},
        {"b", params.b.data(), params.b.size(), 1},
    };
    std::vector<TensorRef> grefs = {
        {"W", grads.W.values.data(), grads.W.rows, grads.W.cols},
        {"U", grads.U.values.data(), grads.U.rows, grads.U.cols},
        {"b", grads.b.data(), grads.b.size(), 1},
    };
    for (std::size_t t = 0; t < T; ++t) {
        prefs.push_back({"x" + std::to_string(t), xs[t].data(), xs[t].size(), 1});
        grefs.push_back({"x" + std::to_string(t), dxs[t].data(), dxs[t].size(), 1});
    }
    auto fd = nn::finite_diff_grad(loss_fn, prefs, 1e-5);
    CHECK(nn::max_grad_rel_error(grefs, fd) < 1e-4);
}

TEST_CASE("embedding lookup returns the row and rejects bad indices") {
    nn::EmbeddingTable table(4, 3);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) table.rows.at(r, c) = 10.0 * r + c;
    auto row = nn::embedding_lookup(table, 2);
    CHECK(row.size() == 3);
    CHECK(row[0] == 20.0);
    CHECK(row[2] == 22.0);
    CHECK_THROWS_AS(nn::embedding_lookup(table, 4), DataError);
}

TEST_CASE("sigmoid head forward on hand values") {
    nn::DenseSigmoidParams head(3, 2);
    head.W.at(0, 0) = 1.0;
    head.W.at(0, 1) = 2.0;
    head.W.at(1, 0) = 0.0;
    head.W.at(1, 1) = -1.0;
    head.W.at(2, 0) = 0.5;
    head.W.at(2, 1) = 0.5;
    head.b = {0.0, 0.1, -0.2};
    const Vector h = {0.3, -0.4};
    const Vector y = nn::dense_sigmoid_forward(head, h);
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    CHECK(y[0] == doctest::Approx(sig(-0.5)).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(sig(0.5)).epsilon(1e-15));
    CHECK(y[2] == doctest::Approx(sig(-0.25)).epsilon(1e-15));
}

TEST_CASE("sigmoid head backward matches finite differences") {
    Rng rng(13);
    nn::DenseSigmoidParams head(5, 3);
    head.init_weights(rng);
    Vector h = random_vec(rng, 3);
    const Vector w = random_vec(rng, 5);

    auto loss_fn = [&]() {
        const Vector y = nn::dense_sigmoid_forward(head, h);
        double L = 0.0;
        for (std::size_t j = 0; j < 5; ++j) L += w[j] * y[j];
        return L;
    };

    const Vector y = nn::dense_sigmoid_forward(head, h);
    nn::DenseSigmoidParams grads(5, 3);
    Vector dh = nn::dense_sigmoid_backward(head, h, y, w, grads);

    std::vector<TensorRef> prefs = {
        {"W", head.W.values.data(), head.W.rows, head.W.cols},
        {"b", head.b.data(), head.b.size(), 1},
        {"h", h.data(), h.size(), 1},
    };
    std::vector<TensorRef> grefs = {
        {"W", grads.W.values.data(), grads.W.rows, grads.W.cols},
        {"b", grads.b.data(), grads.b.size(), 1},
        {"h", dh.data(), dh.size(), 1},
    };
    auto fd = nn::finite_diff_grad(loss_fn, prefs, 1e-5);
    CHECK(nn::max_grad_rel_error(grefs, fd) < 1e-4);
}

TEST_CASE("binary cross entropy on hand values") {
    // -ln(0.5) = ln 2
    auto r1 = nn::bce_loss(Vector{0.5}, Vector{1.0});
    CHECK(r1.loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(r1.clamped == 0);

    // both terms -ln(0.9)
    auto r2 = nn::bce_loss(Vector{0.9, 0.9}, Vector{1.0, 1.0});
    CHECK(r2.loss == doctest::Approx(-std::log(0.9)).epsilon(1e-14));

    // perfect prediction has ~zero loss
    auto r3 = nn::bce_loss(Vector{1.0, 0.0}, Vector{1.0, 0.0});
    CHECK(r3.loss < 1e-6);
    CHECK(r3.clamped == 2);

    // confident and wrong hits the clamp but stays finite
    auto r4 = nn::bce_loss(Vector{1.0}, Vector{0.0});
    CHECK(r4.loss == doctest::Approx(-std::log(nn::kBceClampEps)).epsilon(1e-9));
    CHECK(std::isfinite(r4.grad_y[0]));

    CHECK_THROWS_AS(nn::bce_loss(Vector{0.5}, Vector{1.0, 0.0}), ConfigError);
}

TEST_CASE("binary cross entropy gradient matches finite differences") {
    Vector y = {0.3, 0.7, 0.5, 0.9};
    const Vector t = {1.0, 0.0, 1.0, 1.0};
    auto analytic = nn::bce_loss(y, t);
    auto loss_fn = [&]() { return nn::bce_loss(y, t).loss; };
    std::vector<TensorRef> prefs = {{"y", y.data(), y.size(), 1}};
    auto fd = nn::finite_diff_grad(loss_fn, prefs, 1e-6);
    std::vector<TensorRef> grefs = {{"y", analytic.grad_y.data(), analytic.grad_y.size(), 1}};
    CHECK(nn::max_grad_rel_error(grefs, fd) < 1e-4);
}

TEST_CASE("adam matches a scalar reference on a quadratic") {
    double theta = 1.0, gval = 0.0;
    std::vector<TensorRef> p = {{"theta", &theta, 1, 1}};
    std::vector<TensorRef> g = {{"theta", &gval, 1, 1}};
    nn::AdamState st;
    st.init_like(p);

    double ref = 1.0, m = 0.0, v = 0.0;
    for (int k = 1; k <= 500; ++k) {
        gval = 2.0 * theta;
        const double rg = 2.0 * ref;
        nn::adam_step(p, g, st, 0.0);
        m = 0.9 * m + 0.1 * rg;
        v = 0.999 * v + 0.001 * rg * rg;
        const double mh = m / (1.0 - std::pow(0.9, k));
        const double vh = v / (1.0 - std::pow(0.999, k));
        ref -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(theta == doctest::Approx(ref).epsilon(1e-12));
    // ~ lr per step while the gradient sign holds
    CHECK(theta < 0.65);
    CHECK(theta > 0.4);
}

TEST_CASE("adam leaves parameters alone on zero gradients") {
    double theta = 0.7, gval = 0.0;
    std::vector<TensorRef> p = {{"theta", &theta, 1, 1}};
    std::vector<TensorRef> g = {{"theta", &gval, 1, 1}};
    nn::AdamState st;
    st.init_like(p);
    for (int k = 0; k < 10; ++k) nn::adam_step(p, g, st, 0.0);
    CHECK(theta == 0.7);
}

TEST_CASE("adam l2 term decays weights even on zero gradients") {
    double theta = 1.0, gval = 0.0;
    std::vector<TensorRef> p = {{"theta", &theta, 1, 1}};
    std::vector<TensorRef> g = {{"theta", &gval, 1, 1}};
    nn::AdamState st;
    st.init_like(p);
    for (int k = 0; k < 50; ++k) nn::adam_step(p, g, st, 1e-2);
    CHECK(theta < 1.0);
    CHECK(theta > 0.0);
}

TEST_CASE("inverted dropout mask has the right statistics") {
    Rng rng(21);
    const Vector none = nn::dropout_mask(16, 0.0, rng);
    for (double m : none) CHECK(m == 1.0);

    const double p = 0.3;
    const std::size_t n = 100000;
    const Vector mask = nn::dropout_mask(n, p, rng);
    std::size_t zeros = 0;
    double mean = 0.0;
    for (double m : mask) {
        if (m == 0.0)
            ++zeros;
        else
            CHECK(m == doctest::Approx(1.0 / 0.7).epsilon(1e-12));
        mean += m;
    }
    CHECK(static_cast<double>(zeros) / n == doctest::Approx(p).epsilon(0.05));
    CHECK(mean / n == doctest::Approx(1.0).epsilon(0.01));

    Rng r1(9), r2(9);
    CHECK(nn::dropout_mask(64, 0.5, r1) == nn::dropout_mask(64, 0.5, r2));
    CHECK_THROWS_AS(nn::dropout_mask(4, 1.0, rng), ConfigError);
}

TEST_CASE("finite differences recover simple derivatives") {
    double theta = 3.0;
    std::vector<TensorRef> p = {{"theta", &theta, 1, 1}};
    auto fd = nn::finite_diff_grad([&]() { return theta * theta; }, p, 1e-5);
    CHECK(fd[0][0] == doctest::Approx(6.0).epsilon(1e-6));
    auto fd0 = nn::finite_diff_grad([]() { return 4.2; }, p, 1e-5);
    CHECK(fd0[0][0] == 0.0);
    CHECK(theta == 3.0);
}

TEST_CASE("relative gradient error uses an absolute floor near zero") {
    CHECK(nn::grad_rel_error(0.0, 0.0) == 0.0);
    CHECK(nn::grad_rel_error(0.0, 1e-9) < 1e-4);
    CHECK(nn::grad_rel_error(1.0, 1.0) == 0.0);
    CHECK(nn::grad_rel_error(1.0, 1.1) == doctest::Approx(0.1 / 1.1).epsilon(1e-12));
}

TEST_CASE("sigmoid is stable at extreme arguments") {
    CHECK(nn::sigmoid(0.0) == 0.5);
    CHECK(nn::sigmoid(1000.0) == 1.0);
    CHECK(nn::sigmoid(-1000.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-200));
    CHECK(std::isfinite(nn::sigmoid(-745.0)));
}
