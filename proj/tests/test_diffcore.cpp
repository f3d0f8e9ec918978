#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "masc/ops.hpp"
#include "masc/optim.hpp"

namespace d = masc::diff;
using d::TensorD;

namespace {

std::mt19937_64 test_rng(7);

TensorD random_tensor(d::Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    auto t = TensorD::zeros(shape);
    for (auto& v : t.values()) v = dist(test_rng);
    return t;
}

// Values bounded away from zero, random sign; for kinked ops.
TensorD random_signed_away_from_zero(d::Shape shape, double min_abs = 0.2) {
    std::uniform_real_distribution<double> mag(min_abs, 1.5);
    std::bernoulli_distribution coin(0.5);
    auto t = TensorD::zeros(shape);
    for (auto& v : t.values()) v = (coin(test_rng) ? 1.0 : -1.0) * mag(test_rng);
    return t;
}

// Central finite differences (h = 1e-4, 64-bit) against the reverse pass.
// make_loss must rebuild a fresh graph from the current leaf values.
template <typename F>
void check_gradients(std::vector<TensorD> inputs, F&& make_loss, double tol = 1e-5,
                     double h = 1e-4) {
    for (auto& in : inputs) in.zero_grad();
    auto loss = make_loss();
    d::backward(loss);
    for (auto& in : inputs) {
        REQUIRE(in.has_grad());
        for (size_t i = 0; i < in.values().size(); ++i) {
            const double keep = in.values()[i];
            in.values()[i] = keep + h;
            const double up = make_loss().item();
            in.values()[i] = keep - h;
            const double dn = make_loss().item();
            in.values()[i] = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double ad = in.grad()[i];
            const double rel = std::fabs(ad - fd) / std::max(1.0, std::fabs(fd));
            INFO("element ", i, " ad=", ad, " fd=", fd);
            CHECK(rel < tol);
        }
    }
}

// Weighted sum turns any op output into a scalar with full Jacobian coverage.
TensorD weighted_sum(const TensorD& t, const TensorD& w) { return d::sum_all(d::mul(t, w)); }

}  // namespace

TEST_CASE("relu forward matches definition") {
    auto x = TensorD::from({3}, {-1.0, 0.0, 2.0});
    auto y = d::relu(x);
    CHECK(y.values() == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("conv2d with identity 1x1 kernel reproduces the image") {
    auto x = random_tensor({1, 1, 8, 8});
    auto w = TensorD::from({1, 1, 1, 1}, {1.0});
    auto b = TensorD::zeros({1});
    auto y = d::conv2d(x, w, b);
    for (size_t i = 0; i < x.values().size(); ++i) CHECK(y.values()[i] == doctest::Approx(x.values()[i]));
}

TEST_CASE("grad of sum(x*x) is 2x") {
    auto x = TensorD::from({2}, {1.0, 2.0});
    auto loss = d::sum_all(d::mul(x, x));
    d::backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar loss") {
    auto x = random_tensor({3});
    auto y = d::mul(x, x);
    CHECK_THROWS_AS(d::backward(y), std::invalid_argument);
}

TEST_CASE("gradients vanish at the MSE minimum") {
    auto x = random_tensor({4, 4});
    auto y = TensorD::from(x.shape(), x.values());
    auto loss = d::mean_all(d::square(d::sub(x, y)));
    d::backward(loss);
    for (double g : x.grad()) CHECK(g == doctest::Approx(0.0));
}

TEST_CASE("repeated backward accumulates gradients") {
    auto x = TensorD::from({2}, {1.0, 2.0});
    auto loss = d::sum_all(d::mul(x, x));
    d::backward(loss);
    const auto once = x.grad();
    d::backward(loss);
    for (size_t i = 0; i < once.size(); ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * once[i]));
}

TEST_CASE("shape mismatch errors name the operator and shapes") {
    auto a = random_tensor({2, 3});
    auto b = random_tensor({3, 2});
    CHECK_THROWS_WITH_AS(d::add(a, b), doctest::Contains("add"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(d::add(a, b), doctest::Contains("[2,3]"), std::invalid_argument);
}

TEST_CASE("graph ids form a topological order") {
    auto x = random_tensor({1, 2, 8, 8});
    auto w = random_tensor({4, 2, 3, 3});
    auto b = random_tensor({4});
    auto y = d::mean_all(d::relu(d::conv2d(x, w, b)));
    // Every parent was created (and evaluated) before its consumer.
    std::vector<d::Node<double>*> stack{y.node().get()};
    while (!stack.empty()) {
        auto* n = stack.back();
        stack.pop_back();
        for (auto& p : n->parents) {
            CHECK(p->id < n->id);
            stack.push_back(p.get());
        }
    }
}

TEST_CASE("forward evaluation is deterministic") {
    auto x = random_tensor({2, 3, 8, 8});
    auto w = random_tensor({4, 3, 3, 3});
    auto b = random_tensor({4});
    auto y1 = d::conv2d(x, w, b);
    auto y2 = d::conv2d(x, w, b);
    CHECK(y1.values() == y2.values());
}

TEST_CASE("finite differences: elementwise ops") {
    auto a = random_tensor({3, 4});
    auto b = random_tensor({3, 4});
    auto w = random_tensor({3, 4});
    check_gradients({a, b}, [&] { return weighted_sum(d::add(a, b), w); });
    check_gradients({a, b}, [&] { return weighted_sum(d::sub(a, b), w); });
    check_gradients({a, b}, [&] { return weighted_sum(d::mul(a, b), w); });
    auto bpos = random_tensor({3, 4}, 0.5, 1.5);
    check_gradients({a, bpos}, [&] { return weighted_sum(d::div(a, bpos), w); });
    check_gradients({a}, [&] { return weighted_sum(d::add_scalar(a, 0.7), w); });
    check_gradients({a}, [&] { return weighted_sum(d::mul_scalar(a, -1.3), w); });
    check_gradients({a}, [&] { return weighted_sum(d::exp(a), w); });
    auto apos = random_tensor({3, 4}, 0.3, 2.0);
    check_gradients({apos}, [&] { return weighted_sum(d::log(apos), w); });
}

TEST_CASE("finite differences: kinked ops away from the kink") {
    auto a = random_signed_away_from_zero({4, 5});
    auto w = random_tensor({4, 5});
    check_gradients({a}, [&] { return weighted_sum(d::relu(a), w); });
    check_gradients({a}, [&] { return weighted_sum(d::abs(a), w); });
    // minimum: keep operands separated
    auto lo = random_tensor({4, 5}, -1.0, -0.3);
    auto hi = random_tensor({4, 5}, 0.3, 1.0);
    check_gradients({lo, hi}, [&] { return weighted_sum(d::minimum(lo, hi), w); });
    // clamp: interior and exterior points, none near the bounds
    auto c = random_signed_away_from_zero({4, 5}, 0.3);
    check_gradients({c}, [&] { return weighted_sum(d::clamp(c, -0.15, 0.15), w); });
}

TEST_CASE("finite differences: linear") {
    auto x = random_tensor({3, 5});
    auto w = random_tensor({4, 5});
    auto b = random_tensor({4});
    auto s = random_tensor({3, 4});
    check_gradients({x, w, b}, [&] { return weighted_sum(d::linear(x, w, b), s); });
}

TEST_CASE("finite differences: conv2d 3x3 and 1x1") {
    auto x = random_tensor({2, 3, 6, 6});
    auto w = random_tensor({4, 3, 3, 3});
    auto b = random_tensor({4});
    auto s = random_tensor({2, 4, 6, 6});
    check_gradients({x, w, b}, [&] { return weighted_sum(d::conv2d(x, w, b), s); });
    auto w1 = random_tensor({2, 3, 1, 1});
    auto b1 = random_tensor({2});
    auto s1 = random_tensor({2, 2, 6, 6});
    check_gradients({x, w1, b1}, [&] { return weighted_sum(d::conv2d(x, w1, b1), s1); });
}

TEST_CASE("finite differences: maxpool2 and upsample") {
    auto x = random_tensor({1, 2, 6, 6});
    auto s = random_tensor({1, 2, 3, 3});
    check_gradients({x}, [&] { return weighted_sum(d::maxpool2(x), s); });
    auto u = random_tensor({1, 2, 4, 4});
    auto su = random_tensor({1, 2, 8, 8});
    check_gradients({u}, [&] { return weighted_sum(d::upsample_bilinear2(u), su); });
}

TEST_CASE("finite differences: concat and instance norm") {
    auto a = random_tensor({2, 2, 4, 4});
    auto b = random_tensor({2, 3, 4, 4});
    auto s = random_tensor({2, 5, 4, 4});
    check_gradients({a, b}, [&] { return weighted_sum(d::concat_channels(a, b), s); });
    auto x = random_tensor({2, 3, 4, 4});
    auto gamma = random_tensor({3}, 0.5, 1.5);
    auto beta = random_tensor({3});
    auto sn = random_tensor({2, 3, 4, 4});
    check_gradients({x, gamma, beta},
                    [&] { return weighted_sum(d::instance_norm(x, gamma, beta), sn); }, 2e-5);
}

TEST_CASE("finite differences: softmax family and gather") {
    auto x = random_tensor({3, 7});
    auto s = random_tensor({3, 7});
    check_gradients({x}, [&] { return weighted_sum(d::softmax(x), s); });
    check_gradients({x}, [&] { return weighted_sum(d::log_softmax(x), s); });
    std::vector<int> idx{2, 0, 6};
    auto sg = random_tensor({3});
    check_gradients({x}, [&] { return weighted_sum(d::gather(x, idx), sg); });
}

TEST_CASE("finite differences: gaussian valid filter") {
    auto x = random_tensor({1, 1, 8, 8});
    auto win = d::gaussian_window<double>(3, 1.5);
    auto s = random_tensor({1, 1, 6, 6});
    check_gradients({x}, [&] { return weighted_sum(d::gauss_filter_valid(x, win), s); });
}

TEST_CASE("softmax distributions sum to one") {
    auto x = random_tensor({4, 9});
    auto p = d::softmax(x);
    for (int i = 0; i < 4; ++i) {
        double total = 0;
        for (int j = 0; j < 9; ++j) total += p.values()[i * 9 + j];
        CHECK(total == doctest::Approx(1.0));
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    std::vector<TensorD> params{random_tensor({4})};
    const auto before = params[0].values();
    params[0].zero_grad();
    d::AdamState<double> st;
    st.lr = 1e-3;
    st.init(params);
    d::adam_step(params, st);
    CHECK(params[0].values() == before);
    CHECK(st.step_count == 1);
}

TEST_CASE("adam: single bias-corrected step with unit gradient") {
    std::vector<TensorD> params{TensorD::from({1}, {0.5})};
    params[0].zero_grad();
    params[0].grad()[0] = 1.0;
    d::AdamState<double> st;
    st.lr = 1e-3;
    st.init(params);
    d::adam_step(params, st);
    // mhat = vhat = 1 after one step, so the move is lr/(1 + eps).
    CHECK(params[0].values()[0] == doctest::Approx(0.5 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-9));
    CHECK(st.step_count == 1);
    d::adam_step(params, st);
    CHECK(st.step_count == 2);
}

TEST_CASE("gradient norm clipping scales to the bound") {
    std::vector<TensorD> params{TensorD::from({2}, {0.0, 0.0})};
    params[0].zero_grad();
    params[0].grad()[0] = 3.0;
    params[0].grad()[1] = 4.0;
    const double norm = d::clip_grad_norm(params, 0.5);
    CHECK(norm == doctest::Approx(5.0));
    CHECK(params[0].grad()[0] == doctest::Approx(0.3));
    CHECK(params[0].grad()[1] == doctest::Approx(0.4));
}
