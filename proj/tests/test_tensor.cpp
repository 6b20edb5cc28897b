#include <doctest.h>

#include <cmath>

#include "edgepoint/tensor.hpp"
#include "testutil.hpp"

using namespace edgepoint;
using ad::Reduce;
using ad::Tensor;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul identity leaves the operand unchanged") {
    auto eye = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
    auto b = Tensor<double>::from({2, 2}, {5, 6, 7, 8});
    auto c = ad::matmul(eye, b);
    CHECK(c.data()[0] == 5);
    CHECK(c.data()[1] == 6);
    CHECK(c.data()[2] == 7);
    CHECK(c.data()[3] == 8);
}

TEST_CASE("matmul 1x2 by 2x1") {
    auto a = Tensor<double>::from({1, 2}, {1, 2});
    auto b = Tensor<double>::from({2, 1}, {3, 4});
    auto c = ad::matmul(a, b);
    CHECK(c.shape() == std::vector<int>{1, 1});
    CHECK(c.item() == doctest::Approx(11.0));
}

TEST_CASE("matmul rejects mismatched inner extents") {
    auto a = Tensor<double>::zeros({2, 3});
    auto b = Tensor<double>::zeros({4, 2});
    CHECK_THROWS_AS(ad::matmul(a, b), DimensionError);
}

TEST_CASE("matmul gradient matches finite differences") {
    rng::Xoshiro256 gen(11);
    const auto a_vals = testutil::random_vector(6, gen);
    const auto b_vals = testutil::random_vector(12, gen);
    auto a = Tensor<double>::from({2, 3}, a_vals, true);
    auto b = Tensor<double>::from({3, 4}, b_vals, true);
    auto loss = ad::sum_all(ad::matmul(a, b));
    loss.backward();

    auto fd_a = testutil::fd_gradient(
        [&](const std::vector<double>& v) {
            return ad::sum_all(ad::matmul(Tensor<double>::from({2, 3}, v),
                                          Tensor<double>::from({3, 4}, b_vals)))
                .item();
        },
        a_vals);
    auto fd_b = testutil::fd_gradient(
        [&](const std::vector<double>& v) {
            return ad::sum_all(ad::matmul(Tensor<double>::from({2, 3}, a_vals),
                                          Tensor<double>::from({3, 4}, v)))
                .item();
        },
        b_vals);
    CHECK(testutil::all_close(a.grad(), fd_a));
    CHECK(testutil::all_close(b.grad(), fd_b));
}

TEST_CASE("reduce mean and max over axis 0") {
    auto x = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    auto mean = ad::reduce(x, 0, Reduce::mean);
    CHECK(mean.data()[0] == doctest::Approx(2.0));
    CHECK(mean.data()[1] == doctest::Approx(3.0));
    auto mx = ad::reduce(x, 0, Reduce::max);
    CHECK(mx.data()[0] == 3);
    CHECK(mx.data()[1] == 4);
}

TEST_CASE("mean of a single-row tensor equals that row") {
    auto x = Tensor<double>::from({1, 3}, {7, 8, 9});
    auto mean = ad::reduce(x, 0, Reduce::mean);
    CHECK(mean.data()[0] == 7);
    CHECK(mean.data()[1] == 8);
    CHECK(mean.data()[2] == 9);
}

TEST_CASE("reduce rejects bad axes and empty extents") {
    auto x = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    CHECK_THROWS_AS(ad::reduce(x, 2, Reduce::sum), DimensionError);
    auto empty = Tensor<double>::from({0, 3}, {});
    CHECK_THROWS_AS(ad::reduce(empty, 0, Reduce::mean), DomainError);
}

TEST_CASE("max reduction backward routes to the first argmax only") {
    auto x = Tensor<double>::from({2, 3}, {5, 5, 1, 2, 9, 9}, true);
    auto loss = ad::sum_all(ad::reduce(x, 1, Reduce::max));
    loss.backward();
    const auto g = x.grad();
    // Row 0 ties at index 0/1: first occurrence wins.
    CHECK(g[0] == 1);
    CHECK(g[1] == 0);
    CHECK(g[2] == 0);
    CHECK(g[3] == 0);
    CHECK(g[4] == 1);
    CHECK(g[5] == 0);
    int nonzero = 0;
    for (double v : g) nonzero += v != 0;
    CHECK(nonzero == 2);  // exactly one per reduced slice
}

TEST_CASE("reduce gradients match finite differences for all kinds") {
    rng::Xoshiro256 gen(12);
    for (auto kind : {Reduce::mean, Reduce::max, Reduce::sum}) {
        for (int axis = 0; axis < 2; ++axis) {
            const auto vals = testutil::random_vector(12, gen);
            auto x = Tensor<double>::from({3, 4}, vals, true);
            auto loss = ad::sum_all(ad::mul(ad::reduce(x, axis, kind),
                                            ad::reduce(x, axis, kind)));
            loss.backward();
            auto fd = testutil::fd_gradient(
                [&](const std::vector<double>& v) {
                    auto t = Tensor<double>::from({3, 4}, v);
                    auto r = ad::reduce(t, axis, kind);
                    return ad::sum_all(ad::mul(r, r)).item();
                },
                vals);
            CHECK(testutil::all_close(x.grad(), fd));
        }
    }
}

TEST_CASE("concat on axis 1") {
    auto a = Tensor<double>::from({2, 1}, {1, 2});
    auto b = Tensor<double>::from({2, 1}, {3, 4});
    auto c = ad::concat<double>({a, b}, 1);
    CHECK(c.shape() == std::vector<int>{2, 2});
    CHECK(c.at({0, 0}) == 1);
    CHECK(c.at({0, 1}) == 3);
    CHECK(c.at({1, 0}) == 2);
    CHECK(c.at({1, 1}) == 4);
}

TEST_CASE("concat of one tensor is the identity") {
    auto a = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    auto c = ad::concat<double>({a}, 0);
    CHECK(c.shape() == a.shape());
    for (int i = 0; i < 4; ++i) CHECK(c.data()[static_cast<std::size_t>(i)] == a.data()[static_cast<std::size_t>(i)]);
}

TEST_CASE("concat shape arithmetic and errors") {
    auto a = Tensor<double>::zeros({2, 3});
    auto b = Tensor<double>::zeros({2, 5});
    auto c = ad::concat<double>({a, b}, 1);
    CHECK(c.shape() == std::vector<int>{2, 8});
    auto bad = Tensor<double>::zeros({2});
    CHECK_THROWS_AS(ad::concat<double>({a, bad}, 1), DimensionError);
}

TEST_CASE("concat backward slices gradients back") {
    rng::Xoshiro256 gen(13);
    const auto a_vals = testutil::random_vector(6, gen);
    const auto b_vals = testutil::random_vector(10, gen);
    auto a = Tensor<double>::from({2, 3}, a_vals, true);
    auto b = Tensor<double>::from({2, 5}, b_vals, true);
    auto cat = ad::concat<double>({a, b}, 1);
    auto loss = ad::sum_all(ad::mul(cat, cat));
    loss.backward();
    auto fd_a = testutil::fd_gradient(
        [&](const std::vector<double>& v) {
            auto cat2 = ad::concat<double>(
                {Tensor<double>::from({2, 3}, v), Tensor<double>::from({2, 5}, b_vals)}, 1);
            return ad::sum_all(ad::mul(cat2, cat2)).item();
        },
        a_vals);
    CHECK(testutil::all_close(a.grad(), fd_a));
}

TEST_CASE("softmax of equal logits is uniform") {
    auto x = Tensor<double>::from({2}, {0, 0});
    auto s = ad::softmax(x);
    CHECK(s.data()[0] == doctest::Approx(0.5));
    CHECK(s.data()[1] == doctest::Approx(0.5));
}

TEST_CASE("cross entropy of uniform logits is ln 2") {
    auto logits = Tensor<double>::from({2}, {0, 0});
    auto loss = ad::cross_entropy(logits, 0);
    CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
    auto logits = Tensor<double>::from({1, 3}, {0.1, 0.2, 0.3});
    const int bad[1] = {3};
    CHECK_THROWS_AS(ad::cross_entropy(logits, std::span<const int>(bad, 1)), DomainError);
}

TEST_CASE("KL divergence of a distribution against itself is zero") {
    rng::Xoshiro256 gen(14);
    std::vector<double> p = {0.2, 0.5, 0.3};
    std::vector<double> logits(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) logits[i] = std::log(p[i]);
    auto t = Tensor<double>::from({1, 3}, logits);
    auto kl = ad::kl_divergence(p, t);
    CHECK(kl.item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cross entropy and KL gradients match finite differences") {
    rng::Xoshiro256 gen(15);
    const auto vals = testutil::random_vector(8, gen);
    auto logits = Tensor<double>::from({2, 4}, vals, true);
    const int labels[2] = {1, 3};
    auto loss = ad::cross_entropy(logits, std::span<const int>(labels, 2));
    loss.backward();
    auto fd = testutil::fd_gradient(
        [&](const std::vector<double>& v) {
            return ad::cross_entropy(Tensor<double>::from({2, 4}, v),
                                     std::span<const int>(labels, 2))
                .item();
        },
        vals);
    CHECK(testutil::all_close(logits.grad(), fd));

    std::vector<double> targets = {0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25};
    auto logits2 = Tensor<double>::from({2, 4}, vals, true);
    ad::kl_divergence(targets, logits2).backward();
    auto fd2 = testutil::fd_gradient(
        [&](const std::vector<double>& v) {
            return ad::kl_divergence(targets, Tensor<double>::from({2, 4}, v)).item();
        },
        vals);
    CHECK(testutil::all_close(logits2.grad(), fd2));
}

TEST_CASE("backward of a plain sum gives unit gradients") {
    auto x = Tensor<double>::from({3}, {4, 5, 6}, true);
    ad::sum_all(x).backward();
    for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of sum of squares doubles the input") {
    auto x = Tensor<double>::from({2}, {1, 2}, true);
    ad::sum_all(ad::mul(x, x)).backward();
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward accumulates until grads are cleared") {
    auto x = Tensor<double>::from({2}, {1, 2}, true);
    auto loss = ad::sum_all(x);
    loss.backward();
    loss.backward();
    CHECK(x.grad()[0] == 2.0);
    x.zero_grad();
    loss.backward();
    CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("backward rejects non-scalar losses") {
    auto x = Tensor<double>::from({2}, {1, 2}, true);
    CHECK_THROWS_AS(ad::add(x, x).backward(), DimensionError);
}

TEST_CASE("leaky relu gradient matches finite differences") {
    rng::Xoshiro256 gen(16);
    const auto vals = testutil::random_vector(10, gen);
    auto x = Tensor<double>::from({10}, vals, true);
    ad::sum_all(ad::mul(ad::leaky_relu(x, 0.2), ad::leaky_relu(x, 0.2))).backward();
    auto fd = testutil::fd_gradient(
        [&](const std::vector<double>& v) {
            auto y = ad::leaky_relu(Tensor<double>::from({10}, v), 0.2);
            return ad::sum_all(ad::mul(y, y)).item();
        },
        vals);
    CHECK(testutil::all_close(x.grad(), fd));
}

TEST_CASE("power normalize matches the hand-evaluated example") {
    auto z = Tensor<double>::from({2}, {3, 4});
    auto y = ad::power_normalize(z, 1.0);
    CHECK(y.data()[0] == doctest::Approx(3.0 * std::sqrt(2.0) / 5.0));
    CHECK(y.data()[1] == doctest::Approx(4.0 * std::sqrt(2.0) / 5.0));
    // Mean square equals the power constraint exactly.
    double ms = 0;
    for (double v : y.data()) ms += v * v;
    ms /= 2.0;
    CHECK(ms == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("power normalize is a projection and scale invariant") {
    rng::Xoshiro256 gen(17);
    const auto vals = testutil::random_vector(16, gen);
    auto once = ad::power_normalize(Tensor<double>::from({16}, vals), 2.5);
    auto twice = ad::power_normalize(once, 2.5);
    CHECK(testutil::all_close(once.data(), twice.data(), 1e-12, 1e-12));

    std::vector<double> scaled(vals);
    for (auto& v : scaled) v *= 37.5;
    auto from_scaled = ad::power_normalize(Tensor<double>::from({16}, scaled), 2.5);
    CHECK(testutil::all_close(once.data(), from_scaled.data(), 1e-9, 1e-12));
}

TEST_CASE("power normalize rejects the zero vector") {
    auto z = Tensor<double>::zeros({4});
    CHECK_THROWS_AS(ad::power_normalize(z, 1.0), DomainError);
}

TEST_CASE("power normalize gradient matches finite differences") {
    rng::Xoshiro256 gen(18);
    for (int inst = 0; inst < 5; ++inst) {
        const auto vals = testutil::random_vector(6, gen, 0.2, 1.0);
        auto z = Tensor<double>::from({6}, vals, true);
        auto y = ad::power_normalize(z, 1.0);
        // Non-symmetric functional so the gradient is informative.
        std::vector<double> w = {1, -2, 0.5, 3, -1, 0.25};
        ad::sum_all(ad::mul(y, Tensor<double>::from({6}, w))).backward();
        auto fd = testutil::fd_gradient(
            [&](const std::vector<double>& v) {
                auto yy = ad::power_normalize(Tensor<double>::from({6}, v), 1.0);
                return ad::sum_all(ad::mul(yy, Tensor<double>::from({6}, w))).item();
            },
            vals);
        CHECK(testutil::all_close(z.grad(), fd));
    }
}

TEST_CASE("add_constant passes gradients straight through") {
    auto x = Tensor<double>::from({3}, {1, 2, 3}, true);
    auto y = ad::add_constant(x, {0.5, -0.5, 0.25});
    ad::sum_all(ad::mul(y, y)).backward();
    for (int i = 0; i < 3; ++i)
        CHECK(x.grad()[static_cast<std::size_t>(i)] ==
              doctest::Approx(2.0 * y.data()[static_cast<std::size_t>(i)]));
}

TEST_CASE("forward results are deterministic") {
    rng::Xoshiro256 gen(19);
    const auto vals = testutil::random_vector(12, gen);
    auto x = Tensor<double>::from({3, 4}, vals);
    auto a = ad::softmax(ad::reduce(x, 0, Reduce::mean));
    auto b = ad::softmax(ad::reduce(x, 0, Reduce::mean));
    CHECK(testutil::all_close(a.data(), b.data(), 0.0, 0.0));
}

TEST_CASE("no-grad scope suppresses tape construction") {
    auto x = Tensor<double>::from({2}, {1, 2}, true);
    ad::NoGradGuard guard;
    auto y = ad::sum_all(ad::mul(x, x));
    CHECK_FALSE(y.requires_grad());
}

TEST_SUITE_END();
