#include <doctest.h>

#include <algorithm>
#include <vector>

#include "edgepoint/kernels.hpp"
#include "edgepoint/opcount.hpp"
#include "edgepoint/rng.hpp"
#include "testutil.hpp"

using namespace edgepoint;
using kernels::Exec;
using kernels::execution_policy;

namespace {

std::vector<float> random_floats(std::size_t n, rng::Xoshiro256& gen) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(gen.uniform(-1.0, 1.0));
    return v;
}

struct PolicyScope {
    Exec saved;
    explicit PolicyScope(Exec p) : saved(execution_policy()) { execution_policy() = p; }
    ~PolicyScope() { execution_policy() = saved; }
};

}  // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("gemm variants are bit-identical across execution policies") {
    rng::Xoshiro256 gen(31);
    // Sizes chosen to exercise remainder lanes and thread partitions.
    for (auto [m, k, n] : {std::array<int, 3>{1, 1, 1}, {7, 5, 3}, {33, 17, 9}, {64, 64, 64}}) {
        const auto a = random_floats(static_cast<std::size_t>(m) * k, gen);
        const auto b = random_floats(static_cast<std::size_t>(k) * n, gen);
        std::vector<float> c_serial(static_cast<std::size_t>(m) * n, 0.0f);
        std::vector<float> c_parallel = c_serial;
        {
            PolicyScope p(Exec::serial);
            kernels::gemm_nn(m, k, n, a.data(), b.data(), c_serial.data());
        }
        {
            PolicyScope p(Exec::parallel);
            kernels::gemm_nn(m, k, n, a.data(), b.data(), c_parallel.data());
        }
        CHECK(c_serial == c_parallel);

        const auto bt = random_floats(static_cast<std::size_t>(n) * k, gen);
        std::vector<float> d_serial(static_cast<std::size_t>(m) * n, 0.0f);
        std::vector<float> d_parallel = d_serial;
        {
            PolicyScope p(Exec::serial);
            kernels::gemm_nt(m, k, n, a.data(), bt.data(), d_serial.data());
        }
        {
            PolicyScope p(Exec::parallel);
            kernels::gemm_nt(m, k, n, a.data(), bt.data(), d_parallel.data());
        }
        CHECK(d_serial == d_parallel);

        const auto rows_a = random_floats(static_cast<std::size_t>(k) * m, gen);
        const auto rows_b = random_floats(static_cast<std::size_t>(k) * n, gen);
        std::vector<float> e_serial(static_cast<std::size_t>(m) * n, 0.0f);
        std::vector<float> e_parallel = e_serial;
        {
            PolicyScope p(Exec::serial);
            kernels::gemm_tn(k, m, n, rows_a.data(), rows_b.data(), e_serial.data());
        }
        {
            PolicyScope p(Exec::parallel);
            kernels::gemm_tn(k, m, n, rows_a.data(), rows_b.data(), e_parallel.data());
        }
        CHECK(e_serial == e_parallel);
    }
}

TEST_CASE("gemm_nt and gemm_tn agree with gemm_nn on transposed operands") {
    rng::Xoshiro256 gen(32);
    const int m = 5, k = 7, n = 4;
    const auto a = random_floats(static_cast<std::size_t>(m) * k, gen);
    const auto b = random_floats(static_cast<std::size_t>(k) * n, gen);

    std::vector<float> reference(static_cast<std::size_t>(m) * n, 0.0f);
    kernels::gemm_nn(m, k, n, a.data(), b.data(), reference.data());

    // b transposed by hand, then contracted with gemm_nt.
    std::vector<float> bt(static_cast<std::size_t>(n) * k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j)
            bt[static_cast<std::size_t>(j) * k + i] = b[static_cast<std::size_t>(i) * n + j];
    std::vector<float> via_nt(static_cast<std::size_t>(m) * n, 0.0f);
    kernels::gemm_nt(m, k, n, a.data(), bt.data(), via_nt.data());
    for (std::size_t i = 0; i < reference.size(); ++i)
        CHECK(via_nt[i] == doctest::Approx(reference[i]).epsilon(1e-5));

    // a transposed by hand, then contracted with gemm_tn.
    std::vector<float> at(static_cast<std::size_t>(k) * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j)
            at[static_cast<std::size_t>(j) * m + i] = a[static_cast<std::size_t>(i) * k + j];
    std::vector<float> via_tn(static_cast<std::size_t>(m) * n, 0.0f);
    kernels::gemm_tn(k, m, n, at.data(), b.data(), via_tn.data());
    for (std::size_t i = 0; i < reference.size(); ++i)
        CHECK(via_tn[i] == doctest::Approx(reference[i]).epsilon(1e-5));
}

TEST_CASE("pairwise distances and knn selection are policy independent") {
    rng::Xoshiro256 gen(33);
    const int n = 37, f = 5, k = 4;
    const auto x = random_floats(static_cast<std::size_t>(n) * f, gen);
    std::vector<float> d_serial(static_cast<std::size_t>(n) * n), d_parallel = d_serial;
    std::vector<int> idx_serial(static_cast<std::size_t>(n) * k), idx_parallel = idx_serial;
    {
        PolicyScope p(Exec::serial);
        kernels::pairwise_sqdist(n, f, x.data(), d_serial.data());
        kernels::knn_select(n, k, d_serial.data(), idx_serial.data());
    }
    {
        PolicyScope p(Exec::parallel);
        kernels::pairwise_sqdist(n, f, x.data(), d_parallel.data());
        kernels::knn_select(n, k, d_parallel.data(), idx_parallel.data());
    }
    CHECK(d_serial == d_parallel);
    CHECK(idx_serial == idx_parallel);
}

TEST_CASE("gather and activation kernels are policy independent") {
    rng::Xoshiro256 gen(34);
    const int n = 19, k = 3, f = 6;
    const auto x = random_floats(static_cast<std::size_t>(n) * f, gen);
    std::vector<int> nbr(static_cast<std::size_t>(n) * k);
    for (std::size_t i = 0; i < nbr.size(); ++i)
        nbr[i] = static_cast<int>(gen.below(static_cast<std::uint64_t>(n)));

    std::vector<float> e_serial(static_cast<std::size_t>(n) * k * 2 * f), e_parallel = e_serial;
    {
        PolicyScope p(Exec::serial);
        kernels::gather_edges(n, k, f, x.data(), nbr.data(), e_serial.data());
    }
    {
        PolicyScope p(Exec::parallel);
        kernels::gather_edges(n, k, f, x.data(), nbr.data(), e_parallel.data());
    }
    CHECK(e_serial == e_parallel);

    std::vector<float> y_serial(x.size()), y_parallel(x.size());
    {
        PolicyScope p(Exec::serial);
        kernels::leaky_relu(x.size(), 0.2f, x.data(), y_serial.data());
    }
    {
        PolicyScope p(Exec::parallel);
        kernels::leaky_relu(x.size(), 0.2f, x.data(), y_parallel.data());
    }
    CHECK(y_serial == y_parallel);
}

TEST_CASE("scatter is the exact adjoint of gather") {
    rng::Xoshiro256 gen(35);
    const int n = 9, k = 2, f = 3;
    const auto x = random_floats(static_cast<std::size_t>(n) * f, gen);
    std::vector<int> nbr(static_cast<std::size_t>(n) * k);
    for (std::size_t i = 0; i < nbr.size(); ++i)
        nbr[i] = static_cast<int>(gen.below(static_cast<std::uint64_t>(n)));
    const auto de = random_floats(static_cast<std::size_t>(n) * k * 2 * f, gen);

    // <gather(x), de> must equal <x, scatter(de)> for a linear map.
    std::vector<float> e(de.size());
    kernels::gather_edges(n, k, f, x.data(), nbr.data(), e.data());
    double lhs = 0;
    for (std::size_t i = 0; i < e.size(); ++i)
        lhs += static_cast<double>(e[i]) * static_cast<double>(de[i]);

    std::vector<float> dx(static_cast<std::size_t>(n) * f, 0.0f);
    kernels::scatter_edges(n, k, f, de.data(), nbr.data(), dx.data());
    double rhs = 0;
    for (std::size_t i = 0; i < dx.size(); ++i)
        rhs += static_cast<double>(x[i]) * static_cast<double>(dx[i]);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));
}

TEST_CASE("op counter tallies the pinned conventions") {
    rng::Xoshiro256 gen(36);
    const int m = 3, k = 5, n = 4;
    const auto a = random_floats(static_cast<std::size_t>(m) * k, gen);
    const auto b = random_floats(static_cast<std::size_t>(k) * n, gen);
    std::vector<float> c(static_cast<std::size_t>(m) * n, 0.0f);

    opcount::Scope scope;
    opcount::reset();
    kernels::gemm_nn(m, k, n, a.data(), b.data(), c.data());
    CHECK(opcount::current().total() == 2ull * m * k * n);

    opcount::reset();
    std::vector<float> d(static_cast<std::size_t>(m) * m);
    kernels::pairwise_sqdist(m, k, a.data(), d.data());
    CHECK(opcount::current().total() == flops::pairwise_dist(m, k));

    opcount::reset();
    std::vector<float> y(a.size());
    kernels::leaky_relu(a.size(), 0.2f, a.data(), y.data());
    CHECK(opcount::current().total() == a.size());
}

TEST_SUITE_END();
