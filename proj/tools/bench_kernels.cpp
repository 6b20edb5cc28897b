// Serial-vs-OpenMP kernel benchmark. Times the hot paths (dense products,
// pairwise distances, the edge-conv pipeline) under both execution policies
// and reports effective GFLOP/s.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "edgepoint/flops.hpp"
#include "edgepoint/gnn.hpp"
#include "edgepoint/kernels.hpp"
#include "edgepoint/rng.hpp"

using edgepoint::kernels::Exec;
using edgepoint::kernels::execution_policy;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::vector<float> random_buffer(std::size_t n, edgepoint::rng::Xoshiro256& gen) {
    std::vector<float> buf(n);
    for (auto& v : buf) v = static_cast<float>(gen.uniform(-1.0, 1.0));
    return buf;
}

template <class Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e30;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_s();
        fn();
        best = std::min(best, now_s() - t0);
    }
    return best;
}

void report(const char* name, double flop, double serial_s, double parallel_s) {
    std::printf("%-26s %9.2f ms serial (%6.2f GF/s) | %9.2f ms openmp (%6.2f GF/s) | speedup %.2fx\n",
                name, serial_s * 1e3, flop / serial_s * 1e-9, parallel_s * 1e3,
                flop / parallel_s * 1e-9, serial_s / parallel_s);
}

}  // namespace

int main(int argc, char** argv) {
    int scale = 1;
    if (argc > 1) scale = std::stoi(argv[1]);
    edgepoint::rng::Xoshiro256 gen(42);

    // gemm: the edge-MLP shape (N*k x 2F) x (2F x F').
    {
        const int m = 2048 * scale, k = 64, n = 64;
        const auto a = random_buffer(static_cast<std::size_t>(m) * k, gen);
        const auto b = random_buffer(static_cast<std::size_t>(k) * n, gen);
        std::vector<float> c(static_cast<std::size_t>(m) * n);
        const double flop = 2.0 * m * k * n;
        execution_policy() = Exec::serial;
        const double ts = time_best_of(5, [&] {
            std::fill(c.begin(), c.end(), 0.0f);
            edgepoint::kernels::gemm_nn(m, k, n, a.data(), b.data(), c.data());
        });
        execution_policy() = Exec::parallel;
        const double tp = time_best_of(5, [&] {
            std::fill(c.begin(), c.end(), 0.0f);
            edgepoint::kernels::gemm_nn(m, k, n, a.data(), b.data(), c.data());
        });
        report("gemm_nn 2048x64x64", flop, ts, tp);
    }

    // pairwise distances + selection: the per-layer kNN rebuild.
    {
        const int n = 256 * scale, f = 32, k = 8;
        const auto x = random_buffer(static_cast<std::size_t>(n) * f, gen);
        std::vector<float> d(static_cast<std::size_t>(n) * n);
        std::vector<int> idx(static_cast<std::size_t>(n) * k);
        const double flop = 3.0 * n * n * f;
        execution_policy() = Exec::serial;
        const double ts = time_best_of(5, [&] {
            edgepoint::kernels::pairwise_sqdist(n, f, x.data(), d.data());
            edgepoint::kernels::knn_select(n, k, d.data(), idx.data());
        });
        execution_policy() = Exec::parallel;
        const double tp = time_best_of(5, [&] {
            edgepoint::kernels::pairwise_sqdist(n, f, x.data(), d.data());
            edgepoint::kernels::knn_select(n, k, d.data(), idx.data());
        });
        report("knn 256 pts, f=32, k=8", flop, ts, tp);
    }

    // Whole edge-conv layer through the tensor path.
    {
        const int n = 256 * scale, f = 32, out = 32, k = 8;
        edgepoint::rng::Xoshiro256 init(7);
        auto layer = edgepoint::nn::EdgeConvLayer<float>::init(f, out, init);
        auto x = edgepoint::ad::Tensor<float>::uniform({n, f}, -1.0f, 1.0f, init);
        const double flop = static_cast<double>(
            edgepoint::flops::edge_conv(static_cast<std::uint64_t>(n), k, f, out));
        execution_policy() = Exec::serial;
        const double ts = time_best_of(5, [&] {
            const auto g = edgepoint::nn::knn_graph(x, k);
            (void)layer.forward(x, g);
        });
        execution_policy() = Exec::parallel;
        const double tp = time_best_of(5, [&] {
            const auto g = edgepoint::nn::knn_graph(x, k);
            (void)layer.forward(x, g);
        });
        report("edge_conv layer 256x32", flop, ts, tp);
    }

    execution_policy() = Exec::parallel;
    return 0;
}
