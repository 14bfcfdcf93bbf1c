// Compares the blocked OpenMP gemm against the serial reference and checks
// that the two agree bit for bit while it is at it.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>

#include "dsrc/matcore.hpp"

using namespace dsrc::matcore;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    DenseMatrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    return m;
}

double time_ms(const char* label, int reps, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count() /
        reps;
    std::printf("  %-28s %10.2f ms\n", label, ms);
    return ms;
}

}  // namespace

int main() {
    std::mt19937_64 rng(7);
    for (std::size_t n : {128, 256, 512, 1024}) {
        std::printf("gemm %zux%zu:\n", n, n);
        DenseMatrix a = random_matrix(n, n, rng);
        DenseMatrix b = random_matrix(n, n, rng);
        DenseMatrix ref, blocked;
        const int reps = n <= 256 ? 5 : 1;
        const double t_naive = time_ms("serial reference", reps, [&] { ref = gemm_naive(a, b); });
        const double t_block =
            time_ms("blocked (default workers)", reps, [&] { blocked = gemm_blocked(a, b); });
        set_worker_count(1);
        time_ms("blocked (1 worker)", reps, [&] { blocked = gemm_blocked(a, b); });
        set_worker_count(0);
        const bool exact =
            std::memcmp(ref.data(), blocked.data(), ref.size() * sizeof(double)) == 0;
        std::printf("  speedup %.1fx, bitwise match: %s\n", t_naive / t_block,
                    exact ? "yes" : "NO");
        if (!exact) return 1;
    }
    return 0;
}
