// Times the serial and OpenMP versions of the hot kernels.

#include "arcrec/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <omp.h>
#include <random>
#include <vector>

namespace {

using arcrec::CsrMatrix;
namespace k = arcrec::kernels;

double best_of(int reps, const std::function<void()>& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

CsrMatrix random_csr(std::size_t n, std::size_t per_row, std::mt19937_64& rng) {
    CsrMatrix m;
    m.n = n;
    std::uniform_int_distribution<std::uint32_t> col(0, static_cast<std::uint32_t>(n - 1));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::uint32_t> cols;
        for (std::size_t j = 0; j < per_row; ++j) cols.push_back(col(rng));
        std::sort(cols.begin(), cols.end());
        cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
        for (auto c : cols) {
            m.col.push_back(c);
            m.val.push_back(1.0 / static_cast<double>(cols.size()));
        }
        m.row_ptr.push_back(m.col.size());
    }
    return m;
}

void report(const char* name, double serial, double parallel, double diff) {
    std::printf("%-10s serial %9.3f ms  parallel %9.3f ms  speedup %5.2fx  max|diff| %.2e\n", name, serial * 1e3,
                parallel * 1e3, serial / parallel, diff);
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

int main() {
    std::mt19937_64 rng(7);
    const int threads = omp_get_max_threads();
    k::set_workers(threads);
    std::printf("OpenMP threads: %d\n", threads);

    {
        const std::size_t m = 512, kk = 64, n = 512;
        const auto a = random_vec(m * kk, rng), b = random_vec(kk * n, rng);
        std::vector<double> cs(m * n), cp(m * n);
        const double ts = best_of(5, [&] { std::fill(cs.begin(), cs.end(), 0.0); k::gemm_accumulate_serial(m, kk, n, a.data(), b.data(), cs.data()); });
        const double tp = best_of(5, [&] { std::fill(cp.begin(), cp.end(), 0.0); k::gemm_accumulate_parallel(m, kk, n, a.data(), b.data(), cp.data()); });
        report("gemm", ts, tp, max_diff(cs, cp));
    }
    {
        const std::size_t n = 2000, cols = 64;
        const CsrMatrix s = random_csr(n, 40, rng);
        const auto x = random_vec(n * cols, rng);
        std::vector<double> ys(n * cols), yp(n * cols);
        const double ts = best_of(5, [&] { k::spmm_serial(s, x.data(), cols, ys.data()); });
        const double tp = best_of(5, [&] { k::spmm_parallel(s, x.data(), cols, yp.data()); });
        report("spmm", ts, tp, max_diff(ys, yp));
    }
    {
        const std::size_t n = 1000, dim = 64, hidden = 64;
        const auto table = random_vec(n * dim, rng);
        const auto w1a = random_vec(dim * hidden, rng), b1a = random_vec(hidden, rng), w2a = random_vec(hidden, rng);
        const auto w1b = random_vec(dim * hidden, rng), b1b = random_vec(hidden, rng), w2b = random_vec(hidden, rng);
        const k::MlpView alpha{w1a.data(), b1a.data(), w2a.data(), 0.1, dim, hidden};
        const k::MlpView beta{w1b.data(), b1b.data(), w2b.data(), -0.1, dim, hidden};
        std::vector<std::size_t> targets(n), refs(20);
        for (std::size_t i = 0; i < n; ++i) targets[i] = i;
        for (std::size_t i = 0; i < refs.size(); ++i) refs[i] = (i * 37) % n;
        std::vector<double> as(n * refs.size()), bs(as.size()), ap(as.size()), bp(as.size());
        const double ts = best_of(3, [&] { k::pair_mlp_serial(table.data(), dim, targets, refs, alpha, beta, as.data(), bs.data()); });
        const double tp = best_of(3, [&] { k::pair_mlp_parallel(table.data(), dim, targets, refs, alpha, beta, ap.data(), bp.data()); });
        report("pair_mlp", ts, tp, std::max(max_diff(as, ap), max_diff(bs, bp)));
    }
    return 0;
}
