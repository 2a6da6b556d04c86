#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "mqc/kernels.hpp"
#include "mqc/rng.hpp"

using namespace mqc;

namespace {

double time_ms(const std::function<void()>& fn, int iters) {
    fn(); // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < iters; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

void row(const char* name, double serial_ms, double par_ms, double diff) {
    std::printf("%-28s %10.3f %10.3f %8.2fx %12.3e\n", name, serial_ms, par_ms,
                serial_ms / par_ms, diff);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP kernel benchmark"};
    int iters = 5;
    app.add_option("--iters", iters, "iterations per kernel")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled at build time\n");
#endif
    std::printf("%-28s %10s %10s %9s %12s\n", "kernel", "serial ms", "omp ms", "speedup",
                "max |diff|");

    Rng rng(42);

    { // conv2d forward + backward, a mid-stage size
        kernels::Conv2dShape s;
        s.in_c = 32;
        s.in_h = s.in_w = 64;
        s.out_c = 64;
        s.stride = 2;
        const std::size_t xn = static_cast<std::size_t>(s.in_c) * s.in_h * s.in_w;
        const std::size_t yn = static_cast<std::size_t>(s.out_c) * s.out_h() * s.out_w();
        std::vector<float> x(xn), w(static_cast<std::size_t>(s.out_c) * s.in_c * 9),
            b(s.out_c), y0(yn), y1(yn);
        for (auto& v : x) v = static_cast<float>(rng.normal());
        for (auto& v : w) v = static_cast<float>(rng.normal() * 0.1);
        for (auto& v : b) v = static_cast<float>(rng.normal() * 0.1);

        const double t_s = time_ms([&] { kernels::serial::conv2d_forward(s, x.data(), w.data(), b.data(), y0.data()); }, iters);
        const double t_p = time_ms([&] { kernels::par::conv2d_forward(s, x.data(), w.data(), b.data(), y1.data()); }, iters);
        row("conv2d_forward 32x64x64", t_s, t_p, max_abs_diff(y0, y1));

        std::vector<float> dy(yn);
        for (auto& v : dy) v = static_cast<float>(rng.normal());
        std::vector<float> dx0(xn), dx1(xn);
        const double bi_s = time_ms([&] { kernels::serial::conv2d_backward_input(s, dy.data(), w.data(), dx0.data()); }, iters);
        const double bi_p = time_ms([&] { kernels::par::conv2d_backward_input(s, dy.data(), w.data(), dx1.data()); }, iters);
        row("conv2d_backward_input", bi_s, bi_p, max_abs_diff(dx0, dx1));

        std::vector<float> dw0(w.size()), dw1(w.size()), db0(b.size()), db1(b.size());
        const double bp_s = time_ms([&] {
            std::fill(dw0.begin(), dw0.end(), 0.0f);
            std::fill(db0.begin(), db0.end(), 0.0f);
            kernels::serial::conv2d_backward_params(s, x.data(), dy.data(), dw0.data(), db0.data());
        }, iters);
        const double bp_p = time_ms([&] {
            std::fill(dw1.begin(), dw1.end(), 0.0f);
            std::fill(db1.begin(), db1.end(), 0.0f);
            kernels::par::conv2d_backward_params(s, x.data(), dy.data(), dw1.data(), db1.data());
        }, iters);
        row("conv2d_backward_params", bp_s, bp_p, max_abs_diff(dw0, dw1));
    }

    { // stem pooling on a full-size slice pair
        std::vector<float> x(2u * 256 * 256), y0(2u * 32 * 32), y1(2u * 32 * 32);
        for (auto& v : x) v = static_cast<float>(rng.uniform());
        const double t_s = time_ms([&] { kernels::serial::avgpool2d(x.data(), 2, 256, 256, 8, y0.data()); }, iters);
        const double t_p = time_ms([&] { kernels::par::avgpool2d(x.data(), 2, 256, 256, 8, y1.data()); }, iters);
        row("avgpool2d 2x256x256 /8", t_s, t_p, max_abs_diff(y0, y1));
    }

    { // voxel counting on a 128^3 mask pair
        const std::size_t n = 128u * 128 * 128;
        std::vector<std::uint8_t> a(n), b(n);
        for (auto& v : a) v = rng.uniform() < 0.3 ? 1 : 0;
        for (auto& v : b) v = rng.uniform() < 0.3 ? 1 : 0;
        kernels::VoxelCounts c0, c1;
        const double t_s = time_ms([&] { c0 = kernels::serial::overlap_counts(a.data(), b.data(), n); }, iters);
        const double t_p = time_ms([&] { c1 = kernels::par::overlap_counts(a.data(), b.data(), n); }, iters);
        const double diff = std::abs(static_cast<double>(c0.both - c1.both)) +
                            std::abs(static_cast<double>(c0.a - c1.a)) +
                            std::abs(static_cast<double>(c0.b - c1.b));
        row("overlap_counts 128^3", t_s, t_p, diff);
    }

    { // morphology step on a 128^3 mask
        const int d = 128;
        std::vector<std::uint8_t> in(static_cast<std::size_t>(d) * d * d), o0(in.size()),
            o1(in.size());
        for (auto& v : in) v = rng.uniform() < 0.5 ? 1 : 0;
        const double t_s = time_ms([&] { kernels::serial::erode_step(in.data(), o0.data(), d, d, d); }, iters);
        const double t_p = time_ms([&] { kernels::par::erode_step(in.data(), o1.data(), d, d, d); }, iters);
        double diff = 0.0;
        for (std::size_t i = 0; i < in.size(); ++i) diff += std::abs(o0[i] - o1[i]);
        row("erode_step 128^3", t_s, t_p, diff);
    }

    { // entropy of a 4M-voxel probability volume
        const std::size_t n = 1u << 22;
        std::vector<float> p(n);
        for (auto& v : p) v = static_cast<float>(rng.uniform());
        bool ok0 = true, ok1 = true;
        double e0 = 0, e1 = 0;
        const double t_s = time_ms([&] { e0 = kernels::serial::binary_entropy_sum(p.data(), n, &ok0); }, iters);
        const double t_p = time_ms([&] { e1 = kernels::par::binary_entropy_sum(p.data(), n, &ok1); }, iters);
        row("binary_entropy_sum 4M", t_s, t_p, std::abs(e0 - e1));
    }

    { // per-voxel std across 3 passes
        const std::size_t n = 1u << 21;
        std::vector<float> p1(n), p2(n), p3(n);
        for (std::size_t i = 0; i < n; ++i) {
            p1[i] = static_cast<float>(rng.uniform());
            p2[i] = static_cast<float>(rng.uniform());
            p3[i] = static_cast<float>(rng.uniform());
        }
        const std::vector<const float*> passes{p1.data(), p2.data(), p3.data()};
        double s0 = 0, s1 = 0;
        const double t_s = time_ms([&] { s0 = kernels::serial::std_across_passes_sum(passes, n); }, iters);
        const double t_p = time_ms([&] { s1 = kernels::par::std_across_passes_sum(passes, n); }, iters);
        row("std_across_passes 3x2M", t_s, t_p, std::abs(s0 - s1));
    }

    return 0;
}
