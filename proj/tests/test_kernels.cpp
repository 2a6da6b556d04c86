#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mqc/kernels.hpp"
#include "support/test_util.hpp"

using namespace mqc;
using namespace mqc::kernels;

namespace {

std::vector<float> random_floats(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

template <typename Fn>
auto with_threads(int n, Fn&& fn) {
#ifdef _OPENMP
    const int before = omp_get_max_threads();
    omp_set_num_threads(n);
    auto result = fn();
    omp_set_num_threads(before);
    return result;
#else
    (void)n;
    return fn();
#endif
}

} // namespace

TEST_CASE("conv2d forward/backward: parallel equals serial bitwise") {
    Rng rng(1);
    for (const int stride : {1, 2}) {
        Conv2dShape s;
        s.in_c = 3;
        s.in_h = s.in_w = 17; // odd on purpose
        s.out_c = 5;
        s.stride = stride;
        const auto x = random_floats(static_cast<std::size_t>(s.in_c) * s.in_h * s.in_w, rng);
        const auto w = random_floats(static_cast<std::size_t>(s.out_c) * s.in_c * 9, rng);
        const auto b = random_floats(s.out_c, rng);
        const std::size_t yn = static_cast<std::size_t>(s.out_c) * s.out_h() * s.out_w();

        std::vector<float> y_serial(yn), y_par(yn);
        serial::conv2d_forward(s, x.data(), w.data(), b.data(), y_serial.data());
        par::conv2d_forward(s, x.data(), w.data(), b.data(), y_par.data());
        REQUIRE(y_serial == y_par);

        const auto dy = random_floats(yn, rng);
        std::vector<float> dx_serial(x.size()), dx_par(x.size());
        serial::conv2d_backward_input(s, dy.data(), w.data(), dx_serial.data());
        par::conv2d_backward_input(s, dy.data(), w.data(), dx_par.data());
        REQUIRE(dx_serial == dx_par);

        std::vector<float> dw_serial(w.size(), 0), dw_par(w.size(), 0);
        std::vector<float> db_serial(b.size(), 0), db_par(b.size(), 0);
        serial::conv2d_backward_params(s, x.data(), dy.data(), dw_serial.data(),
                                       db_serial.data());
        par::conv2d_backward_params(s, x.data(), dy.data(), dw_par.data(), db_par.data());
        REQUIRE(dw_serial == dw_par);
        REQUIRE(db_serial == db_par);
    }
}

TEST_CASE("conv2d backward_input inverts the forward stencil") {
    // Single input pixel set: dx of a one-hot dy must equal the weight.
    Conv2dShape s;
    s.in_c = 1;
    s.in_h = s.in_w = 5;
    s.out_c = 1;
    s.stride = 1;
    std::vector<float> w(9);
    for (int i = 0; i < 9; ++i) w[i] = static_cast<float>(i + 1);
    std::vector<float> dy(static_cast<std::size_t>(s.out_h()) * s.out_w(), 0.0f);
    dy[2 * s.out_w() + 2] = 1.0f; // center
    std::vector<float> dx(25);
    serial::conv2d_backward_input(s, dy.data(), w.data(), dx.data());
    // dx[iy][ix] = w[ky][kx] with iy = 2 + ky - 1, ix = 2 + kx - 1.
    for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
            REQUIRE(dx[(1 + ky) * 5 + (1 + kx)] == w[ky * 3 + kx]);
}

TEST_CASE("pooling kernels: parity and values") {
    Rng rng(2);
    const auto x = random_floats(2u * 16 * 16, rng);
    std::vector<float> y_serial(2u * 4 * 4), y_par(2u * 4 * 4);
    serial::avgpool2d(x.data(), 2, 16, 16, 4, y_serial.data());
    par::avgpool2d(x.data(), 2, 16, 16, 4, y_par.data());
    REQUIRE(y_serial == y_par);

    std::vector<float> constant(1u * 8 * 8, 3.5f);
    std::vector<float> pooled(1u * 2 * 2);
    serial::avgpool2d(constant.data(), 1, 8, 8, 4, pooled.data());
    for (const float v : pooled) REQUIRE(v == doctest::Approx(3.5f));

    std::vector<float> g_serial(2), g_par(2);
    serial::global_avgpool(x.data(), 2, 16 * 16, g_serial.data());
    par::global_avgpool(x.data(), 2, 16 * 16, g_par.data());
    REQUIRE(g_serial == g_par);
}

TEST_CASE("reductions: parity within fp tolerance, counts exact") {
    Rng rng(3);
    const std::size_t n = 100000;
    const auto x = random_floats(n, rng, 0.0, 1.0);

    const double s_serial = serial::sum(x.data(), n);
    const double s_par = par::sum(x.data(), n);
    CHECK(s_par == doctest::Approx(s_serial).epsilon(1e-12));

    bool ok_serial = true, ok_par = true;
    const double e_serial = serial::binary_entropy_sum(x.data(), n, &ok_serial);
    const double e_par = par::binary_entropy_sum(x.data(), n, &ok_par);
    CHECK(ok_serial);
    CHECK(ok_par);
    CHECK(e_par == doctest::Approx(e_serial).epsilon(1e-12));

    std::vector<float> bad = {0.5f, -0.1f};
    bool ok = true;
    par::binary_entropy_sum(bad.data(), 2, &ok);
    CHECK_FALSE(ok);
    serial::binary_entropy_sum(bad.data(), 2, &ok);
    CHECK_FALSE(ok);

    std::vector<std::uint8_t> a(n), b(n);
    for (auto& v : a) v = rng.uniform() < 0.4;
    for (auto& v : b) v = rng.uniform() < 0.4;
    const auto c_serial = serial::overlap_counts(a.data(), b.data(), n);
    const auto c_par = par::overlap_counts(a.data(), b.data(), n);
    CHECK(c_serial.a == c_par.a);
    CHECK(c_serial.b == c_par.b);
    CHECK(c_serial.both == c_par.both);

    const auto p2 = random_floats(n, rng, 0.0, 1.0);
    const auto p3 = random_floats(n, rng, 0.0, 1.0);
    const std::vector<const float*> passes{x.data(), p2.data(), p3.data()};
    CHECK(par::std_across_passes_sum(passes, n) ==
          doctest::Approx(serial::std_across_passes_sum(passes, n)).epsilon(1e-12));
}

TEST_CASE("morphology steps: parity and boundary handling") {
    Rng rng(4);
    const int d = 20;
    std::vector<std::uint8_t> in(static_cast<std::size_t>(d) * d * d);
    for (auto& v : in) v = rng.uniform() < 0.5;
    std::vector<std::uint8_t> e_serial(in.size()), e_par(in.size());
    serial::erode_step(in.data(), e_serial.data(), d, d, d);
    par::erode_step(in.data(), e_par.data(), d, d, d);
    REQUIRE(e_serial == e_par);

    std::vector<std::uint8_t> d_serial(in.size()), d_par(in.size());
    serial::dilate_step(in.data(), d_serial.data(), d, d, d);
    par::dilate_step(in.data(), d_par.data(), d, d, d);
    REQUIRE(d_serial == d_par);

    // A full grid erodes at the volume boundary.
    std::vector<std::uint8_t> full(27, 1), out(27);
    serial::erode_step(full.data(), out.data(), 3, 3, 3);
    int kept = 0;
    for (const auto v : out) kept += v;
    CHECK(kept == 1); // only the center voxel survives
}

TEST_CASE("float reductions are identical for any thread count") {
    Rng rng(5);
    const std::size_t n = 50000;
    const auto x = random_floats(n, rng, 0.0, 1.0);
    const auto p2 = random_floats(n, rng, 0.0, 1.0);
    const std::vector<const float*> passes{x.data(), p2.data()};

    const double sum1 = with_threads(1, [&] { return par::sum(x.data(), n); });
    const double sum4 = with_threads(4, [&] { return par::sum(x.data(), n); });
    REQUIRE(sum1 == sum4); // bitwise: chunked combine order is fixed

    bool ok = true;
    const double ent1 =
        with_threads(1, [&] { return par::binary_entropy_sum(x.data(), n, &ok); });
    const double ent4 =
        with_threads(4, [&] { return par::binary_entropy_sum(x.data(), n, &ok); });
    REQUIRE(ent1 == ent4);

    const double std1 =
        with_threads(1, [&] { return par::std_across_passes_sum(passes, n); });
    const double std4 =
        with_threads(4, [&] { return par::std_across_passes_sum(passes, n); });
    REQUIRE(std1 == std4);
}
