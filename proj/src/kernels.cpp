#include "mqc/kernels.hpp"

#include <cmath>
#include <cstring>

namespace mqc::kernels {

namespace {

constexpr std::size_t kReduceChunk = 4096;

inline float conv_cell(const Conv2dShape& s, const float* x, const float* w, int oc, int oy,
                       int ox) {
    const int oh = s.out_h();
    (void)oh;
    float acc = 0.0f;
    for (int ic = 0; ic < s.in_c; ++ic) {
        const float* xc = x + static_cast<std::size_t>(ic) * s.in_h * s.in_w;
        const float* wc = w + ((static_cast<std::size_t>(oc) * s.in_c + ic) * 9);
        for (int ky = 0; ky < 3; ++ky) {
            const int iy = oy * s.stride + ky - 1;
            if (iy < 0 || iy >= s.in_h) continue;
            for (int kx = 0; kx < 3; ++kx) {
                const int ix = ox * s.stride + kx - 1;
                if (ix < 0 || ix >= s.in_w) continue;
                acc += wc[ky * 3 + kx] * xc[iy * s.in_w + ix];
            }
        }
    }
    return acc;
}

inline float conv_input_cell(const Conv2dShape& s, const float* dy, const float* w, int ic,
                             int iy, int ix) {
    const int oh = s.out_h();
    const int ow = s.out_w();
    float acc = 0.0f;
    for (int oc = 0; oc < s.out_c; ++oc) {
        const float* dyc = dy + static_cast<std::size_t>(oc) * oh * ow;
        const float* wc = w + ((static_cast<std::size_t>(oc) * s.in_c + ic) * 9);
        for (int ky = 0; ky < 3; ++ky) {
            const int num = iy - ky + 1; // oy*stride == iy - ky + 1
            if (num < 0 || num % s.stride != 0) continue;
            const int oy = num / s.stride;
            if (oy >= oh) continue;
            for (int kx = 0; kx < 3; ++kx) {
                const int numx = ix - kx + 1;
                if (numx < 0 || numx % s.stride != 0) continue;
                const int ox = numx / s.stride;
                if (ox >= ow) continue;
                acc += wc[ky * 3 + kx] * dyc[oy * ow + ox];
            }
        }
    }
    return acc;
}

inline float conv_weight_cell(const Conv2dShape& s, const float* x, const float* dy, int oc,
                              int ic, int ky, int kx) {
    const int oh = s.out_h();
    const int ow = s.out_w();
    const float* xc = x + static_cast<std::size_t>(ic) * s.in_h * s.in_w;
    const float* dyc = dy + static_cast<std::size_t>(oc) * oh * ow;
    float acc = 0.0f;
    for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy * s.stride + ky - 1;
        if (iy < 0 || iy >= s.in_h) continue;
        for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s.stride + kx - 1;
            if (ix < 0 || ix >= s.in_w) continue;
            acc += dyc[oy * ow + ox] * xc[iy * s.in_w + ix];
        }
    }
    return acc;
}

inline float bias_cell(const Conv2dShape& s, const float* dy, int oc) {
    const int n = s.out_h() * s.out_w();
    const float* dyc = dy + static_cast<std::size_t>(oc) * n;
    float acc = 0.0f;
    for (int i = 0; i < n; ++i) acc += dyc[i];
    return acc;
}

inline void avgpool_cell(const float* x, int h, int w, int f, int c, int py, int px, int pw,
                         float* y) {
    const float* xc = x + static_cast<std::size_t>(c) * h * w;
    float acc = 0.0f;
    for (int dy = 0; dy < f; ++dy)
        for (int dx = 0; dx < f; ++dx) acc += xc[(py * f + dy) * w + (px * f + dx)];
    y[(static_cast<std::size_t>(c) * (h / f) + py) * pw + px] = acc / static_cast<float>(f * f);
}

inline double entropy_chunk(const float* p, std::size_t lo, std::size_t hi, bool* ok) {
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        const double v = p[i];
        if (v < 0.0 || v > 1.0) {
            *ok = false;
            return 0.0;
        }
        if (v > 0.0 && v < 1.0) acc += -v * std::log(v) - (1.0 - v) * std::log(1.0 - v);
    }
    return acc;
}

inline double std_chunk(const std::vector<const float*>& passes, std::size_t lo, std::size_t hi) {
    const double np = static_cast<double>(passes.size());
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        double mean = 0.0;
        for (const float* p : passes) mean += p[i];
        mean /= np;
        double var = 0.0;
        for (const float* p : passes) {
            const double d = p[i] - mean;
            var += d * d;
        }
        acc += std::sqrt(var / np);
    }
    return acc;
}

inline std::uint8_t erode_cell(const std::uint8_t* in, int nz, int ny, int nx, int z, int y,
                               int x) {
    const auto idx = [&](int zz, int yy, int xx) {
        return (static_cast<std::size_t>(zz) * ny + yy) * nx + xx;
    };
    if (!in[idx(z, y, x)]) return 0;
    // Out-of-volume neighbours count as background.
    if (z == 0 || !in[idx(z - 1, y, x)]) return 0;
    if (z == nz - 1 || !in[idx(z + 1, y, x)]) return 0;
    if (y == 0 || !in[idx(z, y - 1, x)]) return 0;
    if (y == ny - 1 || !in[idx(z, y + 1, x)]) return 0;
    if (x == 0 || !in[idx(z, y, x - 1)]) return 0;
    if (x == nx - 1 || !in[idx(z, y, x + 1)]) return 0;
    return 1;
}

inline std::uint8_t dilate_cell(const std::uint8_t* in, int nz, int ny, int nx, int z, int y,
                                int x) {
    const auto idx = [&](int zz, int yy, int xx) {
        return (static_cast<std::size_t>(zz) * ny + yy) * nx + xx;
    };
    if (in[idx(z, y, x)]) return 1;
    if (z > 0 && in[idx(z - 1, y, x)]) return 1;
    if (z < nz - 1 && in[idx(z + 1, y, x)]) return 1;
    if (y > 0 && in[idx(z, y - 1, x)]) return 1;
    if (y < ny - 1 && in[idx(z, y + 1, x)]) return 1;
    if (x > 0 && in[idx(z, y, x - 1)]) return 1;
    if (x < nx - 1 && in[idx(z, y, x + 1)]) return 1;
    return 0;
}

} // namespace

// ---------------------------------------------------------------------------
// serial reference
// ---------------------------------------------------------------------------

namespace serial {

void conv2d_forward(const Conv2dShape& s, const float* x, const float* w, const float* b,
                    float* y) {
    const int oh = s.out_h();
    const int ow = s.out_w();
    for (int oc = 0; oc < s.out_c; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                y[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox] =
                    b[oc] + conv_cell(s, x, w, oc, oy, ox);
}

void conv2d_backward_input(const Conv2dShape& s, const float* dy, const float* w, float* dx) {
    for (int ic = 0; ic < s.in_c; ++ic)
        for (int iy = 0; iy < s.in_h; ++iy)
            for (int ix = 0; ix < s.in_w; ++ix)
                dx[(static_cast<std::size_t>(ic) * s.in_h + iy) * s.in_w + ix] =
                    conv_input_cell(s, dy, w, ic, iy, ix);
}

void conv2d_backward_params(const Conv2dShape& s, const float* x, const float* dy, float* dw,
                            float* db) {
    for (int oc = 0; oc < s.out_c; ++oc) {
        for (int ic = 0; ic < s.in_c; ++ic)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx)
                    dw[((static_cast<std::size_t>(oc) * s.in_c + ic) * 3 + ky) * 3 + kx] +=
                        conv_weight_cell(s, x, dy, oc, ic, ky, kx);
        db[oc] += bias_cell(s, dy, oc);
    }
}

void avgpool2d(const float* x, int c, int h, int w, int f, float* y) {
    const int ph = h / f;
    const int pw = w / f;
    for (int ch = 0; ch < c; ++ch)
        for (int py = 0; py < ph; ++py)
            for (int px = 0; px < pw; ++px) avgpool_cell(x, h, w, f, ch, py, px, pw, y);
}

void global_avgpool(const float* x, int c, int hw, float* y) {
    for (int ch = 0; ch < c; ++ch) {
        float acc = 0.0f;
        const float* xc = x + static_cast<std::size_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) acc += xc[i];
        y[ch] = acc / static_cast<float>(hw);
    }
}

double sum(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

VoxelCounts overlap_counts(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
    VoxelCounts c;
    for (std::size_t i = 0; i < n; ++i) {
        c.a += a[i] != 0;
        c.b += b[i] != 0;
        c.both += (a[i] != 0) && (b[i] != 0);
    }
    return c;
}

double binary_entropy_sum(const float* p, std::size_t n, bool* ok) {
    *ok = true;
    return entropy_chunk(p, 0, n, ok);
}

double std_across_passes_sum(const std::vector<const float*>& passes, std::size_t n) {
    return std_chunk(passes, 0, n);
}

void erode_step(const std::uint8_t* in, std::uint8_t* out, int nz, int ny, int nx) {
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                out[(static_cast<std::size_t>(z) * ny + y) * nx + x] =
                    erode_cell(in, nz, ny, nx, z, y, x);
}

void dilate_step(const std::uint8_t* in, std::uint8_t* out, int nz, int ny, int nx) {
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                out[(static_cast<std::size_t>(z) * ny + y) * nx + x] =
                    dilate_cell(in, nz, ny, nx, z, y, x);
}

} // namespace serial

// ---------------------------------------------------------------------------
// OpenMP
// ---------------------------------------------------------------------------

namespace par {

void conv2d_forward(const Conv2dShape& s, const float* x, const float* w, const float* b,
                    float* y) {
    const int oh = s.out_h();
    const int ow = s.out_w();
#pragma omp parallel for schedule(static) collapse(2)
    for (int oc = 0; oc < s.out_c; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                y[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox] =
                    b[oc] + conv_cell(s, x, w, oc, oy, ox);
}

void conv2d_backward_input(const Conv2dShape& s, const float* dy, const float* w, float* dx) {
#pragma omp parallel for schedule(static) collapse(2)
    for (int ic = 0; ic < s.in_c; ++ic)
        for (int iy = 0; iy < s.in_h; ++iy)
            for (int ix = 0; ix < s.in_w; ++ix)
                dx[(static_cast<std::size_t>(ic) * s.in_h + iy) * s.in_w + ix] =
                    conv_input_cell(s, dy, w, ic, iy, ix);
}

void conv2d_backward_params(const Conv2dShape& s, const float* x, const float* dy, float* dw,
                            float* db) {
#pragma omp parallel for schedule(static) collapse(2)
    for (int oc = 0; oc < s.out_c; ++oc)
        for (int ic = 0; ic < s.in_c; ++ic)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx)
                    dw[((static_cast<std::size_t>(oc) * s.in_c + ic) * 3 + ky) * 3 + kx] +=
                        conv_weight_cell(s, x, dy, oc, ic, ky, kx);
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < s.out_c; ++oc) db[oc] += bias_cell(s, dy, oc);
}

void avgpool2d(const float* x, int c, int h, int w, int f, float* y) {
    const int ph = h / f;
    const int pw = w / f;
#pragma omp parallel for schedule(static) collapse(2)
    for (int ch = 0; ch < c; ++ch)
        for (int py = 0; py < ph; ++py)
            for (int px = 0; px < pw; ++px) avgpool_cell(x, h, w, f, ch, py, px, pw, y);
}

void global_avgpool(const float* x, int c, int hw, float* y) {
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        float acc = 0.0f;
        const float* xc = x + static_cast<std::size_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) acc += xc[i];
        y[ch] = acc / static_cast<float>(hw);
    }
}

double sum(const float* x, std::size_t n) {
    const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<double> partial(chunks, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
        const std::size_t hi = std::min(n, lo + kReduceChunk);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += x[i];
        partial[static_cast<std::size_t>(c)] = acc;
    }
    double total = 0.0;
    for (const double v : partial) total += v; // fixed combine order
    return total;
}

VoxelCounts overlap_counts(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
    VoxelCounts c;
    std::int64_t sa = 0, sb = 0, sboth = 0;
#pragma omp parallel for schedule(static) reduction(+ : sa, sb, sboth)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        sa += a[i] != 0;
        sb += b[i] != 0;
        sboth += (a[i] != 0) && (b[i] != 0);
    }
    c.a = sa;
    c.b = sb;
    c.both = sboth;
    return c;
}

double binary_entropy_sum(const float* p, std::size_t n, bool* ok) {
    const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<double> partial(chunks, 0.0);
    bool all_ok = true;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
        const std::size_t hi = std::min(n, lo + kReduceChunk);
        bool chunk_ok = true;
        partial[static_cast<std::size_t>(c)] = entropy_chunk(p, lo, hi, &chunk_ok);
        if (!chunk_ok) {
#pragma omp atomic write
            all_ok = false;
        }
    }
    *ok = all_ok;
    if (!all_ok) return 0.0;
    double total = 0.0;
    for (const double v : partial) total += v;
    return total;
}

double std_across_passes_sum(const std::vector<const float*>& passes, std::size_t n) {
    const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<double> partial(chunks, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
        const std::size_t hi = std::min(n, lo + kReduceChunk);
        partial[static_cast<std::size_t>(c)] = std_chunk(passes, lo, hi);
    }
    double total = 0.0;
    for (const double v : partial) total += v;
    return total;
}

void erode_step(const std::uint8_t* in, std::uint8_t* out, int nz, int ny, int nx) {
#pragma omp parallel for schedule(static)
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                out[(static_cast<std::size_t>(z) * ny + y) * nx + x] =
                    erode_cell(in, nz, ny, nx, z, y, x);
}

void dilate_step(const std::uint8_t* in, std::uint8_t* out, int nz, int ny, int nx) {
#pragma omp parallel for schedule(static)
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                out[(static_cast<std::size_t>(z) * ny + y) * nx + x] =
                    dilate_cell(in, nz, ny, nx, z, y, x);
}

} // namespace par

} // namespace mqc::kernels
