#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mqc::kernels {

// Inner-loop kernels used by the model, the mask metrics, and the selectors.
// Every kernel exists twice: a plain serial reference under `serial`, and an
// OpenMP version under `par`. The parallel versions are written so that their
// results are bit-identical to a fixed summation order regardless of thread
// count: element-parallel loops carry no cross-thread reductions, and float
// reductions accumulate fixed-size chunks that are combined in chunk order.
// tools/bench_kernels.cpp times the two against each other.

struct Conv2dShape {
    int in_c = 0;
    int in_h = 0;
    int in_w = 0;
    int out_c = 0;
    int stride = 1; // kernel is 3x3, pad 1
    int out_h() const { return (in_h + 2 - 3) / stride + 1; }
    int out_w() const { return (in_w + 2 - 3) / stride + 1; }
};

struct VoxelCounts {
    std::int64_t a = 0;
    std::int64_t b = 0;
    std::int64_t both = 0;
};

namespace serial {

// y[oc,oy,ox] = b[oc] + sum_{ic,ky,kx} w[oc,ic,ky,kx] * x[ic, oy*s+ky-1, ox*s+kx-1]
void conv2d_forward(const Conv2dShape& s, const float* x, const float* w, const float* b,
                    float* y);
// dx from dy (zero-initialises dx).
void conv2d_backward_input(const Conv2dShape& s, const float* dy, const float* w, float* dx);
// Accumulates into dw/db.
void conv2d_backward_params(const Conv2dShape& s, const float* x, const float* dy, float* dw,
                            float* db);

// Non-overlapping f x f mean pooling, per channel.
void avgpool2d(const float* x, int c, int h, int w, int f, float* y);

// Channel-wise global average pool: y[c] = mean over hw.
void global_avgpool(const float* x, int c, int hw, float* y);

double sum(const float* x, std::size_t n);

VoxelCounts overlap_counts(const std::uint8_t* a, const std::uint8_t* b, std::size_t n);

// sum of -p ln p - (1-p) ln(1-p); p outside [0,1] reported via *ok = false.
double binary_entropy_sum(const float* p, std::size_t n, bool* ok);

// sum over voxels of the population std across `passes` aligned volumes.
double std_across_passes_sum(const std::vector<const float*>& passes, std::size_t n);

// One 6-connected erosion/dilation step on a z-major binary grid.
void erode_step(const std::uint8_t* in, std::uint8_t* out, int nz, int ny, int nx);
void dilate_step(const std::uint8_t* in, std::uint8_t* out, int nz, int ny, int nx);

} // namespace serial

namespace par {

void conv2d_forward(const Conv2dShape& s, const float* x, const float* w, const float* b,
                    float* y);
void conv2d_backward_input(const Conv2dShape& s, const float* dy, const float* w, float* dx);
void conv2d_backward_params(const Conv2dShape& s, const float* x, const float* dy, float* dw,
                            float* db);

void avgpool2d(const float* x, int c, int h, int w, int f, float* y);
void global_avgpool(const float* x, int c, int hw, float* y);

double sum(const float* x, std::size_t n);
VoxelCounts overlap_counts(const std::uint8_t* a, const std::uint8_t* b, std::size_t n);
double binary_entropy_sum(const float* p, std::size_t n, bool* ok);
double std_across_passes_sum(const std::vector<const float*>& passes, std::size_t n);

void erode_step(const std::uint8_t* in, std::uint8_t* out, int nz, int ny, int nx);
void dilate_step(const std::uint8_t* in, std::uint8_t* out, int nz, int ny, int nx);

} // namespace par

} // namespace mqc::kernels
