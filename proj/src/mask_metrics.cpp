#include "mqc/mask_metrics.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include "mqc/kernels.hpp"

namespace mqc {

namespace {

struct BoundaryVoxel {
    double z, y, x; // mm
};

// Mask voxels with at least one 6-neighbour outside the mask; voxels past the
// volume edge count as background.
std::vector<BoundaryVoxel> boundary(const Mask& m) {
    std::vector<BoundaryVoxel> out;
    const int nz = m.shape.z, ny = m.shape.y, nx = m.shape.x;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                if (!m.at(z, y, x)) continue;
                const bool edge = z == 0 || !m.at(z - 1, y, x) || z == nz - 1 ||
                                  !m.at(z + 1, y, x) || y == 0 || !m.at(z, y - 1, x) ||
                                  y == ny - 1 || !m.at(z, y + 1, x) || x == 0 ||
                                  !m.at(z, y, x - 1) || x == nx - 1 || !m.at(z, y, x + 1);
                if (edge)
                    out.push_back({z * m.spacing.z, y * m.spacing.y, x * m.spacing.x});
            }
    return out;
}

std::int64_t within_tolerance(const std::vector<BoundaryVoxel>& from,
                              const std::vector<BoundaryVoxel>& to, double tol) {
    const double tol2 = tol * tol;
    std::int64_t hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(from.size()); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& t : to) {
            const double dz = from[i].z - t.z;
            const double dy = from[i].y - t.y;
            const double dx = from[i].x - t.x;
            const double d2 = dz * dz + dy * dy + dx * dx;
            if (d2 < best) best = d2;
            if (best <= tol2) break;
        }
        if (best <= tol2) ++hits;
    }
    return hits;
}

} // namespace

double dsc(const Mask& a, const Mask& b) {
    if (a.shape != b.shape) throw ShapeError("dsc: mask shapes differ");
    const auto c = kernels::par::overlap_counts(a.data.data(), b.data.data(), a.data.size());
    if (c.a == 0 && c.b == 0) return 1.0;
    if (c.a == 0 || c.b == 0) return 0.0;
    return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

double nsd(const Mask& a, const Mask& b, double tolerance_mm) {
    if (a.shape != b.shape) throw ShapeError("nsd: mask shapes differ");
    if (a.spacing != b.spacing) throw ShapeError("nsd: mask spacings differ");
    if (tolerance_mm < 0) throw ValueError("nsd: tolerance must be non-negative");

    const auto ba = boundary(a);
    const auto bb = boundary(b);
    if (ba.empty() && bb.empty()) return 1.0;
    if (ba.empty() || bb.empty()) return 0.0;

    const std::int64_t hits_a = within_tolerance(ba, bb, tolerance_mm);
    const std::int64_t hits_b = within_tolerance(bb, ba, tolerance_mm);
    return static_cast<double>(hits_a + hits_b) / static_cast<double>(ba.size() + bb.size());
}

} // namespace mqc
