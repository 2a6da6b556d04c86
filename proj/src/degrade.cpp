#include "mqc/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "mqc/kernels.hpp"
#include "mqc/rng.hpp"

namespace mqc {

const char* to_string(DegradationKind k) {
    switch (k) {
        case DegradationKind::erode: return "erode";
        case DegradationKind::dilate: return "dilate";
        case DegradationKind::drop_component: return "drop_component";
        case DegradationKind::translate: return "translate";
        case DegradationKind::merge_neighbor: return "merge_neighbor";
    }
    throw ValueError("unknown degradation kind");
}

DegradationKind degradation_kind_from_string(const std::string& s) {
    if (s == "erode") return DegradationKind::erode;
    if (s == "dilate") return DegradationKind::dilate;
    if (s == "drop_component") return DegradationKind::drop_component;
    if (s == "translate") return DegradationKind::translate;
    if (s == "merge_neighbor") return DegradationKind::merge_neighbor;
    throw ValueError("unknown degradation kind: " + s);
}

namespace {

Mask morph(const Mask& mask, int iterations, bool erode) {
    Mask out = mask;
    std::vector<std::uint8_t> tmp(mask.data.size());
    for (int it = 0; it < iterations; ++it) {
        if (erode)
            kernels::par::erode_step(out.data.data(), tmp.data(), out.shape.z, out.shape.y,
                                     out.shape.x);
        else
            kernels::par::dilate_step(out.data.data(), tmp.data(), out.shape.z, out.shape.y,
                                      out.shape.x);
        out.data.swap(tmp);
    }
    return out;
}

Mask drop_smallest(const Mask& mask, int count) {
    const ComponentLabels cc = connected_components(mask);
    const auto n_comp = cc.sizes.size();
    if (n_comp == 0 || count <= 0) return mask;

    // Smallest first; ties resolved by earliest voxel so the pick is stable.
    std::vector<std::size_t> order(n_comp);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (cc.sizes[a] != cc.sizes[b]) return cc.sizes[a] < cc.sizes[b];
        return cc.first_voxel[a] < cc.first_voxel[b];
    });
    std::vector<bool> dropped(n_comp + 1, false);
    for (std::size_t i = 0; i < std::min<std::size_t>(count, n_comp); ++i)
        dropped[order[i] + 1] = true;

    Mask out = mask;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (out.data[i] && dropped[static_cast<std::size_t>(cc.labels[i])]) out.data[i] = 0;
    return out;
}

Mask translate(const Mask& mask, int voxels, Rng& rng) {
    const int axis = static_cast<int>(rng.uniform_int(0, 2)); // 0=z 1=y 2=x
    const int dir = rng.uniform() < 0.5 ? -1 : 1;
    const int dz = axis == 0 ? dir * voxels : 0;
    const int dy = axis == 1 ? dir * voxels : 0;
    const int dx = axis == 2 ? dir * voxels : 0;

    Mask out = mask;
    std::fill(out.data.begin(), out.data.end(), 0);
    for (int z = 0; z < mask.shape.z; ++z)
        for (int y = 0; y < mask.shape.y; ++y)
            for (int x = 0; x < mask.shape.x; ++x) {
                if (!mask.at(z, y, x)) continue;
                const int zz = z + dz, yy = y + dy, xx = x + dx;
                if (zz < 0 || zz >= mask.shape.z || yy < 0 || yy >= mask.shape.y || xx < 0 ||
                    xx >= mask.shape.x)
                    continue;
                out.at(zz, yy, xx) = 1;
            }
    return out;
}

// Union an ellipsoidal blob just outside a randomly chosen bounding-box face.
Mask merge_neighbor(const Mask& mask, int radius, Rng& rng) {
    int z0 = mask.shape.z, z1 = -1, y0 = mask.shape.y, y1 = -1, x0 = mask.shape.x, x1 = -1;
    for (int z = 0; z < mask.shape.z; ++z)
        for (int y = 0; y < mask.shape.y; ++y)
            for (int x = 0; x < mask.shape.x; ++x)
                if (mask.at(z, y, x)) {
                    z0 = std::min(z0, z); z1 = std::max(z1, z);
                    y0 = std::min(y0, y); y1 = std::max(y1, y);
                    x0 = std::min(x0, x); x1 = std::max(x1, x);
                }
    if (z1 < z0) return mask; // empty mask: nothing to attach to

    const int axis = static_cast<int>(rng.uniform_int(1, 2)); // in-plane: 1=y 2=x
    const int dir = rng.uniform() < 0.5 ? -1 : 1;
    double cz = 0.5 * (z0 + z1);
    double cy = 0.5 * (y0 + y1);
    double cx = 0.5 * (x0 + x1);
    if (axis == 1) cy = dir < 0 ? y0 - radius : y1 + radius;
    else cx = dir < 0 ? x0 - radius : x1 + radius;
    cz = std::clamp(cz, 0.0, mask.shape.z - 1.0);
    cy = std::clamp(cy, 0.0, mask.shape.y - 1.0);
    cx = std::clamp(cx, 0.0, mask.shape.x - 1.0);

    // Flatten along z so the blob reads as an in-plane neighbour structure.
    const double rz = std::max(1.0, radius * 0.5);
    Mask out = mask;
    for (int z = 0; z < mask.shape.z; ++z)
        for (int y = 0; y < mask.shape.y; ++y)
            for (int x = 0; x < mask.shape.x; ++x) {
                const double ez = (z - cz) / rz;
                const double ey = (y - cy) / radius;
                const double ex = (x - cx) / radius;
                if (ez * ez + ey * ey + ex * ex <= 1.0) out.at(z, y, x) = 1;
            }
    return out;
}

} // namespace

Mask degrade(const Mask& mask, const DegradationSpec& spec) {
    mask.validate();
    if (!mask.is_binary()) throw ValueError("degrade needs a binary mask");
    if (spec.magnitude < 0) throw ValueError("degradation magnitude must be non-negative");
    if (spec.magnitude == 0) return mask;

    Rng rng(mix_u64(spec.seed));
    switch (spec.kind) {
        case DegradationKind::erode: return morph(mask, spec.magnitude, true);
        case DegradationKind::dilate: return morph(mask, spec.magnitude, false);
        case DegradationKind::drop_component: return drop_smallest(mask, spec.magnitude);
        case DegradationKind::translate: return translate(mask, spec.magnitude, rng);
        case DegradationKind::merge_neighbor: return merge_neighbor(mask, spec.magnitude, rng);
    }
    throw ValueError("unknown degradation kind");
}

ComponentLabels connected_components(const Mask& mask) {
    const int nz = mask.shape.z, ny = mask.shape.y, nx = mask.shape.x;
    ComponentLabels cc;
    cc.labels.assign(mask.data.size(), 0);
    std::vector<std::size_t> stack;
    std::int32_t next = 0;
    for (std::size_t start = 0; start < mask.data.size(); ++start) {
        if (!mask.data[start] || cc.labels[start]) continue;
        ++next;
        cc.sizes.push_back(0);
        cc.first_voxel.push_back(start);
        stack.push_back(start);
        cc.labels[start] = next;
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            ++cc.sizes[next - 1];
            const int x = static_cast<int>(idx % nx);
            const int y = static_cast<int>((idx / nx) % ny);
            const int z = static_cast<int>(idx / (static_cast<std::size_t>(nx) * ny));
            const int dzs[6] = {-1, 1, 0, 0, 0, 0};
            const int dys[6] = {0, 0, -1, 1, 0, 0};
            const int dxs[6] = {0, 0, 0, 0, -1, 1};
            for (int d = 0; d < 6; ++d) {
                const int zz = z + dzs[d], yy = y + dys[d], xx = x + dxs[d];
                if (zz < 0 || zz >= nz || yy < 0 || yy >= ny || xx < 0 || xx >= nx) continue;
                const std::size_t nidx = grid_index(mask.shape, zz, yy, xx);
                if (mask.data[nidx] && !cc.labels[nidx]) {
                    cc.labels[nidx] = next;
                    stack.push_back(nidx);
                }
            }
        }
    }
    return cc;
}

} // namespace mqc
