#pragma once

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "mqc/grid.hpp"
#include "mqc/rng.hpp"

namespace mqc::test {

// Fresh scratch directory under the system temp dir, removed on destruction.
struct TmpDir {
    std::filesystem::path path;

    explicit TmpDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("mqc_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TmpDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
};

inline Mask make_mask(const GridSize& shape, Spacing spacing = {1.0, 1.0, 1.0}) {
    Mask m;
    m.shape = shape;
    m.spacing = spacing;
    m.class_id = 1;
    m.data.assign(shape.voxels(), 0);
    return m;
}

inline Volume make_volume(const GridSize& shape, float fill = 0.0f,
                          Spacing spacing = {1.0, 1.0, 1.0}) {
    Volume v;
    v.shape = shape;
    v.spacing = spacing;
    v.id = "test";
    v.data.assign(shape.voxels(), fill);
    return v;
}

inline void fill_box(Mask& m, int z0, int z1, int y0, int y1, int x0, int x1) {
    for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) m.at(z, y, x) = 1;
}

inline Mask random_mask(const GridSize& shape, double density, Rng& rng) {
    Mask m = make_mask(shape);
    for (auto& v : m.data) v = rng.uniform() < density ? 1 : 0;
    return m;
}

// Reference Dice by explicit triple loop, independent of the library path.
inline double brute_force_dsc(const Mask& a, const Mask& b) {
    long long na = 0, nb = 0, ni = 0;
    for (int z = 0; z < a.shape.z; ++z)
        for (int y = 0; y < a.shape.y; ++y)
            for (int x = 0; x < a.shape.x; ++x) {
                const bool va = a.at(z, y, x) != 0;
                const bool vb = b.at(z, y, x) != 0;
                na += va;
                nb += vb;
                ni += va && vb;
            }
    if (na == 0 && nb == 0) return 1.0;
    if (na == 0 || nb == 0) return 0.0;
    return 2.0 * static_cast<double>(ni) / static_cast<double>(na + nb);
}

// Reference assignment optimum by full permutation enumeration (n <= 8).
inline double brute_force_assignment_cost(const std::vector<double>& cost, int n) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += cost[i * n + perm[i]];
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Reference AP@k by explicit set construction and position scan.
inline double brute_force_ap_at_k(const std::vector<double>& predicted,
                                  const std::vector<double>& actual, int k) {
    const int n = static_cast<int>(predicted.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto by_actual = idx;
    std::stable_sort(by_actual.begin(), by_actual.end(),
                     [&](int a, int b) { return actual[a] < actual[b]; });
    std::vector<bool> in_target(n, false);
    for (int i = 0; i < k; ++i) in_target[by_actual[i]] = true;
    auto ranked = idx;
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](int a, int b) { return predicted[a] < predicted[b]; });
    double ap = 0.0;
    int hits = 0;
    for (int pos = 0; pos < k; ++pos)
        if (in_target[ranked[pos]]) {
            ++hits;
            ap += static_cast<double>(hits) / (pos + 1);
        }
    return ap / k;
}

} // namespace mqc::test
