#include "mqc/pairing.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <cmath>
#include <cstdint>
#include <limits>

#include "json.hpp"

#include "mqc/errors.hpp"

namespace mqc {

std::vector<double> build_cost_matrix(const std::vector<double>& h, int n) {
    if (n < 1 || static_cast<std::size_t>(n) * n != h.size())
        throw ShapeError("similarity matrix is not square");
    double max_abs = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (!std::isfinite(h[i * n + j]))
                throw ValueError("similarity matrix has non-finite entries");
            if (std::abs(h[i * n + j] - h[j * n + i]) > 1e-9)
                throw ValueError("similarity matrix is not symmetric");
            max_abs = std::max(max_abs, std::abs(h[i * n + j]));
        }
    // Any assignment that touches the diagonal costs more than any that does
    // not: sentinel - (n-1)*max_abs > n*max_abs.
    const double sentinel = 2.0 * (n + 1) * max_abs + 1.0;
    std::vector<double> cost(h.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cost[i * n + j] = i == j ? sentinel : -h[i * n + j];
    return cost;
}

std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
    if (n < 1 || static_cast<std::size_t>(n) * n != cost.size())
        throw ShapeError("cost matrix is not square");
    const double inf = std::numeric_limits<double>::infinity();
    // Potentials u, v; p[j] = row matched to column j (1-based, 0 = none).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j]) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

namespace {

// Exact maximum-weight perfect matching of a small index set by subset DP.
void repair_exact(const std::vector<double>& h, int n, const std::vector<int>& rest,
                  std::vector<std::pair<int, int>>& pairs) {
    const int m = static_cast<int>(rest.size());
    const std::size_t full = std::size_t{1} << m;
    constexpr double kUnset = -std::numeric_limits<double>::infinity();
    std::vector<double> dp(full, kUnset);
    std::vector<std::int8_t> choice(full, -1);
    dp[0] = 0.0;
    for (std::size_t mask = 1; mask < full; ++mask) {
        if (std::popcount(mask) % 2 != 0) continue;
        const int i = std::countr_zero(mask);
        for (int j = i + 1; j < m; ++j) {
            if (!(mask >> j & 1)) continue;
            const std::size_t prev = mask ^ (std::size_t{1} << i) ^ (std::size_t{1} << j);
            if (dp[prev] == kUnset) continue;
            const double cand = dp[prev] + h[rest[i] * n + rest[j]];
            if (cand > dp[mask]) {
                dp[mask] = cand;
                choice[mask] = static_cast<std::int8_t>(j);
            }
        }
    }
    std::size_t mask = full - 1;
    while (mask) {
        const int i = std::countr_zero(mask);
        const int j = choice[mask];
        pairs.push_back({rest[i], rest[j]});
        mask ^= (std::size_t{1} << i) | (std::size_t{1} << j);
    }
}

// Best matching of the endpoints in v (even count), by recursive enumeration.
// Returns true when `out` improves on `current` by more than 1e-12.
bool best_endpoint_matching(const std::vector<double>& h, int n, const std::vector<int>& v,
                            double current, std::vector<std::pair<int, int>>& out) {
    std::vector<int> free_idx = v;
    std::vector<std::pair<int, int>> stack;
    double best = current;
    bool found = false;
    const std::function<void(std::vector<int>&, double)> go = [&](std::vector<int>& free,
                                                                  double acc) {
        if (free.empty()) {
            if (acc > best + 1e-12) {
                best = acc;
                out = stack;
                found = true;
            }
            return;
        }
        const int i = free.front();
        for (std::size_t k = 1; k < free.size(); ++k) {
            const int j = free[k];
            std::vector<int> next;
            next.reserve(free.size() - 2);
            for (std::size_t t = 1; t < free.size(); ++t)
                if (t != k) next.push_back(free[t]);
            stack.push_back({i, j});
            go(next, acc + h[i * n + j]);
            stack.pop_back();
        }
    };
    go(free_idx, 0.0);
    return found;
}

// Re-matches every subset of `k` pairs exhaustively until no subset improves.
bool improve_subset_exchange(const std::vector<double>& h, int n, int k,
                             std::vector<std::pair<int, int>>& pairs) {
    if (static_cast<int>(pairs.size()) < k) return false;
    bool any = false;
    bool improved = true;
    std::vector<std::size_t> pick(k);
    while (improved) {
        improved = false;
        // Iterate k-combinations of pair slots.
        for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) pick[i] = i;
        while (true) {
            std::vector<int> endpoints;
            double current = 0.0;
            for (const std::size_t s : pick) {
                endpoints.push_back(pairs[s].first);
                endpoints.push_back(pairs[s].second);
                current += h[pairs[s].first * n + pairs[s].second];
            }
            std::vector<std::pair<int, int>> better;
            if (best_endpoint_matching(h, n, endpoints, current, better)) {
                for (int i = 0; i < k; ++i)
                    pairs[pick[i]] = {std::min(better[i].first, better[i].second),
                                      std::max(better[i].first, better[i].second)};
                improved = any = true;
                break; // restart the scan after a change
            }
            // next combination
            int pos = k - 1;
            while (pos >= 0 && pick[pos] == pairs.size() - k + pos) --pos;
            if (pos < 0) break;
            ++pick[pos];
            for (int t = pos + 1; t < k; ++t) pick[t] = pick[t - 1] + 1;
        }
    }
    return any;
}

} // namespace

PairingResult optimal_pairs(const std::vector<double>& h, int n) {
    if (n < 2) throw ValueError("pairing needs at least two samples");
    const std::vector<double> cost = build_cost_matrix(h, n);
    const std::vector<int> sigma = solve_assignment(cost, n);

    PairingResult result;
    std::vector<char> paired(n, 0);
    for (int i = 0; i < n; ++i) {
        const int j = sigma[i];
        if (j > i && sigma[j] == i) {
            result.pairs.push_back({i, j});
            paired[i] = paired[j] = 1;
        }
    }

    // Indices stranded in cycles longer than two get re-paired. Small sets
    // are matched exactly by subset DP; oversized ones fall back to greedy
    // descending-similarity pairing.
    std::vector<int> rest;
    for (int i = 0; i < n; ++i)
        if (!paired[i]) rest.push_back(i);
    if (rest.size() % 2 == 1) {
        // Odd count: hold out the index whose best remaining partner is
        // weakest, then match the rest.
        std::size_t drop = 0;
        double weakest = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < rest.size(); ++a) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t b = 0; b < rest.size(); ++b)
                if (a != b) best = std::max(best, h[rest[a] * n + rest[b]]);
            if (best < weakest) {
                weakest = best;
                drop = a;
            }
        }
        result.leftover = rest[drop];
        rest.erase(rest.begin() + drop);
    }
    if (rest.size() >= 2 && rest.size() <= 16) {
        repair_exact(h, n, rest, result.pairs);
    } else {
        while (rest.size() >= 2) {
            int bi = 0, bj = 1;
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < rest.size(); ++a)
                for (std::size_t b = a + 1; b < rest.size(); ++b) {
                    const double sim = h[rest[a] * n + rest[b]];
                    if (sim > best) {
                        best = sim;
                        bi = static_cast<int>(a);
                        bj = static_cast<int>(b);
                    }
                }
            result.pairs.push_back({rest[bi], rest[bj]});
            rest.erase(rest.begin() + bj); // bj > bi
            rest.erase(rest.begin() + bi);
        }
    }

    // Strict-improvement exchanges over small groups of pairs catch optima
    // that cross the boundary between assignment 2-cycles and repaired pairs.
    // Groups of four are exhaustive for batches up to 16 samples and are
    // skipped on large batches, where the assignment carries the weight.
    bool improved = true;
    while (improved) {
        improved = improve_subset_exchange(h, n, 2, result.pairs) ||
                   improve_subset_exchange(h, n, 3, result.pairs);
        if (!improved && result.pairs.size() <= 8)
            improved = improve_subset_exchange(h, n, 4, result.pairs);
    }

    // Ties between equal-total matchings are resolved toward the
    // lexicographically smallest pair list via total-preserving partner swaps.
    std::sort(result.pairs.begin(), result.pairs.end());
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t a = 0; a < result.pairs.size() && !changed; ++a)
            for (std::size_t b = a + 1; b < result.pairs.size() && !changed; ++b) {
                const auto [p, q] = result.pairs[a];
                const auto [r, s] = result.pairs[b];
                const double cur = h[p * n + q] + h[r * n + s];
                const std::pair<int, int> swaps[2][2] = {
                    {{std::min(p, r), std::max(p, r)}, {std::min(q, s), std::max(q, s)}},
                    {{std::min(p, s), std::max(p, s)}, {std::min(q, r), std::max(q, r)}}};
                for (const auto& candidate : swaps) {
                    const double alt = h[candidate[0].first * n + candidate[0].second] +
                                       h[candidate[1].first * n + candidate[1].second];
                    if (std::abs(alt - cur) > 1e-12) continue;
                    auto trial = result.pairs;
                    trial[a] = std::min(candidate[0], candidate[1]);
                    trial[b] = std::max(candidate[0], candidate[1]);
                    std::sort(trial.begin(), trial.end());
                    if (trial < result.pairs) {
                        result.pairs = trial;
                        changed = true;
                        break;
                    }
                }
            }
    }
    for (const auto& [i, j] : result.pairs) result.total_similarity += h[i * n + j];
    return result;
}

namespace {

void enumerate_matchings(const std::vector<double>& h, int n, std::vector<int>& free_idx,
                         std::vector<std::pair<int, int>>& current, double running,
                         PairingResult& best, std::uint64_t& count) {
    if (free_idx.empty()) {
        ++count;
        if (best.pairs.empty() || running > best.total_similarity) {
            best.pairs = current;
            best.total_similarity = running;
        }
        return;
    }
    const int i = free_idx.front();
    for (std::size_t k = 1; k < free_idx.size(); ++k) {
        const int j = free_idx[k];
        std::vector<int> next;
        next.reserve(free_idx.size() - 2);
        for (std::size_t t = 1; t < free_idx.size(); ++t)
            if (t != k) next.push_back(free_idx[t]);
        current.push_back({i, j});
        enumerate_matchings(h, n, next, current, running + h[i * n + j], best, count);
        current.pop_back();
    }
}

} // namespace

std::string pairing_to_json(const PairingResult& result) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [i, j] : result.pairs) pairs.push_back({i, j});
    nlohmann::json j{{"pairs", pairs}, {"total_similarity", result.total_similarity}};
    if (result.leftover) j["leftover"] = *result.leftover;
    return j.dump();
}

PairingResult brute_force_matching(const std::vector<double>& h, int n, int max_n,
                                   std::uint64_t* enumerated) {
    if (n < 2 || n % 2 != 0) throw ValueError("brute-force matching needs an even batch");
    if (n > max_n) throw ValueError("batch too large for brute-force matching");
    if (static_cast<std::size_t>(n) * n != h.size())
        throw ShapeError("similarity matrix is not square");

    PairingResult best;
    std::vector<int> free_idx(n);
    for (int i = 0; i < n; ++i) free_idx[i] = i;
    std::vector<std::pair<int, int>> current;
    std::uint64_t count = 0;
    enumerate_matchings(h, n, free_idx, current, 0.0, best, count);
    if (enumerated) *enumerated = count;
    std::sort(best.pairs.begin(), best.pairs.end());
    return best;
}

} // namespace mqc
