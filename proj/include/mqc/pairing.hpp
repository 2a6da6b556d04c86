#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mqc {

// N/2 unordered sample pairs chosen inside a batch; odd batches leave one
// index unpaired (it takes no part in the ranking loss).
struct PairingResult {
    std::vector<std::pair<int, int>> pairs; // first < second
    std::optional<int> leftover;
    double total_similarity = 0.0;
};

// H' = -H with the diagonal replaced by a finite sentinel large enough that
// no minimizing assignment can use it.
std::vector<double> build_cost_matrix(const std::vector<double>& h, int n);

// Exact linear sum assignment (Jonker-Volgenant shortest augmenting paths).
// Returns the column assigned to each row of the n*n cost matrix.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n);

// Pairs from the assignment's 2-cycles; indices stranded in longer cycles are
// re-paired greedily by descending similarity (ties toward lower indices).
PairingResult optimal_pairs(const std::vector<double>& h, int n);

// Exhaustive maximum-similarity perfect matching, for even n <= max_n.
// `enumerated`, when given, receives the number of matchings visited.
PairingResult brute_force_matching(const std::vector<double>& h, int n, int max_n = 10,
                                   std::uint64_t* enumerated = nullptr);

// One-line JSON rendering of a pairing decision, for audit logs.
std::string pairing_to_json(const PairingResult& result);

} // namespace mqc
