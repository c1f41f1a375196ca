#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace arcrec {

/// Items in descending score order; equal scores rank the smaller item index
/// first.
std::vector<std::size_t> rank_by_score(std::span<const std::size_t> items, std::span<const double> scores);

/// 1-based rank of every item of a ranked list, indexed by item.
std::vector<std::size_t> positions(std::span<const std::size_t> ranked, std::size_t universe);

/// Kendall's tau between two rankings of the same items: (P - Q) / (n(n-1)/2)
/// with P concordant and Q discordant pairs. O(n log n) via inversion counting.
double kendall_tau(std::span<const std::size_t> truth, std::span<const std::size_t> predicted);

/// Spearman's rho: 1 - 6 sum d^2 / (n^3 - n).
double spearman_rho(std::span<const std::size_t> truth, std::span<const std::size_t> predicted);

/// 1-based position of `item` in `ranked`; throws DataError when absent.
std::size_t position_of(std::span<const std::size_t> ranked, std::size_t item);

/// 1 when a hit at 1-based position lands in the top k.
double hit_at(std::size_t position, std::size_t k);
/// 1 / log2(position + 1) for a hit in the top k, else 0.
double ndcg_at(std::size_t position, std::size_t k);

/// Fraction of lists whose held-out item is in the top k.
double hit_ratio(const std::vector<std::vector<std::size_t>>& ranked, std::span<const std::size_t> held_out,
                 std::size_t k);
double ndcg(const std::vector<std::vector<std::size_t>>& ranked, std::span<const std::size_t> held_out,
            std::size_t k);

}  // namespace arcrec
