#include "arcrec/metrics.hpp"

#include "arcrec/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace arcrec {

namespace {

// Counts pairs i < j with v[i] > v[j]; sorts v.
std::size_t count_inversions(std::vector<std::size_t>& v, std::vector<std::size_t>& buf, std::size_t lo,
                             std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::size_t inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
    std::size_t i = lo, j = mid, o = lo;
    while (i < mid && j < hi) {
        if (v[i] <= v[j]) {
            buf[o++] = v[i++];
        } else {
            inv += mid - i;
            buf[o++] = v[j++];
        }
    }
    while (i < mid) buf[o++] = v[i++];
    while (j < hi) buf[o++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

// Position in `predicted` of each element of `truth`, validating that both
// are permutations of the same item set.
std::vector<std::size_t> aligned_positions(std::span<const std::size_t> truth, std::span<const std::size_t> predicted) {
    if (truth.size() != predicted.size())
        throw DataError("ranking size mismatch: " + std::to_string(truth.size()) + " vs " +
                        std::to_string(predicted.size()));
    if (truth.size() < 2) throw DataError("rank correlation needs at least two items");
    const std::size_t universe =
        1 + std::max(*std::max_element(truth.begin(), truth.end()), *std::max_element(predicted.begin(), predicted.end()));
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> pos(universe, kNone);
    for (std::size_t r = 0; r < predicted.size(); ++r) {
        if (pos[predicted[r]] != kNone) throw DataError("duplicate item in ranking");
        pos[predicted[r]] = r;
    }
    std::vector<std::size_t> seq(truth.size());
    for (std::size_t r = 0; r < truth.size(); ++r) {
        if (pos[truth[r]] == kNone) throw DataError("rankings cover different items");
        seq[r] = pos[truth[r]];
        pos[truth[r]] = kNone;
    }
    return seq;
}

}  // namespace

std::vector<std::size_t> rank_by_score(std::span<const std::size_t> items, std::span<const double> scores) {
    if (items.size() != scores.size()) throw DataError("items and scores differ in length");
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return items[a] < items[b];
    });
    std::vector<std::size_t> out(items.size());
    for (std::size_t r = 0; r < order.size(); ++r) out[r] = items[order[r]];
    return out;
}

std::vector<std::size_t> positions(std::span<const std::size_t> ranked, std::size_t universe) {
    std::vector<std::size_t> pos(universe, 0);
    for (std::size_t r = 0; r < ranked.size(); ++r) pos.at(ranked[r]) = r + 1;
    return pos;
}

double kendall_tau(std::span<const std::size_t> truth, std::span<const std::size_t> predicted) {
    auto seq = aligned_positions(truth, predicted);
    std::vector<std::size_t> buf(seq.size());
    const std::size_t discordant = count_inversions(seq, buf, 0, seq.size());
    const auto n = static_cast<long long>(truth.size());
    const long long pairs = n * (n - 1) / 2;
    const long long concordant = pairs - static_cast<long long>(discordant);
    // One rounding: the ratio of two exact integers.
    return static_cast<double>(concordant - static_cast<long long>(discordant)) / static_cast<double>(pairs);
}

double spearman_rho(std::span<const std::size_t> truth, std::span<const std::size_t> predicted) {
    const auto seq = aligned_positions(truth, predicted);
    double d2 = 0.0;
    for (std::size_t r = 0; r < seq.size(); ++r) {
        const double d = static_cast<double>(r) - static_cast<double>(seq[r]);
        d2 += d * d;
    }
    const double n = static_cast<double>(seq.size());
    return 1.0 - 6.0 * d2 / (n * n * n - n);
}

std::size_t position_of(std::span<const std::size_t> ranked, std::size_t item) {
    auto it = std::find(ranked.begin(), ranked.end(), item);
    if (it == ranked.end()) throw DataError("held-out item " + std::to_string(item) + " missing from candidate set");
    return static_cast<std::size_t>(it - ranked.begin()) + 1;
}

double hit_at(std::size_t position, std::size_t k) { return position <= k ? 1.0 : 0.0; }

double ndcg_at(std::size_t position, std::size_t k) {
    return position <= k ? 1.0 / std::log2(static_cast<double>(position) + 1.0) : 0.0;
}

double hit_ratio(const std::vector<std::vector<std::size_t>>& ranked, std::span<const std::size_t> held_out,
                 std::size_t k) {
    if (ranked.size() != held_out.size()) throw DataError("one held-out item per ranked list required");
    if (ranked.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t u = 0; u < ranked.size(); ++u) s += hit_at(position_of(ranked[u], held_out[u]), k);
    return s / static_cast<double>(ranked.size());
}

double ndcg(const std::vector<std::vector<std::size_t>>& ranked, std::span<const std::size_t> held_out,
            std::size_t k) {
    if (ranked.size() != held_out.size()) throw DataError("one held-out item per ranked list required");
    if (ranked.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t u = 0; u < ranked.size(); ++u) s += ndcg_at(position_of(ranked[u], held_out[u]), k);
    return s / static_cast<double>(ranked.size());
}

}  // namespace arcrec
