#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace dustat {

// Assignment of n observations to K folds. Fold ids are 0-based here and
// printed 1-based by the CLI.
struct FoldPartition {
    std::vector<int> assignment;
    int K = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> members;  ///< ascending indices per fold

    std::size_t n() const { return assignment.size(); }
};

/// Balanced seeded split: labels i mod K, Fisher-Yates shuffled.
/// Throws ConfigError unless 2 <= K <= n.
FoldPartition make_folds(std::size_t n, int K, std::uint64_t seed);

struct BlockFolds {
    int first = 0;
    int second = 0;
    bool diagonal() const { return first == second; }
};

// The L = K(K+1)/2 blocks of pairs (i, j), i < j: within-fold blocks first in
// fold order, then cross-fold blocks (k, m), k < m, in lexicographic order.
// Pairs are generated on demand.
class PairBlocks {
public:
    explicit PairBlocks(FoldPartition folds);

    std::size_t size() const { return blocks_.size(); }
    const FoldPartition& folds() const { return folds_; }
    const BlockFolds& block_folds(std::size_t l) const { return blocks_.at(l); }
    std::size_t pair_count(std::size_t l) const;

    /// Observations appearing in block l (fold members, ascending).
    std::vector<std::size_t> members(std::size_t l) const;

    /// Calls f(i, j) for every pair in block l, always with i < j.
    template <class F>
    void for_each_pair(std::size_t l, F&& f) const {
        const auto& b = blocks_.at(l);
        const auto& a = folds_.members[static_cast<std::size_t>(b.first)];
        if (b.diagonal()) {
            for (std::size_t u = 0; u < a.size(); ++u) {
                for (std::size_t v = u + 1; v < a.size(); ++v) {
                    f(a[u], a[v]);
                }
            }
            return;
        }
        const auto& c = folds_.members[static_cast<std::size_t>(b.second)];
        for (std::size_t i : a) {
            for (std::size_t j : c) {
                if (i < j) {
                    f(i, j);
                } else {
                    f(j, i);
                }
            }
        }
    }

    /// Materialized pair list of block l.
    std::vector<std::pair<std::size_t, std::size_t>> pairs(std::size_t l) const;

private:
    FoldPartition folds_;
    std::vector<BlockFolds> blocks_;
};

PairBlocks make_pair_blocks(const FoldPartition& folds);

/// Indices whose fold is not used by block l. Throws ConfigError when that set
/// is empty (the cross block when K = 2).
std::vector<std::size_t> training_indices(const PairBlocks& blocks, std::size_t l);

struct KappaCounts {
    std::uint64_t kappa1 = 0;  ///< ordered pairs of distinct pairs sharing one index
    std::uint64_t kappa2 = 0;  ///< pairs sharing both indices, i.e. |I_l|
};

KappaCounts kappa_counts(const PairBlocks& blocks, std::size_t l);

}  // namespace dustat
