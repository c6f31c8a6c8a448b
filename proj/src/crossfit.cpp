#include "dustat/crossfit.hpp"

#include "dustat/error.hpp"
#include "dustat/rng.hpp"

#include <string>

namespace dustat {

FoldPartition make_folds(std::size_t n, int K, std::uint64_t seed) {
    if (K < 2) {
        throw ConfigError("fold count K must be at least 2, got " + std::to_string(K));
    }
    if (static_cast<std::size_t>(K) > n) {
        throw ConfigError("fold count K = " + std::to_string(K) + " exceeds sample size n = " +
                          std::to_string(n));
    }
    FoldPartition folds;
    folds.K = K;
    folds.seed = seed;
    folds.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        folds.assignment[i] = static_cast<int>(i % static_cast<std::size_t>(K));
    }
    Rng rng(seed);
    rng.shuffle(folds.assignment);
    folds.members.assign(static_cast<std::size_t>(K), {});
    for (std::size_t i = 0; i < n; ++i) {
        folds.members[static_cast<std::size_t>(folds.assignment[i])].push_back(i);
    }
    return folds;
}

PairBlocks::PairBlocks(FoldPartition folds) : folds_(std::move(folds)) {
    for (int k = 0; k < folds_.K; ++k) {
        blocks_.push_back({k, k});
    }
    for (int k = 0; k < folds_.K; ++k) {
        for (int m = k + 1; m < folds_.K; ++m) {
            blocks_.push_back({k, m});
        }
    }
}

std::size_t PairBlocks::pair_count(std::size_t l) const {
    const auto& b = blocks_.at(l);
    const std::size_t a = folds_.members[static_cast<std::size_t>(b.first)].size();
    if (b.diagonal()) {
        return a * (a - 1) / 2;
    }
    return a * folds_.members[static_cast<std::size_t>(b.second)].size();
}

std::vector<std::size_t> PairBlocks::members(std::size_t l) const {
    const auto& b = blocks_.at(l);
    if (b.diagonal()) {
        return folds_.members[static_cast<std::size_t>(b.first)];
    }
    std::vector<std::size_t> out;
    out.reserve(pair_count(l));
    for (std::size_t i = 0; i < folds_.n(); ++i) {
        if (folds_.assignment[i] == b.first || folds_.assignment[i] == b.second) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> PairBlocks::pairs(std::size_t l) const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(pair_count(l));
    for_each_pair(l, [&](std::size_t i, std::size_t j) { out.emplace_back(i, j); });
    return out;
}

PairBlocks make_pair_blocks(const FoldPartition& folds) { return PairBlocks(folds); }

std::vector<std::size_t> training_indices(const PairBlocks& blocks, std::size_t l) {
    const auto& b = blocks.block_folds(l);
    const auto& folds = blocks.folds();
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < folds.n(); ++i) {
        if (folds.assignment[i] != b.first && folds.assignment[i] != b.second) {
            out.push_back(i);
        }
    }
    if (out.empty()) {
        throw ConfigError("block " + std::to_string(l + 1) +
                          " has no held-out training observations; use K >= 3 folds");
    }
    return out;
}

KappaCounts kappa_counts(const PairBlocks& blocks, std::size_t l) {
    const auto& b = blocks.block_folds(l);
    const auto& members = blocks.folds().members;
    const std::uint64_t a = members[static_cast<std::size_t>(b.first)].size();
    KappaCounts counts;
    if (b.diagonal()) {
        counts.kappa2 = a * (a - 1) / 2;
        counts.kappa1 = a >= 2 ? counts.kappa2 * 2 * (a - 2) : 0;
        return counts;
    }
    const std::uint64_t c = members[static_cast<std::size_t>(b.second)].size();
    counts.kappa2 = a * c;
    // (i, j) and (i, j') share the fold-first member; (i, j) and (i', j) the other.
    counts.kappa1 = a * c * (c - 1) + c * a * (a - 1);
    return counts;
}

}  // namespace dustat
