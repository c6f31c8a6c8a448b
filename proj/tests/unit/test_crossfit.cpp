#include <doctest.h>

#include "dustat/crossfit.hpp"
#include "dustat/error.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <map>
#include <set>

using namespace dustat;

namespace {

std::vector<std::size_t> fold_sizes(const FoldPartition& f) {
    std::vector<std::size_t> sizes;
    for (const auto& m : f.members) {
        sizes.push_back(m.size());
    }
    std::sort(sizes.rbegin(), sizes.rend());
    return sizes;
}

}  // namespace

TEST_CASE("n=21, K=3 gives three folds of seven") {
    const FoldPartition f = make_folds(21, 3, 7);
    CHECK(fold_sizes(f) == std::vector<std::size_t>{7, 7, 7});
    CHECK(f.K == 3);
    CHECK(f.seed == 7);
}

TEST_CASE("n=10, K=3 gives sizes 4, 3, 3 for any seed") {
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 123456789ULL}) {
        CHECK(fold_sizes(make_folds(10, 3, seed)) == std::vector<std::size_t>{4, 3, 3});
    }
}

TEST_CASE("fold count outside [2, n] is rejected") {
    CHECK_THROWS_AS(make_folds(5, 6, 1), ConfigError);
    CHECK_THROWS_AS(make_folds(5, 1, 1), ConfigError);
    CHECK_NOTHROW(make_folds(5, 5, 1));
    CHECK_NOTHROW(make_folds(5, 2, 1));
}

TEST_CASE("fold assignment is seeded and shuffled") {
    const FoldPartition a = make_folds(50, 5, 11);
    const FoldPartition b = make_folds(50, 5, 11);
    const FoldPartition c = make_folds(50, 5, 12);
    CHECK(a.assignment == b.assignment);
    CHECK(a.assignment != c.assignment);
    std::vector<int> unshuffled(50);
    for (int i = 0; i < 50; ++i) {
        unshuffled[static_cast<std::size_t>(i)] = i % 5;
    }
    CHECK(a.assignment != unshuffled);
    for (int k = 0; k < 5; ++k) {
        for (std::size_t i : a.members[static_cast<std::size_t>(k)]) {
            CHECK(a.assignment[i] == k);
        }
        CHECK(std::is_sorted(a.members[static_cast<std::size_t>(k)].begin(),
                             a.members[static_cast<std::size_t>(k)].end()));
    }
}

TEST_CASE("K=3 on 21 observations: six blocks of 21 and 49 pairs") {
    const PairBlocks blocks = make_pair_blocks(make_folds(21, 3, 7));
    REQUIRE(blocks.size() == 6);
    std::size_t total = 0;
    for (std::size_t l = 0; l < 3; ++l) {
        CHECK(blocks.block_folds(l).diagonal());
        CHECK(blocks.pair_count(l) == 21);
        total += blocks.pair_count(l);
    }
    for (std::size_t l = 3; l < 6; ++l) {
        CHECK_FALSE(blocks.block_folds(l).diagonal());
        CHECK(blocks.pair_count(l) == 49);
        total += blocks.pair_count(l);
    }
    CHECK(total == 210);
}

TEST_CASE("K=2, n=4 enumerates the three blocks exactly") {
    FoldPartition f;
    f.K = 2;
    f.assignment = {0, 0, 1, 1};
    f.members = {{0, 1}, {2, 3}};
    const PairBlocks blocks(f);
    using P = std::pair<std::size_t, std::size_t>;
    CHECK(blocks.pairs(0) == std::vector<P>{{0, 1}});
    CHECK(blocks.pairs(1) == std::vector<P>{{2, 3}});
    auto cross = blocks.pairs(2);
    std::sort(cross.begin(), cross.end());
    CHECK(cross == std::vector<P>{{0, 2}, {0, 3}, {1, 2}, {1, 3}});
    CHECK_NOTHROW(training_indices(blocks, 0));
    CHECK_THROWS_AS(training_indices(blocks, 2), ConfigError);
}

TEST_CASE("K=5 gives fifteen blocks") {
    CHECK(make_pair_blocks(make_folds(40, 5, 1)).size() == 15);
}

TEST_CASE("training sets for K=3") {
    const FoldPartition f = make_folds(21, 3, 7);
    const PairBlocks blocks(f);
    std::vector<std::size_t> folds23 = f.members[1];
    folds23.insert(folds23.end(), f.members[2].begin(), f.members[2].end());
    std::sort(folds23.begin(), folds23.end());
    CHECK(training_indices(blocks, 0) == folds23);
    // Block 3 is the cross block of folds 1 and 2.
    REQUIRE(blocks.block_folds(3).first == 0);
    REQUIRE(blocks.block_folds(3).second == 1);
    CHECK(training_indices(blocks, 3) == f.members[2]);
}

TEST_CASE("kappa counts for a diagonal block of seven") {
    const PairBlocks blocks = make_pair_blocks(make_folds(21, 3, 7));
    const KappaCounts k = kappa_counts(blocks, 0);
    CHECK(k.kappa2 == 21);
    CHECK(k.kappa1 == 210);
    const auto brute = oracle::kappa(blocks.pairs(0));
    CHECK(brute.one == 210);
    CHECK(brute.two == 21);
}

TEST_CASE("kappa counts for a block with a single pair") {
    FoldPartition f;
    f.K = 2;
    f.assignment = {0, 0, 1};
    f.members = {{0, 1}, {2}};
    const PairBlocks blocks(f);
    const KappaCounts k = kappa_counts(blocks, 0);
    CHECK(k.kappa1 == 0);
    CHECK(k.kappa2 == 1);
}

TEST_CASE("partition suite: n <= 30, K in {3, 4, 5}") {
    for (std::size_t n = 3; n <= 30; ++n) {
        for (int K : {3, 4, 5}) {
            if (static_cast<std::size_t>(K) > n) {
                continue;
            }
            CAPTURE(n);
            CAPTURE(K);
            const FoldPartition f = make_folds(n, K, 1000 + n * 7 + static_cast<std::size_t>(K));
            const PairBlocks blocks(f);
            REQUIRE(blocks.size() == static_cast<std::size_t>(K * (K + 1) / 2));
            std::set<std::pair<std::size_t, std::size_t>> seen;
            std::size_t total = 0;
            for (std::size_t l = 0; l < blocks.size(); ++l) {
                const auto pairs = blocks.pairs(l);
                CHECK(pairs.size() == blocks.pair_count(l));
                total += pairs.size();
                const auto bf = blocks.block_folds(l);
                const auto train = training_indices(blocks, l);
                CHECK_FALSE(train.empty());
                const std::set<std::size_t> train_set(train.begin(), train.end());
                for (const auto& [i, j] : pairs) {
                    CHECK(i < j);
                    CHECK(seen.insert({i, j}).second);
                    const int fi = f.assignment[i];
                    const int fj = f.assignment[j];
                    CHECK((fi == bf.first || fi == bf.second));
                    CHECK((fj == bf.first || fj == bf.second));
                    CHECK(train_set.count(i) == 0);
                    CHECK(train_set.count(j) == 0);
                }
                for (std::size_t t : train) {
                    CHECK(f.assignment[t] != bf.first);
                    CHECK(f.assignment[t] != bf.second);
                }
                const auto brute = oracle::kappa(pairs);
                const auto k = kappa_counts(blocks, l);
                CHECK(k.kappa1 == brute.one);
                CHECK(k.kappa2 == brute.two);
            }
            CHECK(total == n * (n - 1) / 2);
            CHECK(seen.size() == n * (n - 1) / 2);
        }
    }
}

TEST_CASE("identical inputs give identical blocks") {
    const PairBlocks a = make_pair_blocks(make_folds(30, 4, 5));
    const PairBlocks b = make_pair_blocks(make_folds(30, 4, 5));
    for (std::size_t l = 0; l < a.size(); ++l) {
        CHECK(a.pairs(l) == b.pairs(l));
    }
}

TEST_CASE("members of a block are its folds' observations") {
    const FoldPartition f = make_folds(17, 4, 3);
    const PairBlocks blocks(f);
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const auto bf = blocks.block_folds(l);
        std::set<std::size_t> from_pairs;
        for (const auto& [i, j] : blocks.pairs(l)) {
            from_pairs.insert(i);
            from_pairs.insert(j);
        }
        const auto m = blocks.members(l);
        CHECK(std::set<std::size_t>(m.begin(), m.end()) == from_pairs);
        CHECK(std::is_sorted(m.begin(), m.end()));
        std::size_t expected = f.members[static_cast<std::size_t>(bf.first)].size();
        if (!bf.diagonal()) {
            expected += f.members[static_cast<std::size_t>(bf.second)].size();
        }
        CHECK(m.size() == expected);
    }
}
