#include "dustat/error.hpp"
#include "dustat/learners.hpp"
#include "dustat/parallel.hpp"
#include "dustat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dustat::detail {

namespace {

struct Split {
    int feature = -1;
    bool categorical = false;
    double threshold = 0.0;
    std::uint64_t mask = 0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const std::vector<int>& levels,
                const ForestParams& params, int mtry, Rng& rng)
        : x_(x), t_(t), levels_(levels), params_(params), mtry_(mtry), rng_(rng),
          features_(static_cast<std::size_t>(x.cols())), left_(static_cast<std::size_t>(x.rows())) {
        std::iota(features_.begin(), features_.end(), 0);
    }

    Tree grow() {
        const auto n = static_cast<std::size_t>(x_.rows());
        samples_.resize(n);
        if (params_.bootstrap) {
            for (auto& s : samples_) {
                s = static_cast<std::size_t>(rng_.below(n));
            }
            std::sort(samples_.begin(), samples_.end());
        } else {
            std::iota(samples_.begin(), samples_.end(), 0);
        }
        sorted_.assign(static_cast<std::size_t>(x_.cols()), {});
        for (Eigen::Index f = 0; f < x_.cols(); ++f) {
            if (ordered(f)) {
                auto& list = sorted_[static_cast<std::size_t>(f)];
                list = samples_;
                std::stable_sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
                    return x_(static_cast<Eigen::Index>(a), f) < x_(static_cast<Eigen::Index>(b), f);
                });
            }
        }
        Tree tree;
        tree.nodes.emplace_back();
        struct Pending {
            int node;
            std::size_t lo, hi;
        };
        std::vector<Pending> stack{{0, 0, n}};
        while (!stack.empty()) {
            const Pending job = stack.back();
            stack.pop_back();
            double sum = 0.0;
            double sq = 0.0;
            for (std::size_t k = job.lo; k < job.hi; ++k) {
                const double v = t_[static_cast<Eigen::Index>(samples_[k])];
                sum += v;
                sq += v * v;
            }
            const double m = static_cast<double>(job.hi - job.lo);
            const double mean = sum / m;
            tree.nodes[static_cast<std::size_t>(job.node)].value = mean;
            const double sse = sq - sum * mean;
            if (job.hi - job.lo < 2 * static_cast<std::size_t>(params_.min_node) ||
                sse <= 1e-12 * (1.0 + mean * mean) * m) {
                continue;
            }
            const Split split = best_split(job.lo, job.hi, sum);
            if (split.feature < 0) {
                continue;
            }
            const std::size_t mid = partition(split, job.lo, job.hi);
            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
            node.feature = split.feature;
            node.categorical = split.categorical;
            node.threshold = split.threshold;
            node.left_levels = split.mask;
            node.left = left;
            node.right = left + 1;
            stack.push_back({left + 1, mid, job.hi});
            stack.push_back({left, job.lo, mid});
        }
        return tree;
    }

private:
    bool ordered(Eigen::Index f) const {
        const int m = levels_[static_cast<std::size_t>(f)];
        return m < 2 || m > 64;
    }

    Split best_split(std::size_t lo, std::size_t hi, double sum) {
        const std::size_t p = features_.size();
        const auto take = static_cast<std::size_t>(mtry_);
        for (std::size_t k = 0; k < take; ++k) {
            const auto j = k + static_cast<std::size_t>(rng_.below(p - k));
            std::swap(features_[k], features_[j]);
        }
        const double m = static_cast<double>(hi - lo);
        const double base = sum * sum / m;
        const auto min_node = static_cast<double>(params_.min_node);
        Split best;
        for (std::size_t k = 0; k < take; ++k) {
            const int f = features_[k];
            if (ordered(f)) {
                const auto& list = sorted_[static_cast<std::size_t>(f)];
                double left_sum = 0.0;
                for (std::size_t q = lo; q + 1 < hi; ++q) {
                    const auto row = static_cast<Eigen::Index>(list[q]);
                    left_sum += t_[row];
                    const double nl = static_cast<double>(q - lo + 1);
                    if (nl < min_node || m - nl < min_node) {
                        continue;
                    }
                    const double a = x_(row, f);
                    const double b = x_(static_cast<Eigen::Index>(list[q + 1]), f);
                    if (!(a < b)) {
                        continue;
                    }
                    const double right_sum = sum - left_sum;
                    const double gain =
                        left_sum * left_sum / nl + right_sum * right_sum / (m - nl) - base;
                    if (gain > best.gain) {
                        double thr = a + (b - a) / 2.0;
                        if (thr >= b) {
                            thr = a;
                        }
                        best = {f, false, thr, 0, gain};
                    }
                }
                continue;
            }
            const int L = levels_[static_cast<std::size_t>(f)];
            level_sum_.assign(static_cast<std::size_t>(L), 0.0);
            level_count_.assign(static_cast<std::size_t>(L), 0.0);
            for (std::size_t q = lo; q < hi; ++q) {
                const auto row = static_cast<Eigen::Index>(samples_[q]);
                const auto code = static_cast<std::size_t>(x_(row, f));
                level_sum_[code] += t_[row];
                level_count_[code] += 1.0;
            }
            present_.clear();
            for (int r = 0; r < L; ++r) {
                if (level_count_[static_cast<std::size_t>(r)] > 0) {
                    present_.push_back(r);
                }
            }
            std::stable_sort(present_.begin(), present_.end(), [&](int a, int b) {
                const auto ua = static_cast<std::size_t>(a);
                const auto ub = static_cast<std::size_t>(b);
                return level_sum_[ua] / level_count_[ua] < level_sum_[ub] / level_count_[ub];
            });
            double left_sum = 0.0;
            double nl = 0.0;
            std::uint64_t mask = 0;
            for (std::size_t q = 0; q + 1 < present_.size(); ++q) {
                const auto r = static_cast<std::size_t>(present_[q]);
                left_sum += level_sum_[r];
                nl += level_count_[r];
                mask |= std::uint64_t{1} << r;
                if (nl < min_node || m - nl < min_node) {
                    continue;
                }
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / nl + right_sum * right_sum / (m - nl) - base;
                if (gain > best.gain) {
                    best = {f, true, 0.0, mask, gain};
                }
            }
        }
        return best;
    }

    bool goes_left(const Split& s, std::size_t row) const {
        const double v = x_(static_cast<Eigen::Index>(row), s.feature);
        if (s.categorical) {
            return (s.mask >> static_cast<unsigned>(v)) & 1U;
        }
        return v <= s.threshold;
    }

    std::size_t partition(const Split& s, std::size_t lo, std::size_t hi) {
        for (std::size_t q = lo; q < hi; ++q) {
            left_[samples_[q]] = goes_left(s, samples_[q]) ? 1 : 0;
        }
        auto split_range = [&](std::vector<std::size_t>& v) {
            return static_cast<std::size_t>(
                std::stable_partition(v.begin() + static_cast<std::ptrdiff_t>(lo),
                                      v.begin() + static_cast<std::ptrdiff_t>(hi),
                                      [&](std::size_t row) { return left_[row] != 0; }) -
                v.begin());
        };
        const std::size_t mid = split_range(samples_);
        for (auto& list : sorted_) {
            if (!list.empty()) {
                split_range(list);
            }
        }
        return mid;
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& t_;
    const std::vector<int>& levels_;
    const ForestParams& params_;
    int mtry_;
    Rng& rng_;
    std::vector<int> features_;
    std::vector<char> left_;
    std::vector<std::size_t> samples_;
    std::vector<std::vector<std::size_t>> sorted_;
    std::vector<double> level_sum_;
    std::vector<double> level_count_;
    std::vector<int> present_;
};

}  // namespace

ForestModel fit_forest(const ForestParams& params, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& t, const std::vector<int>& levels, int threads) {
    ForestModel model;
    model.levels = levels;
    const auto p = static_cast<int>(x.cols());
    model.mtry = params.mtry > 0 ? params.mtry : std::max(1, (p + 2) / 3);
    if (model.mtry > p) {
        throw ConfigError("mtry = " + std::to_string(model.mtry) + " exceeds the " +
                          std::to_string(p) + " available covariates");
    }
    model.trees.resize(static_cast<std::size_t>(params.n_trees));
    parallel_for(model.trees.size(), threads, [&](std::size_t k) {
        Rng rng(derive_seed(params.seed, k));
        TreeBuilder builder(x, t, levels, params, model.mtry, rng);
        model.trees[k] = builder.grow();
    });
    return model;
}

}  // namespace dustat::detail

namespace dustat {

double Tree::predict(const Eigen::MatrixXd& x, Eigen::Index row) const {
    const TreeNode* node = &nodes[0];
    while (node->feature >= 0) {
        const double v = x(row, node->feature);
        bool left = false;
        if (node->categorical) {
            const auto code = static_cast<long long>(v);
            left = code >= 0 && code < 64 && ((node->left_levels >> code) & 1U);
        } else {
            left = v <= node->threshold;
        }
        node = &nodes[static_cast<std::size_t>(left ? node->left : node->right)];
    }
    return node->value;
}

std::size_t ForestModel::leaf_count() const {
    std::size_t count = 0;
    for (const auto& tree : trees) {
        for (const auto& node : tree.nodes) {
            count += node.feature < 0 ? 1 : 0;
        }
    }
    return count;
}

}  // namespace dustat

namespace dustat::detail {

Eigen::VectorXd predict_forest(const ForestModel& model, const Eigen::MatrixXd& x) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (const auto& tree : model.trees) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            out[i] += tree.predict(x, i);
        }
    }
    return out / static_cast<double>(model.trees.size());
}

}  // namespace dustat::detail
