#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "channel.hpp"
#include "coding.hpp"
#include "error.hpp"
#include "monte_carlo.hpp"
#include "random.hpp"

namespace ocpc {

/// Finite-support source law; every probability is strictly positive.
class DiscreteDistribution {
public:
    DiscreteDistribution(std::vector<std::string> support, std::vector<double> probs)
        : support_(std::move(support)), probs_(std::move(probs))
    {
        detail::require(!support_.empty(), ErrorCode::invalid_input, "distribution needs a nonempty support");
        detail::require(support_.size() == probs_.size(), ErrorCode::invalid_input,
                        "support and probabilities differ in length");
        long double total = 0.0L;
        for (double p : probs_) {
            detail::require(p > 0.0 && std::isfinite(p), ErrorCode::invalid_input,
                            "probabilities must be > 0, got " + std::to_string(p));
            total += p;
        }
        detail::require(std::abs(static_cast<double>(total) - 1.0) <= 1e-12, ErrorCode::invalid_input,
                        "probabilities must sum to 1, got " + std::to_string(static_cast<double>(total)));
        auto sorted = support_;
        std::sort(sorted.begin(), sorted.end());
        detail::require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorCode::invalid_input,
                        "support symbols must be distinct");
    }

    /// Symbols "1".."n" with the given probabilities, rescaled to sum to 1.
    static DiscreteDistribution normalized(std::vector<double> weights)
    {
        const long double total = std::accumulate(weights.begin(), weights.end(), 0.0L);
        detail::require(total > 0.0L, ErrorCode::invalid_input, "weights must have a positive sum");
        std::vector<std::string> support;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            weights[i] = static_cast<double>(weights[i] / total);
            support.push_back(std::to_string(i + 1));
        }
        return {std::move(support), std::move(weights)};
    }

    static DiscreteDistribution uniform(std::size_t n)
    {
        return normalized(std::vector<double>(n, 1.0));
    }

    std::size_t size() const noexcept { return support_.size(); }
    const std::vector<std::string>& support() const noexcept { return support_; }
    const std::vector<double>& probs() const noexcept { return probs_; }
    double prob(std::size_t i) const { return probs_.at(i); }

    /// Shannon entropy in nats.
    double entropy() const
    {
        double h = 0.0;
        for (double p : probs_) h -= p * std::log(p);
        return h;
    }

private:
    std::vector<std::string> support_;
    std::vector<double> probs_;
};

/// L-ary one-cold tree. Node 0 is the root. At an internal node every
/// surviving symbol s is sent on band group(s); detection on band j moves to
/// child j, whose subtree holds exactly the symbols not sent on band j.
class OneColdTree {
public:
    struct Node {
        std::vector<std::size_t> symbols;  ///< surviving support indices, ascending
        std::vector<std::size_t> group;    ///< group[i]: 0-based band of symbols[i]
        std::vector<std::size_t> children; ///< node ids, one per band in use

        bool is_leaf() const noexcept { return children.empty(); }
        std::size_t group_of(std::size_t symbol) const
        {
            const auto it = std::lower_bound(symbols.begin(), symbols.end(), symbol);
            detail::require(it != symbols.end() && *it == symbol, ErrorCode::invariant_violation,
                            "symbol does not survive at this node");
            return group[static_cast<std::size_t>(it - symbols.begin())];
        }
    };

    OneColdTree() = default;
    explicit OneColdTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const Node& node(std::size_t id) const { return nodes_.at(id); }
    const Node& root() const { return nodes_.at(0); }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Checks the one-cold tree invariants against `support_size` symbols and diversity.
    void validate(std::size_t support_size, const Diversity& diversity) const
    {
        using detail::require;
        require(!nodes_.empty(), ErrorCode::invariant_violation, "tree is empty");
        std::vector<std::size_t> all(support_size);
        std::iota(all.begin(), all.end(), std::size_t{0});
        require(root().symbols == all, ErrorCode::invariant_violation, "root must cover the full support");
        std::vector<int> seen(nodes_.size(), 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const auto& u = nodes_[stack.back()];
            stack.pop_back();
            require(std::is_sorted(u.symbols.begin(), u.symbols.end()) && !u.symbols.empty(),
                    ErrorCode::invariant_violation, "node symbols must be nonempty and ascending");
            if (u.is_leaf()) {
                require(u.symbols.size() == 1, ErrorCode::invariant_violation, "a leaf holds exactly one symbol");
                continue;
            }
            const auto k = u.children.size();
            require(k >= 2, ErrorCode::invariant_violation, "internal nodes need >= 2 children");
            require(k <= diversity.max_band(), ErrorCode::invariant_violation, "more children than bands");
            require(u.group.size() == u.symbols.size(), ErrorCode::invariant_violation, "grouping map size mismatch");
            std::vector<std::vector<std::size_t>> expected(k);
            std::vector<int> used(k, 0);
            for (std::size_t i = 0; i < u.symbols.size(); ++i) {
                require(u.group[i] < k, ErrorCode::invariant_violation, "group index out of range");
                used[u.group[i]] = 1;
                for (std::size_t j = 0; j < k; ++j)
                    if (j != u.group[i]) expected[j].push_back(u.symbols[i]);
            }
            for (std::size_t j = 0; j < k; ++j) {
                require(used[j] == 1, ErrorCode::invariant_violation, "every band in use needs a symbol");
                const auto c = u.children[j];
                require(c < nodes_.size() && seen[c] == 0, ErrorCode::invariant_violation, "tree is not a tree");
                require(nodes_[c].symbols == expected[j], ErrorCode::invariant_violation,
                        "child must hold exactly the symbols not sent on its band");
                seen[c] = 1;
                stack.push_back(c);
            }
        }
    }

private:
    std::vector<Node> nodes_;
};

/// Builds a tree top-down; `choose_groups(symbols)` returns the 0-based band
/// of each surviving symbol at a node with more than one symbol.
template <class ChooseGroups>
OneColdTree build_tree(std::size_t support_size, ChooseGroups&& choose_groups)
{
    std::vector<OneColdTree::Node> nodes;
    std::vector<std::size_t> root(support_size);
    std::iota(root.begin(), root.end(), std::size_t{0});
    nodes.push_back({root, {}, {}});
    for (std::size_t id = 0; id < nodes.size(); ++id) {
        if (nodes[id].symbols.size() <= 1) continue;
        auto groups = choose_groups(nodes[id].symbols);
        std::size_t k = groups.empty() ? 0 : *std::max_element(groups.begin(), groups.end()) + 1;
        std::vector<std::size_t> children;
        for (std::size_t j = 0; j < k; ++j) {
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < groups.size(); ++i)
                if (groups[i] != j) rest.push_back(nodes[id].symbols[i]);
            children.push_back(nodes.size());
            nodes.push_back({std::move(rest), {}, {}});
        }
        nodes[id].group = std::move(groups);
        nodes[id].children = std::move(children);
    }
    return OneColdTree(std::move(nodes));
}

/// Expected zero-error decoding time of `tree` over the blocking channel:
/// T(u) = (1 + sum_j P(child_j | u) T(child_j)) / (k - 1).
inline double tree_expected_time(const OneColdTree& tree, const DiscreteDistribution& dist)
{
    std::function<double(std::size_t)> time = [&](std::size_t id) -> double {
        const auto& u = tree.node(id);
        if (u.is_leaf()) return 0.0;
        double mass = 0.0;
        for (auto s : u.symbols) mass += dist.prob(s);
        double acc = 1.0;
        for (auto c : u.children) {
            double child_mass = 0.0;
            for (auto s : tree.node(c).symbols) child_mass += dist.prob(s);
            acc += child_mass / mass * time(c);
        }
        return acc / static_cast<double>(u.children.size() - 1);
    };
    return time(0);
}

struct EntropyResult {
    double one_cold_entropy = 0.0; ///< nats
    double expected_time = 0.0;    ///< one_cold_entropy / C_L
    OneColdTree optimal_tree;
};

namespace detail {

/// Exhaustive DP over support subsets. For each subset it enumerates set
/// partitions as restricted-growth strings in lexicographic order and keeps
/// the first strictly better one.
class OneColdSolver {
public:
    OneColdSolver(const DiscreteDistribution& dist, std::size_t max_blocks, double channel_capacity)
        : n_(dist.size()), max_blocks_(max_blocks), capacity_(channel_capacity),
          mass_(std::size_t{1} << n_), value_(std::size_t{1} << n_), best_(std::size_t{1} << n_)
    {
        for (std::uint32_t mask = 1; mask < mass_.size(); ++mask) {
            const auto low = static_cast<std::size_t>(std::countr_zero(mask));
            mass_[mask] = mass_[mask & (mask - 1)] + dist.prob(low);
        }
        for (std::uint32_t mask = 1; mask < mass_.size(); ++mask) solve(mask);
    }

    /// P(S) * one-cold entropy of S restricted to `mask`.
    double weighted(std::uint32_t mask) const { return value_[mask]; }
    double mass(std::uint32_t mask) const { return mass_[mask]; }
    const std::vector<std::uint32_t>& partition(std::uint32_t mask) const { return best_[mask]; }

private:
    void solve(std::uint32_t mask)
    {
        elems_.clear();
        for (std::uint32_t m = mask; m != 0; m &= m - 1) elems_.push_back(std::countr_zero(m));
        if (elems_.size() == 1) {
            value_[mask] = 0.0;
            return;
        }
        mask_ = mask;
        best_value_ = std::numeric_limits<double>::infinity();
        best_blocks_.clear();
        blocks_.assign(std::min(max_blocks_, elems_.size()), 0u);
        rgs(0, 0);
        value_[mask] = best_value_;
        best_[mask] = best_blocks_;
    }

    void rgs(std::size_t i, std::size_t used)
    {
        if (i == elems_.size()) {
            if (used < 2) return;
            double acc = capacity_ * mass_[mask_];
            for (std::size_t j = 0; j < used; ++j) acc += value_[mask_ ^ blocks_[j]];
            const double cost = acc / static_cast<double>(used - 1);
            if (best_blocks_.empty() || cost < best_value_ - 1e-12 * std::abs(best_value_)) {
                best_value_ = cost;
                best_blocks_.assign(blocks_.begin(), blocks_.begin() + static_cast<std::ptrdiff_t>(used));
            }
            return;
        }
        const std::uint32_t bit = std::uint32_t{1} << elems_[i];
        const std::size_t limit = std::min(used + 1, blocks_.size());
        for (std::size_t j = 0; j < limit; ++j) {
            blocks_[j] |= bit;
            rgs(i + 1, std::max(used, j + 1));
            blocks_[j] &= ~bit;
        }
    }

    std::size_t n_;
    std::size_t max_blocks_;
    double capacity_;
    std::vector<double> mass_;
    std::vector<double> value_;
    std::vector<std::vector<std::uint32_t>> best_;

    std::uint32_t mask_ = 0;
    std::vector<int> elems_;
    std::vector<std::uint32_t> blocks_;
    std::vector<std::uint32_t> best_blocks_;
    double best_value_ = 0.0;
};

} // namespace detail

inline constexpr std::size_t default_support_cap = 12;

/// Exact one-cold entropy, optimal expected feedback time and an optimal tree.
/// Supports above `support_cap` symbols are refused (Bell-number growth).
inline EntropyResult one_cold_entropy(const DiscreteDistribution& dist, const Diversity& diversity,
                                      std::size_t support_cap = default_support_cap)
{
    detail::require(dist.size() <= support_cap, ErrorCode::complexity,
                    "support size " + std::to_string(dist.size()) + " exceeds the cap " + std::to_string(support_cap));
    detail::require(dist.size() <= 24, ErrorCode::complexity, "support size above 24 is not representable");
    const double c = blocking_capacity(diversity);
    const std::size_t max_blocks = static_cast<std::size_t>(std::min<std::uint64_t>(diversity.max_band(), dist.size()));
    const detail::OneColdSolver solver(dist, std::max<std::size_t>(2, max_blocks), c);

    const std::uint32_t full = (std::uint32_t{1} << dist.size()) - 1;
    EntropyResult out;
    out.one_cold_entropy = solver.weighted(full) / solver.mass(full);
    out.expected_time = out.one_cold_entropy / c;
    out.optimal_tree = build_tree(dist.size(), [&](const std::vector<std::size_t>& symbols) {
        std::uint32_t mask = 0;
        for (auto s : symbols) mask |= std::uint32_t{1} << s;
        const auto& blocks = solver.partition(mask);
        std::vector<std::size_t> groups(symbols.size());
        for (std::size_t i = 0; i < symbols.size(); ++i)
            for (std::size_t j = 0; j < blocks.size(); ++j)
                if (blocks[j] & (std::uint32_t{1} << symbols[i])) groups[i] = j;
        return groups;
    });
    return out;
}

/// Expected length in bits of an optimal binary prefix code.
inline double huffman_expected_length(const DiscreteDistribution& dist)
{
    std::priority_queue<double, std::vector<double>, std::greater<>> heap(dist.probs().begin(), dist.probs().end());
    double length = 0.0;
    while (heap.size() > 1) {
        const double a = heap.top();
        heap.pop();
        const double b = heap.top();
        heap.pop();
        length += a + b;
        heap.push(a + b);
    }
    return length;
}

/// 2 - max{max_s P(s), 1/2}: optimal expected time for a 3-symbol source, L >= 3.
inline double ternary_closed_form(const DiscreteDistribution& dist, const Diversity& diversity)
{
    detail::require(dist.size() == 3, ErrorCode::domain, "ternary closed form needs exactly 3 symbols");
    detail::require(diversity.max_band() >= 3, ErrorCode::domain, "ternary closed form needs L >= 3");
    const double pmax = *std::max_element(dist.probs().begin(), dist.probs().end());
    return 2.0 - std::max(pmax, 0.5);
}

struct FeedbackSimulation {
    double mean_time = 0.0;
    double time_stderr = 0.0;
    double error_rate = 0.0;
    std::uint64_t trials = 0;
};

/// Walks the tree over the blocking channel with perfect feedback. At a node
/// with k bands in use the next detection arrives after Exp(k - 1) time in a
/// band chosen uniformly among the k - 1 unblocked ones.
inline FeedbackSimulation simulate_feedback(const OneColdTree& tree, const DiscreteDistribution& dist,
                                            std::uint64_t trials, std::uint64_t seed,
                                            const Diversity& diversity = Diversity::infinite())
{
    tree.validate(dist.size(), diversity);
    const auto est = run_trials_n<2>(trials, seed, [&](std::uint64_t trial_seed) {
        Engine eng(trial_seed);
        std::discrete_distribution<std::size_t> source(dist.probs().begin(), dist.probs().end());
        const std::size_t s = source(eng);
        double elapsed = 0.0;
        std::size_t id = 0;
        while (!tree.node(id).is_leaf()) {
            const auto& u = tree.node(id);
            const auto k = u.children.size();
            const auto blocked = u.group_of(s);
            elapsed += std::exponential_distribution<double>(static_cast<double>(k - 1))(eng);
            auto j = std::uniform_int_distribution<std::size_t>(0, k - 2)(eng);
            if (j >= blocked) ++j;
            id = u.children[j];
        }
        return std::array<double, 2>{elapsed, tree.node(id).symbols.front() == s ? 0.0 : 1.0};
    });
    return {est[0].value, est[0].stderr_, est[1].value, trials};
}

/// Nested JSON: {"leaf": symbol} or {"children": [{"band": j, "sends": [...], "subtree": {...}}, ...]}.
inline nlohmann::ordered_json to_json(const OneColdTree& tree, const DiscreteDistribution& dist)
{
    std::function<nlohmann::ordered_json(std::size_t)> emit = [&](std::size_t id) {
        const auto& u = tree.node(id);
        nlohmann::ordered_json j;
        if (u.is_leaf()) {
            j["leaf"] = dist.support().at(u.symbols.front());
            return j;
        }
        j["children"] = nlohmann::ordered_json::array();
        for (std::size_t b = 0; b < u.children.size(); ++b) {
            nlohmann::ordered_json child;
            child["band"] = b + 1;
            child["sends"] = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < u.symbols.size(); ++i)
                if (u.group[i] == b) child["sends"].push_back(dist.support().at(u.symbols[i]));
            child["subtree"] = emit(u.children[b]);
            j["children"].push_back(std::move(child));
        }
        return j;
    };
    return emit(0);
}

} // namespace ocpc
