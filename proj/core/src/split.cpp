#include "atl/errors.hpp"
#include "atl/rng.hpp"
#include "atl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace atl {

namespace {

void check_fractions(const SplitFractions& f) {
    if (f.train <= 0 || f.val <= 0 || f.test <= 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
        throw ConfigError("split fractions must be positive and sum to 1");
    }
}

SplitIndices random_split(const Dataset& data, std::uint64_t seed, const SplitFractions& f) {
    Rng rng(seed);
    // Shuffle within each target class, then deal the classes round-robin so
    // any prefix of the sequence is (nearly) stratified.
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data.target[i]].push_back(i);
    for (auto& [label, idx] : by_class) rng.shuffle(idx);
    std::vector<std::size_t> order;
    order.reserve(data.size());
    for (std::size_t round = 0; order.size() < data.size(); ++round) {
        for (auto& [label, idx] : by_class) {
            if (round < idx.size()) order.push_back(idx[round]);
        }
    }
    const auto n = static_cast<double>(data.size());
    const auto n_train = static_cast<std::size_t>(std::llround(f.train * n));
    const auto n_val = std::min(data.size() - n_train, static_cast<std::size_t>(std::llround(f.val * n)));
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return s;
}

SplitIndices class_wise_split(const Dataset& data, std::uint64_t seed, LabelKey key, const SplitFractions& f) {
    const auto& groups = data.labels(key);
    std::map<int, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < data.size(); ++i) by_group[groups[i]].push_back(i);
    if (by_group.size() < 3) {
        throw ConfigError("class-wise split needs at least 3 distinct " + std::string(to_string(key)) +
                          " classes, found " + std::to_string(by_group.size()));
    }
    std::vector<int> order;
    for (const auto& [g, idx] : by_group) order.push_back(g);
    Rng rng(seed);
    rng.shuffle(order);  // seeded tie-break among equal sizes
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return by_group[a].size() > by_group[b].size(); });

    const double n = static_cast<double>(data.size());
    const double quota[3] = {f.train * n, f.val * n, f.test * n};
    double assigned[3] = {0, 0, 0};
    int classes_in[3] = {0, 0, 0};
    SplitIndices s;
    std::vector<std::size_t>* target[3] = {&s.train, &s.val, &s.test};
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto remaining = order.size() - i;
        const int empty = (classes_in[0] == 0) + (classes_in[1] == 0) + (classes_in[2] == 0);
        int pick = -1;
        for (int k = 0; k < 3; ++k) {
            if (static_cast<std::size_t>(empty) >= remaining && classes_in[k] != 0) continue;
            if (pick < 0 || quota[k] - assigned[k] > quota[pick] - assigned[pick]) pick = k;
        }
        auto& idx = by_group[order[i]];
        target[pick]->insert(target[pick]->end(), idx.begin(), idx.end());
        assigned[pick] += static_cast<double>(idx.size());
        ++classes_in[pick];
    }
    for (auto* v : target) std::sort(v->begin(), v->end());
    return s;
}

}  // namespace

SplitIndices split(const Dataset& data, SplitPolicy policy, std::uint64_t seed, LabelKey group_key,
                   const SplitFractions& fractions) {
    check_fractions(fractions);
    if (data.size() < 3) throw ConfigError("need at least 3 samples to split");
    return policy == SplitPolicy::random ? random_split(data, seed, fractions)
                                         : class_wise_split(data, seed, group_key, fractions);
}

Splits apply_split(const Dataset& data, const SplitIndices& indices) {
    if (indices.train.empty() || indices.val.empty() || indices.test.empty()) {
        throw ConfigError("split produced an empty train, validation or test set");
    }
    return {data.subset(indices.train), data.subset(indices.val), data.subset(indices.test)};
}

}  // namespace atl
