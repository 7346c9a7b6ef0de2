#include "atl/errors.hpp"
#include "atl/trainer.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace atl;

namespace {

Dataset labelled(std::size_t n, int target_classes, int groups) {
    std::vector<Tensor> xs;
    std::vector<int> t, o;
    for (std::size_t i = 0; i < n; ++i) {
        xs.push_back(Tensor({1, 1, 1}, static_cast<double>(i)));
        t.push_back(static_cast<int>(i) % target_classes);
        o.push_back(static_cast<int>(i / 7) % groups);
    }
    return make_dataset(xs, t, o);
}

}  // namespace

TEST(Split, RandomIsSeventyTwentyTen) {
    const Dataset d = labelled(1000, 4, 5);
    const auto s = split(d, SplitPolicy::random, 3);
    EXPECT_EQ(s.train.size(), 700u);
    EXPECT_EQ(s.val.size(), 200u);
    EXPECT_EQ(s.test.size(), 100u);
}

TEST(Split, RandomIsADisjointCover) {
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 3 + rng.below(300);
        const Dataset d = labelled(n, 1 + static_cast<int>(rng.below(5)), 3);
        const auto s = split(d, SplitPolicy::random, rng.next_u64());
        std::vector<std::size_t> all = s.train;
        all.insert(all.end(), s.val.begin(), s.val.end());
        all.insert(all.end(), s.test.begin(), s.test.end());
        std::sort(all.begin(), all.end());
        ASSERT_EQ(all.size(), n);
        for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(all[i], i);
    }
}

TEST(Split, RandomIsStratified) {
    const Dataset d = labelled(400, 4, 3);
    const auto s = split(d, SplitPolicy::random, 9);
    int counts[4] = {};
    for (auto i : s.train) ++counts[d.target[i]];
    for (int c : counts) EXPECT_EQ(c, 70);
}

TEST(Split, Reproducible) {
    const Dataset d = labelled(200, 3, 4);
    const auto a = split(d, SplitPolicy::random, 5);
    const auto b = split(d, SplitPolicy::random, 5);
    const auto c = split(d, SplitPolicy::random, 6);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    EXPECT_NE(a.train, c.train);
}

TEST(Split, ClassWiseKeepsGroupsTogether) {
    const Dataset d = labelled(350, 3, 5);  // 5 speakers, 70 samples each
    const auto s = split(d, SplitPolicy::class_wise, 2);
    std::set<int> seen[3];
    const std::vector<std::size_t>* parts[3] = {&s.train, &s.val, &s.test};
    for (int k = 0; k < 3; ++k) {
        EXPECT_FALSE(parts[k]->empty());
        for (auto i : *parts[k]) seen[k].insert(d.orth1[i]);
    }
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
            for (int g : seen[a]) EXPECT_EQ(seen[b].count(g), 0u) << "group " << g << " in two splits";
    EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 350u);
    EXPECT_EQ(seen[0].size() + seen[1].size() + seen[2].size(), 5u);
}

TEST(Split, ClassWiseNeedsThreeGroups) {
    EXPECT_THROW(split(labelled(100, 2, 2), SplitPolicy::class_wise, 1), ConfigError);
}

TEST(Split, ApplyRejectsEmptyParts) {
    const Dataset d = labelled(10, 2, 3);
    SplitIndices s;
    s.train = {0, 1};
    s.val = {2};
    EXPECT_THROW(apply_split(d, s), ConfigError);
    s.test = {3};
    const Splits out = apply_split(d, s);
    EXPECT_EQ(out.test.inputs[0], 3.0);
}

TEST(Split, BadFractions) {
    EXPECT_THROW(split(labelled(10, 2, 3), SplitPolicy::random, 1, LabelKey::orth1, {0.5, 0.5, 0.5}), ConfigError);
}
