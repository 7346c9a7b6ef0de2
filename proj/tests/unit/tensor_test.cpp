#include "atl/errors.hpp"
#include "atl/rng.hpp"
#include "atl/tensor.hpp"
#include "atl/tensor_io.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

using namespace atl;
using atl::test::random_tensor;
using atl::test::TempDir;

TEST(Tensor, ShapeAndIndexing) {
    Tensor t({2, 3, 4, 5});
    EXPECT_EQ(t.size(), 120u);
    EXPECT_EQ(t.rank(), 4u);
    t.at(1, 2, 3, 4) = 7.0;
    EXPECT_EQ(t[119], 7.0);
    EXPECT_EQ(to_string(t.shape()), "[2,3,4,5]");
    EXPECT_THROW(t.reshaped({7, 7}), ShapeError);
    EXPECT_EQ(t.reshaped({120}).size(), 120u);
}

TEST(Tensor, Slice0CopiesOneItem) {
    Rng rng(1);
    const Tensor t = random_tensor({3, 2, 2}, rng);
    const Tensor s = t.slice0(1);
    EXPECT_EQ(s.shape(), (Shape{1, 2, 2}));
    for (int i = 0; i < 4; ++i) EXPECT_EQ(s[i], t[4 + i]);
}

TEST(Tensor, HashSeesEveryBit) {
    Tensor a({4}, 1.0);
    Tensor b = a;
    EXPECT_EQ(hash_bits(a), hash_bits(b));
    b[3] = std::nextafter(1.0, 2.0);
    EXPECT_NE(hash_bits(a), hash_bits(b));
    EXPECT_NE(hash_bits(Tensor({2, 2})), hash_bits(Tensor({4})));
}

TEST(Rng, DeterministicAndInRange) {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        EXPECT_EQ(u, b.uniform());
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        EXPECT_LT(a.below(7), 7u);
        b.below(7);
    }
    EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
    EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
}

TEST(Rng, NormalMoments) {
    Rng rng(3);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Container, RoundTripIsBitwise) {
    Rng rng(5);
    Container c;
    c.header = {{"kind", "test"}, {"n", 2}};
    c.tensors.push_back({"a", random_tensor({2, 3}, rng)});
    c.tensors.push_back({"b", random_tensor({4, 1, 2, 2}, rng)});
    const std::string bytes = encode_container(c);
    const Container d = decode_container(bytes);
    EXPECT_EQ(d.header, c.header);
    ASSERT_EQ(d.tensors.size(), 2u);
    EXPECT_EQ(d.tensor("a"), c.tensors[0].tensor);
    EXPECT_EQ(d.tensor("b"), c.tensors[1].tensor);
    EXPECT_EQ(encode_container(d), bytes);
    EXPECT_THROW(d.tensor("missing"), FormatError);
}

TEST(Container, Float32Storage) {
    Container c;
    c.tensors.push_back({"x", Tensor({3}, std::vector<double>{0.5, -1.25, 3.0})});
    const Container d = decode_container(encode_container(c, DType::f32));
    EXPECT_EQ(d.tensor("x"), c.tensors[0].tensor);
}

TEST(Container, RejectsCorruption) {
    Container c;
    c.tensors.push_back({"x", Tensor({8}, 1.0)});
    const std::string bytes = encode_container(c);
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() - 1}) {
        EXPECT_THROW(decode_container(bytes.substr(0, cut)), FormatError) << cut;
    }
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(decode_container(bad), FormatError);
    std::string future = bytes;
    future[4] = 9;
    EXPECT_THROW(decode_container(future), VersionError);
    EXPECT_THROW(decode_container(bytes + "junk"), FormatError);
}

TEST(Container, FileRoundTrip) {
    TempDir dir;
    Container c;
    c.header = {{"kind", "file"}};
    c.tensors.push_back({"x", Tensor({2, 2}, 3.0)});
    write_container(dir / "c.atck", c);
    EXPECT_EQ(read_container(dir / "c.atck").tensor("x"), c.tensors[0].tensor);
    EXPECT_THROW(read_container(dir / "missing.atck"), IoError);
}
