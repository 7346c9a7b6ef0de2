#include "atl/dataset.hpp"
#include "atl/errors.hpp"
#include "atl/tensor_io.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace atl;
using atl::test::TempDir;

namespace {

Dataset small_dataset(Rng& rng, std::size_t n, bool dual = false) {
    std::vector<Tensor> xs;
    std::vector<int> t, o1, o2;
    for (std::size_t i = 0; i < n; ++i) {
        xs.push_back(atl::test::random_tensor({1, 4, 5}, rng));
        t.push_back(static_cast<int>(i % 3));
        o1.push_back(static_cast<int>(i % 2));
        if (dual) o2.push_back(static_cast<int>(i % 4));
    }
    return make_dataset(xs, t, o1, o2);
}

}  // namespace

TEST(Dataset, StacksAndSubsets) {
    Rng rng(1);
    const Dataset d = small_dataset(rng, 6);
    EXPECT_EQ(d.inputs.shape(), (Shape{6, 1, 4, 5}));
    EXPECT_EQ(d.sample_shape(), (Shape{1, 4, 5}));
    EXPECT_EQ(d.num_classes(LabelKey::target), 3);
    EXPECT_THROW(d.labels(LabelKey::orth2), ConfigError);
    const std::size_t idx[] = {4, 1};
    const Dataset s = d.subset(idx);
    EXPECT_EQ(s.target, (std::vector<int>{1, 1}));
    EXPECT_EQ(s.inputs.at(0, 0, 2, 3), d.inputs.at(4, 0, 2, 3));
    const std::size_t bad[] = {6};
    EXPECT_THROW(d.subset(bad), ShapeError);
}

TEST(Dataset, MismatchedShapesRejected) {
    EXPECT_THROW(make_dataset({Tensor({1, 2, 2}), Tensor({1, 2, 3})}, {0, 1}, {0, 1}), ShapeError);
    EXPECT_THROW(make_dataset({Tensor({1, 2, 2})}, {0, 1}, {0}), ConfigError);
    EXPECT_THROW(make_dataset({}, {}, {}), ConfigError);
}

TEST(Manifest, ParsesWithHeaderAndComments) {
    TempDir dir;
    write_file_atomic(dir / "m.csv", "path,target,orth\n# comment\na.wav, 1, 2\n\nb.wav,0,3\n");
    const auto rows = read_manifest(dir / "m.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].path, "a.wav");
    EXPECT_EQ(rows[0].target, 1);
    EXPECT_EQ(rows[0].orth1, 2);
    EXPECT_EQ(rows[0].orth2, -1);
}

TEST(Manifest, ErrorsNameTheLine) {
    TempDir dir;
    write_file_atomic(dir / "m.csv", "a.wav,1,2\nb.wav,x,2\n");
    try {
        read_manifest(dir / "m.csv");
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
    write_file_atomic(dir / "n.csv", "a.wav,1\n");
    EXPECT_THROW(read_manifest(dir / "n.csv"), FormatError);
    write_file_atomic(dir / "o.csv", "a.wav,1,2\nb.wav,1,2,3\n");
    EXPECT_THROW(read_manifest(dir / "o.csv"), FormatError);
    write_file_atomic(dir / "p.csv", "# nothing\n");
    EXPECT_THROW(read_manifest(dir / "p.csv"), FormatError);
    EXPECT_THROW(read_manifest(dir / "missing.csv"), IoError);
}

TEST(Manifest, SaveLoadRoundTrip) {
    TempDir dir;
    Rng rng(2);
    const Dataset d = small_dataset(rng, 5, true);
    const auto manifest = save_dataset(d, dir.path(), "train");
    const Dataset r = load_manifest(manifest);
    EXPECT_EQ(r.inputs.shape(), d.inputs.shape());
    EXPECT_EQ(r.inputs.storage(), d.inputs.storage());
    EXPECT_EQ(r.target, d.target);
    EXPECT_EQ(r.orth1, d.orth1);
    EXPECT_EQ(r.orth2, d.orth2);
}

TEST(Manifest, WavRowsExpandIntoSegments) {
    TempDir dir;
    AudioClip c;
    for (int i = 0; i < 16000 * 2 + 100; ++i) c.samples.push_back(0.3 * std::sin(2 * std::numbers::pi * 440 * i / 16000.0));
    write_wav(dir / "clip.wav", c);
    write_file_atomic(dir / "m.csv", "clip.wav,2,1\n");
    const Dataset d = load_manifest(dir / "m.csv");
    EXPECT_EQ(d.inputs.shape(), (Shape{3, 1, 126, 129}));
    EXPECT_EQ(d.target, (std::vector<int>{2, 2, 2}));
}
