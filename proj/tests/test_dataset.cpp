#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <semigrad/dataset.hpp>

using namespace semigrad;

namespace {

void write_be32(std::ostream& os, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<char*>(buf), 4);
}

std::string tmp_path(const std::string& name) {
    return ::testing::TempDir() + name;
}

}  // namespace

TEST(SyntheticBlobs, DeterministicAcrossRuns) {
    Dataset a = synthetic_blobs(7, 2, 50, 16);
    Dataset b = synthetic_blobs(7, 2, 50, 16);
    EXPECT_TRUE(bitwise_equal(a.features, b.features));
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.features.shape[0], 100u);
}

TEST(SyntheticBlobs, FeaturesInUnitRangeAndLabelsValid) {
    Dataset ds = synthetic_blobs(3, 4, 25, 8);
    for (double v : ds.features.data) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    for (std::size_t l : ds.labels) EXPECT_LT(l, 4u);
    EXPECT_EQ(ds.num_classes, 4u);
}

TEST(Idx, RoundTripThroughWrittenFile) {
    std::string img = tmp_path("imgs.idx");
    std::string lbl = tmp_path("lbls.idx");
    {
        std::ofstream os(img, std::ios::binary);
        write_be32(os, 0x00000803);
        write_be32(os, 2);
        write_be32(os, 2);
        write_be32(os, 3);
        unsigned char px[12] = {0, 255, 128, 1, 2, 3, 4, 5, 6, 7, 8, 9};
        os.write(reinterpret_cast<char*>(px), 12);
    }
    {
        std::ofstream os(lbl, std::ios::binary);
        write_be32(os, 0x00000801);
        write_be32(os, 2);
        unsigned char ls[2] = {1, 0};
        os.write(reinterpret_cast<char*>(ls), 2);
    }
    Tensor t = load_idx_images(img);
    std::vector<std::size_t> shape = {2, 1, 2, 3};
    EXPECT_EQ(t.shape, shape);
    EXPECT_DOUBLE_EQ(t.data[0], 0.0);
    EXPECT_DOUBLE_EQ(t.data[1], 1.0);
    EXPECT_DOUBLE_EQ(t.data[2], 128.0 / 255.0);
    std::vector<std::size_t> labels = load_idx_labels(lbl);
    EXPECT_EQ(labels, (std::vector<std::size_t>{1, 0}));
    std::remove(img.c_str());
    std::remove(lbl.c_str());
}

TEST(Idx, WrongMagicNamesOffset) {
    std::string path = tmp_path("bad.idx");
    {
        std::ofstream os(path, std::ios::binary);
        write_be32(os, 0xDEADBEEF);
        write_be32(os, 1);
    }
    try {
        load_idx_images(path);
        FAIL() << "expected load error";
    } catch (const std::runtime_error& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("offset 0"), std::string::npos) << msg;
    }
    std::remove(path.c_str());
}

TEST(Idx, TruncatedFileRejected) {
    std::string path = tmp_path("trunc.idx");
    {
        std::ofstream os(path, std::ios::binary);
        write_be32(os, 0x00000803);
        write_be32(os, 100);
        write_be32(os, 28);
        write_be32(os, 28);
        // no pixel data
    }
    EXPECT_THROW(load_idx_images(path), std::runtime_error);
    std::remove(path.c_str());
}

TEST(Csv, ParsesAndScalesRows) {
    std::string path = tmp_path("data.csv");
    {
        std::ofstream os(path);
        os << "0,0,128,255\n1,10,20,30\n";
    }
    Dataset ds = load_csv(path);
    EXPECT_EQ(ds.labels.size(), ds.features.shape[0]);
    EXPECT_EQ(ds.labels, (std::vector<std::size_t>{0, 1}));
    EXPECT_DOUBLE_EQ(ds.features(0, 2), 1.0);
    EXPECT_DOUBLE_EQ(ds.features(0, 1), 128.0 / 255.0);
    EXPECT_EQ(ds.num_classes, 2u);
    std::remove(path.c_str());
}

TEST(Csv, InconsistentWidthRejected) {
    std::string path = tmp_path("ragged.csv");
    {
        std::ofstream os(path);
        os << "0,1,2\n1,3\n";
    }
    EXPECT_THROW(load_csv(path), std::runtime_error);
    std::remove(path.c_str());
}
