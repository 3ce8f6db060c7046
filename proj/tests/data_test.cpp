#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "freezenet/data.hpp"
#include "support/oracles.hpp"

namespace freezenet {
namespace {

namespace fs = std::filesystem;

class IdxFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("fznt_idx_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(IdxFiles, ReadsHeaderAndScalesPixels) {
  std::vector<std::uint8_t> px(3 * 4 * 5);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i * 4);
  oracle::write_idx_images(dir_ / "img", px, 3, 4, 5);
  oracle::write_idx_labels(dir_ / "lab", {7, 0, 9});
  const Dataset d = load_idx(dir_ / "img", dir_ / "lab", DataRole::test);
  EXPECT_EQ(d.images.shape(), (Shape{3, 1, 4, 5}));
  EXPECT_EQ(d.labels, (std::vector<std::int32_t>{7, 0, 9}));
  EXPECT_EQ(d.role, DataRole::test);
  EXPECT_EQ(d.sample_size(), 20u);
  for (std::size_t i = 0; i < px.size(); ++i) EXPECT_EQ(d.images[i], static_cast<float>(px[i]) / 255.0f);
}

TEST_F(IdxFiles, HeaderBytesMatchFormatConstants) {
  oracle::write_idx_images(dir_ / "img", std::vector<std::uint8_t>(2 * 784), 2);
  std::ifstream f(dir_ / "img", std::ios::binary);
  unsigned char head[4];
  f.read(reinterpret_cast<char*>(head), 4);
  EXPECT_EQ(head[0], 0x00);
  EXPECT_EQ(head[1], 0x00);
  EXPECT_EQ(head[2], 0x08);
  EXPECT_EQ(head[3], 0x03);
}

TEST_F(IdxFiles, ZeroPixelsGiveExactZeros) {
  oracle::write_idx_images(dir_ / "img", std::vector<std::uint8_t>(2 * 784, 0), 2);
  oracle::write_idx_labels(dir_ / "lab", {1, 2});
  const Dataset d = load_idx(dir_ / "img", dir_ / "lab");
  for (float v : d.images.data()) ASSERT_EQ(std::bit_cast<std::uint32_t>(v), 0u);
}

TEST_F(IdxFiles, RejectsMalformedFiles) {
  oracle::write_idx_images(dir_ / "img", std::vector<std::uint8_t>(2 * 784, 0), 2);
  oracle::write_idx_labels(dir_ / "lab10", {1, 10});
  EXPECT_THROW(load_idx(dir_ / "img", dir_ / "lab10"), DataError);
  oracle::write_idx_labels(dir_ / "lab3", {1, 2, 3});
  EXPECT_THROW(load_idx(dir_ / "img", dir_ / "lab3"), DataError);
  oracle::write_idx_labels(dir_ / "lab", {1, 2});
  EXPECT_THROW(load_idx(dir_ / "lab", dir_ / "lab"), DataError);  // wrong magic
  oracle::write_idx_images(dir_ / "short", std::vector<std::uint8_t>(784 + 100, 0), 2);
  EXPECT_THROW(load_idx(dir_ / "short", dir_ / "lab"), DataError);
  EXPECT_THROW(load_idx(dir_ / "missing", dir_ / "lab"), DataError);
}

TEST_F(IdxFiles, LoadsMnistLayout) {
  oracle::write_toy_mnist(dir_, 30, 10);
  const MnistSet m = load_mnist(dir_);
  EXPECT_EQ(m.train.size(), 30u);
  EXPECT_EQ(m.test.size(), 10u);
  EXPECT_EQ(m.test.role, DataRole::test);
  EXPECT_THROW(load_mnist(dir_ / "nope"), DataError);
}

Dataset counting(std::size_t n) {
  Dataset d;
  d.images = Tensor(Shape{n, 1, 1, 2});
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.images[2 * i] = static_cast<float>(i);
    d.images[2 * i + 1] = -static_cast<float>(i);
    d.labels[i] = static_cast<std::int32_t>(i % 10);
  }
  return d;
}

TEST(Split, SizesFollowRatio) {
  const Dataset d = counting(60000);
  RngStream s(1, RngPurpose::shuffle);
  auto [tr, va] = split_shuffle(d, SplitRatio::parse("9/1"), s);
  EXPECT_EQ(tr.size(), 54000u);
  EXPECT_EQ(va.size(), 6000u);
  RngStream s2(1, RngPurpose::shuffle);
  auto [tr2, va2] = split_shuffle(d, SplitRatio::parse("19/1"), s2);
  EXPECT_EQ(tr2.size(), 57000u);
  EXPECT_EQ(va2.size(), 3000u);
}

TEST(Split, PartitionsWithoutOverlap) {
  const Dataset d = counting(1000);
  RngStream s(2, RngPurpose::shuffle);
  auto [tr, va] = split_shuffle(d, SplitRatio{3, 1}, s);
  std::set<float> seen;
  for (const Dataset* part : {&tr, &va}) {
    for (std::size_t i = 0; i < part->size(); ++i) {
      const float id = part->images[2 * i];
      EXPECT_EQ(part->images[2 * i + 1], -id);
      EXPECT_EQ(part->labels[i], static_cast<std::int32_t>(id) % 10);
      seen.insert(id);
    }
  }
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(va.role, DataRole::val);
}

TEST(Split, RejectsEmptySide) {
  const Dataset d = counting(5);
  RngStream s(1, RngPurpose::shuffle);
  EXPECT_THROW(split_shuffle(d, SplitRatio{1, 9}, s), ParameterError);
  for (const char* bad : {"9", "0/1", "a/b", "9/"}) EXPECT_THROW(SplitRatio::parse(bad), ParameterError) << bad;
  EXPECT_EQ(SplitRatio::parse("19/1").to_string(), "19/1");
}

TEST(Shuffle, FisherYatesFromTheTop) {
  RngStream a(3, RngPurpose::shuffle), b(3, RngPurpose::shuffle), ref(3, RngPurpose::shuffle);
  const auto p = shuffled_indices(100, a);
  EXPECT_EQ(p, shuffled_indices(100, b));
  std::vector<std::size_t> want(100);
  std::iota(want.begin(), want.end(), 0);
  for (std::size_t i = 99; i >= 1; --i) std::swap(want[i], want[ref.uniform_below(i + 1)]);
  EXPECT_EQ(p, want);
  EXPECT_TRUE(shuffled_indices(0, a).empty());
}

TEST(Dataset, HeadAndGather) {
  const Dataset d = counting(10);
  EXPECT_EQ(d.head(3).size(), 3u);
  EXPECT_EQ(d.head(0).size(), 10u);
  EXPECT_EQ(d.head(50).size(), 10u);
  Tensor x;
  std::vector<std::int32_t> y;
  const std::vector<std::size_t> idx{4, 1};
  d.gather(idx, x, y);
  EXPECT_EQ(x.shape(), (Shape{2, 1, 1, 2}));
  EXPECT_EQ(x[0], 4.0f);
  EXPECT_EQ(y, (std::vector<std::int32_t>{4, 1}));
  const std::vector<std::size_t> bad{10};
  EXPECT_THROW(d.gather(bad, x, y), DataError);
}

TEST(Standardize, UsesReferenceStatistics) {
  Dataset ref = counting(4);  // values 0,0,1,-1,2,-2,3,-3: mean 0, var 3.5
  Dataset d = counting(2);
  standardize(d, ref);
  EXPECT_NEAR(d.images[2], 1.0 / std::sqrt(3.5), 1e-6);
  Dataset flat = counting(1);
  EXPECT_THROW(standardize(d, flat), DataError);
}

}  // namespace
}  // namespace freezenet
