#include "ael/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "ael/errors.hpp"
#include "test_util.hpp"

namespace ael {
namespace {

using testing_util::TempDir;
using testing_util::write_file;

TEST(LoadInteractions, ParsesTabSeparatedLine) {
  TempDir dir("load_tsv");
  write_file(dir.path() / "d.tsv", "196\t242\t3\t881250949\n");
  const auto ds = load_interactions(dir.path() / "d.tsv");
  EXPECT_EQ(ds.matrix.num_users(), 1u);
  EXPECT_EQ(ds.matrix.num_items(), 1u);
  EXPECT_EQ(ds.matrix.num_positives(), 1u);
  EXPECT_TRUE(ds.matrix.contains(ds.ids.internal_user("196"), ds.ids.internal_item("242")));
}

TEST(LoadInteractions, CollapsesDuplicates) {
  TempDir dir("load_dup");
  write_file(dir.path() / "d.csv", "1,5\n1,5\n");
  const auto ds = load_interactions(dir.path() / "d.csv");
  EXPECT_EQ(ds.matrix.num_positives(), 1u);
}

TEST(LoadInteractions, SkipsCommentsAndBlankLinesAndAutoDetectsCsv) {
  TempDir dir("load_csv");
  write_file(dir.path() / "d.csv", "# user,item,rating\n\na,x,5\nb,y\na,y,1,99\n");
  const auto ds = load_interactions(dir.path() / "d.csv");
  EXPECT_EQ(ds.matrix.num_users(), 2u);
  EXPECT_EQ(ds.matrix.num_items(), 2u);
  EXPECT_EQ(ds.matrix.num_positives(), 3u);
  // Internal ids are dense and assigned in order of first appearance.
  EXPECT_EQ(ds.ids.internal_user("a"), 0u);
  EXPECT_EQ(ds.ids.internal_item("y"), 1u);
  for (UserIndex u = 0; u < ds.ids.num_users(); ++u) {
    EXPECT_EQ(ds.ids.internal_user(ds.ids.external_user(u)), u);
  }
}

TEST(LoadInteractions, ExplicitFormatOverridesDetection) {
  TempDir dir("load_fmt");
  write_file(dir.path() / "d.txt", "1,2\t3\n");
  // As TSV the first field is "1,2".
  const auto tsv = load_interactions(dir.path() / "d.txt", FileFormat::Tsv);
  EXPECT_EQ(tsv.ids.external_user(0), "1,2");
  const auto csv = load_interactions(dir.path() / "d.txt", FileFormat::Csv);
  EXPECT_EQ(csv.ids.external_user(0), "1");
}

TEST(LoadInteractions, MalformedLineNamesLineNumber) {
  TempDir dir("load_bad");
  write_file(dir.path() / "d.tsv", "1\t2\n# ok\n7\n");
  try {
    load_interactions(dir.path() / "d.tsv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(LoadInteractions, MissingAndEmptyFilesAreDataErrors) {
  TempDir dir("load_missing");
  EXPECT_THROW(load_interactions(dir.path() / "nope.tsv"), DataError);
  write_file(dir.path() / "empty.tsv", "# only a comment\n\n");
  EXPECT_THROW(load_interactions(dir.path() / "empty.tsv"), DataError);
}

TEST(Sparsity, Values) {
  EXPECT_DOUBLE_EQ(sparsity(InteractionMatrix(2, 3, {{}, {}})), 1.0);
  EXPECT_DOUBLE_EQ(sparsity(InteractionMatrix(1, 1, {{0}})), 0.0);
  EXPECT_THROW(sparsity(InteractionMatrix()), std::invalid_argument);
  // MovieLens-100K shape: 1 - 100000 / (943 * 1682).
  std::vector<std::vector<ItemIndex>> rows(943);
  std::size_t placed = 0;
  for (UserIndex u = 0; u < 943 && placed < 100000; ++u) {
    for (ItemIndex i = 0; i < 1682 && placed < 100000; ++i, ++placed) rows[u].push_back(i);
  }
  EXPECT_NEAR(sparsity(InteractionMatrix(943, 1682, std::move(rows))), 0.93695, 5e-6);
}

TEST(InteractionMatrixTest, RejectsOutOfRangeItem) {
  EXPECT_THROW(InteractionMatrix(1, 2, {{2}}), std::invalid_argument);
}

TEST(SplitTrainTest, EightTwoOnTenItems) {
  InteractionMatrix m(2, 20, {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {3}});
  const auto s = split_train_test(m, 0.8, 1);
  EXPECT_EQ(s.train.row(0).size(), 8u);
  EXPECT_EQ(s.test.row(0).size(), 2u);
  EXPECT_EQ(s.train.row(1).size(), 1u);
  EXPECT_EQ(s.test.row(1).size(), 0u);
}

TEST(SplitTrainTest, PartitionsEveryRowAndIsDeterministic) {
  const auto m = testing_util::random_matrix(60, 50, 0.2, 9);
  const auto a = split_train_test(m, 0.8, 123);
  const auto b = split_train_test(m, 0.8, 123);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  for (UserIndex u = 0; u < m.num_users(); ++u) {
    std::set<ItemIndex> train(a.train.row(u).begin(), a.train.row(u).end());
    std::set<ItemIndex> all(train);
    for (ItemIndex i : a.test.row(u)) {
      EXPECT_FALSE(train.count(i));
      all.insert(i);
    }
    EXPECT_EQ(all, std::set<ItemIndex>(m.row(u).begin(), m.row(u).end()));
    const auto n = m.row(u).size();
    EXPECT_EQ(a.train.row(u).size(), static_cast<std::size_t>(std::ceil(0.8 * n - 1e-9)));
  }
}

TEST(InjectNoise, ZeroRateIsIdentity) {
  const auto m = testing_util::random_matrix(20, 30, 0.1, 2);
  EXPECT_EQ(inject_noise(m, 0.0, 5), m);
}

TEST(InjectNoise, AddsExactCountOfNewPositives) {
  const auto m = testing_util::random_matrix(300, 400, 0.05, 3);
  for (double rate : {0.1, 0.37, 1.0, 3.0}) {
    const auto noisy = inject_noise(m, rate, 77);
    const auto expected_added = static_cast<std::size_t>(std::llround(rate * m.num_positives()));
    ASSERT_EQ(noisy.num_positives(), m.num_positives() + expected_added) << rate;
    std::size_t added = 0;
    for (UserIndex u = 0; u < m.num_users(); ++u) {
      for (ItemIndex i : m.row(u)) EXPECT_TRUE(noisy.contains(u, i));
      for (ItemIndex i : noisy.row(u)) added += m.contains(u, i) ? 0 : 1;
    }
    EXPECT_EQ(added, expected_added);
    EXPECT_LT(sparsity(noisy), sparsity(m));
  }
}

TEST(InjectNoise, DeterministicPerSeed) {
  const auto m = testing_util::random_matrix(50, 40, 0.1, 4);
  EXPECT_EQ(inject_noise(m, 0.5, 8), inject_noise(m, 0.5, 8));
  EXPECT_NE(inject_noise(m, 0.5, 8), inject_noise(m, 0.5, 9));
}

TEST(InjectNoise, DenseRegimeFillsMatrix) {
  InteractionMatrix m(3, 4, {{0}, {1, 2}, {}});
  const auto noisy = inject_noise(m, 3.0, 1);
  EXPECT_EQ(noisy.num_positives(), 12u);
  EXPECT_DOUBLE_EQ(sparsity(noisy), 0.0);
  EXPECT_THROW(inject_noise(m, 3.5, 1), std::invalid_argument);
}

}  // namespace
}  // namespace ael
