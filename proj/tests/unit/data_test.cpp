#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "test_support.hpp"

namespace mf = medfact;
using mf::Matrix;

namespace {

mf::Schema two_feature_schema() {
  mf::Schema s;
  s.dynamic = {"HR", "O2Sat"};
  s.static_columns = {"Age", "Gender"};
  s.label = "SepsisLabel";
  return s;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

// PSV ingestion -----------------------------------------------------------------

TEST(Psv, TwoVisitExample) {
  std::istringstream in("HR|O2Sat|Age|Gender|SepsisLabel\n80|97|60|1|0\n85|NaN|60|1|1\n");
  mf::PatientRecord rec;
  ASSERT_TRUE(mf::parse_psv_record(in, "p.psv", two_feature_schema(), rec));
  EXPECT_EQ(rec.visit_count(), 2u);
  EXPECT_EQ(rec.dynamic.cols(), 2u);
  EXPECT_EQ(rec.static_values.size(), 2u);
  EXPECT_EQ(rec.label, 1);
  EXPECT_EQ(rec.dynamic(1, 0), 85.0);
  EXPECT_TRUE(std::isnan(rec.dynamic(1, 1)));
  EXPECT_EQ(rec.static_values[0], 60.0);
}

TEST(Psv, EmptyDirectoryGivesEmptyCohort) {
  const auto dir = mf::testing::temp_dir("psv_empty");
  const auto c = mf::load_psv_cohort(dir, two_feature_schema());
  EXPECT_EQ(c.size(), 0u);
  EXPECT_EQ(c.dropped_short, 0u);
}

TEST(Psv, MissingLabelColumnNamesFileAndColumn) {
  const auto dir = mf::testing::temp_dir("psv_nolabel");
  write_file(dir / "p1.psv", "HR|O2Sat|Age|Gender\n80|97|60|1\n");
  try {
    mf::load_psv_cohort(dir, two_feature_schema());
    FAIL() << "expected FormatError";
  } catch (const mf::FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("p1.psv"), std::string::npos) << msg;
    EXPECT_NE(msg.find("SepsisLabel"), std::string::npos) << msg;
  }
}

TEST(Psv, UnparseableCellReportsLineNumber) {
  std::istringstream in("HR|O2Sat|Age|Gender|SepsisLabel\n80|97|60|1|0\n85|abc|60|1|0\n");
  mf::PatientRecord rec;
  try {
    mf::parse_psv_record(in, "q.psv", two_feature_schema(), rec);
    FAIL() << "expected FormatError";
  } catch (const mf::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("q.psv:3"), std::string::npos) << e.what();
  }
}

TEST(Psv, ShortPatientsAreDroppedAndCounted) {
  const auto dir = mf::testing::temp_dir("psv_short");
  write_file(dir / "a.psv", "HR|O2Sat|Age|Gender|SepsisLabel\n80|97|60|1|0\n");
  write_file(dir / "b.psv", "HR|O2Sat|Age|Gender|SepsisLabel\n80|97|60|1|0\n81|96|60|1|0\n");
  auto schema = two_feature_schema();
  schema.t_min = 2;
  const auto c = mf::load_psv_cohort(dir, schema);
  EXPECT_EQ(c.size(), 1u);
  EXPECT_EQ(c.dropped_short, 1u);
  EXPECT_EQ(c.records[0].id, "b");
}

TEST(Psv, LongPatientsKeepTheirLastVisits) {
  std::istringstream in("HR|O2Sat|Age|Gender|SepsisLabel\n1|1|60|1|0\n2|2|60|1|0\n3|3|60|1|0\n");
  auto schema = two_feature_schema();
  schema.t_max = 2;
  mf::PatientRecord rec;
  ASSERT_TRUE(mf::parse_psv_record(in, "x", schema, rec));
  EXPECT_EQ(rec.dynamic, (Matrix{{2, 2}, {3, 3}}));
}

TEST(Psv, ExtraColumnsIgnoredAndOrderFollowsSchema) {
  std::istringstream in("Gender|ICULOS|O2Sat|HR|Age|SepsisLabel\n0|1|95|70|40|0\n");
  mf::PatientRecord rec;
  ASSERT_TRUE(mf::parse_psv_record(in, "x", two_feature_schema(), rec));
  EXPECT_EQ(rec.dynamic, (Matrix{{70, 95}}));
  EXPECT_EQ(rec.static_values, (std::vector<double>{40, 0}));
  EXPECT_EQ(rec.label, 0);
}

TEST(Psv, RoundTripIsBitExactIncludingNan) {
  mf::SyntheticSpec spec;
  spec.patients = 25;
  auto syn = mf::generate_synthetic(spec).cohort;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  syn.records[0].dynamic(0, 0) = nan;
  syn.records[3].dynamic(2, 5) = nan;
  syn.records[4].dynamic(1, 1) = 1.0 / 3.0;
  syn.records[5].static_values[1] = nan;
  const auto dir = mf::testing::temp_dir("psv_roundtrip");
  auto schema = mf::write_psv_cohort(syn, dir);
  const auto back = mf::load_psv_cohort(dir, schema);
  ASSERT_EQ(back.size(), syn.size());
  EXPECT_EQ(back.dynamic_names, syn.dynamic_names);
  EXPECT_EQ(back.static_names, syn.static_names);
  for (std::size_t p = 0; p < syn.size(); ++p) {
    const auto& a = syn.records[p];
    const auto& b = back.records[p];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.label, b.label);
    ASSERT_EQ(a.dynamic.rows(), b.dynamic.rows());
    for (std::size_t i = 0; i < a.dynamic.size(); ++i)
      ASSERT_TRUE(bit_equal(a.dynamic.data()[i], b.dynamic.data()[i])) << a.id << " entry " << i;
    for (std::size_t j = 0; j < a.static_values.size(); ++j)
      ASSERT_TRUE(bit_equal(a.static_values[j], b.static_values[j])) << a.id;
  }
}

TEST(Schema, JsonRoundTripAndValidation) {
  auto s = two_feature_schema();
  s.t_min = 3;
  s.t_max = 9;
  const auto back = mf::schema_from_json(mf::to_json(s));
  EXPECT_EQ(back.dynamic, s.dynamic);
  EXPECT_EQ(back.static_columns, s.static_columns);
  EXPECT_EQ(back.label, s.label);
  EXPECT_EQ(back.t_min, 3u);
  EXPECT_EQ(back.t_max, 9u);
  EXPECT_THROW(mf::schema_from_json(nlohmann::json{{"static", {"a"}}}), mf::FormatError);
}

// Synthetic generator -------------------------------------------------------------

TEST(Synthetic, SameSeedIdenticalCohorts) {
  mf::SyntheticSpec spec;
  spec.patients = 50;
  const auto a = mf::generate_synthetic(spec), b = mf::generate_synthetic(spec);
  ASSERT_EQ(a.cohort.size(), b.cohort.size());
  for (std::size_t p = 0; p < a.cohort.size(); ++p) {
    EXPECT_EQ(a.cohort.records[p].dynamic, b.cohort.records[p].dynamic);
    EXPECT_EQ(a.cohort.records[p].static_values, b.cohort.records[p].static_values);
    EXPECT_EQ(a.cohort.records[p].label, b.cohort.records[p].label);
  }
  EXPECT_EQ(a.planted, b.planted);
  spec.seed = 8;
  EXPECT_NE(mf::generate_synthetic(spec).cohort.records[0].dynamic, a.cohort.records[0].dynamic);
}

TEST(Synthetic, NoiselessSameGroupFeaturesArePerfectlyCorrelated) {
  mf::SyntheticSpec spec;
  spec.patients = 30;
  spec.noise_std = 0.0;
  const auto syn = mf::generate_synthetic(spec);
  const auto labels = syn.planted.labels();
  for (const auto& rec : syn.cohort.records) {
    for (std::size_t i = 0; i < spec.features; ++i)
      for (std::size_t j = i + 1; j < spec.features; ++j) {
        if (labels[i] != labels[j]) continue;
        EXPECT_NEAR(pearson(mf::column(rec.dynamic, i), mf::column(rec.dynamic, j)), 1.0, 1e-9);
      }
  }
}

TEST(Synthetic, DefaultCohortShapeAndPositiveRate) {
  const auto syn = mf::generate_synthetic(mf::SyntheticSpec{});
  const auto& c = syn.cohort;
  EXPECT_EQ(c.size(), 2000u);
  EXPECT_EQ(c.dynamic_count(), 12u);
  EXPECT_EQ(syn.planted.k(), 3u);
  EXPECT_GE(c.positive_fraction(), 0.2);
  EXPECT_LE(c.positive_fraction(), 0.5);
  for (const auto& r : c.records) {
    EXPECT_GE(r.visit_count(), 12u);
    EXPECT_LE(r.visit_count(), 20u);
  }
}

TEST(Synthetic, PlantedGroupsAreNearEven) {
  const auto a = mf::planted_blocks(10, 3);
  EXPECT_EQ(a.groups(), (std::vector<std::vector<std::size_t>>{{0, 1, 2, 3}, {4, 5, 6}, {7, 8, 9}}));
}

TEST(Synthetic, InvalidSpecsAreRejected) {
  mf::SyntheticSpec spec;
  spec.patients = 0;
  EXPECT_THROW(mf::generate_synthetic(spec), mf::ValidationError);
  spec = {};
  spec.groups = 13;
  EXPECT_THROW(mf::generate_synthetic(spec), mf::ValidationError);
  spec = {};
  spec.noise_std = -1;
  EXPECT_THROW(mf::generate_synthetic(spec), mf::ValidationError);
}

// Preprocessing ---------------------------------------------------------------------

namespace {

mf::Cohort one_feature_cohort(std::vector<std::vector<double>> series) {
  mf::Cohort c;
  c.dynamic_names = {"x"};
  for (std::size_t p = 0; p < series.size(); ++p) {
    mf::PatientRecord r;
    r.id = "p" + std::to_string(p);
    r.dynamic = Matrix(series[p].size(), 1, series[p]);
    c.records.push_back(r);
  }
  return c;
}

}  // namespace

TEST(Preprocess, ForwardFillThenTrainMean) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  mf::NormalizationStats st{{3.0}, {1.0}, {}, {}};
  mf::PatientRecord rec;
  rec.dynamic = Matrix(4, 1, {nan, 2, nan, 4});
  mf::impute_record(rec, st);
  EXPECT_EQ(rec.dynamic, Matrix(4, 1, {3, 2, 2, 4}));
}

TEST(Preprocess, ConstantFeatureBecomesZeros) {
  auto c = one_feature_cohort({{5, 5, 5}, {5, 5}});
  const auto out = mf::preprocess(c, {0, 1});
  for (const auto& r : out.records)
    for (double v : r.dynamic.data()) EXPECT_EQ(v, 0.0);
}

TEST(Preprocess, CompleteRecordChangesOnlyAffinely) {
  auto c = one_feature_cohort({{1, 2, 4}, {3, 5, 7}});
  const auto out = mf::preprocess(c, {0, 1});
  const auto& st = *out.normalization;
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t t = 0; t < 3; ++t)
      EXPECT_NEAR(out.records[p].dynamic(t, 0) * st.dynamic_std[0] + st.dynamic_mean[0], c.records[p].dynamic(t, 0), 1e-12);
  EXPECT_NEAR(st.dynamic_mean[0], 22.0 / 6.0, 1e-12);
}

TEST(Preprocess, StatisticsComeFromTrainingRecordsOnly) {
  auto c = one_feature_cohort({{1, 3}, {100, 300}});
  const auto out = mf::preprocess(c, {0});
  EXPECT_DOUBLE_EQ(out.normalization->dynamic_mean[0], 2.0);
  EXPECT_DOUBLE_EQ(out.normalization->dynamic_std[0], 1.0);
}

TEST(Preprocess, FeatureMissingInTrainingNamesIt) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto c = one_feature_cohort({{nan, nan}, {1, 2}});
  c.dynamic_names = {"Lactate"};
  try {
    mf::preprocess(c, {0});
    FAIL() << "expected PreprocessError";
  } catch (const mf::PreprocessError& e) {
    EXPECT_NE(std::string(e.what()).find("Lactate"), std::string::npos);
  }
}

TEST(Preprocess, StdIsFlooredForNearConstantFeatures) {
  auto c = one_feature_cohort({{1.0, 1.0 + 1e-9}});
  const auto out = mf::preprocess(c, {0});
  EXPECT_GE(out.normalization->dynamic_std[0], mf::kStdFloor);
  EXPECT_TRUE(out.records[0].dynamic.all_finite());
}

// Splits ------------------------------------------------------------------------------

namespace {

std::vector<int> labels_with_rate(std::size_t n, std::size_t positives) {
  std::vector<int> y(n, 0);
  for (std::size_t i = 0; i < positives; ++i) y[(i * 7919) % n] = 1;
  return y;
}

double rate(const std::vector<std::size_t>& idx, const std::vector<int>& y) {
  double pos = 0;
  for (auto i : idx) pos += y[i];
  return pos / static_cast<double>(idx.size());
}

void expect_partition(const mf::SplitDescriptor& s, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& part : s.parts)
    for (auto i : part) ++seen.at(i);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen[i], 1) << i;
}

}  // namespace

TEST(Split, HoldoutHundredIs80_10_10) {
  const auto y = labels_with_rate(100, 30);
  const auto s = mf::holdout_split(y, 1);
  EXPECT_EQ(s.train().size(), 80u);
  EXPECT_EQ(s.validation().size(), 10u);
  EXPECT_EQ(s.test().size(), 10u);
  expect_partition(s, 100);
}

TEST(Split, KFoldOn662) {
  const auto y = labels_with_rate(662, 120);
  const auto s = mf::kfold_split(y, 5, 3);
  std::vector<std::size_t> sizes;
  for (const auto& p : s.parts) sizes.push_back(p.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{133, 133, 132, 132, 132}));
  expect_partition(s, 662);
}

TEST(Split, StratificationWithinTwoPoints) {
  const auto y = labels_with_rate(2000, 700);
  const double overall = 0.35;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto h = mf::holdout_split(y, seed);
    for (const auto& p : h.parts) EXPECT_NEAR(rate(p, y), overall, 0.02);
    const auto k = mf::kfold_split(y, 5, seed);
    for (const auto& p : k.parts) EXPECT_NEAR(rate(p, y), overall, 0.02);
  }
}

TEST(Split, ErrorsAndDeterminism) {
  const auto y = labels_with_rate(4, 2);
  EXPECT_THROW(mf::kfold_split(y, 5, 0), mf::SplitError);
  EXPECT_THROW(mf::kfold_split(y, 1, 0), mf::SplitError);
  const auto big = labels_with_rate(300, 90);
  EXPECT_EQ(mf::holdout_split(big, 9).parts, mf::holdout_split(big, 9).parts);
  EXPECT_NE(mf::holdout_split(big, 9).parts, mf::holdout_split(big, 10).parts);
}

TEST(Split, InnerValidationIsDisjointAndStratified) {
  const auto y = labels_with_rate(900, 300);
  std::vector<std::size_t> idx(900);
  for (std::size_t i = 0; i < 900; ++i) idx[i] = i;
  const auto [tr, va] = mf::inner_validation_split(idx, y, 2);
  EXPECT_EQ(va.size(), 100u);
  EXPECT_EQ(tr.size(), 800u);
  std::set<std::size_t> all(tr.begin(), tr.end());
  for (auto i : va) EXPECT_TRUE(all.insert(i).second);
  EXPECT_NEAR(rate(va, y), 1.0 / 3.0, 0.02);
}

TEST(Cohort, SummaryFields) {
  auto c = mf::testing::tiny_cohort(10, 3, 2, 4, 6, 1);
  const auto s = mf::summarize(c);
  EXPECT_EQ(s.patients, 10u);
  EXPECT_EQ(s.dynamic_features, 3u);
  EXPECT_EQ(s.static_features, 2u);
  EXPECT_GE(s.min_visits, 4u);
  EXPECT_LE(s.max_visits, 6u);
  EXPECT_DOUBLE_EQ(s.avg_visits, static_cast<double>(s.visits) / 10.0);
  EXPECT_DOUBLE_EQ(s.positive_fraction, 0.5);
}
