#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "helpers.hpp"

using namespace grurec;
using grurec::testing::make_sample;
using grurec::testing::random_matrix;

TEST(DatasetIo, TwoLineFile) {
  std::istringstream in(
      R"({"id":"a","label":"swipe","subject":"p1","frames":[[1,2],[3,4]]})"
      "\n"
      R"({"id":"b","label":"tap","frames":[[5,6]]})"
      "\n");
  const Dataset d = read_dataset(in);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.samples[0].label, "swipe");
  EXPECT_EQ(d.samples[1].label, "tap");
  EXPECT_EQ(d.classes, (std::vector<std::string>{"swipe", "tap"}));
  EXPECT_EQ(*d.samples[0].subject, "p1");
  EXPECT_FALSE(d.samples[1].subject);
  EXPECT_EQ(d.samples[0].frames(1, 0), 3.0);
  EXPECT_EQ(d.dim(), 2);
}

TEST(DatasetIo, RaggedFrameNamesTheLine) {
  std::istringstream in(
      R"({"id":"a","label":"x","frames":[[1,2],[3,4]]})"
      "\n"
      R"({"id":"b","label":"x","frames":[[1,2],[3]]})"
      "\n");
  try {
    read_dataset(in);
    FAIL() << "expected a data error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(DatasetIo, InconsistentDimensionAcrossLines) {
  std::istringstream in(
      R"({"id":"a","label":"x","frames":[[1,2]]})"
      "\n"
      R"({"id":"b","label":"x","frames":[[1,2,3]]})"
      "\n");
  EXPECT_THROW(read_dataset(in), DataError);
}

TEST(DatasetIo, EmptyFileAndMalformedJson) {
  std::istringstream empty("");
  EXPECT_THROW(read_dataset(empty), DataError);
  std::istringstream bad("{\"id\": \n");
  EXPECT_THROW(read_dataset(bad), DataError);
  std::istringstream no_frames(R"({"id":"a","label":"x","frames":[]})");
  EXPECT_THROW(read_dataset(no_frames), DataError);
}

TEST(DatasetIo, MissingLabelAllowedOnlyWhenOptional) {
  const std::string line = R"({"id":"a","frames":[[1]]})";
  std::istringstream a(line), b(line);
  EXPECT_THROW(read_dataset(a), DataError);
  EXPECT_EQ(read_dataset(b, LabelPolicy::optional).size(), 1u);
}

TEST(DatasetIo, WriteReadRoundTrip) {
  SeededRng rng(1);
  Dataset d;
  for (int i = 0; i < 3; ++i) d.add(make_sample("s" + std::to_string(i), i % 2 ? "b" : "a", 4 + i, 3, rng));
  d.samples[1].subject = "p9";
  std::stringstream buf;
  write_dataset(buf, d);
  const Dataset back = read_dataset(buf);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.samples[i].frames, d.samples[i].frames);
    EXPECT_EQ(back.samples[i].subject, d.samples[i].subject);
    EXPECT_EQ(back.samples[i].class_index, d.samples[i].class_index);
  }
}

TEST(Zscore, TrainingPoolIsStandardized) {
  SeededRng rng(2);
  std::vector<GestureSample> pool;
  for (int i = 0; i < 5; ++i) {
    auto s = make_sample("s", "a", 7 + i, 3, rng);
    s.frames.col(1).array() = s.frames.col(1).array() * 4.0 + 10.0;
    pool.push_back(s);
  }
  const NormStats stats = zscore_fit(pool);
  Vector<double> sum = Vector<double>::Zero(3), sq = Vector<double>::Zero(3);
  double frames = 0;
  for (const auto& s : pool) {
    const auto z = zscore_apply(s, stats);
    sum += z.frames.colwise().sum().transpose();
    sq += z.frames.array().square().colwise().sum().matrix().transpose();
    frames += static_cast<double>(z.length());
  }
  for (Index k = 0; k < 3; ++k) {
    EXPECT_LE(std::abs(sum[k] / frames), 1e-6);
    EXPECT_NEAR(std::sqrt(sq[k] / frames), 1.0, 1e-4);
  }
}

TEST(Zscore, ConstantFeatureIsExactlyZero) {
  SeededRng rng(3);
  std::vector<GestureSample> pool{make_sample("a", "x", 5, 2, rng), make_sample("b", "x", 4, 2, rng)};
  for (auto& s : pool) s.frames.col(0).setConstant(0.1 + 0.2);
  const NormStats stats = zscore_fit(pool);
  for (const auto& s : pool) EXPECT_EQ(zscore_apply(s, stats).frames.col(0), Vector<double>::Zero(s.length()));
}

TEST(Zscore, TestSampleUsesTrainStatistics) {
  SeededRng rng(4);
  std::vector<GestureSample> pool{make_sample("a", "x", 50, 2, rng)};
  const NormStats stats = zscore_fit(pool);
  GestureSample shifted = pool[0];
  shifted.frames.array() += 5.0;
  const auto z = zscore_apply(shifted, stats);
  const auto base = zscore_apply(pool[0], stats);
  for (Index k = 0; k < 2; ++k) {
    const double expect = 5.0 / stats.std[static_cast<std::size_t>(k)];
    EXPECT_LT(((z.frames.col(k) - base.frames.col(k)).array() - expect).abs().maxCoeff(), 1e-12);
    EXPECT_NEAR(z.frames.col(k).mean(), expect, 1e-9);
  }
}

TEST(Zscore, EmptyPoolAndDimensionMismatch) {
  EXPECT_THROW(zscore_fit(std::span<const GestureSample>()), DataError);
  SeededRng rng(5);
  std::vector<GestureSample> pool{make_sample("a", "x", 5, 2, rng)};
  EXPECT_THROW(zscore_apply(make_sample("b", "x", 3, 3, rng), zscore_fit(pool)), DataError);
}

TEST(PadBatch, EqualLengthsHaveNoPadding) {
  SeededRng rng(6);
  std::vector<GestureSample> s{make_sample("a", "x", 4, 2, rng), make_sample("b", "x", 4, 2, rng)};
  const auto b = pad_batch<double>(std::span<const GestureSample>(s));
  EXPECT_EQ(b.steps(), 4);
  for (Index r = 0; r < b.data.rows(); ++r) EXPECT_GT(b.data.row(r).cwiseAbs().sum(), 0.0);
}

TEST(PadBatch, LengthsThreeAndFive) {
  SeededRng rng(7);
  std::vector<GestureSample> s{make_sample("a", "x", 3, 2, rng), make_sample("b", "x", 5, 2, rng)};
  const auto b = pad_batch<double>(std::span<const GestureSample>(s));
  EXPECT_EQ(b.steps(), 5);
  int zero_frames = 0;
  for (Index t = 0; t < 5; ++t) {
    bool zero = true;
    for (Index n = 0; n < 2; ++n) zero = zero && b.value(0, n, t) == 0.0;
    zero_frames += zero;
  }
  EXPECT_EQ(zero_frames, 2);
  EXPECT_EQ(b.value(1, 1, 4), s[1].frames(4, 1));

  const auto back = unpad(b);
  EXPECT_EQ(back[0], s[0].frames);
  EXPECT_EQ(back[1], s[1].frames);
}

TEST(PadBatch, EmptyAndMixedDimensionRejected) {
  EXPECT_THROW(pad_batch<float>(std::span<const GestureSample>()), DataError);
  SeededRng rng(8);
  std::vector<GestureSample> s{make_sample("a", "x", 3, 2, rng), make_sample("b", "x", 3, 4, rng)};
  EXPECT_THROW(pad_batch<float>(std::span<const GestureSample>(s)), DataError);
}

TEST(Augment, ZeroFactorsAreIdentity) {
  SeededRng rng(9);
  const auto s = make_sample("a", "x", 6, 6, rng);
  AugmentSpec spec = AugmentSpec::none();
  spec.point_layout = true;
  EXPECT_EQ(augment_affine(s, spec, rng).frames, s.frames);
}

TEST(Augment, YawQuarterTurn) {
  Frames f(1, 3);
  f << 1, 0, 0;
  rotate_points_yaw(f, std::numbers::pi / 2.0);
  EXPECT_NEAR(f(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(f(0, 1), 1.0, 1e-15);
  EXPECT_EQ(f(0, 2), 0.0);
}

TEST(Augment, ScaleDrawsStayInRange) {
  AugmentSpec spec;
  spec.point_layout = true;
  SeededRng rng(10);
  double lo = 2.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const AffineDraw d = draw_affine(spec, 6, rng);
    ASSERT_EQ(d.scale.size(), 3u);
    for (double v : d.scale) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    for (double o : d.offset) ASSERT_LE(std::abs(o), 1.0);
  }
  EXPECT_GE(lo, 0.7);
  EXPECT_LE(hi, 1.3);
  EXPECT_LT(lo, 0.71);
  EXPECT_GT(hi, 1.29);
}

TEST(Augment, TranslationIsConstantOverTime) {
  SeededRng rng(11);
  const auto s = make_sample("a", "x", 5, 4, rng);
  AugmentSpec spec = AugmentSpec::none();
  spec.translate_factor = 1.0;
  const auto out = augment_affine(s, spec, rng);
  const Frames diff = out.frames - s.frames;
  for (Index t = 1; t < 5; ++t) EXPECT_LT((diff.row(t) - diff.row(0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Augment, RotationWithoutPointLayoutIsConfigError) {
  AugmentSpec spec;
  spec.rotate_factor = 0.5;
  SeededRng rng(12);
  EXPECT_THROW(draw_affine(spec, 6, rng), ConfigError);
  spec.point_layout = true;
  EXPECT_THROW(draw_affine(spec, 4, rng), ConfigError);
}

TEST(Augment, OutputsStayValid) {
  SeededRng rng(13);
  AugmentSpec spec;
  spec.point_layout = true;
  spec.rotate_factor = 0.3;
  for (int i = 0; i < 200; ++i) {
    const auto s = make_sample("a", "x", rng.uniform_int(1, 40), 6, rng);
    const auto out = augment_sample(s, spec, rng);
    ASSERT_NO_THROW(validate_sample(out));
    ASSERT_EQ(out.dim(), 6);
  }
}

TEST(Gpsr, OutputLengthIsN) {
  SeededRng rng(14);
  const auto s = make_sample("a", "x", 30, 3, rng);
  for (Index n : {2, 5, 30, 47}) {
    for (Index r : {Index{0}, Index{1}}) EXPECT_EQ(gpsr(s, n, r, rng).length(), n);
  }
}

namespace {

// Points at equal arc-length spacing along a polyline, by direct search.
Frames linear_resample_oracle(const Frames& path, Index points) {
  std::vector<double> cum{0.0};
  for (Index t = 1; t < path.rows(); ++t) cum.push_back(cum.back() + (path.row(t) - path.row(t - 1)).norm());
  Frames out(points, path.cols());
  for (Index j = 0; j < points; ++j) {
    const double target = cum.back() * static_cast<double>(j) / static_cast<double>(points - 1);
    Index seg = 0;
    while (seg + 2 < path.rows() && cum[static_cast<std::size_t>(seg + 1)] < target) ++seg;
    const double a = (target - cum[static_cast<std::size_t>(seg)]) /
                     (cum[static_cast<std::size_t>(seg + 1)] - cum[static_cast<std::size_t>(seg)]);
    out.row(j) = path.row(seg) + a * (path.row(seg + 1) - path.row(seg));
  }
  return out;
}

}  // namespace

TEST(Gpsr, EqualIntervalsGiveUniformLinearResample) {
  SeededRng rng(15);
  const auto s = make_sample("a", "x", 9, 3, rng);
  const std::vector<double> equal(11, 0.37);
  const auto out = gpsr_resample(s, equal, {});
  const Frames oracle = linear_resample_oracle(s.frames, 12);
  EXPECT_LT((out.frames - oracle).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(out.frames.row(0), s.frames.row(0));
  EXPECT_LT((out.frames.row(11) - s.frames.row(8)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gpsr, TwoPointsAreTheEndpoints) {
  SeededRng rng(16);
  const auto s = make_sample("a", "x", 7, 2, rng);
  const auto out = gpsr(s, 2, 0, rng);
  EXPECT_EQ(out.frames.row(0), s.frames.row(0));
  EXPECT_LT((out.frames.row(1) - s.frames.row(6)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gpsr, RemovalKeepsFirstPoint) {
  SeededRng rng(17);
  const auto s = make_sample("a", "x", 20, 2, rng);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(gpsr(s, 10, 9, rng).frames.row(0), s.frames.row(0));
}

TEST(Gpsr, PreconditionsAreAugmentationErrors) {
  SeededRng rng(18);
  const auto s = make_sample("a", "x", 5, 2, rng);
  EXPECT_THROW(gpsr(s, 1, 0, rng), AugmentationError);
  EXPECT_THROW(gpsr(s, 4, 4, rng), AugmentationError);
  EXPECT_THROW(gpsr(make_sample("b", "x", 1, 2, rng), 4, 0, rng), AugmentationError);
}

TEST(UserSplit, CountsPartitionAndDeterminism) {
  const Dataset data = synth_generate_subjects(2, 3, 10, 3, SeededRng(19));
  const auto a = split_user_dependent(data, 4, 77);
  const auto b = split_user_dependent(data, 4, 77);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t p = 0; p < a.size(); ++p) {
    std::vector<int> train_per_class(3, 0), test_per_class(3, 0);
    std::set<std::string> ids;
    for (const auto& s : a[p].train.samples) {
      ++train_per_class[static_cast<std::size_t>(s.class_index)];
      ids.insert(s.id);
      EXPECT_EQ(*s.subject, a[p].subject);
    }
    for (const auto& s : a[p].test.samples) {
      ++test_per_class[static_cast<std::size_t>(s.class_index)];
      EXPECT_TRUE(ids.insert(s.id).second) << "sample in both train and test";
    }
    EXPECT_EQ(ids.size(), 30u);
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(train_per_class[static_cast<std::size_t>(c)], 4);
      EXPECT_EQ(test_per_class[static_cast<std::size_t>(c)], 6);
    }
    ASSERT_EQ(a[p].train.size(), b[p].train.size());
    for (std::size_t i = 0; i < a[p].train.size(); ++i) EXPECT_EQ(a[p].train.samples[i].id, b[p].train.samples[i].id);
  }
}

TEST(UserSplit, InsufficientSamplesNamesParticipant) {
  const Dataset data = synth_generate_subjects(1, 2, 3, 3, SeededRng(20));
  try {
    split_user_dependent(data, 3, 0);
    FAIL() << "expected a protocol error";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("subject_0"), std::string::npos);
  }
}

TEST(UserSplit, MissingSubjectIsProtocolError) {
  const auto [train, test] = synth_generate(2, 5, 0, 2, SeededRng(21));
  EXPECT_THROW(split_user_dependent(train, 1, 0), ProtocolError);
}

namespace {

// Distance between two sequences after linear resampling to a common length.
Frames resample_time(const Frames& f, Index len) {
  Frames out(len, f.cols());
  for (Index j = 0; j < len; ++j) {
    const double pos = static_cast<double>(j) * static_cast<double>(f.rows() - 1) / static_cast<double>(len - 1);
    const auto lo = static_cast<Index>(std::floor(pos));
    const Index hi = std::min(lo + 1, f.rows() - 1);
    out.row(j) = f.row(lo) + (pos - static_cast<double>(lo)) * (f.row(hi) - f.row(lo));
  }
  return out;
}

}  // namespace

TEST(Synth, CountsAndDeterminism) {
  const auto [train, test] = synth_generate(8, 20, 20, 6, SeededRng(1));
  EXPECT_EQ(train.size(), 160u);
  EXPECT_EQ(test.size(), 160u);
  EXPECT_EQ(train.num_classes(), 8);
  const auto [again, again_test] = synth_generate(8, 20, 20, 6, SeededRng(1));
  for (std::size_t i = 0; i < train.size(); ++i) EXPECT_EQ(train.samples[i].frames, again.samples[i].frames);
  for (const auto& s : train.samples) {
    EXPECT_GE(s.length(), 30);
    EXPECT_LE(s.length(), 80);
  }
}

TEST(Synth, NearestNeighbourSeparatesClasses) {
  const auto [train, test] = synth_generate(8, 20, 20, 6, SeededRng(1));
  constexpr Index kLen = 32;
  std::vector<Frames> ref;
  for (const auto& s : train.samples) ref.push_back(resample_time(s.frames, kLen));
  int correct = 0;
  for (const auto& s : test.samples) {
    const Frames q = resample_time(s.frames, kLen);
    double best = 1e300;
    Index label = -1;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const double d = (ref[i] - q).squaredNorm();
      if (d < best) {
        best = d;
        label = train.samples[i].class_index;
      }
    }
    correct += label == s.class_index;
  }
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(test.size()), 0.99);
}

TEST(Synth, BadArgumentsAreConfigErrors) {
  EXPECT_THROW(synth_generate(1, 5, 5, 3, SeededRng(0)), ConfigError);
  EXPECT_THROW(synth_generate(3, 5, 5, 1, SeededRng(0)), ConfigError);
}
