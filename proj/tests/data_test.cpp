/*
 * Copyright 2026 The mia Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mia/data.hpp"
#include "test_util.hpp"

namespace mia {
namespace {

using testing::TempDir;

TEST(CifarTest, FixtureRecordsParseExactly) {
  TempDir dir("cifar");
  auto bytes = testing::cifar_record(3, 7, 1);
  const auto second = testing::cifar_record(7, 13, 200);
  bytes.insert(bytes.end(), second.begin(), second.end());
  testing::write_bytes(dir / "test_batch.bin", bytes);

  const auto records = read_cifar10_file(dir / "test_batch.bin");
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].label, 3);
  EXPECT_EQ(records[1].label, 7);
  for (std::size_t k = 0; k < kCifarPixels; ++k) {
    ASSERT_EQ(records[0].pixels[k], (k * 7 + 1) % 256);
    ASSERT_EQ(records[1].pixels[k], (k * 13 + 200) % 256);
  }

  const Dataset d = load_cifar10(dir.path(), Split::kTest);
  EXPECT_EQ(d.inputs.shape(), Shape({2, 3, 32, 32}));
  EXPECT_EQ(d.labels, (std::vector<int>{3, 7}));
  // Undo the per-channel standardization and recover the raw bytes.
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < 1024; ++p) {
        const std::size_t k = c * 1024 + p;
        const double v = d.inputs[r * kCifarPixels + k] * d.normalization.stddev[c] + d.normalization.mean[c];
        ASSERT_NEAR(v * 255.0, records[r].pixels[k], 1e-9);
      }
}

TEST(CifarTest, ChannelStatsAreStandard) {
  TempDir dir("cifar_stats");
  auto bytes = testing::cifar_record(0, 3, 5);
  const auto more = testing::cifar_record(9, 11, 17);
  bytes.insert(bytes.end(), more.begin(), more.end());
  testing::write_bytes(dir / "test_batch.bin", bytes);
  const Dataset d = load_cifar10(dir.path(), Split::kTest);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0, ss = 0;
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t p = 0; p < 1024; ++p) s += d.inputs[r * kCifarPixels + c * 1024 + p];
    const double mean = s / 2048;
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t p = 0; p < 1024; ++p) ss += std::pow(d.inputs[r * kCifarPixels + c * 1024 + p] - mean, 2);
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(ss / 2048), 1.0, 1e-6);
  }
}

TEST(CifarTest, MalformedInputs) {
  TempDir dir("cifar_bad");
  auto bytes = testing::cifar_record(1, 1, 0);
  bytes.pop_back();
  testing::write_bytes(dir / "short.bin", bytes);
  try {
    read_cifar10_file(dir / "short.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTruncatedRecord);
  }
  testing::write_bytes(dir / "label.bin", testing::cifar_record(10, 1, 0));
  try {
    read_cifar10_file(dir / "label.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLabelOutOfRange);
  }
  try {
    read_cifar10_file(dir / "absent.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingFile);
  }
  testing::write_bytes(dir / "test_batch.bin", testing::cifar_record(1, 1, 0));
  try {
    load_cifar10(dir.path(), Split::kTest, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDataset);
  }
}

TEST(SynthBlobsTest, DeterministicAndNoiseFree) {
  const Dataset a = synth_blobs(40, 4, 3), b = synth_blobs(40, 4, 3);
  EXPECT_EQ(a.inputs.shape(), Shape({40, 3, 16, 16}));
  EXPECT_EQ(a.inputs.values(), b.inputs.values());
  EXPECT_EQ(a.labels, b.labels);

  const Dataset clean = synth_blobs(12, 3, 4, 0.0);
  const std::size_t per = 3 * 16 * 16;
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j) {
      if (clean.labels[i] != clean.labels[j]) continue;
      EXPECT_TRUE(std::equal(clean.inputs.data().begin() + i * per, clean.inputs.data().begin() + (i + 1) * per,
                             clean.inputs.data().begin() + j * per));
    }
  EXPECT_THROW(synth_blobs(3, 4, 1), Error);
}

TEST(SynthMasksTest, ShapesAndErrors) {
  const Dataset d = synth_masks(6, 12, 10, 5);
  ASSERT_TRUE(d.is_segmentation());
  EXPECT_EQ(d.inputs.shape(), Shape({6, 1, 12, 10}));
  EXPECT_EQ(d.masks->shape(), Shape({6, 1, 12, 10}));
  for (double v : d.masks->data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
  EXPECT_EQ(synth_masks(6, 12, 10, 5).masks->values(), d.masks->values());
  try {
    synth_masks(0, 8, 8, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDataset);
  }
  EXPECT_THROW(synth_masks(1, 7, 8, 1), Error);
}

TEST(SynthMasksTest, FullFrameRectangle) {
  ShapeSpec full;
  full.top = 0;
  full.left = 0;
  full.bottom = 9;
  full.right = 11;
  const Tensor m = render_mask(9, 11, std::span(&full, 1));
  for (double v : m.data()) EXPECT_EQ(v, 1.0);
  ShapeSpec disc;
  disc.kind = ShapeSpec::Kind::kDisc;
  disc.cy = 4.5;
  disc.cx = 4.5;
  disc.radius = 1.0;
  const Tensor dm = render_mask(9, 9, std::span(&disc, 1));
  EXPECT_EQ(dm[4 * 9 + 4], 1.0);
  EXPECT_EQ(dm[0], 0.0);
}

TEST(FlowsCsvTest, HandComputedStandardization) {
  TempDir dir("flows");
  testing::write_text(dir / "f.csv", "a, b ,Label\r\n1,10,BENIGN\r\n2,20,DDoS\r\n3,60,0\r\n");
  const Dataset d = load_flows_csv(dir / "f.csv", "Label");
  EXPECT_EQ(d.inputs.shape(), Shape({3, 1, 1, 2}));
  EXPECT_EQ(d.labels, (std::vector<int>{0, 1, 0}));
  const double sa = std::sqrt(2.0 / 3.0);
  const double sb = std::sqrt(((10.0 - 30) * (10 - 30) + (20.0 - 30) * (20 - 30) + (60.0 - 30) * (60 - 30)) / 3.0);
  const std::vector<double> expect{-1 / sa, -20 / sb, 0.0, -10 / sb, 1 / sa, 30 / sb};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(d.inputs[i], expect[i], 1e-12);
}

TEST(FlowsCsvTest, ConstantColumnAndSkippedRows) {
  TempDir dir("flows_const");
  testing::write_text(dir / "f.csv", "x,y,Label\n0.3,1,1\n0.3,2,0\nabc,3,1\n0.3,4,BENIGN\n");
  const Dataset d = load_flows_csv(dir / "f.csv", "Label");
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.skipped_rows, 1u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(d.inputs[i * 2], 0.0);
}

TEST(FlowsCsvTest, Errors) {
  TempDir dir("flows_err");
  testing::write_text(dir / "h.csv", "x,Label\n");
  try {
    load_flows_csv(dir / "h.csv", "Label");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoValidRows);
  }
  try {
    load_flows_csv(dir / "h.csv", "Class");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingLabelColumn);
  }
}

TEST(FlowsCsvTest, RawReaderAndTrainOnlyStats) {
  TempDir dir("flows_raw");
  testing::write_text(dir / "f.csv", "x,Label\n1,0\n3,1\n5,0\n");
  Dataset raw = read_flows_csv(dir / "f.csv", "Label");
  EXPECT_EQ(raw.inputs.values(), (std::vector<double>{1, 3, 5}));
  const Normalization train{{2.0}, {0.5}};
  standardize_columns(raw.inputs, &train);
  EXPECT_EQ(raw.inputs.values(), (std::vector<double>{-2, 2, 6}));
}

TEST(ShuffleTest, SeededPermutation) {
  const auto a = shuffled_indices(100, 42), b = shuffled_indices(100, 42);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(shuffled_indices(100, 43), a);
}

TEST(StandardizeTest, ColumnMomentsAfterNormalization) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(-50.0, 80.0);
  Tensor x(Shape{37, 4, 3, 3});
  for (double& v : x.data()) v = d(rng);
  standardize(x);
  const std::size_t plane = 9;
  for (std::size_t c = 0; c < 4; ++c) {
    double s = 0, ss = 0;
    for (std::size_t n = 0; n < 37; ++n)
      for (std::size_t k = 0; k < plane; ++k) s += x[(n * 4 + c) * plane + k];
    const double mean = s / (37 * plane);
    for (std::size_t n = 0; n < 37; ++n)
      for (std::size_t k = 0; k < plane; ++k) ss += std::pow(x[(n * 4 + c) * plane + k] - mean, 2);
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(ss / (37 * plane)), 1.0, 1e-6);
  }
}

TEST(SubsetTest, GatherSamples) {
  const Dataset d = synth_blobs(8, 4, 1);
  const std::vector<std::size_t> idx{5, 2};
  const Dataset s = subset(d, idx);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.labels, (std::vector<int>{d.labels[5], d.labels[2]}));
  const std::size_t per = 3 * 16 * 16;
  EXPECT_TRUE(std::equal(s.inputs.data().begin(), s.inputs.data().begin() + per, d.inputs.data().begin() + 5 * per));
}

}  // namespace
}  // namespace mia
