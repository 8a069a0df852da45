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

#include "mia/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace mia {

Shape Dataset::sample_shape() const {
  const auto& d = inputs.shape().dims();
  return Shape(std::vector<std::size_t>(d.begin() + 1, d.end()));
}

Tensor gather(const Tensor& x, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorCode::kEmptyDataset, "gather of zero rows");
  std::vector<std::size_t> dims = x.shape().dims();
  const std::size_t row = x.numel() / dims[0];
  const std::size_t rows = dims[0];
  dims[0] = indices.size();
  Tensor out{Shape(dims)};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      throw Error(ErrorCode::kShapeMismatch, "row " + std::to_string(indices[i]) + " of " +
                                                 std::to_string(rows));
    }
    std::copy_n(x.data().begin() + indices[i] * row, row, out.data().begin() + i * row);
  }
  return out;
}

Dataset subset(const Dataset& d, std::span<const std::size_t> indices) {
  Dataset out;
  out.inputs = gather(d.inputs, indices);
  if (!d.labels.empty()) {
    for (std::size_t i : indices) out.labels.push_back(d.labels.at(i));
  }
  if (d.masks) out.masks = gather(*d.masks, indices);
  out.classes = d.classes;
  out.split = d.split;
  out.normalization = d.normalization;
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

Normalization standardize(Tensor& x, const Normalization* stats) {
  const std::size_t n = x.dim(0);
  const std::size_t channels = x.rank() > 1 ? x.dim(1) : 1;
  const std::size_t plane = x.numel() / (n * channels);
  Normalization norm;
  if (stats) {
    if (stats->mean.size() != channels || stats->stddev.size() != channels) {
      throw Error(ErrorCode::kShapeMismatch, "normalization stats for " +
                                                 std::to_string(stats->mean.size()) +
                                                 " channels, data has " + std::to_string(channels));
    }
    norm = *stats;
  } else {
    norm.mean.assign(channels, 0.0);
    norm.stddev.assign(channels, 0.0);
    const double count = static_cast<double>(n * plane);
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.data().data() + (i * channels + c) * plane;
        for (std::size_t k = 0; k < plane; ++k) s += p[k];
      }
      const double mean = s / count;
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.data().data() + (i * channels + c) * plane;
        for (std::size_t k = 0; k < plane; ++k) ss += (p[k] - mean) * (p[k] - mean);
      }
      norm.mean[c] = mean;
      norm.stddev[c] = std::max(std::sqrt(ss / count), 1e-8);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      double* p = x.data().data() + (i * channels + c) * plane;
      for (std::size_t k = 0; k < plane; ++k) p[k] = (p[k] - norm.mean[c]) / norm.stddev[c];
    }
  }
  return norm;
}

std::vector<CifarRecord> read_cifar10_file(const std::filesystem::path& path,
                                           std::optional<std::size_t> limit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw Error(ErrorCode::kTruncatedRecord,
                path.string() + " has " + std::to_string(bytes.size()) +
                    " bytes, not a multiple of " + std::to_string(kCifarRecordBytes));
  }
  std::size_t count = bytes.size() / kCifarRecordBytes;
  if (limit) count = std::min(count, *limit);
  std::vector<CifarRecord> records(count);
  for (std::size_t r = 0; r < count; ++r) {
    const char* rec = bytes.data() + r * kCifarRecordBytes;
    records[r].label = static_cast<std::uint8_t>(rec[0]);
    if (records[r].label > 9) {
      throw Error(ErrorCode::kLabelOutOfRange, path.string() + " record " + std::to_string(r) +
                                                   " has label " +
                                                   std::to_string(records[r].label));
    }
    std::copy_n(reinterpret_cast<const std::uint8_t*>(rec + 1), kCifarPixels,
                records[r].pixels.begin());
  }
  return records;
}

Dataset load_cifar10(const std::filesystem::path& dir, Split split,
                     std::optional<std::size_t> limit, const Normalization* stats) {
  std::vector<std::string> files;
  if (split == Split::kTrain) {
    for (int i = 1; i <= 5; ++i) files.push_back("data_batch_" + std::to_string(i) + ".bin");
  } else {
    files.push_back("test_batch.bin");
  }
  std::vector<CifarRecord> records;
  for (const auto& f : files) {
    if (limit && records.size() >= *limit) break;
    std::optional<std::size_t> remaining;
    if (limit) remaining = *limit - records.size();
    auto batch = read_cifar10_file(dir / f, remaining);
    records.insert(records.end(), batch.begin(), batch.end());
  }
  if (records.empty()) throw Error(ErrorCode::kEmptyDataset, "no CIFAR-10 records loaded");

  Dataset d;
  d.split = split;
  d.classes = 10;
  d.inputs = Tensor(Shape{records.size(), 3, 32, 32});
  for (std::size_t r = 0; r < records.size(); ++r) {
    d.labels.push_back(records[r].label);
    double* dst = d.inputs.data().data() + r * kCifarPixels;
    for (std::size_t k = 0; k < kCifarPixels; ++k) dst[k] = records[r].pixels[k] / 255.0;
  }
  d.normalization = standardize(d.inputs, stats);
  return d;
}

Dataset synth_blobs(std::size_t n, std::size_t classes, std::uint64_t seed, double noise) {
  constexpr std::size_t kSide = 16, kSquare = 4, kCells = kSide / kSquare;
  if (classes == 0 || classes > kCells * kCells) {
    throw Error(ErrorCode::kInvalidConfig, "synth_blobs supports 1.." +
                                               std::to_string(kCells * kCells) + " classes");
  }
  if (n < classes) {
    throw Error(ErrorCode::kInvalidConfig, "synth_blobs needs at least one sample per class");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset d;
  d.classes = classes;
  d.inputs = Tensor(Shape{n, 3, kSide, kSide});
  d.normalization = {std::vector<double>(3, 0.0), std::vector<double>(3, 1.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % classes;
    d.labels.push_back(static_cast<int>(k));
    // Cells are visited in a stride-5 order so the first few classes are not
    // all on the top row.
    const std::size_t cell = (k * 5) % (kCells * kCells);
    const std::size_t top = (cell / kCells) * kSquare, left = (cell % kCells) * kSquare;
    for (std::size_t c = 0; c < 3; ++c) {
      double* plane = d.inputs.data().data() + (i * 3 + c) * kSide * kSide;
      for (std::size_t y = 0; y < kSide; ++y) {
        for (std::size_t x = 0; x < kSide; ++x) {
          const bool inside = y >= top && y < top + kSquare && x >= left && x < left + kSquare;
          double v = inside ? 1.0 : 0.0;
          if (noise > 0.0) v += noise * gauss(rng);
          plane[y * kSide + x] = v;
        }
      }
    }
  }
  return d;
}

Tensor render_mask(std::size_t h, std::size_t w, std::span<const ShapeSpec> shapes) {
  Tensor mask(Shape{1, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double py = static_cast<double>(y) + 0.5, px = static_cast<double>(x) + 0.5;
      for (const ShapeSpec& s : shapes) {
        bool inside;
        if (s.kind == ShapeSpec::Kind::kRectangle) {
          inside = py >= s.top && py < s.bottom && px >= s.left && px < s.right;
        } else {
          inside = (py - s.cy) * (py - s.cy) + (px - s.cx) * (px - s.cx) <= s.radius * s.radius;
        }
        if (inside) {
          mask[y * w + x] = 1.0;
          break;
        }
      }
    }
  }
  return mask;
}

Dataset synth_masks(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed, double noise) {
  if (h < 8 || w < 8) throw Error(ErrorCode::kBadShape, "synth_masks needs h, w >= 8");
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "synth_masks with n = 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double hd = static_cast<double>(h), wd = static_cast<double>(w);
  Dataset d;
  d.inputs = Tensor(Shape{n, 1, h, w});
  d.masks = Tensor(Shape{n, 1, h, w});
  d.classes = 2;
  d.normalization = {{0.0}, {1.0}};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<ShapeSpec> shapes(1 + rng() % 3);
    for (ShapeSpec& s : shapes) {
      if (unit(rng) < 0.5) {
        s.kind = ShapeSpec::Kind::kRectangle;
        const double sh = hd * (0.2 + 0.3 * unit(rng)), sw = wd * (0.2 + 0.3 * unit(rng));
        s.top = (hd - sh) * unit(rng);
        s.left = (wd - sw) * unit(rng);
        s.bottom = s.top + sh;
        s.right = s.left + sw;
      } else {
        s.kind = ShapeSpec::Kind::kDisc;
        s.radius = std::min(hd, wd) * (0.1 + 0.15 * unit(rng));
        s.cy = s.radius + (hd - 2 * s.radius) * unit(rng);
        s.cx = s.radius + (wd - 2 * s.radius) * unit(rng);
      }
    }
    const Tensor mask = render_mask(h, w, shapes);
    const double intensity = 0.6 + 0.4 * unit(rng);
    for (std::size_t k = 0; k < h * w; ++k) {
      (*d.masks)[i * h * w + k] = mask[k];
      double v = mask[k] * intensity;
      if (noise > 0.0) v += noise * gauss(rng);
      d.inputs[i * h * w + k] = v;
    }
  }
  return d;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<int> parse_label(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (auto v = parse_number(s)) {
    if (*v == 0.0) return 0;
    if (*v == 1.0) return 1;
    return std::nullopt;
  }
  std::string upper = s;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  return upper == "BENIGN" ? 0 : 1;
}

}  // namespace

Dataset read_flows_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kNoValidRows, path.string() + " is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv(line);
  const auto label_it = std::find(header.begin(), header.end(), trim(label_column));
  if (label_it == header.end()) {
    throw Error(ErrorCode::kMissingLabelColumn, "no column '" + label_column + "' in " + path.string());
  }
  const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t features = header.size() - 1;
  if (features == 0) throw Error(ErrorCode::kNoValidRows, "no feature columns in " + path.string());

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t skipped = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      ++skipped;
      continue;
    }
    const auto label = parse_label(cells[label_col]);
    std::vector<double> row;
    row.reserve(features);
    bool ok = label.has_value();
    for (std::size_t c = 0; ok && c < cells.size(); ++c) {
      if (c == label_col) continue;
      const auto v = parse_number(cells[c]);
      if (!v) ok = false;
      else row.push_back(*v);
    }
    if (!ok) {
      ++skipped;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    labels.push_back(*label);
  }
  if (labels.empty()) throw Error(ErrorCode::kNoValidRows, "no valid rows in " + path.string());

  const std::size_t n = labels.size();
  Dataset d;
  d.inputs = Tensor(Shape{n, 1, 1, features}, std::move(values));
  d.labels = std::move(labels);
  d.classes = 2;
  d.skipped_rows = skipped;
  return d;
}

Normalization standardize_columns(Tensor& x, const Normalization* stats) {
  const std::size_t n = x.dim(0);
  const std::size_t features = x.numel() / n;
  const auto col = [&](std::size_t i, std::size_t f) -> double& { return x.data()[i * features + f]; };
  Normalization norm;
  if (stats) {
    if (stats->mean.size() != features || stats->stddev.size() != features) {
      throw Error(ErrorCode::kShapeMismatch, "normalization stats do not match feature count");
    }
    norm = *stats;
  } else {
    norm.mean.assign(features, 0.0);
    norm.stddev.assign(features, 1.0);
    for (std::size_t f = 0; f < features; ++f) {
      double s = 0.0;
      bool constant = true;
      for (std::size_t i = 0; i < n; ++i) {
        s += col(i, f);
        constant = constant && col(i, f) == col(0, f);
      }
      // A constant column keeps its exact value as the mean so it maps to 0.
      const double mean = constant ? col(0, f) : s / static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) ss += (col(i, f) - mean) * (col(i, f) - mean);
      norm.mean[f] = mean;
      norm.stddev[f] = std::max(std::sqrt(ss / static_cast<double>(n)), 1e-8);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < features; ++f) col(i, f) = (col(i, f) - norm.mean[f]) / norm.stddev[f];
  }
  return norm;
}

Dataset load_flows_csv(const std::filesystem::path& path, const std::string& label_column,
                       const Normalization* stats) {
  Dataset d = read_flows_csv(path, label_column);
  d.normalization = standardize_columns(d.inputs, stats);
  return d;
}

}  // namespace mia
