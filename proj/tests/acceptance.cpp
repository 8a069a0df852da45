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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Reference values are computed here by
// loop oracles, independently of the library code under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mia/attention.hpp"
#include "mia/checkpoint.hpp"
#include "mia/data.hpp"
#include "mia/gradcheck_suite.hpp"
#include "mia/metrics.hpp"
#include "mia/model.hpp"
#include "mia/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace mia {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 1. Every primitive adjoint and the attention block over C in {2,4,8},
// H=W in {3,5,7}, 3 seeds each, at step 1e-5 and tol 1e-4, in under 2 min.
void gradient_correctness(Outcome& o) {
  const auto t0 = Clock::now();
  SuiteOptions opts;
  opts.full = true;
  const auto cases = run_gradcheck_suite(opts);
  const double elapsed = seconds_since(t0);

  double worst = 0.0, worst_model = 0.0;
  std::size_t primitives = 0, blocks = 0;
  for (const auto& c : cases) {
    const bool is_model = c.name.rfind("mini_", 0) == 0;
    if (is_model) {
      worst_model = std::max(worst_model, c.report.max_rel_error);
      o.require(c.report.passed, c.name + " at 1e-3");
      continue;
    }
    if (c.name.rfind("mia_block", 0) == 0) {
      ++blocks;
      // 3 seeds x 6 parameter tensors per shape.
      o.require(c.report.entries.size() == 18, c.name + " seed coverage");
    } else {
      ++primitives;
    }
    worst = std::max(worst, c.report.max_rel_error);
    o.require(c.report.max_rel_error <= 1e-4, c.name);
  }
  o.require(primitives >= 12, "primitive coverage");
  o.require(blocks == 9, "9 attention block shapes");
  o.require(elapsed < 120.0, "runtime under 120 s");
  o.detail << "cases=" << cases.size() << " attention_shapes=" << blocks << "x3 seeds" << " max_rel=" << worst
           << " (tol 1e-4) backbones_max_rel=" << worst_model << " (tol 1e-3) time=" << elapsed << "s";
}

// 2. On 100 random inputs: A strictly inside (0,1), rank-1 cross ratio
// within 1e-10, zero-parameter block gives 0.25 X within 1e-12.
void attention_structure(Outcome& o) {
  std::mt19937_64 rng(20261018);
  double worst_cross = 0.0, worst_quarter = 0.0;
  bool bounded = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 2, c = 1 + rng() % 16, h = 1 + rng() % 8, w = 1 + rng() % 8;
    const std::size_t r = 1 + rng() % 8;
    const double scale = trial < 50 ? 2.0 : 50.0;
    const Tensor x = oracle::random_tensor(Shape{n, c, h, w}, rng(), -scale, scale);
    MiaBlock block(c, r);
    block.initialize(rng);
    block.b1 = oracle::random_tensor(block.b1.shape(), rng(), -1.0, 1.0);
    block.b2 = oracle::random_tensor(block.b2.shape(), rng(), -1.0, 1.0);
    block.conv_bias = oracle::random_tensor(Shape{1}, rng(), -1.0, 1.0);
    const MiaOutput out = forward(x, block);
    const Tensor& a = out.maps.a;
    for (double v : a.data()) bounded = bounded && v > 0.0 && v < 1.0;
    const std::size_t p = h * w;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c1 = 0; c1 < c; ++c1)
        for (std::size_t c2 = c1 + 1; c2 < c; ++c2)
          for (std::size_t p1 = 0; p1 < p; ++p1)
            for (std::size_t p2 = p1 + 1; p2 < p; ++p2) {
              const auto at = [&](std::size_t ch, std::size_t px) { return a[(b * c + ch) * p + px]; };
              worst_cross = std::max(worst_cross, std::abs(at(c1, p1) * at(c2, p2) - at(c1, p2) * at(c2, p1)));
            }
    const Tensor quarter = forward(x, MiaBlock(c, r)).output;
    for (std::size_t i = 0; i < x.numel(); ++i)
      worst_quarter = std::max(worst_quarter, std::abs(quarter[i] - 0.25 * x[i]));
  }
  o.require(bounded, "A in (0,1)");
  o.require(worst_cross <= 1e-10, "cross ratio");
  o.require(worst_quarter <= 1e-12, "zero block");
  o.detail << "inputs=100 A_in_open_unit=" << (bounded ? "yes" : "no") << " max_cross_ratio_err=" << worst_cross
           << " (tol 1e-10) max_quarter_err=" << worst_quarter << " (tol 1e-12)";
}

// Loop oracle for one class treated as positive.
struct Tally {
  double tp = 0, fp = 0, fn = 0;
};

Tally tally(const std::vector<int>& pred, const std::vector<int>& truth, int cls) {
  Tally t;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == cls && truth[i] == cls) t.tp += 1;
    if (pred[i] == cls && truth[i] != cls) t.fp += 1;
    if (pred[i] != cls && truth[i] == cls) t.fn += 1;
  }
  return t;
}

// 3. Accuracy/precision/recall/F1/Dice against loop oracles on 1000 random
// instances each for binary and 10-class macro, within 1e-12; hand cases exact.
void metric_oracles(Outcome& o) {
  std::mt19937_64 rng(8);
  double worst = 0.0;
  const auto check = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  for (int k : {2, 10}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = 1 + rng() % 200;
      std::vector<int> pred(n), truth(n);
      for (std::size_t i = 0; i < n; ++i) {
        truth[i] = static_cast<int>(rng() % k);
        pred[i] = rng() % 3 == 0 ? truth[i] : static_cast<int>(rng() % k);
      }
      const auto cc = confusion_counts(pred, truth, k);
      double agree = 0;
      for (std::size_t i = 0; i < n; ++i) agree += pred[i] == truth[i];
      check(accuracy(cc), agree / static_cast<double>(n));

      double p = 0, r = 0, f = 0;
      const int first = k == 2 ? 1 : 0;
      for (int cls = first; cls < k; ++cls) {
        const Tally t = tally(pred, truth, cls);
        const double pc = t.tp + t.fp > 0 ? t.tp / (t.tp + t.fp) : 0.0;
        const double rc = t.tp + t.fn > 0 ? t.tp / (t.tp + t.fn) : 0.0;
        p += pc;
        r += rc;
        f += pc + rc > 0 ? 2 * pc * rc / (pc + rc) : 0.0;
      }
      const double classes = static_cast<double>(k - first);
      const auto prf = precision_recall_f1(cc, k == 2 ? Averaging::kBinary : Averaging::kMacro);
      check(prf.precision, p / classes);
      check(prf.recall, r / classes);
      check(prf.f1, f / classes);
    }
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 64;
    Tensor pm(Shape{n}), gm(Shape{n});
    double inter = 0, sp = 0, sg = 0;
    const std::uint64_t density = 1 + rng() % 4;
    for (std::size_t i = 0; i < n; ++i) {
      pm[i] = rng() % density == 0 ? 1.0 : 0.0;
      gm[i] = rng() % density == 0 ? 1.0 : 0.0;
      inter += pm[i] * gm[i];
      sp += pm[i];
      sg += gm[i];
    }
    check(dice_coefficient(pm, gm), sp + sg > 0 ? 2 * inter / (sp + sg) : 1.0);
  }
  o.require(worst <= 1e-12, "oracle agreement");

  // tp=fp=fn=tn=1 for class 1.
  const auto hand = confusion_counts(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 1, 0}, 2);
  const auto prf = precision_recall_f1(hand, Averaging::kBinary);
  const bool hand_ok = accuracy(hand) == 0.5 && prf.precision == 0.5 && prf.recall == 0.5 && prf.f1 == 0.5;
  const auto perfect = precision_recall_f1(confusion_counts(std::vector<int>{1, 1}, std::vector<int>{1, 1}, 2),
                                           Averaging::kBinary);
  const bool perfect_ok = perfect.precision == 1.0 && perfect.recall == 1.0 && perfect.f1 == 1.0;
  const bool dice_ok =
      dice_coefficient(Tensor(Shape{4}, {1, 1, 0, 0}), Tensor(Shape{4}, {1, 1, 1, 1})) == 2.0 / 3.0 &&
      dice_coefficient(Tensor(Shape{4}, {1, 1, 0, 0}), Tensor(Shape{4}, {0, 0, 1, 1})) == 0.0 &&
      dice_coefficient(Tensor(Shape{2}, {1, 1}), Tensor(Shape{2}, {1, 1})) == 1.0;
  o.require(hand_ok && perfect_ok && dice_ok, "hand cases");
  o.detail << "instances=1000x(binary,K=10 macro,dice) max_abs_err=" << worst
           << " (tol 1e-12) hand_cases=" << (hand_ok && perfect_ok && dice_ok ? "exact" : "mismatch");
}

constexpr std::uint64_t kHeldOutSeedOffset = 1000003;

// 4. mini_cnn on synth_blobs (n=256, K=4, 5 epochs, defaults) reaches held-out
// accuracy >= 0.95; mini_segnet on synth_masks (10 epochs) reaches Dice >= 0.9;
// each under 5 minutes.
void trainability(Outcome& o) {
  auto t0 = Clock::now();
  const Dataset train = synth_blobs(256, 4, 1);
  const Dataset test = synth_blobs(128, 4, 1 + kHeldOutSeedOffset);
  Model cnn = build_mini_cnn(Shape{3, 16, 16}, 4, Variant::kMia, {.seed = 1});
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 1;
  train_loop(cnn, train, cfg);
  const double acc = evaluate(cnn, test).accuracy;
  const double t_cls = seconds_since(t0);

  t0 = Clock::now();
  const Dataset masks = synth_masks(256, 16, 16, 1);
  const Dataset held = synth_masks(128, 16, 16, 1 + kHeldOutSeedOffset);
  Model seg = build_mini_segnet(Shape{1, 16, 16}, Variant::kMia, {.seed = 1});
  TrainConfig seg_cfg;
  seg_cfg.loss = LossKind::kDice;
  seg_cfg.seed = 1;
  train_loop(seg, masks, seg_cfg);
  const double dice = evaluate(seg, held).dice.value_or(0.0);
  const double t_seg = seconds_since(t0);

  o.require(acc >= 0.95, "classification accuracy");
  o.require(dice >= 0.9, "segmentation dice");
  o.require(t_cls < 300.0 && t_seg < 300.0, "runtime under 300 s");
  o.detail << "synth_blobs test_acc=" << acc << " (>= 0.95) time=" << t_cls << "s; synth_masks test_dice=" << dice
           << " (>= 0.9) time=" << t_seg << "s";
}

// 5. A 32-sample 10-class CIFAR subset is memorized within 100 epochs. Uses
// real CIFAR-10 batches under $MIA_DATA_DIR when present, otherwise random
// 3x32x32 images with random labels.
void overfit(Outcome& o) {
  Dataset data;
  std::string source = "synthetic";
  const char* root = std::getenv("MIA_DATA_DIR");
  const std::filesystem::path cifar = root ? std::filesystem::path(root) / "cifar-10-batches-bin" : "";
  if (root && std::filesystem::exists(cifar / "data_batch_1.bin")) {
    data = load_cifar10(cifar, Split::kTrain, 32);
    source = "cifar10";
  } else {
    std::mt19937_64 rng(5);
    data.inputs = oracle::random_tensor(Shape{32, 3, 32, 32}, rng(), 0.0, 1.0);
    standardize(data.inputs);
    for (int i = 0; i < 32; ++i) data.labels.push_back(static_cast<int>(rng() % 10));
    data.classes = 10;
  }
  Model m = build_mini_cnn(Shape{3, 32, 32}, 10, Variant::kMia, {.seed = 5});
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.seed = 5;
  const auto t0 = Clock::now();
  const auto logs = train_loop(m, data, cfg);
  std::size_t first = 0;
  for (const auto& l : logs) {
    if (l.accuracy && *l.accuracy == 1.0) {
      first = l.epoch;
      break;
    }
  }
  const double final_acc = evaluate(m, data).accuracy;
  o.require(final_acc == 1.0, "train accuracy 1.0");
  o.detail << "source=" << source << " samples=32 epochs=100 final_train_acc=" << final_acc
           << " first_epoch_at_1.0=" << first << " time=" << seconds_since(t0) << "s";
}

// 6. Median held-out accuracy over 3 seeds on synth-cls (n=512, sigma=0.3):
// mia >= none.
void ablation(Outcome& o) {
  const auto t0 = Clock::now();
  std::vector<double> acc_mia, acc_se, acc_none;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Dataset train = synth_blobs(512, 4, seed, 0.3);
    const Dataset test = synth_blobs(128, 4, seed + kHeldOutSeedOffset, 0.3);
    for (const auto [variant, sink] : {std::pair{Variant::kMia, &acc_mia}, std::pair{Variant::kSeOnly, &acc_se},
                                       std::pair{Variant::kNone, &acc_none}}) {
      Model m = build_mini_cnn(Shape{3, 16, 16}, 4, variant, {.seed = seed});
      TrainConfig cfg;
      cfg.seed = seed;
      train_loop(m, train, cfg);
      sink->push_back(evaluate(m, test).accuracy);
    }
  }
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double mia = median(acc_mia), none = median(acc_none);
  o.require(mia >= none, "median mia >= median none");
  o.detail << "median_test_acc mia=" << mia << " se_only=" << median(acc_se) << " none=" << none
           << " time=" << seconds_since(t0) << "s";
}

// 7. param_count matches the closed form for 10 random (C, r) pairs and the
// attention blocks hold under 5% of mini_cnn's parameters.
void lightweight(Outcome& o) {
  std::mt19937_64 rng(7);
  int matched = 0;
  for (int i = 0; i < 10; ++i) {
    const std::size_t c = 1 + rng() % 256, r = 1 + rng() % 32;
    const double ratio = static_cast<double>(c) / static_cast<double>(r);
    const std::size_t h = c % r == 0 ? c / r : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio)));
    const std::size_t formula = 2 * c * h + h + c + 7 * 7 + 1;
    const MiaBlock b(c, r);
    const std::size_t fields = b.w1.numel() + b.b1.numel() + b.w2.numel() + b.b2.numel() + b.conv_kernel.numel() +
                               b.conv_bias.numel();
    matched += param_count(b) == formula && fields == formula;
  }
  o.require(matched == 10, "closed form");
  o.detail << "formula_matches=" << matched << "/10";
  for (const auto& [input, classes] : {std::pair{Shape{3, 32, 32}, std::size_t{10}}, std::pair{Shape{3, 16, 16}, std::size_t{4}}}) {
    const Model m = build_mini_cnn(input, classes, Variant::kMia);
    std::size_t attn = 0;
    for (std::size_t i = 0; i < m.layers.size(); ++i)
      if (m.layers[i].kind == LayerKind::kMia) attn += param_count(m.attention_block(i));
    const double share = 100.0 * static_cast<double>(attn) / static_cast<double>(m.param_count());
    o.require(share < 5.0, "attention share under 5%");
    o.detail << " mini_cnn" << input.to_string() << " attention=" << attn << "/" << m.param_count() << " ("
             << share << "%)";
  }
}

// 8. Bitwise checkpoint round trip, bitwise-identical checkpoints from two
// identical trainings, corrupted checkpoint rejected by the checksum.
void persistence(Outcome& o) {
  testing::TempDir dir("acceptance_ckpt");
  const Dataset data = synth_blobs(64, 4, 3);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 3;
  for (const char* name : {"a.ckpt", "b.ckpt"}) {
    Model m = build_mini_cnn(Shape{3, 16, 16}, 4, Variant::kMia, {.seed = 3});
    train_loop(m, data, cfg);
    save_checkpoint(m, dir / name);
  }
  const auto a = testing::read_bytes(dir / "a.ckpt");
  const auto b = testing::read_bytes(dir / "b.ckpt");
  o.require(!a.empty() && a == b, "identical trainings give identical checkpoints");

  Model trained = build_mini_cnn(Shape{3, 16, 16}, 4, Variant::kMia, {.seed = 3});
  train_loop(trained, data, cfg);
  Model loaded = build_mini_cnn(Shape{3, 16, 16}, 4, Variant::kMia, {.seed = 99});
  load_checkpoint(dir / "a.ckpt", loaded);
  bool bitwise = loaded.parameters.size() == trained.parameters.size();
  for (const auto& [name, t] : trained.parameters) {
    const Tensor& u = loaded.parameters.at(name);
    bitwise = bitwise && u.numel() == t.numel() &&
              std::memcmp(u.data().data(), t.data().data(), t.numel() * sizeof(double)) == 0;
  }
  o.require(bitwise, "round trip");

  auto corrupt = a;
  corrupt[a.size() / 2] ^= 0x10;
  testing::write_bytes(dir / "c.ckpt", corrupt);
  bool rejected = false;
  try {
    read_checkpoint(dir / "c.ckpt");
  } catch (const Error& e) {
    rejected = e.code() == ErrorCode::kChecksumMismatch;
  }
  o.require(rejected, "corruption detected");
  o.detail << "bytes=" << a.size() << " identical_runs=" << (a == b ? "yes" : "no")
           << " round_trip_bitwise=" << (bitwise ? "yes" : "no") << " corrupt_rejected=" << (rejected ? "yes" : "no");
}

// 9. Hand-built 3073-byte CIFAR records parse exactly; bad lengths raise
// TruncatedRecord.
void format_fidelity(Outcome& o) {
  testing::TempDir dir("acceptance_cifar");
  std::vector<std::uint8_t> bytes;
  const std::vector<std::tuple<std::uint8_t, unsigned, unsigned>> recipe{{3, 7, 1}, {7, 13, 200}, {0, 1, 255}};
  for (const auto& [label, mult, off] : recipe) {
    const auto rec = testing::cifar_record(label, mult, off);
    bytes.insert(bytes.end(), rec.begin(), rec.end());
  }
  testing::write_bytes(dir / "batch.bin", bytes);
  const auto records = read_cifar10_file(dir / "batch.bin");
  bool exact = records.size() == recipe.size();
  for (std::size_t r = 0; exact && r < recipe.size(); ++r) {
    const auto& [label, mult, off] = recipe[r];
    exact = records[r].label == label;
    for (std::size_t k = 0; exact && k < kCifarPixels; ++k) exact = records[r].pixels[k] == (k * mult + off) % 256;
  }
  // Planes: red pixel (i,j) is byte 1 + i*32 + j, green adds 1024, blue 2048.
  exact = exact && records[1].pixels[1024 + 5 * 32 + 9] == ((1024 + 5 * 32 + 9) * 13 + 200) % 256;
  o.require(exact, "exact parse");

  int truncated = 0;
  for (std::size_t cut : {std::size_t{1}, std::size_t{3072}, std::size_t{3074}}) {
    auto bad = bytes;
    bad.resize(bytes.size() - cut);
    testing::write_bytes(dir / "bad.bin", bad);
    try {
      read_cifar10_file(dir / "bad.bin");
    } catch (const Error& e) {
      truncated += e.code() == ErrorCode::kTruncatedRecord;
    }
  }
  o.require(truncated == 3, "TruncatedRecord on bad lengths");
  o.detail << "records=" << records.size() << " exact=" << (exact ? "yes" : "no") << " truncated_detected=" << truncated
           << "/3";
}

}  // namespace
}  // namespace mia

int main() {
  using mia::Outcome;
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"AC1 gradient correctness", mia::gradient_correctness},
      {"AC2 attention structure", mia::attention_structure},
      {"AC3 metric oracle equivalence", mia::metric_oracles},
      {"AC4 trainability", mia::trainability},
      {"AC5 overfit sanity", mia::overfit},
      {"AC6 ablation direction", mia::ablation},
      {"AC7 lightweightness audit", mia::lightweight},
      {"AC8 persistence and determinism", mia::persistence},
      {"AC9 format fidelity", mia::format_fidelity},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      check(o);
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail << " exception: " << e.what();
    }
    failures += !o.passed;
    std::printf("%s %s: %s\n", o.passed ? "PASS" : "FAIL", name, o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
