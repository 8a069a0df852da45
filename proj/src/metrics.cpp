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

#include "mia/metrics.hpp"

#include <numeric>
#include <sstream>

namespace mia {

std::size_t ConfusionCounts::correct() const noexcept {
  return std::accumulate(tp.begin(), tp.end(), std::size_t{0});
}

ConfusionCounts confusion_counts(std::span<const int> pred, std::span<const int> truth,
                                 std::size_t classes) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(pred.size()) + " predictions vs " +
                                                std::to_string(truth.size()) + " labels");
  }
  ConfusionCounts cc;
  cc.tp.assign(classes, 0);
  cc.fp.assign(classes, 0);
  cc.fn.assign(classes, 0);
  cc.tn.assign(classes, 0);
  cc.total = pred.size();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i], t = truth[i];
    if (p < 0 || t < 0 || static_cast<std::size_t>(p) >= classes ||
        static_cast<std::size_t>(t) >= classes) {
      throw Error(ErrorCode::kClassOutOfRange, "class index outside [0," +
                                                   std::to_string(classes) + ") at " +
                                                   std::to_string(i));
    }
    if (p == t) {
      ++cc.tp[p];
    } else {
      ++cc.fp[p];
      ++cc.fn[t];
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    cc.tn[c] = cc.total - cc.tp[c] - cc.fp[c] - cc.fn[c];
  }
  return cc;
}

double accuracy(const ConfusionCounts& cc) {
  if (cc.total == 0) throw Error(ErrorCode::kEmptyInput, "accuracy of zero samples");
  return static_cast<double>(cc.correct()) / static_cast<double>(cc.total);
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& cc, Averaging averaging) {
  PrecisionRecallF1 out;
  if (averaging == Averaging::kBinary) {
    const std::size_t pos = cc.classes() > 1 ? 1 : 0;
    out.precision = ratio(cc.tp[pos], cc.tp[pos] + cc.fp[pos]);
    out.recall = ratio(cc.tp[pos], cc.tp[pos] + cc.fn[pos]);
    out.f1 = harmonic(out.precision, out.recall);
    return out;
  }
  const std::size_t k = cc.classes();
  if (k == 0) return out;
  for (std::size_t c = 0; c < k; ++c) {
    const double p = ratio(cc.tp[c], cc.tp[c] + cc.fp[c]);
    const double r = ratio(cc.tp[c], cc.tp[c] + cc.fn[c]);
    out.precision += p;
    out.recall += r;
    out.f1 += harmonic(p, r);
  }
  out.precision /= static_cast<double>(k);
  out.recall /= static_cast<double>(k);
  out.f1 /= static_cast<double>(k);
  return out;
}

double dice_coefficient(const Tensor& pred_mask, const Tensor& truth_mask) {
  if (!(pred_mask.shape() == truth_mask.shape())) {
    throw Error(ErrorCode::kShapeMismatch, "dice of " + pred_mask.shape().to_string() + " and " +
                                               truth_mask.shape().to_string());
  }
  std::size_t inter = 0, p = 0, g = 0;
  for (std::size_t i = 0; i < pred_mask.numel(); ++i) {
    const double a = pred_mask[i], b = truth_mask[i];
    if ((a != 0.0 && a != 1.0) || (b != 0.0 && b != 1.0)) {
      throw Error(ErrorCode::kNonBinaryInput, "mask value outside {0,1} at " + std::to_string(i));
    }
    p += a == 1.0;
    g += b == 1.0;
    inter += a == 1.0 && b == 1.0;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

Tensor binarize(const Tensor& x, double threshold) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] >= threshold ? 1.0 : 0.0;
  return out;
}

MetricReport make_report(const ConfusionCounts& cc, Averaging averaging, std::optional<double> dice) {
  MetricReport r;
  r.accuracy = accuracy(cc);
  const PrecisionRecallF1 prf = precision_recall_f1(cc, averaging);
  r.precision = prf.precision;
  r.recall = prf.recall;
  r.f1 = prf.f1;
  r.dice = dice;
  r.averaging = averaging;
  return r;
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "averaging=" << (averaging == Averaging::kBinary ? "binary" : "macro") << '\n'
     << "accuracy=" << accuracy << '\n'
     << "precision=" << precision << '\n'
     << "recall=" << recall << '\n'
     << "f1=" << f1 << '\n';
  if (dice) os << "dice=" << *dice << '\n';
  return os.str();
}

std::string MetricReport::csv_header() { return "accuracy,precision,recall,f1,dice"; }

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << accuracy << ',' << precision << ',' << recall << ',' << f1 << ',';
  if (dice) os << *dice;
  return os.str();
}

}  // namespace mia
