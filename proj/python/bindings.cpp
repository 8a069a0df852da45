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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <random>
#include <sstream>

#include "cli.hpp"
#include "mia/attention.hpp"
#include "mia/checkpoint.hpp"
#include "mia/data.hpp"
#include "mia/gradcheck_suite.hpp"
#include "mia/metrics.hpp"
#include "mia/model.hpp"
#include "mia/train.hpp"

namespace py = pybind11;

namespace mia {
namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  std::vector<std::size_t> dims(a.shape(), a.shape() + a.ndim());
  return Tensor(Shape(std::move(dims)), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array a(t.shape().dims());
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

py::dict maps_to_dict(const AttentionMaps& m) {
  py::dict d;
  d["z"] = to_array(m.z);
  d["m"] = to_array(m.m);
  d["wc"] = to_array(m.wc);
  d["ws"] = to_array(m.ws);
  d["a"] = to_array(m.a);
  return d;
}

py::dict dataset_to_dict(const Dataset& d) {
  py::dict out;
  out["inputs"] = to_array(d.inputs);
  if (d.masks) out["masks"] = to_array(*d.masks);
  else out["labels"] = d.labels;
  out["classes"] = d.classes;
  return out;
}

Dataset dataset_from(const Array& inputs, const std::optional<std::vector<int>>& labels,
                     const std::optional<Array>& masks, std::size_t classes) {
  Dataset d;
  d.inputs = to_tensor(inputs);
  if (labels) d.labels = *labels;
  if (masks) d.masks = to_tensor(*masks);
  d.classes = classes;
  return d;
}

Averaging parse_averaging(const std::string& s) {
  if (s == "binary") return Averaging::kBinary;
  if (s == "macro") return Averaging::kMacro;
  throw Error(ErrorCode::kInvalidConfig, "averaging must be 'binary' or 'macro'");
}

#define MIA_TENSOR_PROPERTY(cls, field)                                   \
  def_property(                                                           \
      #field, [](const cls& b) { return to_array(b.field); },             \
      [](cls& b, const Array& a) {                                        \
        Tensor t = to_tensor(a);                                          \
        if (t.shape() != b.field.shape()) {                               \
          throw Error(ErrorCode::kShapeMismatch, #field " expects " +     \
                                                     b.field.shape().to_string()); \
        }                                                                 \
        b.field = std::move(t);                                           \
      })

}  // namespace
}  // namespace mia

PYBIND11_MODULE(_mia, m) {
  using namespace mia;
  m.doc() = "Multidimensional interactive attention: tensors, training and audits";

  static py::exception<Error> error(m, "MiaError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<MiaBlock>(m, "MiaBlock")
      .def(py::init<std::size_t, std::size_t, bool, bool>(), py::arg("channels"), py::arg("reduction") = 16,
           py::arg("has_bias") = true, py::arg("has_spatial") = true)
      .def_readonly("channels", &MiaBlock::channels)
      .def_readonly("reduction", &MiaBlock::reduction)
      .def_readonly("has_bias", &MiaBlock::has_bias)
      .def_readonly("has_spatial", &MiaBlock::has_spatial)
      .def_property_readonly("hidden", &MiaBlock::hidden)
      .def("initialize",
           [](MiaBlock& b, std::uint64_t seed) {
             std::mt19937_64 rng(seed);
             b.initialize(rng);
           },
           py::arg("seed"))
      .MIA_TENSOR_PROPERTY(MiaBlock, w1)
      .MIA_TENSOR_PROPERTY(MiaBlock, b1)
      .MIA_TENSOR_PROPERTY(MiaBlock, w2)
      .MIA_TENSOR_PROPERTY(MiaBlock, b2)
      .MIA_TENSOR_PROPERTY(MiaBlock, conv_kernel)
      .MIA_TENSOR_PROPERTY(MiaBlock, conv_bias);

  m.def("bottleneck_width", &bottleneck_width, py::arg("channels"), py::arg("reduction"));
  m.def("param_count", py::overload_cast<std::size_t, std::size_t, bool, bool>(&param_count),
        py::arg("channels"), py::arg("reduction") = 16, py::arg("has_bias") = true, py::arg("has_spatial") = true);
  m.def("channel_descriptor", [](const Array& x) { return to_array(channel_descriptor(to_tensor(x))); });
  m.def("spatial_descriptor", [](const Array& x) { return to_array(spatial_descriptor(to_tensor(x))); });
  m.def("channel_weights",
        [](const Array& z, const MiaBlock& b) { return to_array(channel_weights(to_tensor(z), b)); });
  m.def("spatial_weights",
        [](const Array& s, const MiaBlock& b) { return to_array(spatial_weights(to_tensor(s), b)); });
  m.def("fuse_attention",
        [](const Array& wc, const Array& ws) { return to_array(fuse_attention(to_tensor(wc), to_tensor(ws))); });
  m.def("apply_attention",
        [](const Array& x, const Array& a) { return to_array(apply_attention(to_tensor(x), to_tensor(a))); });
  m.def(
      "forward",
      [](const Array& x, const MiaBlock& b) {
        const MiaOutput out = forward(to_tensor(x), b);
        return py::make_tuple(to_array(out.output), maps_to_dict(out.maps));
      },
      py::arg("x"), py::arg("block"), "Returns (recalibrated features, dict of attention maps).");
  m.def("encode_pgm", [](const Array& map) { return py::bytes(encode_pgm(to_tensor(map))); });

  py::class_<Model>(m, "Model")
      .def_readonly("architecture", &Model::architecture)
      .def_property_readonly("variant", [](const Model& mo) { return std::string(to_string(mo.variant)); })
      .def_property_readonly("input_shape", [](const Model& mo) { return mo.input.dims(); })
      .def_property_readonly("layers",
                             [](const Model& mo) {
                               std::vector<std::pair<std::string, std::string>> out;
                               for (const auto& l : mo.layers) out.emplace_back(l.name, to_string(l.kind));
                               return out;
                             })
      .def("param_count", &Model::param_count)
      .def("parameters",
           [](const Model& mo) {
             py::dict d;
             for (const auto& [name, t] : mo.parameters) d[py::str(name)] = to_array(t);
             return d;
           })
      .def("predict", [](const Model& mo, const Array& x) { return to_array(predict(mo, to_tensor(x))); })
      .def("save", [](const Model& mo, const std::filesystem::path& p) { save_checkpoint(mo, p); })
      .def("load", [](Model& mo, const std::filesystem::path& p) { load_checkpoint(p, mo); });

  m.def(
      "build_model",
      [](const std::string& arch, const std::vector<std::size_t>& input, std::size_t classes,
         const std::string& variant, std::size_t reduction, bool attention_bias, std::uint64_t seed) {
        ModelOptions opts;
        opts.reduction = reduction;
        opts.attention_bias = attention_bias;
        opts.seed = seed;
        return build_model(arch, Shape(input), classes, parse_variant(variant), opts);
      },
      py::arg("architecture"), py::arg("input_shape"), py::arg("classes") = 10, py::arg("variant") = "mia",
      py::arg("reduction") = 16, py::arg("attention_bias") = true, py::arg("seed") = 0);

  m.def(
      "train",
      [](Model& model, const Array& inputs, std::optional<std::vector<int>> labels, std::optional<Array> masks,
         std::size_t classes, std::size_t epochs, double lr, std::size_t batch_size, const std::string& loss,
         std::uint64_t seed) {
        const Dataset d = dataset_from(inputs, labels, masks, classes);
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.lr_init = lr;
        cfg.batch_size = batch_size;
        cfg.loss = masks ? LossKind::kDice : parse_loss(loss);
        cfg.seed = seed;
        std::vector<std::string> lines;
        for (const auto& e : train_loop(model, d, cfg)) lines.push_back(e.to_line());
        return lines;
      },
      py::arg("model"), py::arg("inputs"), py::arg("labels") = std::nullopt, py::arg("masks") = std::nullopt,
      py::arg("classes") = 10, py::arg("epochs") = 10, py::arg("lr") = 0.01, py::arg("batch_size") = 16,
      py::arg("loss") = "cross-entropy", py::arg("seed") = 0, "Runs the training loop; returns epoch log lines.");
  m.def(
      "evaluate",
      [](const Model& model, const Array& inputs, std::optional<std::vector<int>> labels,
         std::optional<Array> masks, std::size_t classes) {
        const MetricReport r = evaluate(model, dataset_from(inputs, labels, masks, classes));
        py::dict d;
        d["accuracy"] = r.accuracy;
        d["precision"] = r.precision;
        d["recall"] = r.recall;
        d["f1"] = r.f1;
        if (r.dice) d["dice"] = *r.dice;
        return d;
      },
      py::arg("model"), py::arg("inputs"), py::arg("labels") = std::nullopt, py::arg("masks") = std::nullopt,
      py::arg("classes") = 10);

  m.def(
      "confusion_counts",
      [](const std::vector<int>& pred, const std::vector<int>& truth, std::size_t classes) {
        const ConfusionCounts cc = confusion_counts(pred, truth, classes);
        py::dict d;
        d["tp"] = cc.tp;
        d["fp"] = cc.fp;
        d["fn"] = cc.fn;
        d["tn"] = cc.tn;
        d["total"] = cc.total;
        return d;
      },
      py::arg("pred"), py::arg("truth"), py::arg("classes"));
  m.def(
      "accuracy",
      [](const std::vector<int>& pred, const std::vector<int>& truth, std::size_t classes) {
        return accuracy(confusion_counts(pred, truth, classes));
      },
      py::arg("pred"), py::arg("truth"), py::arg("classes"));
  m.def(
      "precision_recall_f1",
      [](const std::vector<int>& pred, const std::vector<int>& truth, std::size_t classes,
         const std::string& averaging) {
        const auto prf = precision_recall_f1(confusion_counts(pred, truth, classes), parse_averaging(averaging));
        return py::make_tuple(prf.precision, prf.recall, prf.f1);
      },
      py::arg("pred"), py::arg("truth"), py::arg("classes"), py::arg("averaging") = "macro");
  m.def("dice_coefficient",
        [](const Array& p, const Array& g) { return dice_coefficient(to_tensor(p), to_tensor(g)); });

  m.def("cosine_lr", &cosine_lr, py::arg("step"), py::arg("total_steps"), py::arg("lr_init") = 0.01,
        py::arg("lr_min") = 0.0);
  m.def(
      "dice_loss", [](const Array& p, const Array& t, double eps) { return dice_loss(to_tensor(p), to_tensor(t), eps); },
      py::arg("pred"), py::arg("target"), py::arg("epsilon") = 1.0);
  m.def(
      "cross_entropy_loss",
      [](const Array& logits, const std::vector<int>& labels) { return cross_entropy_loss(to_tensor(logits), labels); },
      py::arg("logits"), py::arg("labels"));

  m.def(
      "synth_blobs", [](std::size_t n, std::size_t k, std::uint64_t seed, double noise) {
        return dataset_to_dict(synth_blobs(n, k, seed, noise));
      },
      py::arg("n"), py::arg("classes"), py::arg("seed") = 0, py::arg("noise") = 0.1);
  m.def(
      "synth_masks", [](std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed, double noise) {
        return dataset_to_dict(synth_masks(n, h, w, seed, noise));
      },
      py::arg("n"), py::arg("h") = 16, py::arg("w") = 16, py::arg("seed") = 0, py::arg("noise") = 0.1);
  m.def(
      "load_flows_csv",
      [](const std::filesystem::path& p, const std::string& label) { return dataset_to_dict(load_flows_csv(p, label)); },
      py::arg("path"), py::arg("label_column") = "Label");
  m.def(
      "read_checkpoint",
      [](const std::filesystem::path& p) {
        const CheckpointData data = read_checkpoint(p);
        py::dict entries;
        for (const auto& [name, t] : data.entries) entries[py::str(name)] = to_array(t);
        return py::make_tuple(data.variant, entries);
      },
      py::arg("path"), "Returns (variant tag, dict of named arrays).");

  m.def(
      "gradcheck",
      [](bool full) {
        SuiteOptions opts;
        opts.full = full;
        std::vector<py::tuple> out;
        for (const auto& c : run_gradcheck_suite(opts))
          out.push_back(py::make_tuple(c.name, c.report.max_rel_error, c.report.passed));
        return out;
      },
      py::arg("full") = false, "Returns (name, max relative error, passed) per case.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int status = 0;
        {
          py::gil_scoped_release release;
          status = cli::run(args, out, err);
        }
        return py::make_tuple(status, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (status, stdout, stderr).");
}
