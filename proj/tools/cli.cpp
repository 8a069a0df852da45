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

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <vector>

#include "mia/attention.hpp"
#include "mia/checkpoint.hpp"
#include "mia/data.hpp"
#include "mia/gradcheck_suite.hpp"
#include "mia/metrics.hpp"
#include "mia/model.hpp"
#include "mia/train.hpp"

namespace mia::cli {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kTestSeedOffset = 1000003;

struct TaskOptions {
  std::string task = "synth-cls";
  std::string variant = "mia";
  std::size_t reduction = 16;
  bool no_attention_bias = false;
  std::uint64_t seed = 0;
  std::size_t samples = 256;
  std::size_t test_samples = 128;
  std::size_t classes = 4;
  double noise = 0.1;
  std::string data;
  std::string test_data;
  std::string label_column = "Label";
  std::size_t limit = 0;
};

struct TrainOptions {
  std::size_t epochs = 10;
  double lr = 0.01;
  std::size_t batch = 16;
  std::string loss;
  std::string out = "model.ckpt";
  std::string log;
};

struct TaskData {
  Dataset train;
  Dataset test;
  std::string architecture;
  Shape input;
  std::size_t classes = 0;
  LossKind loss = LossKind::kCrossEntropy;
};

std::string data_root() {
  const char* env = std::getenv("MIA_DATA_DIR");
  return env ? env : ".";
}

void add_task_options(CLI::App* app, TaskOptions& o) {
  app->add_option("--task", o.task, "Task")
      ->check(CLI::IsMember({"cifar", "synth-cls", "synth-seg", "flows"}))
      ->capture_default_str();
  app->add_option("--variant", o.variant, "Attention variant")
      ->check(CLI::IsMember({"mia", "se_only", "none"}))
      ->capture_default_str();
  app->add_option("--r", o.reduction, "Channel reduction ratio")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_flag("--no-attn-bias", o.no_attention_bias, "Drop the biases of the channel MLP");
  app->add_option("--seed", o.seed, "Seed for data, initialization and shuffling")
      ->capture_default_str();
  app->add_option("--samples", o.samples, "Synthetic training samples")->capture_default_str();
  app->add_option("--test-samples", o.test_samples, "Synthetic held-out samples")
      ->capture_default_str();
  app->add_option("--classes", o.classes, "Synthetic classification classes")
      ->capture_default_str();
  app->add_option("--noise", o.noise, "Synthetic Gaussian noise sigma")->capture_default_str();
  app->add_option("--data", o.data,
                  "CIFAR-10 batch directory or flow CSV (default under $MIA_DATA_DIR)");
  app->add_option("--test-data", o.test_data, "Held-out flow CSV (default: 20% split)");
  app->add_option("--label-column", o.label_column, "Flow CSV label column")
      ->capture_default_str();
  app->add_option("--limit", o.limit, "Maximum CIFAR-10 records per split (0 = all)")
      ->capture_default_str();
}

void add_train_options(CLI::App* app, TrainOptions& o) {
  app->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  app->add_option("--lr", o.lr, "Initial learning rate")->capture_default_str();
  app->add_option("--batch", o.batch, "Batch size")->capture_default_str();
  app->add_option("--loss", o.loss, "cross-entropy | dice | dice-onehot (default by task)");
}

ModelOptions model_options(const TaskOptions& o) {
  return {.reduction = o.reduction, .attention_bias = !o.no_attention_bias, .seed = o.seed};
}

TrainConfig train_config(const TrainOptions& t, const TaskOptions& o, LossKind task_loss) {
  TrainConfig cfg;
  cfg.epochs = t.epochs;
  cfg.lr_init = t.lr;
  cfg.batch_size = t.batch;
  cfg.seed = o.seed;
  cfg.loss = t.loss.empty() ? task_loss : parse_loss(t.loss);
  cfg.validate();
  return cfg;
}

TaskData load_task(const TaskOptions& o) {
  TaskData td;
  if (o.task == "synth-cls") {
    td.train = synth_blobs(o.samples, o.classes, o.seed, o.noise);
    td.test = synth_blobs(o.test_samples, o.classes, o.seed + kTestSeedOffset, o.noise);
    td.test.split = Split::kTest;
    td.architecture = "mini_cnn";
    td.input = td.train.sample_shape();
    td.classes = o.classes;
  } else if (o.task == "synth-seg") {
    td.train = synth_masks(o.samples, 16, 16, o.seed, o.noise);
    td.test = synth_masks(o.test_samples, 16, 16, o.seed + kTestSeedOffset, o.noise);
    td.test.split = Split::kTest;
    td.architecture = "mini_segnet";
    td.input = td.train.sample_shape();
    td.classes = 2;
    td.loss = LossKind::kDice;
  } else if (o.task == "cifar") {
    fs::path dir = o.data;
    if (dir.empty()) {
      dir = fs::path(data_root()) / "cifar-10-batches-bin";
      if (!fs::exists(dir)) dir = data_root();
    }
    std::optional<std::size_t> limit;
    if (o.limit > 0) limit = o.limit;
    td.train = load_cifar10(dir, Split::kTrain, limit);
    td.test = load_cifar10(dir, Split::kTest, limit, &td.train.normalization);
    td.architecture = "mini_cnn";
    td.input = td.train.sample_shape();
    td.classes = 10;
  } else {
    const fs::path path = o.data.empty() ? fs::path(data_root()) / "flows.csv" : fs::path(o.data);
    if (!o.test_data.empty()) {
      td.train = load_flows_csv(path, o.label_column);
      td.test = load_flows_csv(o.test_data, o.label_column, &td.train.normalization);
      td.test.split = Split::kTest;
    } else {
      Dataset all = read_flows_csv(path, o.label_column);
      if (all.size() < 2) throw Error(ErrorCode::kEmptyDataset, "need at least two flow rows");
      const auto order = shuffled_indices(all.size(), o.seed);
      const std::size_t n_test = std::max<std::size_t>(1, all.size() / 5);
      td.test = subset(all, std::span(order).first(n_test));
      td.test.split = Split::kTest;
      td.train = subset(all, std::span(order).subspan(n_test));
      td.train.normalization = standardize_columns(td.train.inputs);
      standardize_columns(td.test.inputs, &td.train.normalization);
      td.test.normalization = td.train.normalization;
    }
    td.architecture = "mini_flownet";
    td.input = td.train.sample_shape();
    td.classes = 2;
  }
  return td;
}

Model build_for(const TaskData& td, Variant variant, const TaskOptions& o) {
  return build_model(td.architecture, td.input, td.classes, variant, model_options(o));
}

// Shape of the model input a task uses, without loading any data.
std::pair<std::string, Shape> architecture_for(const TaskOptions& o, std::size_t& classes) {
  if (o.task == "synth-cls") {
    classes = o.classes;
    return {"mini_cnn", Shape{3, 16, 16}};
  }
  if (o.task == "synth-seg") {
    classes = 2;
    return {"mini_segnet", Shape{1, 16, 16}};
  }
  if (o.task == "cifar") {
    classes = 10;
    return {"mini_cnn", Shape{3, 32, 32}};
  }
  throw Error(ErrorCode::kInvalidConfig, "params for flows needs the feature count; use --task with data");
}

int cmd_train(const TaskOptions& o, const TrainOptions& t, std::ostream& out) {
  const Variant variant = parse_variant(o.variant);
  TaskData td = load_task(o);
  const TrainConfig cfg = train_config(t, o, td.loss);
  Model model = build_for(td, variant, o);

  std::ofstream log_file;
  std::ostringstream log;
  const auto logs = train_loop(model, td.train, cfg, &log);
  out << log.str();
  if (!t.log.empty()) {
    log_file.open(t.log);
    if (!log_file) throw Error(ErrorCode::kIoError, "cannot write " + t.log);
    log_file << log.str();
  }
  save_checkpoint(model, t.out);
  const MetricReport report = evaluate(model, td.test);
  out << "checkpoint=" << t.out << '\n' << report.to_text();
  return kExitOk;
}

int cmd_eval(const TaskOptions& o, const std::string& ckpt, std::ostream& out) {
  const CheckpointData data = read_checkpoint(ckpt);
  TaskData td = load_task(o);
  Model model = build_for(td, parse_variant(data.variant), o);
  load_checkpoint(ckpt, model);
  out << "variant=" << data.variant << '\n' << evaluate(model, td.test).to_text();
  return kExitOk;
}

int cmd_gradcheck(bool full, std::ostream& out) {
  SuiteOptions options;
  options.full = full;
  const auto start = std::chrono::steady_clock::now();
  const auto results = run_gradcheck_suite(options);
  bool ok = true;
  out << std::scientific << std::setprecision(3);
  for (const auto& c : results) {
    out << (c.report.passed ? "PASS " : "FAIL ") << c.name << " max_rel_error=" << c.report.max_rel_error
        << " tol=" << c.tol << '\n';
    ok = ok && c.report.passed;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << std::fixed << std::setprecision(2) << (ok ? "all passed" : "FAILED") << " in " << secs
      << "s\n";
  return ok ? kExitOk : kExitDomainError;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_ablate(TaskOptions o, const TrainOptions& t, std::size_t seeds, std::ostream& out) {
  if (seeds == 0) throw Error(ErrorCode::kInvalidConfig, "need at least one seed");
  const std::vector<Variant> variants{Variant::kMia, Variant::kSeOnly, Variant::kNone};
  std::map<Variant, std::vector<double>> scores;
  out << "variant,seed," << MetricReport::csv_header() << '\n';
  const std::uint64_t base_seed = o.seed;
  for (std::size_t s = 0; s < seeds; ++s) {
    o.seed = base_seed + s;
    const TaskData td = load_task(o);
    const TrainConfig cfg = train_config(t, o, td.loss);
    for (Variant v : variants) {
      Model model = build_for(td, v, o);
      train_loop(model, td.train, cfg);
      const MetricReport r = evaluate(model, td.test);
      scores[v].push_back(r.dice && td.train.is_segmentation() ? *r.dice : r.accuracy);
      out << to_string(v) << ',' << o.seed << ',' << r.to_csv() << '\n';
    }
  }
  const char* metric = o.task == "synth-seg" ? "dice" : "accuracy";
  out << "variant,median_" << metric << '\n';
  for (Variant v : variants) {
    out << to_string(v) << ',' << std::fixed << std::setprecision(6) << median(scores[v]) << '\n';
  }
  out << "mia_ge_none=" << (median(scores[Variant::kMia]) >= median(scores[Variant::kNone]) ? "yes" : "no")
      << '\n';
  return kExitOk;
}

int cmd_params(const TaskOptions& o, std::ostream& out) {
  const Variant variant = parse_variant(o.variant);
  Model model;
  if (o.task == "flows") {
    model = build_for(load_task(o), variant, o);
  } else {
    std::size_t classes = 0;
    const auto [arch, input] = architecture_for(o, classes);
    model = build_model(arch, input, classes, variant, model_options(o));
  }
  out << "architecture=" << model.architecture << " variant=" << to_string(model.variant)
      << " input=" << model.input.to_string() << '\n';
  out << "layer,kind,params\n";
  std::size_t attention_total = 0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    out << l.name << ',' << to_string(l.kind) << ',' << model.layer_param_count(i) << '\n';
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    if (l.kind != LayerKind::kMia || !l.enabled) continue;
    const MiaBlock block = model.attention_block(i);
    const std::size_t audited = param_count(block);
    attention_total += audited;
    out << "audit," << l.name << ",C=" << block.channels << ",r=" << block.reduction
        << ",width=" << block.hidden() << ",param_count=" << audited
        << ",layer_params=" << model.layer_param_count(i)
        << (audited == model.layer_param_count(i) ? ",ok" : ",MISMATCH") << '\n';
  }
  const std::size_t total = model.param_count();
  out << "total," << total << '\n';
  out << "attention_total," << attention_total << ',' << std::fixed << std::setprecision(3)
      << 100.0 * static_cast<double>(attention_total) / static_cast<double>(total) << "%\n";
  return kExitOk;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

int cmd_export(const TaskOptions& o, const std::string& ckpt, std::size_t index,
               const std::string& dir, std::ostream& out) {
  const CheckpointData data = read_checkpoint(ckpt);
  const TaskData td = load_task(o);
  Model model = build_for(td, parse_variant(data.variant), o);
  load_checkpoint(ckpt, model);
  if (index >= td.test.size()) {
    throw Error(ErrorCode::kInvalidConfig, "input index " + std::to_string(index) + " of " +
                                               std::to_string(td.test.size()) + " samples");
  }
  const std::size_t idx[] = {index};
  Graph g;
  const auto params = bind_parameters(model, g, false);
  const ForwardPass pass = model_forward(model, g, g.constant(gather(td.test.inputs, idx)), params);
  fs::create_directories(dir);
  std::size_t k = 0;
  for (const MiaTrace& trace : pass.attention) {
    const std::string stem = "attn" + std::to_string(++k);
    const Tensor& wc = g.value(trace.wc);
    std::ostringstream text;
    text << std::setprecision(17);
    for (std::size_t c = 0; c < wc.numel(); ++c) text << c << ' ' << wc[c] << '\n';
    write_file(fs::path(dir) / (stem + "_wc.txt"), text.str());
    std::size_t files = 1;
    if (trace.ws) {
      const Tensor& ws = g.value(*trace.ws);
      write_file(fs::path(dir) / (stem + "_ws.pgm"),
                 encode_pgm(ws.reshaped(Shape{ws.dim(1), ws.dim(2)})));
      const Tensor& a = g.value(trace.a);
      const std::size_t h = a.dim(2), w = a.dim(3);
      for (std::size_t c = 0; c < a.dim(1); ++c) {
        std::vector<double> plane(a.data().begin() + c * h * w, a.data().begin() + (c + 1) * h * w);
        write_file(fs::path(dir) / (stem + "_A_c" + std::to_string(c) + ".pgm"),
                   encode_pgm(Tensor(Shape{h, w}, std::move(plane))));
      }
      files += 1 + a.dim(1);
    }
    out << stem << ": channels=" << wc.numel() << " files=" << files << '\n';
  }
  out << "wrote " << k << " attention layer(s) to " << dir << '\n';
  return kExitOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multidimensional interactive attention: training, evaluation and audits"};
  app.name("mia");
  app.require_subcommand(1);

  TaskOptions task;
  TrainOptions train;
  std::string ckpt;
  bool full = false;
  std::size_t seeds = 3;
  std::size_t input_index = 0;
  std::string export_dir = "attention";

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_task_options(train_cmd, task);
  add_train_options(train_cmd, train);
  train_cmd->add_option("--out", train.out, "Checkpoint path")->capture_default_str();
  train_cmd->add_option("--log", train.log, "Also write the epoch log to this file");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out split");
  add_task_options(eval_cmd, task);
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint path")->required();

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every adjoint");
  grad_cmd->add_flag("--full", full, "Include attention blocks over all shapes and both backbones");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train mia, se_only and none on identical data");
  add_task_options(ablate_cmd, task);
  add_train_options(ablate_cmd, train);
  ablate_cmd->add_option("--seeds", seeds, "Number of seeds")->capture_default_str();

  auto* params_cmd = app.add_subcommand("params", "Per-layer parameter counts and attention audit");
  add_task_options(params_cmd, task);

  auto* export_cmd = app.add_subcommand("export-attn", "Write attention maps as text and PGM");
  add_task_options(export_cmd, task);
  export_cmd->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  export_cmd->add_option("--input", input_index, "Held-out sample index")->capture_default_str();
  export_cmd->add_option("--out", export_dir, "Output directory")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(task, train, out);
    if (eval_cmd->parsed()) return cmd_eval(task, ckpt, out);
    if (grad_cmd->parsed()) return cmd_gradcheck(full, out);
    if (ablate_cmd->parsed()) return cmd_ablate(task, train, seeds, out);
    if (params_cmd->parsed()) return cmd_params(task, out);
    if (export_cmd->parsed()) return cmd_export(task, ckpt, input_index, export_dir, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomainError;
  }
  return kExitUsage;
}

}  // namespace mia::cli
