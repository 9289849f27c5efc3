// cxnn command-line surface: dataset generation, parameter audits,
// training, comparison sweeps and mask export.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "cxnn/checkpoint.hpp"
#include "cxnn/config.hpp"
#include "cxnn/dataset_io.hpp"
#include "cxnn/report.hpp"
#include "cxnn/train.hpp"

namespace fs = std::filesystem;
using namespace cxnn;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::string arch;
  std::string variant;
  std::string checkpoint;
  std::string data;
  bool canonical = false;
  int64_t base_width = 0;
  int64_t seed = -1;
  int jobs = 1;
};

std::string config_help_footer() {
  std::string out = "\nConfig file keys (key = value per line, '#' comments):\n";
  for (const auto& d : config_key_docs()) {
    out += "  ";
    out += d.key;
    out += " (default: ";
    out += *d.default_value ? d.default_value : "empty";
    out += ")\n      ";
    out += d.doc;
    out += "\n";
  }
  return out;
}

// Output directories must exist and be writable before any heavy work;
// failures here are usage errors (exit 2) naming the path.
void ensure_writable_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  const std::string probe = path_join(dir, ".cxnn_probe");
  try {
    write_file_bytes(probe, {0});
  } catch (const IoError&) {
    throw ConfigError("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

RunConfig load_config(const CliOptions& opt) {
  if (opt.config_path.empty()) throw ConfigError("--config is required");
  RunConfig cfg = parse_config_file(opt.config_path);
  if (opt.seed >= 0) cfg.seed = static_cast<uint64_t>(opt.seed);
  return cfg;
}

int effective_jobs(const CliOptions& opt) {
  if (const char* env = std::getenv("CXNN_THREADS")) {
    try {
      const int j = std::stoi(env);
      if (j >= 1) return j;
    } catch (const std::exception&) {
    }
    throw ConfigError("CXNN_THREADS must be a positive integer");
  }
  return opt.jobs;
}

TrainConfig train_config(const RunConfig& cfg, int jobs) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.lr = cfg.lr;
  tc.folds = cfg.effective_folds();
  tc.seed = cfg.seed;
  tc.augment = cfg.augment;
  tc.jobs = jobs;
  return tc;
}

std::vector<Sample> obtain_dataset(const RunConfig& cfg) {
  if (!cfg.data_dir.empty())
    return load_dataset(path_join(cfg.data_dir, "manifest.tsv"), cfg.task_kind());
  return generate(cfg.dataset_spec());
}

int cmd_gen_data(const CliOptions& opt) {
  RunConfig cfg = load_config(opt);
  ensure_writable_dir(opt.out_dir);
  const auto samples = generate(cfg.dataset_spec());
  write_dataset(opt.out_dir, samples, cfg.task_kind());
  if (cfg.task_kind() == TaskKind::Classification) {
    int64_t counts[3] = {0, 0, 0};
    for (const auto& s : samples) counts[s.label]++;
    for (int c = 0; c < 3; ++c)
      std::printf("class %d: %lld samples\n", c, static_cast<long long>(counts[c]));
  } else {
    std::printf("segmentation samples: %zu\n", samples.size());
  }
  std::printf("wrote %s/manifest.tsv\n", opt.out_dir.c_str());
  return 0;
}

int cmd_count_params(const CliOptions& opt) {
  RunConfig cfg;
  cfg.arch = opt.arch.empty() ? "resnet18" : opt.arch;
  const ArchFamily family = cfg.family();
  const bool resnet = family == ArchFamily::ResNet18 || family == ArchFamily::ResNet34 ||
                      family == ArchFamily::ResNet50;
  cfg.task = resnet ? "classification" : "segmentation";
  cfg.num_classes = resnet ? 3 : 1;
  if (!opt.canonical && opt.base_width > 0) cfg.base_width = opt.base_width;
  ArchSpec spec = cfg.arch_spec();

  std::vector<std::pair<std::string, Variant>> variants;
  if (!opt.variant.empty()) {
    variants.emplace_back(opt.variant, cfg.parse_variant(opt.variant));
  } else {
    variants.emplace_back("cnn", Variant::real());
    variants.emplace_back("cnnx2", Variant::widened(2.0));
    variants.emplace_back("cvcnn", Variant::complex());
  }
  std::printf("arch: %s  task: %s  base_width: %lld  in_channels: %lld  classes: %lld\n",
              family_name(spec.family), cfg.task.c_str(),
              static_cast<long long>(spec.width()), static_cast<long long>(spec.in_channels),
              static_cast<long long>(spec.num_classes));
  std::printf("%-8s %12s %14s\n", "Variant", "Features", "Trainable");
  for (const auto& [name, variant] : variants) {
    auto model = build<float>(spec, variant, 1);
    std::printf("%-8s %12lld %14lld\n", variant.label(),
                static_cast<long long>(model->meta.total_features),
                static_cast<long long>(model->meta.trainable));
  }
  return 0;
}

void write_text(const std::string& path, const std::string& text) {
  write_file_bytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

int cmd_train(const CliOptions& opt) {
  RunConfig cfg = load_config(opt);
  ensure_writable_dir(opt.out_dir);
  const int jobs = effective_jobs(opt);
  if (!opt.variant.empty()) cfg.variant = opt.variant;
  const ArchSpec spec = cfg.arch_spec();
  const Variant variant = cfg.parse_variant(cfg.variant);
  const auto data = obtain_dataset(cfg);
  TrainConfig tc = train_config(cfg, jobs);

  const auto folds = kfold_split(static_cast<int64_t>(data.size()), tc.folds, tc.seed);
  ModelHandle<float> model = build<float>(spec, variant, splitmix_combine(tc.seed, 0));
  std::printf("training %s %s: %lld trainable parameters, %zu train / %zu test samples\n",
              family_name(spec.family), variant.label(),
              static_cast<long long>(model->meta.trainable), folds[0].first.size(),
              folds[0].second.size());
  const bool ok = train_model(*model, data, folds[0].first, spec.task, tc, 0);
  if (!ok) {
    std::fprintf(stderr, "training diverged (non-finite loss)\n");
    return 1;
  }
  const FoldResult r = evaluate_model(*model, data, folds[0].second, spec.task, tc.batch_size);
  const bool seg = spec.task == TaskKind::Segmentation;
  std::string metrics = seg ? "dice\t" + format_fixed(r.metric1, 6) + "\niou\t" +
                                  format_fixed(r.metric2, 6) + "\n"
                            : "f1\t" + format_fixed(r.metric1, 6) + "\naccuracy\t" +
                                  format_fixed(r.metric2, 6) + "\n";
  write_text(path_join(opt.out_dir, "metrics.tsv"), metrics);
  save_checkpoint(path_join(opt.out_dir, "checkpoint"), spec, variant, tc.seed, *model);
  write_text(path_join(opt.out_dir, "config.txt"), emit_config(cfg));
  std::printf("%s", metrics.c_str());
  std::printf("checkpoint: %s/checkpoint/checkpoint.txt\n", opt.out_dir.c_str());
  return 0;
}

int cmd_compare(const CliOptions& opt) {
  RunConfig cfg = load_config(opt);
  ensure_writable_dir(opt.out_dir);
  const int jobs = effective_jobs(opt);
  const ArchSpec spec = cfg.arch_spec();
  const auto variants = cfg.variant_list();
  const auto data = obtain_dataset(cfg);
  TrainConfig tc = train_config(cfg, jobs);

  std::vector<std::string> variant_dirs;
  for (const auto& v : variants) {
    switch (v.kind) {
      case Variant::Kind::Real: variant_dirs.push_back("cnn"); break;
      case Variant::Kind::WidenedReal:
        variant_dirs.push_back(v.literal_channels ? "cnnx2_literal" : "cnnx2");
        break;
      case Variant::Kind::Complex: variant_dirs.push_back("cvcnn"); break;
    }
  }
  FoldCallback<float> save_fold = [&](size_t vi, int64_t fold, Model<float>& model) {
    const std::string dir = path_join(
        opt.out_dir, "checkpoints/" + variant_dirs[vi] + "/fold" + std::to_string(fold));
    save_checkpoint(dir, spec, variants[vi], tc.seed, model);
  };

  const MetricReport report = run_experiment<float>(spec, variants, data, tc, save_fold);
  write_text(path_join(opt.out_dir, "report.tsv"), report_tsv(report));
  write_text(path_join(opt.out_dir, "folds.tsv"), report_folds_tsv(report));
  write_text(path_join(opt.out_dir, "report.txt"), report_table(report));
  write_text(path_join(opt.out_dir, "config.txt"), emit_config(cfg));
  std::printf("%s", report_table(report).c_str());
  std::printf("report: %s/report.tsv\n", opt.out_dir.c_str());
  return 0;
}

int cmd_export_masks(const CliOptions& opt) {
  if (opt.checkpoint.empty() || opt.data.empty())
    throw ConfigError("export-masks requires --checkpoint and --data");
  ensure_writable_dir(opt.out_dir);
  ModelHandle<float> model = load_checkpoint_model<float>(opt.checkpoint);
  if (model->meta.task != TaskKind::Segmentation)
    throw ConfigError("export-masks needs a segmentation checkpoint");
  const auto data = load_dataset(opt.data, TaskKind::Segmentation);
  fs::create_directories(path_join(opt.out_dir, "masks"));
  fs::create_directories(path_join(opt.out_dir, "overlays"));

  std::string summary;
  int64_t total_tp = 0, total_under = 0, total_over = 0;
  const int64_t batch = 8;
  for (size_t start = 0; start < data.size(); start += static_cast<size_t>(batch)) {
    const size_t stop = std::min(data.size(), start + static_cast<size_t>(batch));
    Tape<float> tape;
    std::vector<int64_t> idx;
    for (size_t i = start; i < stop; ++i) idx.push_back(static_cast<int64_t>(i));
    Var input = tape.constant(train_detail::stack_images<float>(data, idx, 0, idx.size()));
    Var scores = model->forward(tape, input, false);
    const auto& v = tape.value(scores);
    const int64_t h = v.shape().dim(2), w = v.shape().dim(3);
    for (size_t i = start; i < stop; ++i) {
      const float* row = v.data() + static_cast<int64_t>(i - start) * h * w;
      const auto& truth = data[i].mask;
      Tensor<float> pred(truth.shape());
      for (int64_t j = 0; j < h * w; ++j)
        pred[j] = row[j] > 0.f ? 1.f : 0.f;  // sigmoid(x) > 0.5 <=> x > 0
      const MaskDiffCounts counts = mask_diff_counts(pred, truth);
      std::vector<uint8_t> mask_px(static_cast<size_t>(h * w));
      std::vector<uint8_t> overlay(static_cast<size_t>(3 * h * w), 0);
      for (int64_t j = 0; j < h * w; ++j) {
        const bool p = pred[j] != 0.f;
        const bool t = truth[j] != 0.f;
        mask_px[static_cast<size_t>(j)] = p ? 255 : 0;
        uint8_t* px = overlay.data() + 3 * j;
        if (p && t) px[0] = px[1] = px[2] = 255;  // true positive: white
        else if (!p && t) px[0] = 255;            // under-segmentation: red
        else if (p && !t) px[2] = 255;            // over-segmentation: blue
      }
      char name[64];
      std::snprintf(name, sizeof name, "masks/sample_%05zu.pgm", i);
      write_pgm(path_join(opt.out_dir, name), mask_px, h, w);
      std::snprintf(name, sizeof name, "overlays/sample_%05zu.ppm", i);
      write_ppm(path_join(opt.out_dir, name), overlay, h, w);
      summary += "sample " + std::to_string(i) + ": tp=" + std::to_string(counts.tp) +
                 " under=" + std::to_string(counts.under) +
                 " over=" + std::to_string(counts.over) + "\n";
      total_tp += counts.tp;
      total_under += counts.under;
      total_over += counts.over;
    }
  }
  summary += "total: tp=" + std::to_string(total_tp) + " under=" + std::to_string(total_under) +
             " over=" + std::to_string(total_over) + "\n";
  write_text(path_join(opt.out_dir, "summary.txt"), summary);
  std::printf("%s", summary.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cxnn: complex-valued CNN training and comparison engine"};
  app.footer(config_help_footer());
  app.require_subcommand(1);

  CliOptions opt;

  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--seed", opt.seed, "override the config seed");
    if (needs_out) cmd->add_option("--out", opt.out_dir, "output directory")->required();
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic phantom dataset");
  gen->add_option("--config", opt.config_path, "run configuration file")->required();
  add_common(gen, true);

  CLI::App* count = app.add_subcommand("count-params", "audit feature and parameter counts");
  count->add_option("--arch", opt.arch, "architecture name")->required();
  count->add_option("--variant", opt.variant, "single variant (cnn | cnnx2 | cvcnn)");
  count->add_flag("--canonical", opt.canonical, "canonical width (64) and task head");
  count->add_option("--base-width", opt.base_width, "override stage-0 width");

  CLI::App* train = app.add_subcommand("train", "train one (arch, variant) on fold 0");
  train->add_option("--config", opt.config_path, "run configuration file")->required();
  train->add_option("--variant", opt.variant, "override the config variant");
  train->add_option("--jobs", opt.jobs, "worker threads (env CXNN_THREADS overrides)");
  add_common(train, true);

  CLI::App* compare = app.add_subcommand("compare", "cross-validated variant comparison sweep");
  compare->add_option("--config", opt.config_path, "run configuration file")->required();
  compare->add_option("--jobs", opt.jobs, "worker threads (env CXNN_THREADS overrides)");
  add_common(compare, true);

  CLI::App* masks = app.add_subcommand("export-masks", "export predicted masks and overlays");
  masks->add_option("--checkpoint", opt.checkpoint, "checkpoint manifest path")->required();
  masks->add_option("--data", opt.data, "dataset manifest path")->required();
  add_common(masks, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(opt);
    if (count->parsed()) return cmd_count_params(opt);
    if (train->parsed()) return cmd_train(opt);
    if (compare->parsed()) return cmd_compare(opt);
    if (masks->parsed()) return cmd_export_masks(opt);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const SpecError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
