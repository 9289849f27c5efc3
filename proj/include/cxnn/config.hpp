#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cxnn/data.hpp"
#include "cxnn/models.hpp"

namespace cxnn {

// Flat key=value run configuration. Unknown keys are rejected with the
// offending line number; every key has a documented default.
struct RunConfig {
  std::string task = "classification";      // classification | segmentation
  std::string arch = "resnet18";
  std::string variant = "cnn";              // cnn | cnnx2 | cvcnn (train command)
  std::string variants = "cnn,cnnx2,cvcnn";  // compare command sweep list
  int64_t base_width = 0;                    // 0 = family canonical
  std::string depth;                         // comma list, empty = canonical
  int64_t num_classes = 0;  // 0 = task default (3 classification / 1 segmentation)
  int64_t in_channels = 1;
  std::string head_projection = "auto";     // auto | magnitude | real
  double widen_multiplier = 2.0;
  bool widen_literal = false;
  int64_t image_size = 64;
  int64_t samples_per_class = 300;
  double noise_level = 0.05;
  std::string data_dir;                     // load manifest instead of generating
  int64_t epochs = 80;
  int64_t batch_size = 64;
  double lr = 1e-4;
  int64_t folds = 0;                        // 0 = task default (5 cls / 3 seg)
  uint64_t seed = 42;
  bool augment = true;

  TaskKind task_kind() const;
  ArchFamily family() const;
  Variant parse_variant(const std::string& name) const;
  std::vector<Variant> variant_list() const;
  ArchSpec arch_spec() const;
  DatasetSpec dataset_spec() const;
  int64_t effective_folds() const { return folds > 0 ? folds : (task == "segmentation" ? 3 : 5); }
};

struct ConfigKeyDoc {
  const char* key;
  const char* default_value;
  const char* doc;
};

// One entry per config key, used by --help and the canonical emitter.
const std::vector<ConfigKeyDoc>& config_key_docs();

RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
RunConfig parse_config_file(const std::string& path);

// Emits the configuration with every key in documented order;
// parse(emit(c)) reproduces c exactly.
std::string emit_config(const RunConfig& c);

}  // namespace cxnn
