#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

#include "cxnn/config.hpp"
#include "cxnn/io.hpp"
#include "cxnn/models.hpp"

namespace cxnn {

// Checkpoints store each parameter as one .cxt container next to a text
// manifest carrying the architecture metadata needed to rebuild the
// model. Parameter matching on load is by name.

inline std::map<std::string, std::string> checkpoint_meta(const ArchSpec& spec,
                                                          const Variant& variant,
                                                          uint64_t seed) {
  std::map<std::string, std::string> m;
  m["family"] = family_name(spec.family);
  m["task"] = spec.task == TaskKind::Classification ? "classification" : "segmentation";
  m["num_classes"] = std::to_string(spec.num_classes);
  m["in_channels"] = std::to_string(spec.in_channels);
  m["base_width"] = std::to_string(spec.base_width);
  std::string depth;
  for (size_t i = 0; i < spec.depth.size(); ++i)
    depth += (i ? "," : "") + std::to_string(spec.depth[i]);
  m["depth"] = depth;
  m["head_mode"] = spec.head_mode == HeadMode::Magnitude  ? "magnitude"
                   : spec.head_mode == HeadMode::RealPart ? "real"
                                                          : "auto";
  switch (variant.kind) {
    case Variant::Kind::Real: m["variant"] = "cnn"; break;
    case Variant::Kind::WidenedReal: m["variant"] = variant.literal_channels ? "cnnx2_literal" : "cnnx2"; break;
    case Variant::Kind::Complex: m["variant"] = "cvcnn"; break;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", variant.param_multiplier);
  m["widen_multiplier"] = buf;
  m["seed"] = std::to_string(seed);
  return m;
}

inline std::pair<ArchSpec, Variant> spec_from_meta(
    const std::map<std::string, std::string>& meta, uint64_t* seed_out = nullptr) {
  auto get = [&](const std::string& key) -> std::string {
    auto it = meta.find(key);
    if (it == meta.end()) throw FormatError("checkpoint missing metadata key '" + key + "'");
    return it->second;
  };
  ArchSpec spec;
  const std::string fam = get("family");
  if (fam == "resnet18") spec.family = ArchFamily::ResNet18;
  else if (fam == "resnet34") spec.family = ArchFamily::ResNet34;
  else if (fam == "resnet50") spec.family = ArchFamily::ResNet50;
  else if (fam == "unet") spec.family = ArchFamily::UNet;
  else if (fam == "attention_unet") spec.family = ArchFamily::AttentionUNet;
  else if (fam == "reconresnet") spec.family = ArchFamily::ReconResNet;
  else throw FormatError("checkpoint names unknown family '" + fam + "'");
  spec.task = get("task") == "segmentation" ? TaskKind::Segmentation : TaskKind::Classification;
  spec.num_classes = std::stoll(get("num_classes"));
  spec.in_channels = std::stoll(get("in_channels"));
  spec.base_width = std::stoll(get("base_width"));
  const std::string depth = get("depth");
  std::string cur;
  for (char ch : depth + ",") {
    if (ch == ',') {
      if (!cur.empty()) spec.depth.push_back(std::stoll(cur));
      cur.clear();
    } else cur += ch;
  }
  const std::string head = get("head_mode");
  spec.head_mode = head == "magnitude" ? HeadMode::Magnitude
                   : head == "real"    ? HeadMode::RealPart
                                       : HeadMode::Auto;
  Variant variant = Variant::real();
  const std::string v = get("variant");
  const double mult = std::stod(get("widen_multiplier"));
  if (v == "cnnx2") variant = Variant::widened(mult, false);
  else if (v == "cnnx2_literal") variant = Variant::widened(mult, true);
  else if (v == "cvcnn") variant = Variant::complex();
  if (seed_out) *seed_out = static_cast<uint64_t>(std::stoull(get("seed")));
  return {spec, variant};
}

template <typename T>
void save_checkpoint(const std::string& dir, const ArchSpec& spec, const Variant& variant,
                     uint64_t seed, Model<T>& model) {
  std::filesystem::create_directories(dir + "/params");
  CheckpointManifest manifest;
  manifest.meta = checkpoint_meta(spec, variant, seed);
  auto params = model.parameters();
  for (size_t i = 0; i < params.size(); ++i) {
    char file[64];
    std::snprintf(file, sizeof file, "params/p%05zu.cxt", i);
    const std::string path = path_join(dir, file);
    if (params[i]->domain == Domain::Complex)
      save_tensor(path, ComplexTensor<T>(params[i]->value_re, params[i]->value_im));
    else
      save_tensor(path, params[i]->value_re);
    manifest.params.emplace_back(params[i]->name, file);
  }
  write_checkpoint_manifest(path_join(dir, "checkpoint.txt"), manifest);
}

template <typename T>
void load_checkpoint_params(const std::string& manifest_path, Model<T>& model) {
  const CheckpointManifest manifest = read_checkpoint_manifest(manifest_path);
  const std::string dir = path_dirname(manifest_path);
  std::map<std::string, std::string> files(manifest.params.begin(), manifest.params.end());
  for (auto* p : model.parameters()) {
    auto it = files.find(p->name);
    if (it == files.end())
      throw FormatError("checkpoint has no tensor for parameter '" + p->name + "'");
    const std::string path = path_join(dir, it->second);
    if (p->domain == Domain::Complex) {
      ComplexTensor<T> t = load_complex_tensor<T>(path);
      if (t.shape() != p->shape())
        throw FormatError("checkpoint tensor shape mismatch for '" + p->name + "'");
      p->value_re = std::move(t.re);
      p->value_im = std::move(t.im);
    } else {
      Tensor<T> t = load_real_tensor<T>(path);
      if (t.shape() != p->shape())
        throw FormatError("checkpoint tensor shape mismatch for '" + p->name + "'");
      p->value_re = std::move(t);
    }
  }
}

// Rebuilds the model a checkpoint describes and restores its weights.
template <typename T>
ModelHandle<T> load_checkpoint_model(const std::string& manifest_path) {
  const CheckpointManifest manifest = read_checkpoint_manifest(manifest_path);
  uint64_t seed = 0;
  auto [spec, variant] = spec_from_meta(manifest.meta, &seed);
  ModelHandle<T> model = build<T>(spec, variant, seed);
  load_checkpoint_params(manifest_path, *model);
  return model;
}

}  // namespace cxnn
