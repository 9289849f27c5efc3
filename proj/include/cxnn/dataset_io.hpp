#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "cxnn/data.hpp"
#include "cxnn/io.hpp"

namespace cxnn {

// Writes samples as .cxt files plus a manifest.tsv. Classification
// targets are the integer label; segmentation targets are mask files.
inline std::string write_dataset(const std::string& dir, const std::vector<Sample>& samples,
                                 TaskKind task) {
  std::filesystem::create_directories(dir + "/images");
  if (task == TaskKind::Segmentation) std::filesystem::create_directories(dir + "/masks");
  std::vector<ManifestEntry> entries;
  for (size_t i = 0; i < samples.size(); ++i) {
    char img[64];
    std::snprintf(img, sizeof img, "images/sample_%05zu.cxt", i);
    save_tensor(path_join(dir, img), samples[i].image);
    ManifestEntry e;
    e.image = img;
    if (task == TaskKind::Classification) {
      e.target = std::to_string(samples[i].label);
    } else {
      char msk[64];
      std::snprintf(msk, sizeof msk, "masks/sample_%05zu.cxt", i);
      save_tensor(path_join(dir, msk), samples[i].mask);
      e.target = msk;
    }
    entries.push_back(std::move(e));
  }
  const std::string manifest = path_join(dir, "manifest.tsv");
  write_manifest(manifest, entries);
  return manifest;
}

// Loads a dataset back; paths in the manifest are relative to its
// directory.
inline std::vector<Sample> load_dataset(const std::string& manifest_path, TaskKind task) {
  const auto entries = read_manifest(manifest_path);
  const std::string dir = path_dirname(manifest_path);
  std::vector<Sample> samples;
  for (const auto& e : entries) {
    Sample s;
    s.image = load_real_tensor<float>(path_join(dir, e.image));
    if (task == TaskKind::Classification) {
      try {
        size_t pos = 0;
        s.label = std::stoi(e.target, &pos);
        if (pos != e.target.size()) throw std::invalid_argument(e.target);
      } catch (const std::exception&) {
        throw FormatError(manifest_path + ": label '" + e.target + "' is not an integer");
      }
    } else {
      s.mask = load_real_tensor<float>(path_join(dir, e.target));
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace cxnn
