#include "cxnn/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cxnn/io.hpp"

namespace cxnn {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct KeyBinding {
  ConfigKeyDoc doc;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyBinding>& bindings() {
  static const std::vector<KeyBinding> kBindings = {
      {{"task", "classification", "task kind: classification | segmentation"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         if (v != "classification" && v != "segmentation")
           throw ConfigError(w + ": task must be classification or segmentation");
         c.task = v;
       },
       [](const RunConfig& c) { return c.task; }},
      {{"arch", "resnet18",
        "architecture: resnet18 | resnet34 | resnet50 | unet | attention_unet | reconresnet"},
       [](RunConfig& c, const std::string& v, const std::string&) { c.arch = v; },
       [](const RunConfig& c) { return c.arch; }},
      {{"variant", "cnn", "variant for `train`: cnn | cnnx2 | cnnx2_literal | cvcnn"},
       [](RunConfig& c, const std::string& v, const std::string&) { c.variant = v; },
       [](const RunConfig& c) { return c.variant; }},
      {{"variants", "cnn,cnnx2,cvcnn", "comma list of variants for `compare`"},
       [](RunConfig& c, const std::string& v, const std::string&) { c.variants = v; },
       [](const RunConfig& c) { return c.variants; }},
      {{"base_width", "0", "stage-0 feature count; 0 = family canonical (64)"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.base_width = parse_int(v, w);
       },
       [](const RunConfig& c) { return std::to_string(c.base_width); }},
      {{"depth", "", "family block counts, comma list; empty = canonical"},
       [](RunConfig& c, const std::string& v, const std::string&) { c.depth = v; },
       [](const RunConfig& c) { return c.depth; }},
      {{"num_classes", "0", "class count / output channels; 0 = task default (3 cls / 1 seg)"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.num_classes = parse_int(v, w);
       },
       [](const RunConfig& c) { return std::to_string(c.num_classes); }},
      {{"in_channels", "1", "input image channels"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.in_channels = parse_int(v, w);
       },
       [](const RunConfig& c) { return std::to_string(c.in_channels); }},
      {{"head_projection", "auto",
        "complex-to-real head: auto | magnitude | real (auto = magnitude for "
        "classification, real for segmentation)"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         if (v != "auto" && v != "magnitude" && v != "real")
           throw ConfigError(w + ": head_projection must be auto, magnitude or real");
         c.head_projection = v;
       },
       [](const RunConfig& c) { return c.head_projection; }},
      {{"widen_multiplier", "2", "parameter multiplier for the widened variant"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.widen_multiplier = parse_double(v, w);
       },
       [](const RunConfig& c) { return fmt_double(c.widen_multiplier); }},
      {{"widen_literal", "false",
        "widen channel counts by the raw factor instead of sqrt (literal x2 features)"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.widen_literal = parse_bool(v, w);
       },
       [](const RunConfig& c) { return c.widen_literal ? "true" : "false"; }},
      {{"image_size", "64", "synthetic image height and width"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.image_size = parse_int(v, w);
       },
       [](const RunConfig& c) { return std::to_string(c.image_size); }},
      {{"samples_per_class", "300", "synthetic samples per class"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.samples_per_class = parse_int(v, w);
       },
       [](const RunConfig& c) { return std::to_string(c.samples_per_class); }},
      {{"noise_level", "0.05", "additive Gaussian noise level of the generator"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.noise_level = parse_double(v, w);
       },
       [](const RunConfig& c) { return fmt_double(c.noise_level); }},
      {{"data_dir", "", "directory with manifest.tsv to load instead of generating"},
       [](RunConfig& c, const std::string& v, const std::string&) { c.data_dir = v; },
       [](const RunConfig& c) { return c.data_dir; }},
      {{"epochs", "80", "training epochs"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.epochs = parse_int(v, w);
       },
       [](const RunConfig& c) { return std::to_string(c.epochs); }},
      {{"batch_size", "64", "training batch size"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.batch_size = parse_int(v, w);
       },
       [](const RunConfig& c) { return std::to_string(c.batch_size); }},
      {{"lr", "0.0001", "Adam learning rate"},
       [](RunConfig& c, const std::string& v, const std::string& w) { c.lr = parse_double(v, w); },
       [](const RunConfig& c) { return fmt_double(c.lr); }},
      {{"folds", "0", "cross-validation folds; 0 = task default (5 cls / 3 seg)"},
       [](RunConfig& c, const std::string& v, const std::string& w) { c.folds = parse_int(v, w); },
       [](const RunConfig& c) { return std::to_string(c.folds); }},
      {{"seed", "42", "master seed for data, init, folds and augmentation"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.seed = static_cast<uint64_t>(parse_int(v, w));
       },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {{"augment", "true", "apply training-time augmentation"},
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.augment = parse_bool(v, w);
       },
       [](const RunConfig& c) { return c.augment ? "true" : "false"; }},
  };
  return kBindings;
}

}  // namespace

const std::vector<ConfigKeyDoc>& config_key_docs() {
  static const std::vector<ConfigKeyDoc> kDocs = [] {
    std::vector<ConfigKeyDoc> docs;
    for (const auto& b : bindings()) docs.push_back(b.doc);
    return docs;
  }();
  return kDocs;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (const auto& b : bindings()) {
      if (key == b.doc.key) {
        b.set(cfg, value, where);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError(where + ": unknown key '" + key + "'");
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return parse_config_text(std::string(bytes.begin(), bytes.end()), path);
}

std::string emit_config(const RunConfig& c) {
  std::string out;
  for (const auto& b : bindings()) {
    out += b.doc.key;
    out += " = ";
    out += b.get(c);
    out += "\n";
  }
  return out;
}

TaskKind RunConfig::task_kind() const {
  return task == "segmentation" ? TaskKind::Segmentation : TaskKind::Classification;
}

ArchFamily RunConfig::family() const {
  if (arch == "resnet18") return ArchFamily::ResNet18;
  if (arch == "resnet34") return ArchFamily::ResNet34;
  if (arch == "resnet50") return ArchFamily::ResNet50;
  if (arch == "unet") return ArchFamily::UNet;
  if (arch == "attention_unet") return ArchFamily::AttentionUNet;
  if (arch == "reconresnet") return ArchFamily::ReconResNet;
  throw ConfigError("unknown arch '" + arch + "'");
}

Variant RunConfig::parse_variant(const std::string& name) const {
  if (name == "cnn" || name == "real") return Variant::real();
  if (name == "cnnx2" || name == "widened") return Variant::widened(widen_multiplier, widen_literal);
  if (name == "cnnx2_literal") return Variant::widened(2.0, true);
  if (name == "cvcnn" || name == "complex") return Variant::complex();
  throw ConfigError("unknown variant '" + name + "'");
}

std::vector<Variant> RunConfig::variant_list() const {
  std::vector<Variant> out;
  std::string cur;
  for (char ch : variants + ",") {
    if (ch == ',') {
      const std::string name = trim(cur);
      if (!name.empty()) out.push_back(parse_variant(name));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (out.empty()) throw ConfigError("variants list is empty");
  return out;
}

ArchSpec RunConfig::arch_spec() const {
  ArchSpec spec;
  spec.family = family();
  spec.task = task_kind();
  spec.num_classes =
      num_classes > 0 ? num_classes : (task_kind() == TaskKind::Segmentation ? 1 : 3);
  spec.in_channels = in_channels;
  spec.base_width = base_width;
  if (head_projection == "magnitude") spec.head_mode = HeadMode::Magnitude;
  else if (head_projection == "real") spec.head_mode = HeadMode::RealPart;
  if (!depth.empty()) {
    std::string cur;
    for (char ch : depth + ",") {
      if (ch == ',') {
        const std::string d = trim(cur);
        if (!d.empty()) spec.depth.push_back(parse_int(d, "depth"));
        cur.clear();
      } else {
        cur += ch;
      }
    }
  }
  spec.validate();
  return spec;
}

DatasetSpec RunConfig::dataset_spec() const {
  DatasetSpec d;
  d.task = task_kind();
  d.samples_per_class = samples_per_class;
  d.height = image_size;
  d.width = image_size;
  d.noise_level = noise_level;
  d.seed = seed;
  d.validate();
  return d;
}

}  // namespace cxnn
