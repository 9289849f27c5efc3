#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cxnn/complex_tensor.hpp"
#include "cxnn/error.hpp"
#include "cxnn/tensor.hpp"

namespace cxnn {

// ---------------------------------------------------------------------
// .cxt tensor container(bit-exact):
//   magic "CXT1" | dtype u8 (0=f32, 1=f64) | domain u8 (0=real, 1=complex)
//   | ndim u32 LE | ndim x u64 LE dims | payload row-major LE values.
// Complex payload is the full real plane followed by the full imaginary
// plane. Parsing is bounds-checked end to end; malformed input raises
// FormatError naming the offending byte offset.
// ---------------------------------------------------------------------

enum class CxtDtype : uint8_t { F32 = 0, F64 = 1 };
enum class CxtDomain : uint8_t { Real = 0, Complex = 1 };

struct CxtData {
  CxtDtype dtype = CxtDtype::F32;
  CxtDomain domain = CxtDomain::Real;
  std::vector<int64_t> dims;
  std::vector<float> f32;
  std::vector<double> f64;

  int64_t elements() const {
    int64_t n = 1;
    for (int64_t d : dims) n *= d;
    return n;
  }
};

// Parses a .cxt image from memory. Never reads past `len`.
CxtData parse_cxt(const uint8_t* bytes, size_t len);

CxtData read_cxt(const std::string& path);
void write_cxt(const std::string& path, const CxtData& data);

void save_tensor(const std::string& path, const Tensor<float>& t);
void save_tensor(const std::string& path, const Tensor<double>& t);
void save_tensor(const std::string& path, const ComplexTensor<float>& t);
void save_tensor(const std::string& path, const ComplexTensor<double>& t);

template <typename T>
Tensor<T> load_real_tensor(const std::string& path);
template <typename T>
ComplexTensor<T> load_complex_tensor(const std::string& path);

// ---------------------------------------------------------------------
// Dataset manifest: UTF-8 text, one sample per line,
// "relative/path.cxt<TAB>label-or-mask-path", '#' starts a comment.
// ---------------------------------------------------------------------

struct ManifestEntry {
  std::string image;
  std::string target;  // integer label (classification) or mask path
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

// ---------------------------------------------------------------------
// Checkpoints: a text manifest of key=value metadata lines followed by
// one "param<TAB>name<TAB>file" line per parameter stored as .cxt.
// ---------------------------------------------------------------------

struct CheckpointManifest {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, std::string>> params;  // (name, relative file)
};

CheckpointManifest read_checkpoint_manifest(const std::string& path);
void write_checkpoint_manifest(const std::string& path, const CheckpointManifest& m);

// ---------------------------------------------------------------------
// Portable graymap / pixmap writers (binary P5 / P6, maxval 255).
// ---------------------------------------------------------------------

void write_pgm(const std::string& path, const std::vector<uint8_t>& gray, int64_t h, int64_t w);
void write_ppm(const std::string& path, const std::vector<uint8_t>& rgb, int64_t h, int64_t w);

// Reads a whole file; IoError on failure.
std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

std::string path_dirname(const std::string& path);
std::string path_join(const std::string& a, const std::string& b);

}  // namespace cxnn
