#include "cxnn/io.hpp"

#include <cstring>
#include <fstream>
#include <limits>

namespace cxnn {

namespace {

constexpr char kMagic[4] = {'C', 'X', 'T', '1'};
constexpr int64_t kMaxNdim = 8;

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64le(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32le(const uint8_t* p) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

uint64_t get_u64le(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

float get_f32le(const uint8_t* p) {
  uint32_t bits = get_u32le(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

double get_f64le(const uint8_t* p) {
  uint64_t bits = get_u64le(p);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

void put_f32le(std::vector<uint8_t>& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32le(out, bits);
}

void put_f64le(std::vector<uint8_t>& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64le(out, bits);
}

[[noreturn]] void format_fail(size_t offset, const std::string& what) {
  throw FormatError("cxt format error at offset " + std::to_string(offset) + ": " + what);
}

}  // namespace

CxtData parse_cxt(const uint8_t* bytes, size_t len) {
  size_t off = 0;
  if (len < 4 || std::memcmp(bytes, kMagic, 4) != 0) format_fail(0, "bad magic, expected CXT1");
  off = 4;
  if (len < off + 2) format_fail(off, "truncated header");
  const uint8_t dtype = bytes[off];
  if (dtype > 1) format_fail(off, "unknown dtype code " + std::to_string(dtype));
  const uint8_t domain = bytes[off + 1];
  if (domain > 1) format_fail(off + 1, "unknown domain code " + std::to_string(domain));
  off += 2;
  if (len < off + 4) format_fail(off, "truncated ndim field");
  const uint32_t ndim = get_u32le(bytes + off);
  off += 4;
  if (ndim == 0 || ndim > kMaxNdim)
    format_fail(off - 4, "ndim " + std::to_string(ndim) + " outside [1," +
                             std::to_string(kMaxNdim) + "]");
  CxtData data;
  data.dtype = static_cast<CxtDtype>(dtype);
  data.domain = static_cast<CxtDomain>(domain);
  uint64_t elems = 1;
  for (uint32_t i = 0; i < ndim; ++i) {
    if (len < off + 8) format_fail(off, "truncated dims");
    const uint64_t d = get_u64le(bytes + off);
    off += 8;
    if (d == 0) format_fail(off - 8, "zero dimension");
    if (d > static_cast<uint64_t>(std::numeric_limits<int64_t>::max()) ||
        elems > std::numeric_limits<uint64_t>::max() / d)
      format_fail(off - 8, "element count overflow");
    elems *= d;
    data.dims.push_back(static_cast<int64_t>(d));
  }
  const uint64_t value_size = dtype == 0 ? 4 : 8;
  const uint64_t planes = domain == 0 ? 1 : 2;
  if (elems > (std::numeric_limits<uint64_t>::max() / value_size) / planes)
    format_fail(off, "payload size overflow");
  const uint64_t payload = elems * planes * value_size;
  const uint64_t expected = static_cast<uint64_t>(off) + payload;
  if (static_cast<uint64_t>(len) != expected)
    format_fail(off, "payload length mismatch: expected " + std::to_string(expected) +
                         " total bytes, file has " + std::to_string(len));
  const uint64_t count = elems * planes;
  if (dtype == 0) {
    data.f32.resize(count);
    for (uint64_t i = 0; i < count; ++i) data.f32[i] = get_f32le(bytes + off + 4 * i);
  } else {
    data.f64.resize(count);
    for (uint64_t i = 0; i < count; ++i) data.f64[i] = get_f64le(bytes + off + 8 * i);
  }
  return data;
}

CxtData read_cxt(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file_bytes(path);
  try {
    return parse_cxt(bytes.data(), bytes.size());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_cxt(const std::string& path, const CxtData& data) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(static_cast<uint8_t>(data.dtype));
  out.push_back(static_cast<uint8_t>(data.domain));
  put_u32le(out, static_cast<uint32_t>(data.dims.size()));
  for (int64_t d : data.dims) put_u64le(out, static_cast<uint64_t>(d));
  if (data.dtype == CxtDtype::F32)
    for (float v : data.f32) put_f32le(out, v);
  else
    for (double v : data.f64) put_f64le(out, v);
  write_file_bytes(path, out);
}

namespace {

template <typename T>
CxtDtype dtype_of();
template <>
CxtDtype dtype_of<float>() {
  return CxtDtype::F32;
}
template <>
CxtDtype dtype_of<double>() {
  return CxtDtype::F64;
}

template <typename T>
CxtData to_cxt(const Tensor<T>& t) {
  CxtData d;
  d.dtype = dtype_of<T>();
  d.domain = CxtDomain::Real;
  d.dims = t.shape().dims();
  if constexpr (std::is_same_v<T, float>)
    d.f32.assign(t.data(), t.data() + t.size());
  else
    d.f64.assign(t.data(), t.data() + t.size());
  return d;
}

template <typename T>
CxtData to_cxt(const ComplexTensor<T>& t) {
  CxtData d;
  d.dtype = dtype_of<T>();
  d.domain = CxtDomain::Complex;
  d.dims = t.shape().dims();
  auto append = [&](const Tensor<T>& plane) {
    if constexpr (std::is_same_v<T, float>)
      d.f32.insert(d.f32.end(), plane.data(), plane.data() + plane.size());
    else
      d.f64.insert(d.f64.end(), plane.data(), plane.data() + plane.size());
  };
  append(t.re);
  append(t.im);
  return d;
}

template <typename T>
const std::vector<T>& payload_of(const CxtData& d);
template <>
const std::vector<float>& payload_of<float>(const CxtData& d) {
  return d.f32;
}
template <>
const std::vector<double>& payload_of<double>(const CxtData& d) {
  return d.f64;
}

}  // namespace

void save_tensor(const std::string& path, const Tensor<float>& t) { write_cxt(path, to_cxt(t)); }
void save_tensor(const std::string& path, const Tensor<double>& t) { write_cxt(path, to_cxt(t)); }
void save_tensor(const std::string& path, const ComplexTensor<float>& t) {
  write_cxt(path, to_cxt(t));
}
void save_tensor(const std::string& path, const ComplexTensor<double>& t) {
  write_cxt(path, to_cxt(t));
}

template <typename T>
Tensor<T> load_real_tensor(const std::string& path) {
  const CxtData d = read_cxt(path);
  if (d.dtype != dtype_of<T>())
    throw FormatError(path + ": dtype mismatch, file holds " +
                      (d.dtype == CxtDtype::F32 ? "f32" : "f64"));
  if (d.domain != CxtDomain::Real) throw FormatError(path + ": expected a real tensor");
  return Tensor<T>(Shape(d.dims), payload_of<T>(d));
}

template <typename T>
ComplexTensor<T> load_complex_tensor(const std::string& path) {
  const CxtData d = read_cxt(path);
  if (d.dtype != dtype_of<T>())
    throw FormatError(path + ": dtype mismatch, file holds " +
                      (d.dtype == CxtDtype::F32 ? "f32" : "f64"));
  if (d.domain != CxtDomain::Complex) throw FormatError(path + ": expected a complex tensor");
  const auto& pay = payload_of<T>(d);
  const int64_t n = d.elements();
  Shape shape(d.dims);
  return ComplexTensor<T>(Tensor<T>(shape, std::vector<T>(pay.begin(), pay.begin() + n)),
                          Tensor<T>(shape, std::vector<T>(pay.begin() + n, pay.end())));
}

template Tensor<float> load_real_tensor<float>(const std::string&);
template Tensor<double> load_real_tensor<double>(const std::string&);
template ComplexTensor<float> load_complex_tensor<float>(const std::string&);
template ComplexTensor<double> load_complex_tensor<double>(const std::string&);

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected <image>\\t<target>");
    entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path);
  for (const auto& e : entries) out << e.image << "\t" << e.target << "\n";
  if (!out) throw IoError("failed writing manifest " + path);
}

CheckpointManifest read_checkpoint_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint manifest " + path);
  CheckpointManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("param\t", 0) == 0) {
      const size_t tab2 = line.find('\t', 6);
      if (tab2 == std::string::npos)
        throw FormatError(path + ":" + std::to_string(lineno) + ": bad param line");
      m.params.emplace_back(line.substr(6, tab2 - 6), line.substr(tab2 + 1));
    } else {
      const size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw FormatError(path + ":" + std::to_string(lineno) + ": expected key=value");
      m.meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  return m;
}

void write_checkpoint_manifest(const std::string& path, const CheckpointManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint manifest " + path);
  for (const auto& [k, v] : m.meta) out << k << "=" << v << "\n";
  for (const auto& [name, file] : m.params) out << "param\t" << name << "\t" << file << "\n";
  if (!out) throw IoError("failed writing checkpoint manifest " + path);
}

void write_pgm(const std::string& path, const std::vector<uint8_t>& gray, int64_t h, int64_t w) {
  if (static_cast<int64_t>(gray.size()) != h * w)
    throw ShapeError("write_pgm: buffer size does not match extent");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
  if (!out) throw IoError("failed writing " + path);
}

void write_ppm(const std::string& path, const std::vector<uint8_t>& rgb, int64_t h, int64_t w) {
  if (static_cast<int64_t>(rgb.size()) != 3 * h * w)
    throw ShapeError("write_ppm: buffer size does not match extent");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw IoError("failed writing " + path);
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw IoError("failed reading " + path);
  return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

std::string path_dirname(const std::string& path) {
  const size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

std::string path_join(const std::string& a, const std::string& b) {
  if (a.empty() || b.empty() || b[0] == '/') return b;
  return a.back() == '/' ? a + b : a + "/" + b;
}

}  // namespace cxnn
