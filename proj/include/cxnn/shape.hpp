#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

#include "cxnn/error.hpp"

namespace cxnn {

// Dense row-major tensor shape. All dims are >= 1 and the element count
// must fit in int64_t.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int64_t> dims) : dims_(dims) { validate(); }
  explicit Shape(std::vector<int64_t> dims) : dims_(std::move(dims)) { validate(); }

  int ndim() const { return static_cast<int>(dims_.size()); }
  int64_t dim(int i) const { return dims_.at(static_cast<size_t>(i)); }
  const std::vector<int64_t>& dims() const { return dims_; }

  int64_t size() const {
    int64_t n = 1;
    for (int64_t d : dims_) n *= d;
    return n;
  }

  bool operator==(const Shape& o) const { return dims_ == o.dims_; }
  bool operator!=(const Shape& o) const { return dims_ != o.dims_; }

  std::string str() const {
    std::string s = "[";
    for (size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims_[i]);
    }
    return s + "]";
  }

 private:
  void validate() const {
    int64_t n = 1;
    for (int64_t d : dims_) {
      if (d < 1) throw SizeError("shape dimension must be >= 1, got " + str());
      if (n > std::numeric_limits<int64_t>::max() / d)
        throw SizeError("shape element count overflows int64: " + str());
      n *= d;
    }
  }

  std::vector<int64_t> dims_;
};

}  // namespace cxnn
