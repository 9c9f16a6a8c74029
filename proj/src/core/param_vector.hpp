#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "core/tensor.hpp"

namespace strucgrad {

struct SegmentSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 1;  // 1 for vector-shaped segments
  std::size_t count() const { return rows * cols; }
};

// Flat 64-bit float parameter store with a named segment table. Segments are
// disjoint and cover the buffer exactly by construction.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<SegmentSpec> layout);

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<double> seg(std::string_view name);
  std::span<const double> seg(std::string_view name) const;
  const SegmentSpec& seg_spec(std::string_view name) const;
  std::size_t seg_offset(std::string_view name) const;
  bool has_seg(std::string_view name) const;
  const std::vector<SegmentSpec>& segments() const { return layout_; }

  // Bit-exact round-trip: flatten -> assign_flat -> flatten is the identity.
  Vector flatten() const;
  void assign_flat(const Vector& flat);

  bool same_layout(const ParamVector& o) const;
  bool all_finite() const;

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<double> values_;
  std::vector<SegmentSpec> layout_;
  std::vector<std::size_t> offsets_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

}  // namespace strucgrad
