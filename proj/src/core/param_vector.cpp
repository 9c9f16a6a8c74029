#include "core/param_vector.hpp"

#include <algorithm>
#include <cmath>

namespace strucgrad {

ParamVector::ParamVector(std::vector<SegmentSpec> layout) : layout_(std::move(layout)) {
  std::size_t total = 0;
  offsets_.reserve(layout_.size());
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    const auto& s = layout_[i];
    if (s.name.empty() || s.rows == 0 || s.cols == 0)
      throw ShapeError("param segment '" + s.name + "' has empty name or zero extent");
    if (!by_name_.emplace(s.name, i).second)
      throw ShapeError("duplicate param segment '" + s.name + "'");
    offsets_.push_back(total);
    total += s.count();
  }
  values_.assign(total, 0.0);
}

std::size_t ParamVector::index_of(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw ShapeError("unknown param segment '" + std::string(name) + "'");
  return it->second;
}

std::span<double> ParamVector::seg(std::string_view name) {
  std::size_t i = index_of(name);
  return {values_.data() + offsets_[i], layout_[i].count()};
}

std::span<const double> ParamVector::seg(std::string_view name) const {
  std::size_t i = index_of(name);
  return {values_.data() + offsets_[i], layout_[i].count()};
}

const SegmentSpec& ParamVector::seg_spec(std::string_view name) const {
  return layout_[index_of(name)];
}

std::size_t ParamVector::seg_offset(std::string_view name) const {
  return offsets_[index_of(name)];
}

bool ParamVector::has_seg(std::string_view name) const {
  return by_name_.find(std::string(name)) != by_name_.end();
}

Vector ParamVector::flatten() const {
  return Vector::from(values_);
}

void ParamVector::assign_flat(const Vector& flat) {
  if (flat.size() != values_.size())
    throw ShapeError("assign_flat: length " + std::to_string(flat.size()) + " vs layout " +
                     std::to_string(values_.size()));
  std::copy(flat.data(), flat.data() + flat.size(), values_.begin());
}

bool ParamVector::same_layout(const ParamVector& o) const {
  if (layout_.size() != o.layout_.size()) return false;
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    if (layout_[i].name != o.layout_[i].name || layout_[i].rows != o.layout_[i].rows ||
        layout_[i].cols != o.layout_[i].cols)
      return false;
  }
  return true;
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace strucgrad
