#pragma once

#include <vector>

#include "lipbench/core/tensor.hpp"

namespace lipbench {

/// Describes how a batch of variable-length sequences is packed along the
/// time axis of a [C, total] tensor: sequence i occupies columns
/// [offset(i), offset(i) + length(i)).
class SequenceLayout {
 public:
  SequenceLayout() = default;
  explicit SequenceLayout(std::vector<Index> lengths);

  static SequenceLayout single(Index length) { return SequenceLayout({length}); }

  Index count() const { return static_cast<Index>(lengths_.size()); }
  Index total() const { return total_; }
  Index length(Index i) const { return lengths_[static_cast<std::size_t>(i)]; }
  Index offset(Index i) const { return offsets_[static_cast<std::size_t>(i)]; }
  const std::vector<Index>& lengths() const { return lengths_; }

  bool operator==(const SequenceLayout&) const = default;

 private:
  std::vector<Index> lengths_;
  std::vector<Index> offsets_;
  Index total_ = 0;
};

}  // namespace lipbench
