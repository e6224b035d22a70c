#include "lipbench/core/sequence.hpp"

#include "lipbench/core/errors.hpp"

namespace lipbench {

SequenceLayout::SequenceLayout(std::vector<Index> lengths) : lengths_(std::move(lengths)) {
  offsets_.reserve(lengths_.size());
  for (Index len : lengths_) {
    if (len < 0) throw UsageError("SequenceLayout: negative sequence length");
    offsets_.push_back(total_);
    total_ += len;
  }
}

}  // namespace lipbench
