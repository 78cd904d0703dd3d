#pragma once

#include <compare>
#include <vector>

#include "ccm/common.hpp"

namespace ccm {

/// Per-component partition of the variable set {1..d} into disjoint
/// non-empty blocks. Canonical form: within a block, variables are ordered
/// by decreasing modality count (ties by ascending index); blocks are listed
/// by ascending smallest member. Structurally equal partitions compare equal.
class BlockPartition {
 public:
  using Block = std::vector<int>;               // variable indices, 1-based
  using ComponentBlocks = std::vector<Block>;

  BlockPartition() = default;

  /// Canonicalize `raw` against the modality counts `m` and validate it.
  static BlockPartition canonical(std::vector<ComponentBlocks> raw, const std::vector<int>& m);

  static BlockPartition all_singletons(int g, int d);

  /// Same block template for every component.
  static BlockPartition replicate(const ComponentBlocks& tpl, int g, const std::vector<int>& m);

  int g() const { return static_cast<int>(comps_.size()); }
  int n_blocks(int k) const { return static_cast<int>(comps_[k].size()); }
  const Block& block(int k, int b) const { return comps_[k][b]; }
  const ComponentBlocks& component(int k) const { return comps_[k]; }
  const std::vector<ComponentBlocks>& components() const { return comps_; }

  bool all_singleton() const;

  void validate(const std::vector<int>& m) const;

  bool operator==(const BlockPartition&) const = default;
  auto operator<=>(const BlockPartition&) const = default;

 private:
  std::vector<ComponentBlocks> comps_;
};

}  // namespace ccm
