#include "ccm/partition.hpp"

#include <algorithm>

namespace ccm {

BlockPartition BlockPartition::canonical(std::vector<ComponentBlocks> raw,
                                         const std::vector<int>& m) {
  const int d = static_cast<int>(m.size());
  for (auto& comp : raw) {
    for (auto& blk : comp) {
      for (int j : blk)
        if (j < 1 || j > d) throw InputError("partition: variable index out of range");
      std::sort(blk.begin(), blk.end(), [&](int a, int b) {
        if (m[a - 1] != m[b - 1]) return m[a - 1] > m[b - 1];
        return a < b;
      });
    }
    std::sort(comp.begin(), comp.end(), [](const Block& a, const Block& b) {
      return *std::min_element(a.begin(), a.end()) < *std::min_element(b.begin(), b.end());
    });
  }
  BlockPartition p;
  p.comps_ = std::move(raw);
  p.validate(m);
  return p;
}

BlockPartition BlockPartition::all_singletons(int g, int d) {
  ComponentBlocks tpl;
  tpl.reserve(d);
  for (int j = 1; j <= d; ++j) tpl.push_back({j});
  BlockPartition p;
  p.comps_.assign(g, tpl);
  return p;
}

BlockPartition BlockPartition::replicate(const ComponentBlocks& tpl, int g,
                                         const std::vector<int>& m) {
  return canonical(std::vector<ComponentBlocks>(g, tpl), m);
}

bool BlockPartition::all_singleton() const {
  for (const auto& comp : comps_)
    for (const auto& blk : comp)
      if (blk.size() != 1) return false;
  return true;
}

void BlockPartition::validate(const std::vector<int>& m) const {
  const int d = static_cast<int>(m.size());
  if (comps_.empty()) throw InputError("partition: no components");
  for (const auto& comp : comps_) {
    std::vector<char> seen(d + 1, 0);
    int covered = 0;
    if (comp.empty()) throw InputError("partition: component without blocks");
    int prev_min = 0;
    for (const auto& blk : comp) {
      if (blk.empty()) throw InputError("partition: empty block");
      for (std::size_t t = 0; t < blk.size(); ++t) {
        const int j = blk[t];
        if (j < 1 || j > d) throw InputError("partition: variable index out of range");
        if (seen[j]) throw InputError("partition: variable appears twice in a component");
        seen[j] = 1;
        ++covered;
        if (t > 0) {
          const int prev = blk[t - 1];
          const bool ordered = m[prev - 1] > m[j - 1] || (m[prev - 1] == m[j - 1] && prev < j);
          if (!ordered)
            throw InputError("partition: block not ordered by decreasing modality count");
        }
      }
      const int mn = *std::min_element(blk.begin(), blk.end());
      if (mn <= prev_min) throw InputError("partition: blocks not in canonical order");
      prev_min = mn;
    }
    if (covered != d) throw InputError("partition: blocks do not cover all variables");
  }
}

}  // namespace ccm
