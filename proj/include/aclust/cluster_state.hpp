#pragma once

#include <cstdint>
#include <vector>

#include "aclust/chain.hpp"

namespace aclust {

/// Size-tracked disjoint-set forest over dense address ids.
///
/// The structural root is chosen by union-by-size; the observable
/// representative of a component is its minimum dense index, kept as a
/// label on the root. Path halving happens only through `find_root`, so
/// const queries never touch the forest.
class ClusterState {
  public:
    std::uint32_t size() const noexcept { return static_cast<std::uint32_t>(parent_.size()); }

    /// Adds a singleton and returns its id.
    AddressId add();

    /// Structural root with path halving.
    std::uint32_t find_root(std::uint32_t x) noexcept {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    std::uint32_t root_of(std::uint32_t x) const noexcept {
        while (parent_[x] != x) x = parent_[x];
        return x;
    }

    AddressId representative(AddressId a) const noexcept { return address_id(label_[root_of(index_of(a))]); }
    std::uint64_t component_size(AddressId a) const noexcept { return size_[root_of(index_of(a))]; }

    bool is_representative(AddressId a) const noexcept { return representative(a) == a; }

    /// Unites a set of distinct structural roots under the largest one and
    /// returns the surviving root.
    std::uint32_t unite_roots(const std::vector<std::uint32_t>& roots);

    std::uint64_t root_size(std::uint32_t root) const noexcept { return size_[root]; }
    AddressId root_label(std::uint32_t root) const noexcept { return address_id(label_[root]); }

    std::uint64_t num_clusters() const noexcept { return num_clusters_; }
    std::uint64_t num_clusters_ge2() const noexcept { return num_clusters_ge2_; }

    /// Representatives of every cluster, ascending, with their sizes.
    std::vector<std::pair<AddressId, std::uint64_t>> clusters() const;

    /// Canonical form: every node points straight at its root.
    std::vector<std::uint32_t> flattened_parents() const;

    /// Rebuilds from a flattened parent array; sizes and labels are
    /// recomputed. Returns false if the array is not a valid forest.
    bool assign(std::vector<std::uint32_t> parents);

    friend bool operator==(const ClusterState& a, const ClusterState& b);

  private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
    std::vector<std::uint32_t> label_;
    std::uint64_t num_clusters_ = 0;
    std::uint64_t num_clusters_ge2_ = 0;
};

}  // namespace aclust
