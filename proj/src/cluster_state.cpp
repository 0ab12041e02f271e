#include "aclust/cluster_state.hpp"

#include <algorithm>

namespace aclust {

AddressId ClusterState::add() {
    const auto id = static_cast<std::uint32_t>(parent_.size());
    if (id == 0xFFFFFFFFu) throw Error(Errc::InvariantViolation, "address id space exhausted");
    parent_.push_back(id);
    size_.push_back(1);
    label_.push_back(id);
    ++num_clusters_;
    return address_id(id);
}

std::uint32_t ClusterState::unite_roots(const std::vector<std::uint32_t>& roots) {
    std::uint32_t keep = roots.front();
    for (auto r : roots) {
        // Ties go to the lower root index so the forest shape is reproducible.
        if (size_[r] > size_[keep] || (size_[r] == size_[keep] && r < keep)) keep = r;
    }
    std::uint32_t label = label_[keep];
    const auto ge2_before = static_cast<std::uint64_t>(
        std::count_if(roots.begin(), roots.end(), [&](std::uint32_t r) { return size_[r] >= 2; }));
    for (auto r : roots) {
        if (r == keep) continue;
        parent_[r] = keep;
        size_[keep] += size_[r];
        label = std::min(label, label_[r]);
    }
    label_[keep] = label;
    num_clusters_ -= roots.size() - 1;
    num_clusters_ge2_ = num_clusters_ge2_ + 1 - ge2_before;
    return keep;
}

std::vector<std::pair<AddressId, std::uint64_t>> ClusterState::clusters() const {
    std::vector<std::pair<AddressId, std::uint64_t>> out;
    out.reserve(num_clusters_);
    for (std::uint32_t i = 0; i < parent_.size(); ++i) {
        if (parent_[i] == i) out.emplace_back(address_id(label_[i]), size_[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::uint32_t> ClusterState::flattened_parents() const {
    std::vector<std::uint32_t> out(parent_.size());
    for (std::uint32_t i = 0; i < parent_.size(); ++i) out[i] = root_of(i);
    return out;
}

bool ClusterState::assign(std::vector<std::uint32_t> parents) {
    const auto n = static_cast<std::uint32_t>(parents.size());
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto p = parents[i];
        if (p >= n || parents[p] != p) return false;
    }
    parent_ = std::move(parents);
    size_.assign(n, 0);
    label_.assign(n, 0);
    num_clusters_ = 0;
    num_clusters_ge2_ = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto root = parent_[i];
        if (size_[root]++ == 0) label_[root] = i;  // first member seen is the minimum
    }
    for (std::uint32_t i = 0; i < n; ++i) {
        if (parent_[i] != i) continue;
        ++num_clusters_;
        if (size_[i] >= 2) ++num_clusters_ge2_;
    }
    return true;
}

bool operator==(const ClusterState& a, const ClusterState& b) {
    return a.flattened_parents() == b.flattened_parents();
}

}  // namespace aclust
