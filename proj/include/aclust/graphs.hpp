#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aclust/engine.hpp"

namespace aclust {

struct AddressVertex {
    AddressId id{};
    std::string external;
    BalanceRecord balance;
};

struct TxVertex {
    Ordinal ordinal = 0;
    Txid txid{};
};

/// Address-transaction structure of one cluster. An edge joins a
/// transaction to an address when the transaction spends an output
/// assigned to that address.
struct BipartiteGraph {
    AddressId cluster{};
    std::vector<AddressVertex> addresses;  // ascending id
    std::vector<TxVertex> transactions;    // ascending ordinal
    // (index into transactions, index into addresses)
    std::vector<std::pair<std::size_t, std::size_t>> edges;
};

/// Throws UnknownCluster when `cluster` is not an observed address.
BipartiteGraph bipartite_subgraph(const Engine& engine, AddressId cluster);

struct FlowVertex {
    AddressId representative{};
    std::uint64_t size = 0;
    std::optional<std::string> label;
    std::optional<TagCategory> category;
};

struct FlowEdge {
    std::size_t from = 0;  // vertex index
    std::size_t to = 0;
    Satoshi weight = 0;
};

struct FlowGraph {
    std::vector<FlowVertex> vertices;  // ascending representative
    std::vector<FlowEdge> edges;       // ascending (from, to)

    // Satoshi accounting over every non-coinbase transaction:
    // exported + filtered + unselected = total.
    Satoshi exported = 0;
    Satoshi filtered = 0;
    Satoshi unselected = 0;
    Satoshi total = 0;
};

struct FlowSelection {
    enum class Largest : std::uint8_t { ByAddressCount, ByTotalReceived };

    // Used when `explicit_clusters` is empty.
    std::uint64_t top_n = 20;
    Largest largest = Largest::ByAddressCount;
    // Any member address of each wanted cluster.
    std::vector<AddressId> explicit_clusters;
};

/// Each non-coinbase transaction adds every output's value to the edge from
/// its input cluster to the cluster of the output's first address. Coinbase
/// outputs carry no flow. Throws InvariantViolation if a transaction's
/// inputs span more than one cluster.
FlowGraph flow_graph(const Engine& engine, const FlowSelection& selection, Satoshi min_flow = 0,
                     bool include_self_loops = false);

/// CSV "address,label,category" with an optional header row. Throws
/// MalformedTagFile on bad rows, unknown categories or a repeated address.
std::vector<TagEntry> parse_tags(std::istream& in);

struct TagConflict {
    AddressId cluster{};
    std::vector<TagEntry> tags;
};

/// Lifts address tags onto the flow vertices. Conflicting tags within one
/// cluster leave it untagged and are reported.
std::vector<TagConflict> apply_tags(FlowGraph& graph, const Engine& engine, const std::vector<TagEntry>& tags);

void export_dot(std::ostream& out, const BipartiteGraph& graph);
void export_dot(std::ostream& out, const FlowGraph& graph, const Engine& engine);
void export_graphml(std::ostream& out, const BipartiteGraph& graph);
void export_graphml(std::ostream& out, const FlowGraph& graph, const Engine& engine);

/// Fill colour of a flow vertex. Untagged clusters are gray.
std::string_view category_color(std::optional<TagCategory> category) noexcept;

}  // namespace aclust
