#pragma once

// Incremental address clustering under the multi-input heuristic.

#include <cstdint>
#include <deque>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aclust/chain.hpp"
#include "aclust/cluster_state.hpp"
#include "aclust/tx_metrics.hpp"

namespace aclust {

struct OutputEntry {
    OutPoint outpoint;
    Satoshi value = 0;
    ScriptClass script_class;
    bool spent = false;
    Ordinal creating_ordinal = 0;
    // Slice of OutpointIndex::address_pool().
    std::uint64_t address_offset = 0;
    std::uint32_t address_count = 0;
};

/// Every output ever registered, in creation order, with a hash lookup by
/// outpoint. Entries are never removed; spending sets `spent`.
class OutpointIndex {
  public:
    using EntryIndex = std::uint64_t;

    std::optional<EntryIndex> find(const OutPoint& op) const;
    const OutputEntry& entry(EntryIndex i) const { return entries_[i]; }
    std::span<const AddressId> addresses(const OutputEntry& e) const {
        return {address_pool_.data() + e.address_offset, e.address_count};
    }
    std::uint64_t size() const noexcept { return entries_.size(); }
    const std::vector<OutputEntry>& entries() const noexcept { return entries_; }
    const std::vector<AddressId>& address_pool() const noexcept { return address_pool_; }

  private:
    friend class Engine;
    friend struct SnapshotCodec;

    EntryIndex add(const OutputEntry& e);
    void rebuild_lookup();

    std::vector<OutputEntry> entries_;
    std::vector<AddressId> address_pool_;
    std::unordered_map<OutPoint, EntryIndex, OutPointHash> lookup_;
};

struct TxLogEntry {
    Txid txid{};
    std::uint64_t timestamp = 0;
    bool coinbase = false;
    bool nontrivial = false;
    bool caused_merge = false;
    std::uint32_t new_address_count = 0;
    std::uint32_t addressable_output_count = 0;
    // Inputs that resolved to an index entry (coinbase and skipped inputs excluded).
    std::uint32_t resolved_input_count = 0;
    // Change in the number of clusters with at least two addresses.
    std::int32_t ge2_delta = 0;
    // Outputs occupy entries [first_output, first_output + output_count).
    std::uint64_t first_output = 0;
    std::uint32_t output_count = 0;
    // Spent entries occupy EngineLog::spent_entries[spent_offset, +resolved_input_count).
    std::uint64_t spent_offset = 0;

    friend bool operator==(const TxLogEntry&, const TxLogEntry&) = default;
};

struct EngineLog {
    std::vector<TxLogEntry> txs;
    std::vector<OutpointIndex::EntryIndex> spent_entries;
    std::vector<MergeEvent> merges;
    // Ordinals at which a cluster first reached two addresses.
    std::vector<Ordinal> births;

    std::span<const OutpointIndex::EntryIndex> spent_by(const TxLogEntry& tx) const {
        return {spent_entries.data() + tx.spent_offset, tx.resolved_input_count};
    }

    friend bool operator==(const EngineLog&, const EngineLog&) = default;
};

class Engine {
  public:
    static constexpr std::uint16_t kSnapshotVersion = 1;

    explicit Engine(ResolutionMode mode = ResolutionMode::Strict) : mode_(mode) {}
    Engine(const Engine& other);
    Engine& operator=(const Engine& other);
    Engine(Engine&&) = default;
    Engine& operator=(Engine&&) = default;

    /// Applies one transaction. Throws UnknownOutpoint, DoubleSpend or
    /// DuplicateTxid and leaves the engine untouched on failure.
    std::optional<MergeEvent> process_transaction(const TxRecord& tx);

    /// Observable representative: the minimum dense index of the cluster.
    AddressId find(AddressId a) const;
    AddressId find(std::string_view address) const;
    std::uint64_t cluster_size(AddressId representative) const;
    BalanceRecord balance(AddressId a) const;
    BalanceRecord balance(std::string_view address) const;

    std::optional<AddressId> lookup(std::string_view address) const;
    const std::string& external(AddressId a) const;

    std::uint64_t num_addresses() const noexcept { return clusters_.size(); }
    std::uint64_t num_transactions() const noexcept { return log_.txs.size(); }
    ResolutionMode mode() const noexcept { return mode_; }

    const ClusterState& clusters() const noexcept { return clusters_; }
    const OutpointIndex& outpoints() const noexcept { return index_; }
    const EngineLog& log() const noexcept { return log_; }

    /// Distinct addresses across the transaction's resolved inputs.
    std::vector<AddressId> input_addresses(const TxLogEntry& tx) const;

    void snapshot(std::ostream& out) const;
    void snapshot(const std::string& path) const;
    static Engine restore(std::istream& in);
    static Engine restore(const std::string& path);

    friend bool operator==(const Engine& a, const Engine& b);

  private:
    friend struct SnapshotCodec;

    AddressId intern(const std::string& address, std::uint32_t& new_count);
    void rebuild_names();
    AddressId checked(AddressId a) const;

    ResolutionMode mode_;
    ClusterState clusters_;
    OutpointIndex index_;
    EngineLog log_;
    std::vector<BalanceRecord> balances_;
    std::deque<std::string> names_;
    std::unordered_map<std::string_view, AddressId> ids_;

    // Scratch buffers reused across transactions.
    std::vector<OutpointIndex::EntryIndex> scratch_entries_;
    std::vector<std::uint32_t> scratch_roots_;
};

}  // namespace aclust
