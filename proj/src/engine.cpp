#include "aclust/engine.hpp"

#include <algorithm>

namespace aclust {

std::optional<OutpointIndex::EntryIndex> OutpointIndex::find(const OutPoint& op) const {
    auto it = lookup_.find(op);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

OutpointIndex::EntryIndex OutpointIndex::add(const OutputEntry& e) {
    const auto i = static_cast<EntryIndex>(entries_.size());
    entries_.push_back(e);
    lookup_.emplace(e.outpoint, i);
    return i;
}

void OutpointIndex::rebuild_lookup() {
    lookup_.clear();
    lookup_.reserve(entries_.size());
    for (EntryIndex i = 0; i < entries_.size(); ++i) lookup_.emplace(entries_[i].outpoint, i);
}

Engine::Engine(const Engine& other)
    : mode_(other.mode_),
      clusters_(other.clusters_),
      index_(other.index_),
      log_(other.log_),
      balances_(other.balances_),
      names_(other.names_) {
    rebuild_names();
}

Engine& Engine::operator=(const Engine& other) {
    if (this != &other) {
        Engine copy(other);
        *this = std::move(copy);
    }
    return *this;
}

void Engine::rebuild_names() {
    ids_.clear();
    ids_.reserve(names_.size());
    for (std::uint32_t i = 0; i < names_.size(); ++i) ids_.emplace(std::string_view(names_[i]), address_id(i));
}

AddressId Engine::intern(const std::string& address, std::uint32_t& new_count) {
    if (auto it = ids_.find(address); it != ids_.end()) return it->second;
    const AddressId id = clusters_.add();
    names_.push_back(address);
    ids_.emplace(std::string_view(names_.back()), id);
    balances_.push_back({});
    ++new_count;
    return id;
}

std::optional<MergeEvent> Engine::process_transaction(const TxRecord& tx) {
    validate(tx);
    const Ordinal ordinal = log_.txs.size();

    if (index_.find(OutPoint{tx.txid, 0})) throw Error(Errc::DuplicateTxid, to_hex(tx.txid), ordinal);

    // Resolve every input before touching any state.
    const bool coinbase = tx.is_coinbase();
    scratch_entries_.clear();
    if (!coinbase) {
        for (const auto& in : tx.inputs) {
            const auto e = index_.find(in);
            if (!e) {
                if (mode_ == ResolutionMode::Strict) {
                    throw Error(Errc::UnknownOutpoint, to_hex(in.txid) + ":" + std::to_string(in.vout), ordinal);
                }
                continue;
            }
            if (index_.entries_[*e].spent) {
                throw Error(Errc::DoubleSpend, to_hex(in.txid) + ":" + std::to_string(in.vout), ordinal);
            }
            scratch_entries_.push_back(*e);
        }
        if (scratch_entries_.size() > 1) {
            auto sorted = scratch_entries_;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
                throw Error(Errc::DoubleSpend, "outpoint spent twice within one transaction", ordinal);
            }
        }
    }

    TxLogEntry entry;
    entry.txid = tx.txid;
    entry.timestamp = tx.timestamp;
    entry.coinbase = coinbase;
    entry.resolved_input_count = static_cast<std::uint32_t>(scratch_entries_.size());
    entry.spent_offset = log_.spent_entries.size();
    entry.addressable_output_count = static_cast<std::uint32_t>(addressable_output_count(tx));

    // Clustering: unite every address on the resolved inputs.
    std::optional<MergeEvent> event;
    scratch_roots_.clear();
    std::uint32_t first_address = 0;
    bool distinct_addresses = false;
    bool any_address = false;
    for (const auto e : scratch_entries_) {
        for (const auto a : index_.addresses(index_.entries_[e])) {
            const auto i = index_of(a);
            if (!any_address) {
                first_address = i;
                any_address = true;
            } else if (i != first_address) {
                distinct_addresses = true;
            }
            scratch_roots_.push_back(clusters_.find_root(i));
        }
    }
    entry.nontrivial = distinct_addresses;
    std::sort(scratch_roots_.begin(), scratch_roots_.end());
    scratch_roots_.erase(std::unique(scratch_roots_.begin(), scratch_roots_.end()), scratch_roots_.end());

    if (scratch_roots_.size() >= 2) {
        std::vector<std::uint64_t> sizes;
        sizes.reserve(scratch_roots_.size());
        std::uint32_t ge2_before = 0;
        for (const auto r : scratch_roots_) {
            sizes.push_back(clusters_.root_size(r));
            if (sizes.back() >= 2) ++ge2_before;
        }
        const auto root = clusters_.unite_roots(scratch_roots_);
        event = make_merge_event(ordinal, tx.txid, std::move(sizes), clusters_.root_label(root));
        entry.caused_merge = true;
        entry.ge2_delta = 1 - static_cast<std::int32_t>(ge2_before);
        if (ge2_before == 0) log_.births.push_back(ordinal);
        log_.merges.push_back(*event);
    }

    // Debit spent outputs, each address once per output.
    for (const auto e : scratch_entries_) {
        auto& spent = index_.entries_[e];
        spent.spent = true;
        const auto addrs = index_.addresses(spent);
        for (std::size_t j = 0; j < addrs.size(); ++j) {
            if (std::find(addrs.begin(), addrs.begin() + j, addrs[j]) != addrs.begin() + j) continue;
            balances_[index_of(addrs[j])].current -= spent.value;
        }
        log_.spent_entries.push_back(e);
    }

    // Register and credit outputs.
    entry.first_output = index_.size();
    entry.output_count = static_cast<std::uint32_t>(tx.outputs.size());
    for (std::uint32_t vout = 0; vout < tx.outputs.size(); ++vout) {
        const auto& out = tx.outputs[vout];
        OutputEntry created;
        created.outpoint = OutPoint{tx.txid, vout};
        created.value = out.value;
        created.script_class = out.script_class;
        created.creating_ordinal = ordinal;
        created.address_offset = index_.address_pool_.size();
        created.address_count = static_cast<std::uint32_t>(out.addresses.size());
        for (std::size_t j = 0; j < out.addresses.size(); ++j) {
            const auto id = intern(out.addresses[j], entry.new_address_count);
            index_.address_pool_.push_back(id);
            const auto begin = index_.address_pool_.end() - static_cast<std::ptrdiff_t>(j + 1);
            if (std::find(begin, index_.address_pool_.end() - 1, id) != index_.address_pool_.end() - 1) continue;
            auto& bal = balances_[index_of(id)];
            bal.current += out.value;
            bal.alltime_max = std::max(bal.alltime_max, bal.current);
        }
        index_.add(created);
    }

    log_.txs.push_back(entry);
    return event;
}

AddressId Engine::checked(AddressId a) const {
    if (index_of(a) >= clusters_.size()) {
        throw Error(Errc::UnknownAddress, "address id " + std::to_string(index_of(a)));
    }
    return a;
}

AddressId Engine::find(AddressId a) const { return clusters_.representative(checked(a)); }

AddressId Engine::find(std::string_view address) const {
    const auto id = lookup(address);
    if (!id) throw Error(Errc::UnknownAddress, std::string(address));
    return find(*id);
}

std::uint64_t Engine::cluster_size(AddressId representative) const {
    if (!clusters_.is_representative(checked(representative))) {
        throw Error(Errc::NotARepresentative, "address id " + std::to_string(index_of(representative)));
    }
    return clusters_.component_size(representative);
}

BalanceRecord Engine::balance(AddressId a) const { return balances_[index_of(checked(a))]; }

BalanceRecord Engine::balance(std::string_view address) const {
    const auto id = lookup(address);
    if (!id) throw Error(Errc::UnknownAddress, std::string(address));
    return balances_[index_of(*id)];
}

std::optional<AddressId> Engine::lookup(std::string_view address) const {
    auto it = ids_.find(address);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& Engine::external(AddressId a) const { return names_[index_of(checked(a))]; }

std::vector<AddressId> Engine::input_addresses(const TxLogEntry& tx) const {
    std::vector<AddressId> out;
    for (const auto e : log_.spent_by(tx)) {
        const auto addrs = index_.addresses(index_.entry(e));
        out.insert(out.end(), addrs.begin(), addrs.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

bool same_entries(const std::vector<OutputEntry>& a, const std::vector<OutputEntry>& b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](const OutputEntry& x, const OutputEntry& y) {
        return x.outpoint == y.outpoint && x.value == y.value && x.script_class == y.script_class &&
               x.spent == y.spent && x.creating_ordinal == y.creating_ordinal &&
               x.address_offset == y.address_offset && x.address_count == y.address_count;
    });
}

}  // namespace

bool operator==(const Engine& a, const Engine& b) {
    return a.mode_ == b.mode_ && a.clusters_ == b.clusters_ && same_entries(a.index_.entries(), b.index_.entries()) &&
           a.index_.address_pool() == b.index_.address_pool() && a.log_ == b.log_ && a.balances_ == b.balances_ &&
           a.names_ == b.names_;
}

}  // namespace aclust
