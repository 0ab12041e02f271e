#pragma once

// Core domain types shared by every module. No I/O and no clustering logic.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "aclust/error.hpp"

namespace aclust {

using Satoshi = std::uint64_t;
using Ordinal = std::uint64_t;

/// Dense address index, assigned in first-observation order.
enum class AddressId : std::uint32_t {};

constexpr std::uint32_t index_of(AddressId id) noexcept { return static_cast<std::uint32_t>(id); }
constexpr AddressId address_id(std::uint32_t index) noexcept { return static_cast<AddressId>(index); }

using Txid = std::array<std::uint8_t, 32>;

std::string to_hex(const Txid& id);
/// Parses exactly 64 lower-case hex digits.
bool parse_hex(std::string_view text, Txid& out) noexcept;

enum class ScriptKind : std::uint8_t {
    P2PK,
    P2PKH,
    P2SHKnown,
    P2SHUnknown,
    Multisig,
    OpReturn,
    Unknown,
};

struct ScriptClass {
    ScriptKind kind = ScriptKind::P2PKH;
    // Only meaningful for Multisig.
    std::uint8_t m = 0;
    std::uint8_t n = 0;

    static constexpr ScriptClass p2pk() { return {ScriptKind::P2PK}; }
    static constexpr ScriptClass p2pkh() { return {ScriptKind::P2PKH}; }
    static constexpr ScriptClass p2sh_known() { return {ScriptKind::P2SHKnown}; }
    static constexpr ScriptClass p2sh_unknown() { return {ScriptKind::P2SHUnknown}; }
    static constexpr ScriptClass multisig(std::uint8_t m, std::uint8_t n) { return {ScriptKind::Multisig, m, n}; }
    static constexpr ScriptClass op_return() { return {ScriptKind::OpReturn}; }
    static constexpr ScriptClass unknown() { return {ScriptKind::Unknown}; }

    friend bool operator==(const ScriptClass&, const ScriptClass&) = default;
};

/// Text-format name: "p2pkh", "ms(1,2)", ...
std::string script_class_name(ScriptClass cls);
bool parse_script_class(std::string_view text, ScriptClass& out) noexcept;

struct OutPoint {
    static constexpr std::uint32_t kCoinbaseVout = 0xFFFFFFFFu;

    Txid txid{};
    std::uint32_t vout = 0;

    static constexpr OutPoint coinbase() { return OutPoint{Txid{}, kCoinbaseVout}; }
    bool is_coinbase() const noexcept { return vout == kCoinbaseVout && txid == Txid{}; }

    friend auto operator<=>(const OutPoint&, const OutPoint&) = default;
};

struct OutPointHash {
    std::size_t operator()(const OutPoint& op) const noexcept {
        // txids are hash outputs already; fold a few bytes with the index.
        std::uint64_t h = 0;
        for (int i = 0; i < 8; ++i) h = (h << 8) | op.txid[static_cast<std::size_t>(i)];
        h ^= (std::uint64_t{op.vout} + 0x9e3779b97f4a7c15ull) * 0xbf58476d1ce4e5b9ull;
        h ^= h >> 31;
        return static_cast<std::size_t>(h);
    }
};

struct TxOutputDecl {
    Satoshi value = 0;
    ScriptClass script_class;
    std::vector<std::string> addresses;

    friend bool operator==(const TxOutputDecl&, const TxOutputDecl&) = default;
};

struct TxRecord {
    Txid txid{};
    std::uint64_t timestamp = 0;
    Ordinal ordinal = 0;
    std::vector<OutPoint> inputs;
    std::vector<TxOutputDecl> outputs;

    bool is_coinbase() const noexcept { return inputs.size() == 1 && inputs.front().is_coinbase(); }

    friend bool operator==(const TxRecord&, const TxRecord&) = default;
};

/// Per merging transaction. `component_sizes` is sorted ascending, so the
/// increases are simply every element but the last.
struct MergeEvent {
    Ordinal tx_ordinal = 0;
    Txid txid{};
    std::vector<std::uint64_t> component_sizes;
    std::vector<std::uint64_t> increases;
    // Representative of the merged cluster right after this event.
    AddressId representative{};

    std::uint64_t resulting_size() const noexcept;
    std::uint64_t max_increase() const noexcept { return increases.empty() ? 0 : increases.back(); }

    friend bool operator==(const MergeEvent&, const MergeEvent&) = default;
};

/// Builds an event from the sizes of the united components. Sizes need not
/// be sorted. Throws InvariantViolation for fewer than two components.
MergeEvent make_merge_event(Ordinal ordinal, const Txid& txid, std::vector<std::uint64_t> component_sizes,
                            AddressId representative);

/// Checks |increases| = |sizes| - 1, the sum identity and the max bound.
bool merge_event_consistent(const MergeEvent& event) noexcept;

struct BalanceRecord {
    Satoshi current = 0;
    Satoshi alltime_max = 0;

    friend bool operator==(const BalanceRecord&, const BalanceRecord&) = default;
};

enum class TagCategory : std::uint8_t {
    DarknetMarket,
    Gambling,
    Exchange,
    MiningPool,
    PaymentProcessor,
    Other,
};

std::string_view tag_category_name(TagCategory category) noexcept;
bool parse_tag_category(std::string_view text, TagCategory& out) noexcept;

struct TagEntry {
    std::string address;
    std::string label;
    TagCategory category = TagCategory::Other;

    friend bool operator==(const TagEntry&, const TagEntry&) = default;
};

enum class ResolutionMode : std::uint8_t {
    // Unresolvable inputs abort the transaction.
    Strict,
    // Unresolvable inputs are skipped for clustering; outputs still register.
    Lenient,
};

/// Number of addresses an output of this class must carry: exact arity, or
/// a [min, max] range for classes that allow a variable count.
struct Arity {
    std::size_t min = 0;
    std::size_t max = 0;
};
Arity script_arity(ScriptClass cls) noexcept;

/// Returns `tx` unchanged when every record invariant holds; throws
/// ScriptArityViolation, CoinbaseShapeViolation or EmptyOutputs otherwise.
const TxRecord& validate(const TxRecord& tx);

}  // namespace aclust
