#include "aclust/chain.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

namespace aclust {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::ScriptArityViolation: return "ScriptArityViolation";
        case Errc::CoinbaseShapeViolation: return "CoinbaseShapeViolation";
        case Errc::EmptyOutputs: return "EmptyOutputs";
        case Errc::SyntaxError: return "SyntaxError";
        case Errc::ValidationError: return "ValidationError";
        case Errc::DuplicateTxid: return "DuplicateTxid";
        case Errc::BadMagic: return "BadMagic";
        case Errc::BadVersion: return "BadVersion";
        case Errc::TruncatedRecord: return "TruncatedRecord";
        case Errc::InvalidParams: return "InvalidParams";
        case Errc::UnknownOutpoint: return "UnknownOutpoint";
        case Errc::DoubleSpend: return "DoubleSpend";
        case Errc::UnknownAddress: return "UnknownAddress";
        case Errc::NotARepresentative: return "NotARepresentative";
        case Errc::CorruptSnapshot: return "CorruptSnapshot";
        case Errc::VersionMismatch: return "VersionMismatch";
        case Errc::InvalidQ: return "InvalidQ";
        case Errc::EmptyRange: return "EmptyRange";
        case Errc::UnknownCluster: return "UnknownCluster";
        case Errc::MalformedTagFile: return "MalformedTagFile";
        case Errc::Io: return "Io";
        case Errc::InvariantViolation: return "InvariantViolation";
    }
    return "Unknown";
}

std::string Error::format(Errc code, const std::string& what, std::optional<std::uint64_t> position) {
    std::string out(errc_name(code));
    if (position) out += " at " + std::to_string(*position);
    if (!what.empty()) out += ": " + what;
    return out;
}

std::string to_hex(const Txid& id) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(64, '0');
    for (std::size_t i = 0; i < id.size(); ++i) {
        out[2 * i] = kDigits[id[i] >> 4];
        out[2 * i + 1] = kDigits[id[i] & 0xF];
    }
    return out;
}

bool parse_hex(std::string_view text, Txid& out) noexcept {
    if (text.size() != 64) return false;
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        return -1;
    };
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(text[2 * i]);
        int lo = nibble(text[2 * i + 1]);
        if (hi < 0 || lo < 0) return false;
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return true;
}

std::string script_class_name(ScriptClass cls) {
    switch (cls.kind) {
        case ScriptKind::P2PK: return "p2pk";
        case ScriptKind::P2PKH: return "p2pkh";
        case ScriptKind::P2SHKnown: return "p2sh_known";
        case ScriptKind::P2SHUnknown: return "p2sh";
        case ScriptKind::Multisig:
            return "ms(" + std::to_string(cls.m) + "," + std::to_string(cls.n) + ")";
        case ScriptKind::OpReturn: return "op_return";
        case ScriptKind::Unknown: return "unknown";
    }
    return "unknown";
}

namespace {

bool parse_small(std::string_view text, std::uint8_t& out) {
    if (text.empty() || text.size() > 3 || (text.size() > 1 && text[0] == '0')) return false;
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value > 255) return false;
    out = static_cast<std::uint8_t>(value);
    return true;
}

}  // namespace

bool parse_script_class(std::string_view text, ScriptClass& out) noexcept {
    if (text == "p2pk") { out = ScriptClass::p2pk(); return true; }
    if (text == "p2pkh") { out = ScriptClass::p2pkh(); return true; }
    if (text == "p2sh") { out = ScriptClass::p2sh_unknown(); return true; }
    if (text == "p2sh_known") { out = ScriptClass::p2sh_known(); return true; }
    if (text == "op_return") { out = ScriptClass::op_return(); return true; }
    if (text == "unknown") { out = ScriptClass::unknown(); return true; }
    if (text.size() >= 7 && text.substr(0, 3) == "ms(" && text.back() == ')') {
        auto body = text.substr(3, text.size() - 4);
        auto comma = body.find(',');
        if (comma == std::string_view::npos) return false;
        std::uint8_t m = 0;
        std::uint8_t n = 0;
        if (!parse_small(body.substr(0, comma), m) || !parse_small(body.substr(comma + 1), n)) return false;
        out = ScriptClass::multisig(m, n);
        return true;
    }
    return false;
}

std::uint64_t MergeEvent::resulting_size() const noexcept {
    return std::accumulate(component_sizes.begin(), component_sizes.end(), std::uint64_t{0});
}

MergeEvent make_merge_event(Ordinal ordinal, const Txid& txid, std::vector<std::uint64_t> component_sizes,
                            AddressId representative) {
    if (component_sizes.size() < 2) {
        throw Error(Errc::InvariantViolation, "a merge needs at least two components", ordinal);
    }
    std::sort(component_sizes.begin(), component_sizes.end());
    MergeEvent event;
    event.tx_ordinal = ordinal;
    event.txid = txid;
    event.increases.assign(component_sizes.begin(), component_sizes.end() - 1);
    event.component_sizes = std::move(component_sizes);
    event.representative = representative;
    return event;
}

bool merge_event_consistent(const MergeEvent& event) noexcept {
    const auto& sizes = event.component_sizes;
    const auto& inc = event.increases;
    if (sizes.size() < 2 || inc.size() + 1 != sizes.size()) return false;
    const auto max_size = *std::max_element(sizes.begin(), sizes.end());
    const auto sum_sizes = std::accumulate(sizes.begin(), sizes.end(), std::uint64_t{0});
    const auto sum_inc = std::accumulate(inc.begin(), inc.end(), std::uint64_t{0});
    if (sum_inc != sum_sizes - max_size) return false;
    return *std::max_element(inc.begin(), inc.end()) <= max_size;
}

std::string_view tag_category_name(TagCategory category) noexcept {
    switch (category) {
        case TagCategory::DarknetMarket: return "darknet-market";
        case TagCategory::Gambling: return "gambling";
        case TagCategory::Exchange: return "exchange";
        case TagCategory::MiningPool: return "mining-pool";
        case TagCategory::PaymentProcessor: return "payment-processor";
        case TagCategory::Other: return "other";
    }
    return "other";
}

bool parse_tag_category(std::string_view text, TagCategory& out) noexcept {
    for (auto c : {TagCategory::DarknetMarket, TagCategory::Gambling, TagCategory::Exchange, TagCategory::MiningPool,
                   TagCategory::PaymentProcessor, TagCategory::Other}) {
        if (tag_category_name(c) == text) {
            out = c;
            return true;
        }
    }
    return false;
}

Arity script_arity(ScriptClass cls) noexcept {
    switch (cls.kind) {
        case ScriptKind::P2PK:
        case ScriptKind::P2PKH:
        case ScriptKind::P2SHUnknown: return {1, 1};
        // The script-hash address followed by any resolved inner addresses.
        case ScriptKind::P2SHKnown: return {1, std::numeric_limits<std::size_t>::max()};
        case ScriptKind::Multisig: return {cls.n, cls.n};
        case ScriptKind::OpReturn: return {0, 0};
        case ScriptKind::Unknown: return {0, 1};
    }
    return {0, 0};
}

const TxRecord& validate(const TxRecord& tx) {
    if (tx.outputs.empty()) throw Error(Errc::EmptyOutputs, "transaction has no outputs");

    const bool has_sentinel =
        std::any_of(tx.inputs.begin(), tx.inputs.end(), [](const OutPoint& op) { return op.is_coinbase(); });
    if (has_sentinel && tx.inputs.size() != 1) {
        throw Error(Errc::CoinbaseShapeViolation, "coinbase sentinel mixed with other inputs");
    }
    if (tx.inputs.empty()) throw Error(Errc::CoinbaseShapeViolation, "transaction has no inputs");

    for (std::size_t i = 0; i < tx.outputs.size(); ++i) {
        const auto& out = tx.outputs[i];
        const auto cls = out.script_class;
        if (cls.kind == ScriptKind::Multisig && (cls.m < 1 || cls.m > cls.n)) {
            throw Error(Errc::ScriptArityViolation, "output " + std::to_string(i) + ": multisig needs 1 <= m <= n");
        }
        const auto arity = script_arity(cls);
        const auto count = out.addresses.size();
        if (count < arity.min || count > arity.max) {
            throw Error(Errc::ScriptArityViolation, "output " + std::to_string(i) + ": " + script_class_name(cls) +
                                                        " cannot carry " + std::to_string(count) + " address(es)");
        }
    }
    return tx;
}

}  // namespace aclust
