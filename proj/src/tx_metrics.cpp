#include "aclust/tx_metrics.hpp"

#include <algorithm>

namespace aclust {

std::uint64_t addressable_output_count(const TxRecord& tx) noexcept {
    std::uint64_t total = 0;
    for (const auto& out : tx.outputs) {
        switch (out.script_class.kind) {
            case ScriptKind::OpReturn: break;
            case ScriptKind::P2PK:
            case ScriptKind::P2PKH:
            case ScriptKind::P2SHUnknown: total += 1; break;
            case ScriptKind::Unknown: total += out.addresses.empty() ? 0 : 1; break;
            case ScriptKind::Multisig: total += out.script_class.n; break;
            case ScriptKind::P2SHKnown:
                total += 1 + (out.addresses.empty() ? 0 : out.addresses.size() - 1);
                break;
        }
    }
    return total;
}

bool is_nontrivial(const TxRecord& tx, const AddressResolver& resolve, ResolutionMode mode) {
    if (tx.is_coinbase()) return false;
    std::vector<std::string> seen;
    for (const auto& in : tx.inputs) {
        auto addrs = resolve(in);
        if (!addrs) {
            if (mode == ResolutionMode::Strict) throw Error(Errc::UnknownOutpoint, to_hex(in.txid), tx.ordinal);
            continue;
        }
        for (auto& a : *addrs) {
            if (std::find(seen.begin(), seen.end(), a) == seen.end()) seen.push_back(std::move(a));
        }
    }
    return seen.size() >= 2;
}

}  // namespace aclust
