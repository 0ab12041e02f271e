#pragma once
// Brute-force reference implementations used by the tests. Nothing here
// uses the engine, the union-find or the analytics code.

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "aclust/chain.hpp"

namespace oracle {

using aclust::TxRecord;

struct Replay {
    // Address external forms in first-observation order.
    std::vector<std::string> names;
    std::map<std::string, std::size_t> index;
    // Co-spend adjacency.
    std::vector<std::set<std::size_t>> adj;
    std::vector<std::uint64_t> current;
    std::vector<std::uint64_t> max;
    // Per tx: distinct input address indices and fresh address count.
    std::vector<std::set<std::size_t>> tx_inputs;
    std::vector<std::uint64_t> tx_new;
};

inline std::size_t intern(Replay& r, const std::string& a) {
    auto it = r.index.find(a);
    if (it != r.index.end()) return it->second;
    r.index.emplace(a, r.names.size());
    r.names.push_back(a);
    r.adj.emplace_back();
    r.current.push_back(0);
    r.max.push_back(0);
    return r.names.size() - 1;
}

/// Scans the raw stream once, keeping outputs in a plain map.
inline Replay replay(const std::vector<TxRecord>& stream) {
    struct Out {
        std::vector<std::size_t> addrs;
        std::uint64_t value;
    };
    std::map<std::pair<aclust::Txid, std::uint32_t>, Out> unspent;
    Replay r;
    for (const auto& tx : stream) {
        std::set<std::size_t> ins;
        for (const auto& in : tx.inputs) {
            if (in.is_coinbase()) continue;
            auto it = unspent.find({in.txid, in.vout});
            if (it == unspent.end()) continue;
            for (auto a : it->second.addrs) {
                ins.insert(a);
                r.current[a] -= it->second.value;
            }
            unspent.erase(it);
        }
        for (auto a : ins) {
            for (auto b : ins) {
                if (a != b) r.adj[a].insert(b);
            }
        }
        const auto before = r.names.size();
        for (std::uint32_t v = 0; v < tx.outputs.size(); ++v) {
            const auto& o = tx.outputs[v];
            Out out{{}, o.value};
            for (const auto& name : o.addresses) {
                const auto a = intern(r, name);
                if (std::find(out.addrs.begin(), out.addrs.end(), a) == out.addrs.end()) out.addrs.push_back(a);
            }
            for (auto a : out.addrs) {
                r.current[a] += o.value;
                r.max[a] = std::max(r.max[a], r.current[a]);
            }
            unspent[{tx.txid, v}] = std::move(out);
        }
        r.tx_inputs.push_back(std::move(ins));
        r.tx_new.push_back(r.names.size() - before);
    }
    return r;
}

/// Component label per address: the smallest index reachable by BFS.
inline std::vector<std::size_t> components(const Replay& r) {
    std::vector<std::size_t> label(r.names.size(), SIZE_MAX);
    for (std::size_t s = 0; s < label.size(); ++s) {
        if (label[s] != SIZE_MAX) continue;
        std::queue<std::size_t> q;
        q.push(s);
        label[s] = s;
        while (!q.empty()) {
            auto x = q.front();
            q.pop();
            for (auto y : r.adj[x]) {
                if (label[y] == SIZE_MAX) {
                    label[y] = s;
                    q.push(y);
                }
            }
        }
    }
    return label;
}

inline std::map<std::size_t, std::uint64_t> component_sizes(const std::vector<std::size_t>& label) {
    std::map<std::size_t, std::uint64_t> sizes;
    for (auto l : label) ++sizes[l];
    return sizes;
}

/// Nearest-rank (q-1)-th q-quantile by full sort, rank computed in floating
/// point and nudged for representation error.
inline std::uint64_t sorted_quantile(std::vector<std::uint64_t> pool, std::uint64_t q) {
    std::sort(pool.begin(), pool.end());
    const long double exact = static_cast<long double>(q - 1) * static_cast<long double>(pool.size()) / q;
    auto rank = static_cast<std::uint64_t>(exact);
    if (static_cast<long double>(rank) < exact) ++rank;
    if (rank == 0) rank = 1;
    return pool[rank - 1];
}

inline std::uint64_t addressable(const TxRecord& tx) {
    std::uint64_t n = 0;
    for (const auto& o : tx.outputs) {
        switch (o.script_class.kind) {
            case aclust::ScriptKind::OpReturn: break;
            case aclust::ScriptKind::Multisig: n += o.script_class.n; break;
            case aclust::ScriptKind::P2SHKnown: n += o.addresses.size(); break;
            case aclust::ScriptKind::Unknown: n += o.addresses.empty() ? 0 : 1; break;
            default: n += 1;
        }
    }
    return n;
}

}  // namespace oracle
