#pragma once

#include <cstdint>
#include <vector>

#include "aclust/chain.hpp"

namespace aclust {

/// Injects a "private-key import" style merge: two wallets are each swept
/// into a cluster of `cluster_size` addresses, then co-spent by the
/// transaction at `ordinal`. The four set-up transactions occupy ordinals
/// ordinal-4 .. ordinal-1.
struct LargeMergeInjection {
    Ordinal ordinal = 0;
    std::uint32_t cluster_size = 0;
};

struct SynthParams {
    std::uint64_t seed = 1;
    std::uint64_t num_transactions = 1000;
    double p_reuse = 0.1;
    // Geometric distributions with support {1, 2, ...}.
    double mean_inputs = 1.5;
    double mean_outputs = 2.0;
    double frac_op_return = 0.01;
    double frac_multisig = 0.02;
    // A coinbase is emitted at every ordinal divisible by this.
    std::uint64_t coinbase_every = 10;
    Satoshi coinbase_reward = 5'000'000'000;
    std::uint64_t start_time = 1'231'006'505;
    double mean_gap_seconds = 600.0;
    std::vector<LargeMergeInjection> injections;
};

/// Throws InvalidParams when a field is out of range or injections overlap.
void check_params(const SynthParams& params);

/// Deterministic for a fixed parameter set. Every record validates and
/// every non-coinbase input references an earlier unspent output.
std::vector<TxRecord> generate_synthetic(const SynthParams& params);

}  // namespace aclust
