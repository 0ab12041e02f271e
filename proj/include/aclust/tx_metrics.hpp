#pragma once

// Per-transaction measures that need no engine state beyond outpoint
// resolution.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aclust/chain.hpp"

namespace aclust {

/// Upper bound on the new addresses a transaction can introduce:
/// OP_RETURN 0, single-key classes 1, UNKNOWN 0 or 1, MULTISIG(m,n) n,
/// P2SH_KNOWN 1 plus its resolved inner addresses.
std::uint64_t addressable_output_count(const TxRecord& tx) noexcept;

/// Maps an outpoint to the addresses of the output it names, or nullopt
/// when the outpoint is unknown.
using AddressResolver = std::function<std::optional<std::vector<std::string>>(const OutPoint&)>;

/// True iff the resolved inputs carry at least two distinct addresses.
/// Unknown outpoints throw UnknownOutpoint in strict mode and are skipped
/// in lenient mode.
bool is_nontrivial(const TxRecord& tx, const AddressResolver& resolve, ResolutionMode mode = ResolutionMode::Strict);

}  // namespace aclust
