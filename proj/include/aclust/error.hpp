#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aclust {

enum class Errc : std::uint8_t {
    // chain-model validation
    ScriptArityViolation,
    CoinbaseShapeViolation,
    EmptyOutputs,
    // codec
    SyntaxError,
    ValidationError,
    DuplicateTxid,
    BadMagic,
    BadVersion,
    TruncatedRecord,
    InvalidParams,
    // engine
    UnknownOutpoint,
    DoubleSpend,
    UnknownAddress,
    NotARepresentative,
    CorruptSnapshot,
    VersionMismatch,
    // analytics / graphs
    InvalidQ,
    EmptyRange,
    UnknownCluster,
    MalformedTagFile,
    // environment
    Io,
    InvariantViolation,
};

std::string_view errc_name(Errc code) noexcept;

/// All library failures are reported as `Error`. `position()` carries a line
/// number (text codec) or a stream ordinal (binary codec, engine) when one is
/// meaningful for the failure.
class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what, std::optional<std::uint64_t> position = std::nullopt)
        : std::runtime_error(format(code, what, position)), code_(code), position_(position) {}

    Errc code() const noexcept { return code_; }
    std::optional<std::uint64_t> position() const noexcept { return position_; }

  private:
    static std::string format(Errc code, const std::string& what, std::optional<std::uint64_t> position);

    Errc code_;
    std::optional<std::uint64_t> position_;
};

}  // namespace aclust
