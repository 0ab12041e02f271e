#pragma once

// Canonical transaction-stream formats.
//
// Text: JSON Lines, one record per line, fixed key order
//   {"txid":..,"time":..,"in":[{"txid":..,"vout":..}],"out":[{"sat":..,"cls":..,"addr":[..]}]}
// Binary: "ACLS" | u16 version | u64 record count | records (little-endian,
// LEB128 varint counts). The byte layout is documented in docs/FORMATS.md.

#include <array>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "aclust/chain.hpp"

namespace aclust {

enum class StreamFormat : std::uint8_t { Text, Binary };

struct StreamHeader {
    static constexpr std::array<char, 4> kMagic{'A', 'C', 'L', 'S'};
    static constexpr std::uint16_t kVersion = 1;
    static constexpr std::size_t kSize = 14;

    std::uint16_t version = kVersion;
    // 0 when unknown: the reader then consumes records until end of stream.
    std::uint64_t record_count = 0;
};

struct TxidHash {
    std::size_t operator()(const Txid& id) const noexcept { return OutPointHash{}(OutPoint{id, 0}); }
};

/// Pull-style reader interface shared by both formats. Records come out
/// validated, in file order, with ordinals assigned from `first_ordinal`.
class RecordReader {
  public:
    virtual ~RecordReader() = default;
    virtual std::optional<TxRecord> next() = 0;
};

class TextReader final : public RecordReader {
  public:
    explicit TextReader(std::istream& in, Ordinal first_ordinal = 0);
    std::optional<TxRecord> next() override;

  private:
    std::istream& in_;
    Ordinal ordinal_;
    std::uint64_t line_ = 0;
    std::string buffer_;
    std::unordered_set<Txid, TxidHash> seen_;
};

class BinaryReader final : public RecordReader {
  public:
    /// Reads and checks the header immediately (BadMagic, BadVersion, TruncatedRecord).
    explicit BinaryReader(std::istream& in, Ordinal first_ordinal = 0);
    std::optional<TxRecord> next() override;

    const StreamHeader& header() const noexcept { return header_; }

  private:
    std::istream& in_;
    StreamHeader header_;
    Ordinal ordinal_;
    std::uint64_t read_ = 0;
    std::unordered_set<Txid, TxidHash> seen_;
};

std::vector<TxRecord> parse_text(std::istream& in);
std::vector<TxRecord> parse_text(std::string_view bytes);
std::vector<TxRecord> parse_binary(std::istream& in);
std::vector<TxRecord> parse_binary(std::string_view bytes);

/// Canonical single-line encoding, without the trailing newline.
std::string encode_text_line(const TxRecord& record);
void encode_text(std::span<const TxRecord> records, std::ostream& out);
std::string encode_text(std::span<const TxRecord> records);

/// Streaming binary writer. When `record_count` is 0 the header says
/// "unknown" and readers consume to end of stream.
class BinaryWriter {
  public:
    BinaryWriter(std::ostream& out, std::uint64_t record_count);
    void write(const TxRecord& record);

  private:
    std::ostream& out_;
};

void encode_binary(std::span<const TxRecord> records, std::ostream& out);
std::string encode_binary(std::span<const TxRecord> records);

/// Opens `path` and returns a reader of the requested format; throws Io.
class FileRecordSource {
  public:
    FileRecordSource(const std::string& path, StreamFormat format, Ordinal first_ordinal = 0);
    RecordReader& reader() noexcept { return *reader_; }

  private:
    std::unique_ptr<std::istream> stream_;
    std::unique_ptr<RecordReader> reader_;
};

std::vector<TxRecord> read_stream_file(const std::string& path, StreamFormat format);
void write_stream_file(const std::string& path, StreamFormat format, std::span<const TxRecord> records);

}  // namespace aclust
