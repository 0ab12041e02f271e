#include <algorithm>
#include <cstring>
#include <sstream>

#include "aclust/codec.hpp"

namespace aclust {

namespace {

enum ScriptTag : std::uint8_t {
    kTagP2PK = 0,
    kTagP2PKH = 1,
    kTagP2SHKnown = 2,
    kTagP2SHUnknown = 3,
    kTagMultisig = 4,
    kTagOpReturn = 5,
    kTagUnknown = 6,
};

std::uint8_t tag_of(ScriptKind kind) {
    switch (kind) {
        case ScriptKind::P2PK: return kTagP2PK;
        case ScriptKind::P2PKH: return kTagP2PKH;
        case ScriptKind::P2SHKnown: return kTagP2SHKnown;
        case ScriptKind::P2SHUnknown: return kTagP2SHUnknown;
        case ScriptKind::Multisig: return kTagMultisig;
        case ScriptKind::OpReturn: return kTagOpReturn;
        case ScriptKind::Unknown: return kTagUnknown;
    }
    return kTagUnknown;
}

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>(static_cast<std::uint64_t>(value) >> (8 * i) & 0xFF));
    }
}

void put_varint(std::string& out, std::uint64_t value) {
    while (value >= 0x80) {
        out.push_back(static_cast<char>((value & 0x7F) | 0x80));
        value >>= 7;
    }
    out.push_back(static_cast<char>(value));
}

void put_bytes(std::string& out, const Txid& id) { out.append(reinterpret_cast<const char*>(id.data()), id.size()); }

std::string encode_record(const TxRecord& r) {
    if (r.timestamp > 0xFFFFFFFFull) {
        throw Error(Errc::ValidationError, "timestamp does not fit the binary u32 field", r.ordinal);
    }
    std::string out;
    out.reserve(64 + 36 * r.inputs.size() + 48 * r.outputs.size());
    put_bytes(out, r.txid);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.timestamp));
    put_varint(out, r.inputs.size());
    for (const auto& in : r.inputs) {
        put_bytes(out, in.txid);
        put_le<std::uint32_t>(out, in.vout);
    }
    put_varint(out, r.outputs.size());
    for (const auto& o : r.outputs) {
        put_le<std::uint64_t>(out, o.value);
        out.push_back(static_cast<char>(tag_of(o.script_class.kind)));
        if (o.script_class.kind == ScriptKind::Multisig) {
            out.push_back(static_cast<char>(o.script_class.m));
            out.push_back(static_cast<char>(o.script_class.n));
        }
        put_varint(out, o.addresses.size());
        for (const auto& a : o.addresses) {
            put_varint(out, a.size());
            out += a;
        }
    }
    return out;
}

/// Byte cursor over an istream. Any short read raises TruncatedRecord at the
/// ordinal of the record being decoded.
class Cursor {
  public:
    Cursor(std::istream& in, std::uint64_t ordinal) : in_(in), ordinal_(ordinal) {}

    void bytes(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw Error(Errc::TruncatedRecord, "stream ends inside a record", ordinal_);
        }
    }

    template <typename T>
    T le() {
        std::uint8_t buf[sizeof(T)];
        bytes(buf, sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{buf[i]} << (8 * i);
        return static_cast<T>(v);
    }

    std::uint8_t u8() { return le<std::uint8_t>(); }

    std::uint64_t varint() {
        std::uint64_t value = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            const std::uint8_t byte = u8();
            const std::uint64_t bits = byte & 0x7F;
            if (shift == 63 && bits > 1) break;
            value |= bits << shift;
            if (!(byte & 0x80)) return value;
        }
        throw Error(Errc::ValidationError, "varint overflow", ordinal_);
    }

  private:
    std::istream& in_;
    std::uint64_t ordinal_;
};

// Caps speculative reservations so a corrupt count cannot trigger a huge allocation.
constexpr std::uint64_t kReserveCap = 1u << 12;

TxRecord decode_record(Cursor& c, std::uint64_t ordinal) {
    TxRecord tx;
    c.bytes(tx.txid.data(), tx.txid.size());
    tx.timestamp = c.le<std::uint32_t>();
    const auto n_in = c.varint();
    tx.inputs.reserve(std::min(n_in, kReserveCap));
    for (std::uint64_t i = 0; i < n_in; ++i) {
        OutPoint op;
        c.bytes(op.txid.data(), op.txid.size());
        op.vout = c.le<std::uint32_t>();
        tx.inputs.push_back(op);
    }
    const auto n_out = c.varint();
    tx.outputs.reserve(std::min(n_out, kReserveCap));
    for (std::uint64_t i = 0; i < n_out; ++i) {
        TxOutputDecl o;
        o.value = c.le<std::uint64_t>();
        switch (c.u8()) {
            case kTagP2PK: o.script_class = ScriptClass::p2pk(); break;
            case kTagP2PKH: o.script_class = ScriptClass::p2pkh(); break;
            case kTagP2SHKnown: o.script_class = ScriptClass::p2sh_known(); break;
            case kTagP2SHUnknown: o.script_class = ScriptClass::p2sh_unknown(); break;
            case kTagMultisig: {
                const auto m = c.u8();
                const auto n = c.u8();
                o.script_class = ScriptClass::multisig(m, n);
                break;
            }
            case kTagOpReturn: o.script_class = ScriptClass::op_return(); break;
            case kTagUnknown: o.script_class = ScriptClass::unknown(); break;
            default: throw Error(Errc::ValidationError, "unknown script class tag", ordinal);
        }
        const auto n_addr = c.varint();
        o.addresses.reserve(std::min(n_addr, kReserveCap));
        for (std::uint64_t j = 0; j < n_addr; ++j) {
            const auto len = c.varint();
            if (len > (1u << 20)) throw Error(Errc::ValidationError, "address longer than 1 MiB", ordinal);
            std::string a(static_cast<std::size_t>(len), '\0');
            c.bytes(a.data(), a.size());
            o.addresses.push_back(std::move(a));
        }
        tx.outputs.push_back(std::move(o));
    }
    return tx;
}

std::string encode_header(std::uint64_t record_count) {
    std::string out(StreamHeader::kMagic.begin(), StreamHeader::kMagic.end());
    put_le<std::uint16_t>(out, StreamHeader::kVersion);
    put_le<std::uint64_t>(out, record_count);
    return out;
}

}  // namespace

BinaryReader::BinaryReader(std::istream& in, Ordinal first_ordinal) : in_(in), ordinal_(first_ordinal) {
    char magic[4] = {};
    in_.read(magic, 4);
    if (in_.gcount() != 4 || std::memcmp(magic, StreamHeader::kMagic.data(), 4) != 0) {
        throw Error(Errc::BadMagic, "not an ACLS stream");
    }
    Cursor c(in_, ordinal_);
    header_.version = c.le<std::uint16_t>();
    if (header_.version != StreamHeader::kVersion) {
        throw Error(Errc::BadVersion, "unsupported version " + std::to_string(header_.version));
    }
    header_.record_count = c.le<std::uint64_t>();
}

std::optional<TxRecord> BinaryReader::next() {
    if (header_.record_count != 0) {
        if (read_ == header_.record_count) return std::nullopt;
    } else if (in_.peek() == std::char_traits<char>::eof()) {
        return std::nullopt;
    }
    Cursor c(in_, ordinal_);
    TxRecord tx = decode_record(c, ordinal_);
    try {
        validate(tx);
    } catch (const Error& e) {
        throw Error(Errc::ValidationError, e.what(), ordinal_);
    }
    if (!seen_.insert(tx.txid).second) throw Error(Errc::DuplicateTxid, to_hex(tx.txid), ordinal_);
    tx.ordinal = ordinal_++;
    ++read_;
    return tx;
}

std::vector<TxRecord> parse_binary(std::istream& in) {
    BinaryReader reader(in);
    std::vector<TxRecord> out;
    out.reserve(std::min<std::uint64_t>(reader.header().record_count, 1u << 20));
    while (auto tx = reader.next()) out.push_back(std::move(*tx));
    return out;
}

std::vector<TxRecord> parse_binary(std::string_view bytes) {
    std::istringstream in{std::string(bytes)};
    return parse_binary(in);
}

BinaryWriter::BinaryWriter(std::ostream& out, std::uint64_t record_count) : out_(out) {
    const auto header = encode_header(record_count);
    out_.write(header.data(), static_cast<std::streamsize>(header.size()));
}

void BinaryWriter::write(const TxRecord& record) {
    const auto bytes = encode_record(record);
    out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void encode_binary(std::span<const TxRecord> records, std::ostream& out) {
    BinaryWriter writer(out, records.size());
    for (const auto& r : records) writer.write(r);
}

std::string encode_binary(std::span<const TxRecord> records) {
    std::ostringstream out;
    encode_binary(records, out);
    return std::move(out).str();
}

}  // namespace aclust
