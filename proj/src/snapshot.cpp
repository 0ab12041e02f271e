// Snapshot layout (little-endian), see docs/FORMATS.md:
//
//   "ACSN" | u16 version | u8 mode | u8 reserved
//   section*  : tag[4] | u64 payload length | payload
//   "END!"    : u64 8 | u64 FNV-1a of every preceding byte
//
// Sections appear in a fixed order: ADDR FRST BALS OUTS APOL TXLG SPNT MRGE BRTH.

#include <cstring>
#include <fstream>

#include "aclust/engine.hpp"

namespace aclust {

namespace {

constexpr char kMagic[4] = {'A', 'C', 'S', 'N'};
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

std::uint64_t fnv1a(std::uint64_t h, const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= kFnvPrime;
    }
    return h;
}

class Buffer {
  public:
    template <typename T>
    void le(T value) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            bytes_.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
        }
    }
    void varint(std::uint64_t value) {
        while (value >= 0x80) {
            bytes_.push_back(static_cast<char>((value & 0x7F) | 0x80));
            value >>= 7;
        }
        bytes_.push_back(static_cast<char>(value));
    }
    void raw(const void* data, std::size_t n) { bytes_.append(static_cast<const char*>(data), n); }
    const std::string& str() const noexcept { return bytes_; }

  private:
    std::string bytes_;
};

class Writer {
  public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void raw(const std::string& bytes) {
        out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        hash_ = fnv1a(hash_, bytes.data(), bytes.size());
    }

    void section(const char (&tag)[5], const Buffer& payload) {
        Buffer head;
        head.raw(tag, 4);
        head.le<std::uint64_t>(payload.str().size());
        raw(head.str());
        raw(payload.str());
    }

    std::uint64_t hash() const noexcept { return hash_; }

  private:
    std::ostream& out_;
    std::uint64_t hash_ = kFnvOffset;
};

[[noreturn]] void corrupt(const std::string& what) { throw Error(Errc::CorruptSnapshot, what); }

/// Bounds-checked view over one section's payload.
class Slice {
  public:
    explicit Slice(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T le() {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= std::uint64_t{static_cast<unsigned char>(bytes_[pos_ + i])} << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }
    std::uint64_t varint() {
        std::uint64_t value = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            const auto byte = le<std::uint8_t>();
            value |= std::uint64_t{byte & 0x7Fu} << shift;
            if (!(byte & 0x80)) return value;
        }
        corrupt("varint overflow");
    }
    void raw(void* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }
    /// Count prefix, sanity-checked against the bytes left.
    std::uint64_t count(std::size_t min_item_bytes) {
        const auto n = le<std::uint64_t>();
        if (min_item_bytes && n > (bytes_.size() - pos_) / min_item_bytes) corrupt("count exceeds section size");
        return n;
    }
    void finish() const {
        if (pos_ != bytes_.size()) corrupt("trailing bytes in section");
    }

  private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) corrupt("section payload too short");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

class Reader {
  public:
    explicit Reader(std::istream& in) : in_(in) {}

    void raw(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) corrupt("unexpected end of snapshot");
        hash_ = fnv1a(hash_, static_cast<const char*>(dst), n);
    }
    template <typename T>
    T le() {
        unsigned char buf[sizeof(T)];
        raw(buf, sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{buf[i]} << (8 * i);
        return static_cast<T>(v);
    }

    std::string section(const char (&tag)[5]) {
        char got[4];
        raw(got, 4);
        if (std::memcmp(got, tag, 4) != 0) corrupt(std::string("expected section ") + tag);
        const auto len = le<std::uint64_t>();
        std::string payload;
        // Grow in chunks so a forged length cannot force one huge allocation.
        constexpr std::uint64_t kChunk = 1u << 24;
        for (std::uint64_t done = 0; done < len;) {
            const auto step = std::min(kChunk, len - done);
            payload.resize(static_cast<std::size_t>(done + step));
            raw(payload.data() + done, static_cast<std::size_t>(step));
            done += step;
        }
        return payload;
    }

    std::uint64_t hash() const noexcept { return hash_; }

  private:
    std::istream& in_;
    std::uint64_t hash_ = kFnvOffset;
};

}  // namespace

struct SnapshotCodec {
    static void write(const Engine& engine, std::ostream& out) {
        Writer w(out);
        Buffer head;
        head.raw(kMagic, 4);
        head.le<std::uint16_t>(Engine::kSnapshotVersion);
        head.le<std::uint8_t>(static_cast<std::uint8_t>(engine.mode_));
        head.le<std::uint8_t>(0);
        w.raw(head.str());

        {
            Buffer b;
            b.le<std::uint64_t>(engine.names_.size());
            for (const auto& name : engine.names_) {
                b.varint(name.size());
                b.raw(name.data(), name.size());
            }
            w.section("ADDR", b);
        }
        {
            Buffer b;
            const auto parents = engine.clusters_.flattened_parents();
            b.le<std::uint64_t>(parents.size());
            for (auto p : parents) b.le<std::uint32_t>(p);
            w.section("FRST", b);
        }
        {
            Buffer b;
            b.le<std::uint64_t>(engine.balances_.size());
            for (const auto& bal : engine.balances_) {
                b.le<std::uint64_t>(bal.current);
                b.le<std::uint64_t>(bal.alltime_max);
            }
            w.section("BALS", b);
        }
        {
            Buffer b;
            const auto& entries = engine.index_.entries_;
            b.le<std::uint64_t>(entries.size());
            for (const auto& e : entries) {
                b.raw(e.outpoint.txid.data(), 32);
                b.le<std::uint32_t>(e.outpoint.vout);
                b.le<std::uint64_t>(e.value);
                b.le<std::uint8_t>(static_cast<std::uint8_t>(e.script_class.kind));
                b.le<std::uint8_t>(e.script_class.m);
                b.le<std::uint8_t>(e.script_class.n);
                b.le<std::uint8_t>(e.spent ? 1 : 0);
                b.le<std::uint64_t>(e.creating_ordinal);
                b.le<std::uint64_t>(e.address_offset);
                b.le<std::uint32_t>(e.address_count);
            }
            w.section("OUTS", b);
        }
        {
            Buffer b;
            const auto& pool = engine.index_.address_pool_;
            b.le<std::uint64_t>(pool.size());
            for (auto a : pool) b.le<std::uint32_t>(index_of(a));
            w.section("APOL", b);
        }
        {
            Buffer b;
            const auto& txs = engine.log_.txs;
            b.le<std::uint64_t>(txs.size());
            for (const auto& t : txs) {
                b.raw(t.txid.data(), 32);
                b.le<std::uint64_t>(t.timestamp);
                const std::uint8_t flags = (t.coinbase ? 1 : 0) | (t.nontrivial ? 2 : 0) | (t.caused_merge ? 4 : 0);
                b.le<std::uint8_t>(flags);
                b.le<std::uint32_t>(t.new_address_count);
                b.le<std::uint32_t>(t.addressable_output_count);
                b.le<std::uint32_t>(t.resolved_input_count);
                b.le<std::int32_t>(t.ge2_delta);
                b.le<std::uint64_t>(t.first_output);
                b.le<std::uint32_t>(t.output_count);
                b.le<std::uint64_t>(t.spent_offset);
            }
            w.section("TXLG", b);
        }
        {
            Buffer b;
            b.le<std::uint64_t>(engine.log_.spent_entries.size());
            for (auto e : engine.log_.spent_entries) b.le<std::uint64_t>(e);
            w.section("SPNT", b);
        }
        {
            Buffer b;
            b.le<std::uint64_t>(engine.log_.merges.size());
            for (const auto& m : engine.log_.merges) {
                b.le<std::uint64_t>(m.tx_ordinal);
                b.raw(m.txid.data(), 32);
                b.le<std::uint32_t>(index_of(m.representative));
                b.varint(m.component_sizes.size());
                for (auto s : m.component_sizes) b.varint(s);
            }
            w.section("MRGE", b);
        }
        {
            Buffer b;
            b.le<std::uint64_t>(engine.log_.births.size());
            for (auto o : engine.log_.births) b.le<std::uint64_t>(o);
            w.section("BRTH", b);
        }
        Buffer trailer;
        trailer.raw("END!", 4);
        trailer.le<std::uint64_t>(8);
        trailer.le<std::uint64_t>(w.hash());
        out.write(trailer.str().data(), static_cast<std::streamsize>(trailer.str().size()));
        if (!out) throw Error(Errc::Io, "snapshot write failed");
    }

    static Engine read(std::istream& in) {
        Reader r(in);
        char magic[4];
        r.raw(magic, 4);
        if (std::memcmp(magic, kMagic, 4) != 0) corrupt("bad magic");
        const auto version = r.le<std::uint16_t>();
        if (version != Engine::kSnapshotVersion) {
            throw Error(Errc::VersionMismatch, "snapshot version " + std::to_string(version) + ", expected " +
                                                   std::to_string(Engine::kSnapshotVersion));
        }
        const auto mode = r.le<std::uint8_t>();
        if (mode > static_cast<std::uint8_t>(ResolutionMode::Lenient)) corrupt("bad resolution mode");
        r.le<std::uint8_t>();

        Engine engine(static_cast<ResolutionMode>(mode));

        {
            const auto bytes = r.section("ADDR");
            Slice s(bytes);
            const auto n = s.count(1);
            for (std::uint64_t i = 0; i < n; ++i) {
                const auto len = s.varint();
                std::string name(static_cast<std::size_t>(std::min<std::uint64_t>(len, bytes.size())), '\0');
                if (name.size() != len) corrupt("address length");
                s.raw(name.data(), name.size());
                engine.names_.push_back(std::move(name));
            }
            s.finish();
        }
        const auto n_addr = engine.names_.size();
        {
            const auto bytes = r.section("FRST");
            Slice s(bytes);
            const auto n = s.count(4);
            if (n != n_addr) corrupt("forest size differs from address table");
            std::vector<std::uint32_t> parents(n);
            for (auto& p : parents) p = s.le<std::uint32_t>();
            s.finish();
            if (!engine.clusters_.assign(std::move(parents))) corrupt("invalid forest");
        }
        {
            const auto bytes = r.section("BALS");
            Slice s(bytes);
            const auto n = s.count(16);
            if (n != n_addr) corrupt("balance table size differs from address table");
            engine.balances_.resize(n);
            for (auto& bal : engine.balances_) {
                bal.current = s.le<std::uint64_t>();
                bal.alltime_max = s.le<std::uint64_t>();
                if (bal.alltime_max < bal.current) corrupt("balance maximum below current");
            }
            s.finish();
        }
        {
            const auto bytes = r.section("OUTS");
            Slice s(bytes);
            const auto n = s.count(68);
            auto& entries = engine.index_.entries_;
            entries.resize(n);
            for (auto& e : entries) {
                s.raw(e.outpoint.txid.data(), 32);
                e.outpoint.vout = s.le<std::uint32_t>();
                e.value = s.le<std::uint64_t>();
                const auto kind = s.le<std::uint8_t>();
                if (kind > static_cast<std::uint8_t>(ScriptKind::Unknown)) corrupt("bad script kind");
                e.script_class.kind = static_cast<ScriptKind>(kind);
                e.script_class.m = s.le<std::uint8_t>();
                e.script_class.n = s.le<std::uint8_t>();
                e.spent = s.le<std::uint8_t>() != 0;
                e.creating_ordinal = s.le<std::uint64_t>();
                e.address_offset = s.le<std::uint64_t>();
                e.address_count = s.le<std::uint32_t>();
            }
            s.finish();
        }
        {
            const auto bytes = r.section("APOL");
            Slice s(bytes);
            const auto n = s.count(4);
            auto& pool = engine.index_.address_pool_;
            pool.resize(n);
            for (auto& a : pool) {
                const auto v = s.le<std::uint32_t>();
                if (v >= n_addr) corrupt("address pool references unknown address");
                a = address_id(v);
            }
            s.finish();
            for (const auto& e : engine.index_.entries_) {
                if (e.address_offset > pool.size() || e.address_count > pool.size() - e.address_offset) {
                    corrupt("output entry address slice out of range");
                }
            }
        }
        {
            const auto bytes = r.section("TXLG");
            Slice s(bytes);
            const auto n = s.count(77);
            engine.log_.txs.resize(n);
            for (auto& t : engine.log_.txs) {
                s.raw(t.txid.data(), 32);
                t.timestamp = s.le<std::uint64_t>();
                const auto flags = s.le<std::uint8_t>();
                t.coinbase = flags & 1;
                t.nontrivial = flags & 2;
                t.caused_merge = flags & 4;
                t.new_address_count = s.le<std::uint32_t>();
                t.addressable_output_count = s.le<std::uint32_t>();
                t.resolved_input_count = s.le<std::uint32_t>();
                t.ge2_delta = s.le<std::int32_t>();
                t.first_output = s.le<std::uint64_t>();
                t.output_count = s.le<std::uint32_t>();
                t.spent_offset = s.le<std::uint64_t>();
                if (t.first_output > engine.index_.entries_.size() ||
                    t.output_count > engine.index_.entries_.size() - t.first_output) {
                    corrupt("transaction outputs out of range");
                }
            }
            s.finish();
        }
        {
            const auto bytes = r.section("SPNT");
            Slice s(bytes);
            const auto n = s.count(8);
            auto& spent = engine.log_.spent_entries;
            spent.resize(n);
            for (auto& e : spent) {
                e = s.le<std::uint64_t>();
                if (e >= engine.index_.entries_.size()) corrupt("spent entry out of range");
            }
            s.finish();
            for (const auto& t : engine.log_.txs) {
                if (t.spent_offset > n || t.resolved_input_count > n - t.spent_offset) {
                    corrupt("transaction inputs out of range");
                }
            }
        }
        {
            const auto bytes = r.section("MRGE");
            Slice s(bytes);
            const auto n = s.count(45);
            engine.log_.merges.reserve(n);
            for (std::uint64_t i = 0; i < n; ++i) {
                const auto ordinal = s.le<std::uint64_t>();
                Txid txid{};
                s.raw(txid.data(), 32);
                const auto rep = s.le<std::uint32_t>();
                if (rep >= n_addr) corrupt("merge representative out of range");
                const auto k = s.varint();
                if (k < 2 || k > bytes.size()) corrupt("merge component count");
                std::vector<std::uint64_t> sizes(static_cast<std::size_t>(k));
                for (auto& sz : sizes) sz = s.varint();
                engine.log_.merges.push_back(make_merge_event(ordinal, txid, std::move(sizes), address_id(rep)));
            }
            s.finish();
        }
        {
            const auto bytes = r.section("BRTH");
            Slice s(bytes);
            const auto n = s.count(8);
            engine.log_.births.resize(n);
            for (auto& o : engine.log_.births) o = s.le<std::uint64_t>();
            s.finish();
        }

        const auto expected = r.hash();
        char tag[4];
        r.raw(tag, 4);
        if (std::memcmp(tag, "END!", 4) != 0) corrupt("missing trailer");
        if (r.le<std::uint64_t>() != 8) corrupt("bad trailer length");
        if (r.le<std::uint64_t>() != expected) corrupt("checksum mismatch");
        if (in.peek() != std::char_traits<char>::eof()) corrupt("trailing bytes after snapshot");

        engine.rebuild_names();
        if (engine.ids_.size() != engine.names_.size()) corrupt("duplicate address in table");
        engine.index_.rebuild_lookup();
        if (engine.index_.lookup_.size() != engine.index_.entries_.size()) corrupt("duplicate outpoint in index");
        return engine;
    }
};

void Engine::snapshot(std::ostream& out) const { SnapshotCodec::write(*this, out); }

void Engine::snapshot(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot create " + path);
    snapshot(out);
    if (!out.flush()) throw Error(Errc::Io, "write failure on " + path);
}

Engine Engine::restore(std::istream& in) { return SnapshotCodec::read(in); }

Engine Engine::restore(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    return restore(in);
}

}  // namespace aclust
