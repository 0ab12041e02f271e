#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aclust/codec.hpp"

namespace aclust {

namespace {

using nlohmann::json;

[[noreturn]] void syntax(std::uint64_t line, const std::string& what) { throw Error(Errc::SyntaxError, what, line); }

void expect_keys(const json& obj, std::initializer_list<const char*> keys, std::uint64_t line, const char* where) {
    if (!obj.is_object()) syntax(line, std::string(where) + " must be an object");
    if (obj.size() != keys.size()) syntax(line, std::string(where) + " has unexpected keys");
    for (const char* key : keys) {
        if (!obj.contains(key)) syntax(line, std::string(where) + " is missing \"" + key + "\"");
    }
}

std::uint64_t unsigned_field(const json& value, std::uint64_t line, const char* name) {
    if (!value.is_number_unsigned()) syntax(line, std::string("\"") + name + "\" must be a non-negative integer");
    return value.get<std::uint64_t>();
}

Txid txid_field(const json& value, std::uint64_t line) {
    Txid id{};
    if (!value.is_string() || !parse_hex(value.get_ref<const std::string&>(), id)) {
        syntax(line, "txid must be 64 lower-case hex digits");
    }
    return id;
}

TxRecord decode_line(std::string_view text, std::uint64_t line) {
    json doc = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) syntax(line, "malformed JSON");
    expect_keys(doc, {"txid", "time", "in", "out"}, line, "record");

    TxRecord tx;
    tx.txid = txid_field(doc["txid"], line);
    tx.timestamp = unsigned_field(doc["time"], line, "time");

    const auto& ins = doc["in"];
    if (!ins.is_array()) syntax(line, "\"in\" must be an array");
    tx.inputs.reserve(ins.size());
    for (const auto& in : ins) {
        expect_keys(in, {"txid", "vout"}, line, "input");
        OutPoint op;
        op.txid = txid_field(in["txid"], line);
        const auto vout = unsigned_field(in["vout"], line, "vout");
        if (vout > 0xFFFFFFFFull) syntax(line, "vout exceeds 32 bits");
        op.vout = static_cast<std::uint32_t>(vout);
        tx.inputs.push_back(op);
    }

    const auto& outs = doc["out"];
    if (!outs.is_array()) syntax(line, "\"out\" must be an array");
    tx.outputs.reserve(outs.size());
    for (const auto& out : outs) {
        expect_keys(out, {"sat", "cls", "addr"}, line, "output");
        TxOutputDecl decl;
        decl.value = unsigned_field(out["sat"], line, "sat");
        const auto& cls = out["cls"];
        if (!cls.is_string() || !parse_script_class(cls.get_ref<const std::string&>(), decl.script_class)) {
            syntax(line, "unrecognised script class");
        }
        const auto& addrs = out["addr"];
        if (!addrs.is_array()) syntax(line, "\"addr\" must be an array");
        decl.addresses.reserve(addrs.size());
        for (const auto& a : addrs) {
            if (!a.is_string()) syntax(line, "addresses must be strings");
            decl.addresses.push_back(a.get<std::string>());
        }
        tx.outputs.push_back(std::move(decl));
    }
    return tx;
}

void append_string(std::string& out, const std::string& value) {
    out += json(value).dump();
}

}  // namespace

TextReader::TextReader(std::istream& in, Ordinal first_ordinal) : in_(in), ordinal_(first_ordinal) {}

std::optional<TxRecord> TextReader::next() {
    while (std::getline(in_, buffer_)) {
        ++line_;
        if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
        if (buffer_.find_first_not_of(" \t") == std::string::npos) continue;

        TxRecord tx = decode_line(buffer_, line_);
        try {
            validate(tx);
        } catch (const Error& e) {
            throw Error(Errc::ValidationError, e.what(), line_);
        }
        if (!seen_.insert(tx.txid).second) throw Error(Errc::DuplicateTxid, to_hex(tx.txid), line_);
        tx.ordinal = ordinal_++;
        return tx;
    }
    if (in_.bad()) throw Error(Errc::Io, "read failure", line_);
    return std::nullopt;
}

std::vector<TxRecord> parse_text(std::istream& in) {
    TextReader reader(in);
    std::vector<TxRecord> out;
    while (auto tx = reader.next()) out.push_back(std::move(*tx));
    return out;
}

std::vector<TxRecord> parse_text(std::string_view bytes) {
    std::istringstream in{std::string(bytes)};
    return parse_text(in);
}

std::string encode_text_line(const TxRecord& record) {
    std::string out;
    out.reserve(160 + 96 * record.inputs.size() + 64 * record.outputs.size());
    out += "{\"txid\":\"";
    out += to_hex(record.txid);
    out += "\",\"time\":";
    out += std::to_string(record.timestamp);
    out += ",\"in\":[";
    for (std::size_t i = 0; i < record.inputs.size(); ++i) {
        if (i) out += ',';
        out += "{\"txid\":\"";
        out += to_hex(record.inputs[i].txid);
        out += "\",\"vout\":";
        out += std::to_string(record.inputs[i].vout);
        out += '}';
    }
    out += "],\"out\":[";
    for (std::size_t i = 0; i < record.outputs.size(); ++i) {
        const auto& o = record.outputs[i];
        if (i) out += ',';
        out += "{\"sat\":";
        out += std::to_string(o.value);
        out += ",\"cls\":\"";
        out += script_class_name(o.script_class);
        out += "\",\"addr\":[";
        for (std::size_t j = 0; j < o.addresses.size(); ++j) {
            if (j) out += ',';
            append_string(out, o.addresses[j]);
        }
        out += "]}";
    }
    out += "]}";
    return out;
}

void encode_text(std::span<const TxRecord> records, std::ostream& out) {
    for (const auto& r : records) {
        out << encode_text_line(r) << '\n';
    }
}

std::string encode_text(std::span<const TxRecord> records) {
    std::ostringstream out;
    encode_text(records, out);
    return std::move(out).str();
}

FileRecordSource::FileRecordSource(const std::string& path, StreamFormat format, Ordinal first_ordinal) {
    auto file = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*file) throw Error(Errc::Io, "cannot open " + path);
    stream_ = std::move(file);
    if (format == StreamFormat::Text) {
        reader_ = std::make_unique<TextReader>(*stream_, first_ordinal);
    } else {
        reader_ = std::make_unique<BinaryReader>(*stream_, first_ordinal);
    }
}

std::vector<TxRecord> read_stream_file(const std::string& path, StreamFormat format) {
    FileRecordSource source(path, format);
    std::vector<TxRecord> out;
    while (auto tx = source.reader().next()) out.push_back(std::move(*tx));
    return out;
}

void write_stream_file(const std::string& path, StreamFormat format, std::span<const TxRecord> records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot create " + path);
    if (format == StreamFormat::Text) {
        encode_text(records, out);
    } else {
        encode_binary(records, out);
    }
    if (!out.flush()) throw Error(Errc::Io, "write failure on " + path);
}

}  // namespace aclust
