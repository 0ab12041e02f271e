#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include "aclust/codec.hpp"
#include "aclust/engine.hpp"
#include "aclust/pipeline.hpp"
#include "aclust/synth.hpp"
#include "aclust/tx_metrics.hpp"
#include "builders.hpp"
#include "oracle.hpp"

using namespace aclust;

namespace {

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::Io;
}

// Builds a cluster of `names.size()` addresses and returns an unspent
// outpoint inside it. Uses txids id and id+1.
OutPoint make_cluster(std::vector<TxRecord>& s, std::uint64_t id, const std::vector<std::string>& names) {
    std::vector<TxOutputDecl> outs;
    for (const auto& n : names) outs.push_back(build::p2pkh(100, n));
    s.push_back(build::coinbase(id, outs));
    if (names.size() == 1) return build::op(id, 0);
    std::vector<OutPoint> ins;
    for (std::uint32_t v = 0; v < names.size(); ++v) ins.push_back(build::op(id, v));
    s.push_back(build::spend(id + 1, ins, {build::p2pkh(100 * names.size(), names.front())}));
    return build::op(id + 1, 0);
}

std::vector<std::string> names(const std::string& prefix, int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

Engine run(const std::vector<TxRecord>& s, ResolutionMode mode = ResolutionMode::Strict) {
    Engine e(mode);
    for (const auto& tx : s) e.process_transaction(tx);
    return e;
}

std::vector<TxRecord> synth(std::uint64_t seed, std::uint64_t n, double p_reuse, double mean_in = 1.5) {
    SynthParams p;
    p.seed = seed;
    p.num_transactions = n;
    p.p_reuse = p_reuse;
    p.mean_inputs = mean_in;
    return generate_synthetic(p);
}

std::string snapshot_bytes(const Engine& e) {
    std::ostringstream out;
    e.snapshot(out);
    return out.str();
}

Engine restore_bytes(const std::string& bytes) {
    std::istringstream in(bytes);
    return Engine::restore(in);
}

}  // namespace

TEST_CASE("four clusters of sizes 1, 1, 2, 10 merge with increases 1, 1, 2") {
    std::vector<TxRecord> s;
    const auto a = make_cluster(s, 10, {"a"});
    const auto b = make_cluster(s, 20, {"b"});
    const auto c = make_cluster(s, 30, names("c", 2));
    const auto d = make_cluster(s, 40, names("d", 10));
    Engine e = run(s);
    CHECK(e.cluster_size(e.find("d0")) == 10);

    const auto merge = e.process_transaction(build::spend(99, {d, a, c, b}, {build::p2pkh(1, "z")}));
    REQUIRE(merge);
    CHECK(merge->increases == std::vector<std::uint64_t>{1, 1, 2});
    CHECK(merge->component_sizes == std::vector<std::uint64_t>{1, 1, 2, 10});
    CHECK(merge->resulting_size() == 14);
    CHECK(e.cluster_size(e.find("b")) == 14);
    CHECK(merge->representative == e.find("d3"));
    CHECK(e.log().txs.back().caused_merge);
    CHECK(e.log().txs.back().nontrivial);
}

TEST_CASE("single input and same-cluster spends do not merge") {
    std::vector<TxRecord> s;
    s.push_back(build::coinbase(1, {build::p2pkh(5, "a"), build::p2pkh(5, "b"), build::p2pkh(5, "a")}));
    Engine e = run(s);
    CHECK_FALSE(e.process_transaction(build::spend(2, {build::op(1, 0)}, {build::p2pkh(5, "c")})));
    CHECK(e.num_addresses() == 3);
    CHECK(e.clusters().num_clusters() == 3);

    // Two inputs, same address: trivial.
    auto m = e.process_transaction(build::spend(3, {build::op(1, 2), build::op(2, 0)}, {build::p2pkh(5, "a")}));
    CHECK(m);  // a and c are distinct addresses
    CHECK(e.find("c") == e.find("a"));
    m = e.process_transaction(build::spend(4, {build::op(3, 0), build::op(1, 1)}, {build::p2pkh(1, "d")}));
    REQUIRE(m);
    CHECK(m->increases == std::vector<std::uint64_t>{1});

    // Both inputs already in one cluster: non-trivial but no merge.
    e.process_transaction(build::coinbase(5, {build::p2pkh(1, "a"), build::p2pkh(1, "c")}));
    m = e.process_transaction(build::spend(6, {build::op(5, 0), build::op(5, 1)}, {build::p2pkh(1, "q")}));
    CHECK_FALSE(m);
    CHECK(e.log().txs.back().nontrivial);
    CHECK_FALSE(e.log().txs.back().caused_merge);
}

TEST_CASE("representative is the smaller dense index") {
    std::vector<TxRecord> s;
    s.push_back(build::coinbase(1, {build::p2pkh(5, "first"), build::p2pkh(5, "second")}));
    s.push_back(build::spend(2, {build::op(1, 1), build::op(1, 0)}, {build::p2pkh(10, "third")}));
    Engine e = run(s);
    CHECK(e.find("second") == e.find("first"));
    CHECK(index_of(e.find("second")) == 0);
    CHECK(e.find("third") == *e.lookup("third"));
    CHECK(code_of([&] { e.cluster_size(*e.lookup("second")); }) == Errc::NotARepresentative);
    CHECK(code_of([&] { e.find("nobody"); }) == Errc::UnknownAddress);
    CHECK(code_of([&] { e.find(address_id(99)); }) == Errc::UnknownAddress);
    CHECK(code_of([&] { e.balance("nobody"); }) == Errc::UnknownAddress);
}

TEST_CASE("balances") {
    std::vector<TxRecord> s;
    s.push_back(build::coinbase(1, {build::p2pkh(5, "a"), {0, ScriptClass::multisig(1, 2), {"m1", "m2"}}}));
    s.push_back(build::spend(2, {build::op(1, 0)}, {build::p2pkh(3, "b"), build::p2pkh(2, "a")}));
    Engine e = run(s);
    CHECK(e.balance("a") == BalanceRecord{2, 5});
    CHECK(e.balance("b") == BalanceRecord{3, 3});
    CHECK(e.balance("m1") == BalanceRecord{0, 0});
    e.process_transaction(build::spend(3, {build::op(2, 0)}, {build::p2pkh(3, "c")}));
    CHECK(e.balance("b") == BalanceRecord{0, 3});

    // Debit before credit within one transaction: max never counts both.
    e.process_transaction(build::spend(4, {build::op(2, 1)}, {build::p2pkh(2, "a")}));
    CHECK(e.balance("a") == BalanceRecord{2, 5});
}

TEST_CASE("resolution errors are atomic") {
    std::vector<TxRecord> s;
    s.push_back(build::coinbase(1, {build::p2pkh(5, "a"), build::p2pkh(5, "b")}));
    s.push_back(build::spend(2, {build::op(1, 0)}, {build::p2pkh(5, "c")}));
    Engine e = run(s);
    const Engine before = e;

    CHECK(code_of([&] {
              e.process_transaction(build::spend(3, {build::op(1, 1), build::op(77, 0)}, {build::p2pkh(1, "new")}));
          }) == Errc::UnknownOutpoint);
    CHECK(e == before);
    CHECK(code_of([&] {
              e.process_transaction(build::spend(3, {build::op(1, 1), build::op(1, 0)}, {build::p2pkh(1, "new")}));
          }) == Errc::DoubleSpend);
    CHECK(e == before);
    CHECK(code_of([&] {
              e.process_transaction(build::spend(3, {build::op(1, 1), build::op(1, 1)}, {build::p2pkh(1, "new")}));
          }) == Errc::DoubleSpend);
    CHECK(e == before);
    CHECK(code_of([&] { e.process_transaction(build::coinbase(2, {build::p2pkh(1, "new")})); }) ==
          Errc::DuplicateTxid);
    CHECK(e == before);
    CHECK(code_of([&] { e.process_transaction(build::coinbase(9, {{1, ScriptClass::op_return(), {"x"}}})); }) ==
          Errc::ScriptArityViolation);
    CHECK(e == before);
    CHECK_FALSE(e.lookup("new"));
    CHECK(e.num_transactions() == 2);
}

TEST_CASE("lenient mode skips unknown inputs but registers outputs") {
    std::vector<TxRecord> s;
    s.push_back(build::coinbase(1, {build::p2pkh(5, "a")}));
    s.push_back(build::spend(2, {build::op(1, 0), build::op(50, 3)}, {build::p2pkh(5, "b")}));
    Engine e = run(s, ResolutionMode::Lenient);
    CHECK(e.num_transactions() == 2);
    CHECK(e.lookup("b"));
    CHECK(e.log().txs[1].resolved_input_count == 1);
    CHECK_FALSE(e.log().txs[1].nontrivial);
    CHECK(code_of([&] { run(s); }) == Errc::UnknownOutpoint);
    // Double spends stay fatal.
    CHECK(code_of([&] { e.process_transaction(build::spend(3, {build::op(1, 0)}, {build::p2pkh(1, "c")})); }) ==
          Errc::DoubleSpend);
}

TEST_CASE("is_nontrivial") {
    std::vector<TxRecord> s;
    s.push_back(build::coinbase(1, {build::p2pkh(5, "a"), build::p2pkh(5, "a"), build::p2pkh(5, "b")}));
    Engine e = run(s);
    AddressResolver resolve = [&](const OutPoint& op) -> std::optional<std::vector<std::string>> {
        auto idx = e.outpoints().find(op);
        if (!idx) return std::nullopt;
        std::vector<std::string> out;
        for (auto a : e.outpoints().addresses(e.outpoints().entry(*idx))) out.push_back(e.external(a));
        return out;
    };
    CHECK(is_nontrivial(build::spend(2, {build::op(1, 0), build::op(1, 2)}, {build::p2pkh(1, "x")}), resolve,
                        ResolutionMode::Strict));
    CHECK_FALSE(is_nontrivial(build::spend(2, {build::op(1, 0), build::op(1, 1)}, {build::p2pkh(1, "x")}), resolve,
                              ResolutionMode::Strict));
    CHECK_FALSE(is_nontrivial(build::coinbase(3, {build::p2pkh(1, "x")}), resolve, ResolutionMode::Strict));
    auto unknown = build::spend(2, {build::op(1, 0), build::op(8, 0)}, {build::p2pkh(1, "x")});
    CHECK(code_of([&] { is_nontrivial(unknown, resolve, ResolutionMode::Strict); }) == Errc::UnknownOutpoint);
    CHECK_FALSE(is_nontrivial(unknown, resolve, ResolutionMode::Lenient));
}

TEST_CASE("addressable_output_count") {
    using build::p2pkh;
    CHECK(addressable_output_count(build::coinbase(1, {p2pkh(1, "a"), p2pkh(1, "b")})) == 2);
    CHECK(addressable_output_count(build::coinbase(1, {p2pkh(1, "a"), {0, ScriptClass::op_return(), {}}})) == 1);
    CHECK(addressable_output_count(
              build::coinbase(1, {{1, ScriptClass::multisig(1, 2), {"m", "n"}}, p2pkh(1, "b")})) == 3);
    CHECK(addressable_output_count(build::coinbase(1, {{1, ScriptClass::p2sh_known(), {"3h", "i1", "i2"}}})) == 3);
    CHECK(addressable_output_count(build::coinbase(1, {{1, ScriptClass::p2sh_unknown(), {"3h"}}})) == 1);
    CHECK(addressable_output_count(build::coinbase(1, {{1, ScriptClass::unknown(), {}}})) == 0);
    CHECK(addressable_output_count(build::coinbase(1, {{1, ScriptClass::unknown(), {"u"}}})) == 1);
}

TEST_CASE("partition matches brute-force components on synthetic streams") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const auto s = synth(seed, 3000, 0.05 * static_cast<double>(seed % 8), 1.2 + 0.1 * static_cast<double>(seed % 5));
        const Engine e = run(s);
        const auto r = oracle::replay(s);
        const auto label = oracle::components(r);
        REQUIRE(e.num_addresses() == r.names.size());
        for (std::size_t i = 0; i < r.names.size(); ++i) {
            REQUIRE(e.external(address_id(static_cast<std::uint32_t>(i))) == r.names[i]);
            CHECK(index_of(e.find(address_id(static_cast<std::uint32_t>(i)))) == label[i]);
        }
        const auto sizes = oracle::component_sizes(label);
        for (const auto& [rep, size] : sizes) CHECK(e.cluster_size(address_id(static_cast<std::uint32_t>(rep))) == size);
        CHECK(e.clusters().num_clusters() == sizes.size());

        // Balances against an independent replay.
        for (std::size_t i = 0; i < r.names.size(); ++i) {
            const auto b = e.balance(r.names[i]);
            CHECK(b.current == r.current[i]);
            CHECK(b.alltime_max == r.max[i]);
        }

        // Merge accounting: every increase removes exactly one cluster.
        std::uint64_t increases = 0;
        for (const auto& m : e.log().merges) {
            CHECK(merge_event_consistent(m));
            increases += m.increases.size();
        }
        CHECK(increases == e.num_addresses() - e.clusters().num_clusters());
    }
}

TEST_CASE("cluster sizes never decrease and births are logged once") {
    const auto s = synth(77, 4000, 0.2, 1.8);
    Engine e;
    std::vector<std::uint64_t> last;
    std::uint64_t prev_clusters = 0;
    for (const auto& tx : s) {
        const auto before_addrs = e.num_addresses();
        e.process_transaction(tx);
        for (std::uint32_t i = 0; i < last.size(); ++i) {
            const auto now = e.cluster_size(e.find(address_id(i)));
            CHECK(now >= last[i]);
            last[i] = now;
        }
        for (auto i = static_cast<std::uint32_t>(last.size()); i < e.num_addresses(); ++i) {
            last.push_back(e.cluster_size(e.find(address_id(i))));
        }
        CHECK(e.clusters().num_clusters() <= prev_clusters + (e.num_addresses() - before_addrs));
        prev_clusters = e.clusters().num_clusters();
    }
    std::int64_t ge2 = 0;
    for (const auto& t : e.log().txs) ge2 += t.ge2_delta;
    CHECK(ge2 == static_cast<std::int64_t>(e.clusters().num_clusters_ge2()));
    CHECK(std::is_sorted(e.log().births.begin(), e.log().births.end()));
}

TEST_CASE("permuting a transaction's inputs changes nothing observable") {
    const auto s = synth(11, 2000, 0.3, 2.0);
    auto shuffled = s;
    std::mt19937_64 rng(5);
    for (auto& tx : shuffled) std::shuffle(tx.inputs.begin(), tx.inputs.end(), rng);
    const Engine a = run(s);
    const Engine b = run(shuffled);
    CHECK(a.clusters() == b.clusters());
    REQUIRE(a.log().merges.size() == b.log().merges.size());
    for (std::size_t i = 0; i < a.log().merges.size(); ++i) {
        CHECK(a.log().merges[i].increases == b.log().merges[i].increases);
        CHECK(a.log().merges[i].representative == b.log().merges[i].representative);
    }
}

TEST_CASE("snapshot: empty engine round trip") {
    const Engine empty;
    const Engine back = restore_bytes(snapshot_bytes(empty));
    CHECK(back == empty);
    CHECK(back.num_addresses() == 0);
    CHECK(back.num_transactions() == 0);
}

TEST_CASE("snapshot: resume equals one-shot and bytes are deterministic") {
    const auto s = synth(21, 3000, 0.2, 1.7);
    const Engine whole = run(s);
    CHECK(snapshot_bytes(whole) == snapshot_bytes(run(s)));
    for (std::size_t split : {std::size_t{0}, std::size_t{1}, std::size_t{1500}, s.size()}) {
        Engine head;
        for (std::size_t i = 0; i < split; ++i) head.process_transaction(s[i]);
        Engine resumed = restore_bytes(snapshot_bytes(head));
        CHECK(resumed == head);
        for (std::size_t i = split; i < s.size(); ++i) resumed.process_transaction(s[i]);
        CHECK(resumed == whole);
        CHECK(snapshot_bytes(resumed) == snapshot_bytes(whole));
        // Lookups by name survive the round trip.
        CHECK(resumed.find(whole.external(address_id(5))) == whole.find(address_id(5)));
    }
}

TEST_CASE("snapshot: lenient mode is preserved") {
    const Engine e(ResolutionMode::Lenient);
    CHECK(restore_bytes(snapshot_bytes(e)).mode() == ResolutionMode::Lenient);
}

TEST_CASE("snapshot: corruption and version errors") {
    const auto bytes = snapshot_bytes(run(synth(4, 400, 0.2)));
    CHECK(code_of([&] { restore_bytes(""); }) == Errc::CorruptSnapshot);
    CHECK(code_of([&] { restore_bytes(bytes.substr(0, bytes.size() / 2)); }) == Errc::CorruptSnapshot);
    auto magic = bytes;
    magic[1] = 'X';
    CHECK(code_of([&] { restore_bytes(magic); }) == Errc::CorruptSnapshot);
    auto version = bytes;
    version[4] = 9;
    CHECK(code_of([&] { restore_bytes(version); }) == Errc::VersionMismatch);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
        auto flipped = bytes;
        const auto pos = 8 + rng() % (bytes.size() - 8);
        flipped[pos] = static_cast<char>(flipped[pos] ^ (1 + rng() % 255));
        CHECK(code_of([&] { restore_bytes(flipped); }) == Errc::CorruptSnapshot);
    }
    CHECK(code_of([&] { Engine::restore(std::string("/nonexistent/snap")); }) == Errc::Io);
}

TEST_CASE("snapshot: file round trip") {
    const Engine e = run(synth(8, 500, 0.1));
    const auto path = (std::filesystem::temp_directory_path() / "aclust_engine_test.snap").string();
    e.snapshot(path);
    CHECK(Engine::restore(path) == e);
    std::filesystem::remove(path);
}

TEST_CASE("pipelined ingest matches direct processing") {
    const auto s = synth(31, 2500, 0.2, 1.6);
    const auto text = encode_text(s);
    for (std::size_t cap : {std::size_t{0}, std::size_t{1}, std::size_t{64}}) {
        std::istringstream in(text);
        TextReader reader(in);
        Engine e;
        CHECK(ingest(reader, e, cap) == s.size());
        CHECK(e == run(s));
    }
}

TEST_CASE("pipelined ingest surfaces parser and engine errors") {
    const auto s = synth(32, 200, 0.2);
    auto text = encode_text(s);
    text += "garbage\n";
    {
        std::istringstream in(text);
        TextReader reader(in);
        Engine e;
        CHECK(code_of([&] { ingest(reader, e, 8); }) == Errc::SyntaxError);
        CHECK(e.num_transactions() == s.size());
    }
    auto broken = s;
    broken.push_back(build::spend(12345, {build::op(999, 0)}, {build::p2pkh(1, "x")}));
    broken.push_back(build::coinbase(12346, {build::p2pkh(1, "y")}));
    {
        std::istringstream in(encode_text(broken));
        TextReader reader(in);
        Engine e;
        CHECK(code_of([&] { ingest(reader, e, 8); }) == Errc::UnknownOutpoint);
        CHECK(e.num_transactions() == s.size());
    }
}
