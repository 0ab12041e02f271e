#include <doctest.h>

#include <random>
#include <sstream>

#include "aclust/analytics.hpp"
#include "aclust/synth.hpp"
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

Engine run(const std::vector<TxRecord>& s) {
    Engine e;
    for (const auto& tx : s) e.process_transaction(tx);
    return e;
}

std::vector<TxRecord> synth(std::uint64_t seed, std::uint64_t n, double p_reuse, double mean_in = 1.5) {
    SynthParams p;
    p.seed = seed;
    p.num_transactions = n;
    p.p_reuse = p_reuse;
    p.mean_inputs = mean_in;
    p.mean_gap_seconds = 3600 * 6;  // spans several months
    return generate_synthetic(p);
}

MergeEvent event_at(Ordinal ordinal, std::vector<std::uint64_t> increases) {
    MergeEvent e;
    e.tx_ordinal = ordinal;
    e.increases = std::move(increases);
    std::sort(e.increases.begin(), e.increases.end());
    e.component_sizes = e.increases;
    e.component_sizes.push_back(e.increases.empty() ? 1 : e.increases.back());
    return e;
}

constexpr std::uint64_t kJan2009 = 1230768000;  // 2009-01-01T00:00:00Z
constexpr std::uint64_t kFeb2009 = 1233446400;
constexpr std::uint64_t kMar2009 = 1235865600;

}  // namespace

TEST_CASE("window_counts: empty log and a single month") {
    CHECK(window_counts(EngineLog{}, WindowSpec::month()).empty());
    CHECK(ratio_series(EngineLog{}, WindowSpec::count(5)).empty());

    std::vector<TxRecord> s;
    for (int i = 0; i < 3; ++i) {
        s.push_back(build::coinbase(static_cast<std::uint64_t>(i),
                                    {build::p2pkh(1, "x" + std::to_string(i)), build::p2pkh(1, "y" + std::to_string(i))},
                                    kJan2009 + 100 + static_cast<std::uint64_t>(i)));
    }
    const auto rows = window_counts(run(s).log(), WindowSpec::month());
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].transactions == 3);
    CHECK(rows[0].new_addresses == 6);
    CHECK(rows[0].clusters_reaching_size_2 == 0);
    CHECK(rows[0].window == Window{kJan2009, kFeb2009});
}

TEST_CASE("window_counts: UTC month boundaries") {
    std::vector<TxRecord> s;
    s.push_back(build::coinbase(1, {build::p2pkh(1, "a"), build::p2pkh(1, "b")}, kFeb2009 - 1));
    s.push_back(build::spend(2, {build::op(1, 0), build::op(1, 1)}, {build::p2pkh(2, "c")}, kFeb2009));
    s.push_back(build::coinbase(3, {build::p2pkh(1, "d")}, kMar2009 + 5));
    const auto rows = window_counts(run(s).log(), WindowSpec::month());
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].window == Window{kJan2009, kFeb2009});
    CHECK(rows[1].window == Window{kFeb2009, kMar2009});
    CHECK(rows[1].clusters_reaching_size_2 == 1);
    CHECK(rows[1].clusters_ge2_cumulative == 1);
    CHECK(rows[2].clusters_ge2_cumulative == 1);
    // Leap-year February 2012.
    std::vector<TxRecord> leap{build::coinbase(9, {build::p2pkh(1, "l")}, 1330473600)};  // 2012-02-29
    CHECK(window_counts(run(leap).log(), WindowSpec::month())[0].window == Window{1328054400, 1330560000});
}

TEST_CASE("window_counts: count windows and recounts against the stream") {
    const auto s = synth(5, 5000, 0.3, 1.7);
    const Engine e = run(s);
    const auto r = oracle::replay(s);
    for (auto spec : {WindowSpec::month(), WindowSpec::count(700)}) {
        const auto rows = window_counts(e.log(), spec);
        std::uint64_t txs = 0, fresh = 0, births = 0;
        for (const auto& row : rows) {
            txs += row.transactions;
            fresh += row.new_addresses;
            births += row.clusters_reaching_size_2;
        }
        CHECK(txs == s.size());
        CHECK(fresh == r.names.size());
        CHECK(rows.back().clusters_ge2_cumulative == static_cast<std::int64_t>(e.clusters().num_clusters_ge2()));
        CHECK(births >= e.clusters().num_clusters_ge2());
    }
    const auto rows = window_counts(e.log(), WindowSpec::count(700));
    REQUIRE(rows.size() == 8);
    CHECK(rows.back().window == Window{4900, 5000});
    for (std::size_t w = 0; w < rows.size(); ++w) {
        std::uint64_t fresh = 0;
        for (auto i = rows[w].window.start; i < rows[w].window.end; ++i) fresh += r.tx_new[i];
        CHECK(rows[w].new_addresses == fresh);
    }
    CHECK(code_of([] { WindowSpec::count(0); }) == Errc::InvalidParams);
}

TEST_CASE("ratio_series: bounds hold and recount matches the stream") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto s = synth(seed, 3000, 0.1 * static_cast<double>(seed), 1.4 + 0.1 * static_cast<double>(seed));
        const Engine e = run(s);
        const auto r = oracle::replay(s);
        const auto rows = ratio_series(e.log(), WindowSpec::count(500));
        for (const auto& row : rows) {
            CHECK(row.new_addresses <= row.addressable_outputs);
            CHECK(row.merging_txs <= row.nontrivial_txs);
            std::uint64_t addressable = 0, nontrivial = 0;
            for (auto i = row.window.start; i < row.window.end; ++i) {
                addressable += oracle::addressable(s[i]);
                nontrivial += r.tx_inputs[i].size() >= 2 ? 1 : 0;
            }
            CHECK(row.addressable_outputs == addressable);
            CHECK(row.nontrivial_txs == nontrivial);
            CHECK(row.reuse_gap() >= 0.0);
            CHECK(row.merge_gap() >= 0.0);
        }
    }
}

TEST_CASE("ratio_series: bounds are tight without reuse") {
    SynthParams p;
    p.seed = 17;
    p.num_transactions = 4000;
    p.p_reuse = 0.0;
    p.mean_inputs = 2.0;
    p.frac_multisig = 0.0;
    p.frac_op_return = 0.0;
    const Engine e = run(generate_synthetic(p));
    for (const auto& row : ratio_series(e.log(), WindowSpec::count(250))) {
        CHECK(row.new_addresses == row.addressable_outputs);
        CHECK(row.merging_txs == row.nontrivial_txs);
    }
}

TEST_CASE("ratio_series: single trivial transaction window") {
    std::vector<TxRecord> s{build::coinbase(1, {build::p2pkh(5, "a")})};
    const auto rows = ratio_series(run(s).log(), WindowSpec::month());
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].merging_txs_per_tx() == 0.0);
    CHECK(rows[0].new_addresses_per_tx() == 1.0);
}

TEST_CASE("size_histogram: decade bins") {
    ClusterState st;
    auto grow = [&](std::uint32_t n) {
        const auto first = index_of(st.add());
        for (std::uint32_t i = 1; i < n; ++i) {
            const auto x = index_of(st.add());
            st.unite_roots({st.find_root(first), st.find_root(x)});
        }
    };
    CHECK(size_histogram(st).counts.empty());
    grow(1);
    grow(1);
    CHECK(size_histogram(st).counts.empty());
    for (auto n : {2u, 3u, 15u, 1500u}) grow(n);
    const auto h = size_histogram(st);
    CHECK(h.counts == std::vector<std::uint64_t>{2, 1, 0, 1});
    CHECK(h.total() == st.num_clusters_ge2());

    std::ostringstream csv;
    write_histogram_csv(csv, h);
    CHECK(csv.str() == "bin_lower,bin_upper,clusters\n1,10,2\n10,100,1\n100,1000,0\n1000,10000,1\n");
}

TEST_CASE("size_histogram: matches oracle component sizes") {
    const auto s = synth(9, 6000, 0.4, 2.2);
    const auto sizes = oracle::component_sizes(oracle::components(oracle::replay(s)));
    std::vector<std::uint64_t> expect;
    for (const auto& [rep, size] : sizes) {
        if (size < 2) continue;
        std::size_t k = 0;
        for (auto v = size; v >= 10; v /= 10) ++k;
        if (expect.size() <= k) expect.resize(k + 1);
        ++expect[k];
    }
    CHECK(size_histogram(run(s).clusters()).counts == expect);
}

TEST_CASE("supercluster_stats") {
    SUBCASE("no large cluster") {
        const auto stats = supercluster_stats(run(synth(3, 500, 0.1)), 1000, 10'000'000);
        CHECK(stats.count == 0);
        CHECK(stats.address_share_all == 0.0);
        CHECK(stats.output_share == 0.0);
    }
    SUBCASE("one 1200-address cluster among 2000 addresses") {
        std::vector<TxRecord> s;
        std::vector<TxOutputDecl> big, small;
        for (int i = 0; i < 1200; ++i) big.push_back(build::p2pkh(1, "big" + std::to_string(i)));
        for (int i = 0; i < 800; ++i) small.push_back(build::p2pkh(1, "s" + std::to_string(i)));
        s.push_back(build::coinbase(1, big));
        s.push_back(build::coinbase(2, small));
        std::vector<OutPoint> ins;
        for (std::uint32_t v = 0; v < 1200; ++v) ins.push_back(build::op(1, v));
        s.push_back(build::spend(3, ins, {build::p2pkh(1200, "big0")}));
        const Engine e = run(s);
        const auto stats = supercluster_stats(e, 1000, 10'000'000);
        CHECK(stats.count == 1);
        CHECK(stats.address_share_all == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(stats.address_share_ge2 == 1.0);
        CHECK(stats.outputs_covered == 1201);
        CHECK(stats.total_outputs == 2001);
        CHECK(stats.inputs_covered == 1200);
        CHECK(stats.input_share == 1.0);

        // The same cluster above max_size is excluded and reported.
        const auto capped = supercluster_stats(e, 1000, 1100);
        CHECK(capped.count == 0);
        REQUIRE(capped.excluded.size() == 1);
        CHECK(capped.excluded[0].second == 1200);
        CHECK(capped.address_share_all == 0.0);
    }
}

TEST_CASE("nearest rank") {
    CHECK(nearest_rank(4, 4) == 3);
    CHECK(nearest_rank(100, 1) == 1);
    CHECK(nearest_rank(100, 100) == 99);
    CHECK(nearest_rank(100, 101) == 100);
    CHECK(nearest_rank(100000, 7) == 7);
    CHECK(nearest_rank(3, UINT64_MAX) == UINT64_MAX / 3 * 2);
    CHECK(code_of([] { nearest_rank(1, 5); }) == Errc::InvalidQ);
}

TEST_CASE("quantiles: worked values and edge cases") {
    std::vector<MergeEvent> ev{event_at(0, {1, 1}), event_at(1, {1, 2})};
    auto t = merge_increase_quantiles(ev, 10, 10, {4});
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].n == 4);
    CHECK(t.rows[0].values[0] == 1u);

    // All ones.
    std::vector<MergeEvent> ones;
    for (Ordinal i = 0; i < 500; ++i) ones.push_back(event_at(i, {1}));
    const auto flat = merge_increase_quantiles(ones, 500, 100);
    REQUIRE(flat.rows.size() == 5);
    for (const auto& v : flat.rows[2].values) CHECK(v == std::optional<std::uint64_t>(1));

    // Empty window emits an absent marker.
    t = merge_increase_quantiles(ev, 30, 10, {100});
    REQUIRE(t.rows.size() == 3);
    CHECK_FALSE(t.rows[1].values[0].has_value());
    std::ostringstream csv;
    write_quantiles_csv(csv, t);
    CHECK(csv.str() == "window_index,n,q100\n0,4,2\n1,0,\n2,0,\n");

    CHECK(code_of([&] { merge_increase_quantiles(ev, 10, 10, {100, 1}); }) == Errc::InvalidQ);
}

TEST_CASE("quantiles: random pools against the sorting oracle") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint64_t window = 1 + rng() % 50;
        const std::uint64_t txs = 1 + rng() % 400;
        std::vector<MergeEvent> events;
        std::vector<std::vector<std::uint64_t>> pools((txs + window - 1) / window);
        for (Ordinal o = 0; o < txs; ++o) {
            if (rng() % 3 != 0) continue;
            std::vector<std::uint64_t> inc(1 + rng() % 4);
            for (auto& x : inc) x = 1 + (rng() % 7 == 0 ? rng() % 100000 : rng() % 3);
            events.push_back(event_at(o, inc));
            for (auto x : inc) pools[o / window].push_back(x);
        }
        const std::vector<std::uint64_t> qs{2, 3, 100, 1000, 10000, 100000};
        const auto t = merge_increase_quantiles(events, txs, window, qs);
        REQUIRE(t.rows.size() == pools.size());
        for (std::size_t w = 0; w < pools.size(); ++w) {
            CHECK(t.rows[w].n == pools[w].size());
            std::optional<std::uint64_t> prev;
            for (std::size_t k = 0; k < qs.size(); ++k) {
                if (pools[w].empty()) {
                    CHECK_FALSE(t.rows[w].values[k].has_value());
                    continue;
                }
                CHECK(t.rows[w].values[k] == oracle::sorted_quantile(pools[w], qs[k]));
                if (prev) CHECK(*t.rows[w].values[k] >= *prev);
                prev = t.rows[w].values[k];
            }
        }
    }
}

TEST_CASE("flag_anomalous_transactions") {
    std::vector<TxRecord> s;
    // 12 addresses; 3 fan-outs; one cluster of 10 built in one tx, then a
    // 2-cluster merges into it.
    std::vector<TxOutputDecl> outs;
    for (int i = 0; i < 10; ++i) outs.push_back(build::p2pkh(1, "w" + std::to_string(i)));
    s.push_back(build::coinbase(1, outs));
    s.push_back(build::coinbase(2, {build::p2pkh(1, "p"), build::p2pkh(1, "q")}));
    std::vector<OutPoint> ins;
    for (std::uint32_t v = 0; v < 10; ++v) ins.push_back(build::op(1, v));
    s.push_back(build::spend(3, ins, {build::p2pkh(10, "w0")}));                                   // increases 1x9
    s.push_back(build::spend(4, {build::op(2, 0), build::op(2, 1)}, {build::p2pkh(2, "p")}));      // {1}
    s.push_back(build::spend(5, {build::op(3, 0), build::op(4, 0)}, {build::p2pkh(12, "z")}));     // {2}
    const Engine e = run(s);

    auto all = flag_anomalous_transactions(e, 1.0);
    REQUIRE(all.size() == 3);
    CHECK(all[0].ordinal == 4);
    CHECK(all[0].max_increase == 2);
    CHECK(all[1].ordinal == 2);  // tie at 1 broken by ordinal
    CHECK(all[2].ordinal == 3);
    for (const auto& f : all) CHECK(f.cluster == e.find("w0"));

    auto top = flag_anomalous_transactions(e, 0.2);  // ceil(0.2 * 5) = 1
    REQUIRE(top.size() == 1);
    CHECK(top[0].ordinal == 4);

    auto ranged = flag_anomalous_transactions(e, 1.0, TxRange::ordinals(2, 4));
    REQUIRE(ranged.size() == 2);
    CHECK(ranged[0].ordinal == 2);

    CHECK(code_of([&] { flag_anomalous_transactions(e, 1.0, TxRange::ordinals(10, 20)); }) == Errc::EmptyRange);
    CHECK(code_of([&] { flag_anomalous_transactions(e, 0.0); }) == Errc::InvalidParams);
    CHECK(code_of([&] { flag_anomalous_transactions(e, 1.5); }) == Errc::InvalidParams);
    CHECK(code_of([&] { flag_anomalous_transactions(Engine{}, 0.5); }) == Errc::EmptyRange);

    std::ostringstream csv;
    write_flagged_transactions_csv(csv, top, e);
    CHECK(csv.str() == "rank,ordinal,txid,max_increase,cluster\n1,4," + to_hex(build::txid(5)) + ",2,w0\n");
}

TEST_CASE("flag_anomalous_transactions: one giant among unit merges") {
    std::vector<TxRecord> s;
    std::vector<TxOutputDecl> outs;
    for (int i = 0; i < 200; ++i) outs.push_back(build::p2pkh(1, "g" + std::to_string(i)));
    s.push_back(build::coinbase(1, outs));
    std::vector<OutPoint> ins;
    for (std::uint32_t v = 0; v < 100; ++v) ins.push_back(build::op(1, v));
    s.push_back(build::spend(2, ins, {build::p2pkh(100, "g0")}));
    ins.clear();
    for (std::uint32_t v = 100; v < 200; ++v) ins.push_back(build::op(1, v));
    s.push_back(build::spend(3, ins, {build::p2pkh(100, "g100")}));
    for (std::uint64_t i = 0; i < 9995; ++i) {
        const auto id = 100 + 2 * i;
        s.push_back(build::coinbase(id, {build::p2pkh(1, "u" + std::to_string(2 * i)),
                                         build::p2pkh(1, "u" + std::to_string(2 * i + 1))}));
        if (i == 5000) {
            s.push_back(build::spend(50, {build::op(2, 0), build::op(3, 0)}, {build::p2pkh(200, "g0")}));
            continue;
        }
        s.push_back(build::spend(id + 1, {build::op(id, 0), build::op(id, 1)}, {build::p2pkh(2, "u" + std::to_string(2 * i))}));
    }
    const Engine e = run(s);
    REQUIRE(e.num_transactions() == 19993);
    const auto flagged = flag_anomalous_transactions(e, 0.0001 * 10000.0 / 19993.0);
    REQUIRE(flagged.size() == 1);
    CHECK(flagged[0].max_increase == 100);
    CHECK(flagged[0].txid == build::txid(50));
}

TEST_CASE("flag_anomalous_clusters") {
    std::vector<TxRecord> s;
    std::vector<TxOutputDecl> outs;
    for (int i = 0; i < 110; ++i) outs.push_back(build::p2pkh(1, "a" + std::to_string(i)));
    outs.push_back(build::p2pkh(1, "lone"));
    s.push_back(build::coinbase(1, outs));
    std::vector<OutPoint> ins;
    for (std::uint32_t v = 0; v < 50; ++v) ins.push_back(build::op(1, v));
    s.push_back(build::spend(2, ins, {build::p2pkh(50, "a0")}));
    ins.clear();
    for (std::uint32_t v = 50; v < 110; ++v) ins.push_back(build::op(1, v));
    s.push_back(build::spend(3, ins, {build::p2pkh(60, "a50")}));
    Engine e = run(s);
    // Singleton-into-large merges only: nothing flagged.
    CHECK(flag_anomalous_clusters(e, 2).empty());
    e.process_transaction(build::spend(4, {build::op(2, 0), build::op(3, 0), build::op(1, 110)}, {build::p2pkh(1, "z")}));
    const auto flagged = flag_anomalous_clusters(e, 50);
    REQUIRE(flagged.size() == 1);
    CHECK(flagged[0].representative == e.find("a0"));
    CHECK(flagged[0].size == 111);
    REQUIRE(flagged[0].events.size() == 1);
    CHECK(flagged[0].events[0].component_sizes == std::vector<std::uint64_t>{1, 50, 60});
    CHECK(flag_anomalous_clusters(e, 51).empty());
    CHECK(code_of([&] { flag_anomalous_clusters(e, 1); }) == Errc::InvalidParams);
}

TEST_CASE("analytics are pure") {
    const Engine e = run(synth(40, 2000, 0.2, 1.8));
    auto render = [&] {
        std::ostringstream out;
        write_window_counts_csv(out, window_counts(e.log(), WindowSpec::month()));
        write_ratio_series_csv(out, ratio_series(e.log(), WindowSpec::month()));
        write_quantiles_csv(out, merge_increase_quantiles(e.log().merges, e.num_transactions(), 300));
        write_superclusters_csv(out, supercluster_stats(e, 10, 1000));
        return out.str();
    };
    CHECK(render() == render());
}

TEST_CASE("format_double is shortest round-trip") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
}
