#include "aclust/analytics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

namespace aclust {

namespace {

// Proleptic Gregorian conversions (H. Hinnant's civil calendar algorithms).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::pair<std::int64_t, unsigned> year_month(std::int64_t days) {
    days += 719468;
    const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
    const auto doe = static_cast<unsigned>(days - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {y + (m <= 2), m};
}

/// Months since January 1970.
std::uint64_t month_key(std::uint64_t timestamp) {
    const auto [y, m] = year_month(static_cast<std::int64_t>(timestamp / 86400));
    return static_cast<std::uint64_t>((y - 1970) * 12 + (m - 1));
}

std::uint64_t month_start(std::uint64_t key) {
    const auto y = static_cast<std::int64_t>(1970 + key / 12);
    const auto m = static_cast<unsigned>(key % 12 + 1);
    return static_cast<std::uint64_t>(days_from_civil(y, m, 1)) * 86400;
}

std::uint64_t window_key(const TxLogEntry& tx, Ordinal ordinal, const WindowSpec& spec) {
    return spec.mode == WindowSpec::Mode::CalendarMonth ? month_key(tx.timestamp) : ordinal / spec.size;
}

Window window_of(std::uint64_t key, const WindowSpec& spec, std::uint64_t num_transactions) {
    if (spec.mode == WindowSpec::Mode::CalendarMonth) return {month_start(key), month_start(key + 1)};
    return {key * spec.size, std::min((key + 1) * spec.size, num_transactions)};
}

void check_spec(const WindowSpec& spec) {
    if (spec.mode == WindowSpec::Mode::TransactionCount && spec.size == 0) {
        throw Error(Errc::InvalidParams, "window size must be >= 1");
    }
}

struct Totals {
    std::uint64_t transactions = 0;
    std::uint64_t new_addresses = 0;
    std::uint64_t births = 0;
    std::int64_t ge2_delta = 0;
    std::uint64_t merging = 0;
    std::uint64_t addressable = 0;
    std::uint64_t nontrivial = 0;
};

std::map<std::uint64_t, Totals> accumulate(const EngineLog& log, const WindowSpec& spec) {
    check_spec(spec);
    std::map<std::uint64_t, Totals> windows;
    for (Ordinal i = 0; i < log.txs.size(); ++i) {
        const auto& tx = log.txs[i];
        auto& t = windows[window_key(tx, i, spec)];
        ++t.transactions;
        t.new_addresses += tx.new_address_count;
        t.ge2_delta += tx.ge2_delta;
        t.merging += tx.caused_merge ? 1 : 0;
        t.addressable += tx.addressable_output_count;
        t.nontrivial += tx.nontrivial ? 1 : 0;
    }
    for (const auto ordinal : log.births) {
        ++windows[window_key(log.txs[ordinal], ordinal, spec)].births;
    }
    return windows;
}

double share(std::uint64_t part, std::uint64_t whole) {
    return whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

WindowSpec WindowSpec::count(std::uint64_t n) {
    if (n == 0) throw Error(Errc::InvalidParams, "window size must be >= 1");
    return {Mode::TransactionCount, n};
}

std::vector<WindowCounts> window_counts(const EngineLog& log, WindowSpec spec) {
    std::vector<WindowCounts> out;
    std::int64_t running = 0;
    for (const auto& [key, t] : accumulate(log, spec)) {
        running += t.ge2_delta;
        out.push_back({window_of(key, spec, log.txs.size()), t.transactions, t.new_addresses, t.births, running});
    }
    return out;
}

std::vector<RatioRow> ratio_series(const EngineLog& log, WindowSpec spec) {
    std::vector<RatioRow> out;
    for (const auto& [key, t] : accumulate(log, spec)) {
        if (t.transactions == 0) continue;
        RatioRow row;
        row.window = window_of(key, spec, log.txs.size());
        row.transactions = t.transactions;
        row.new_addresses = t.new_addresses;
        row.merging_txs = t.merging;
        row.addressable_outputs = t.addressable;
        row.nontrivial_txs = t.nontrivial;
        out.push_back(row);
    }
    return out;
}

std::uint64_t SizeHistogram::total() const noexcept {
    std::uint64_t sum = 0;
    for (auto c : counts) sum += c;
    return sum;
}

SizeHistogram size_histogram(const ClusterState& state) {
    SizeHistogram h;
    for (const auto& [rep, size] : state.clusters()) {
        if (size < 2) continue;
        std::size_t decade = 0;
        for (auto s = size; s >= 10; s /= 10) ++decade;
        if (h.counts.size() <= decade) h.counts.resize(decade + 1, 0);
        ++h.counts[decade];
    }
    return h;
}

SuperclusterStats supercluster_stats(const Engine& engine, std::uint64_t min_size, std::uint64_t max_size) {
    SuperclusterStats stats;
    const auto& state = engine.clusters();
    stats.total_addresses = engine.num_addresses();

    std::vector<char> is_super_rep(engine.num_addresses(), 0);
    for (const auto& [rep, size] : state.clusters()) {
        if (size >= 2) stats.addresses_in_ge2 += size;
        if (size >= max_size) {
            stats.excluded.emplace_back(rep, size);
        } else if (size >= min_size) {
            stats.superclusters.emplace_back(rep, size);
            stats.addresses_covered += size;
            is_super_rep[index_of(rep)] = 1;
        }
    }
    stats.count = stats.superclusters.size();

    if (stats.count > 0) {
        std::vector<char> in_super(engine.num_addresses(), 0);
        for (std::uint32_t i = 0; i < engine.num_addresses(); ++i) {
            in_super[i] = is_super_rep[index_of(state.representative(address_id(i)))];
        }
        const auto& index = engine.outpoints();
        auto covered = [&](const OutputEntry& e) {
            const auto addrs = index.addresses(e);
            return std::any_of(addrs.begin(), addrs.end(), [&](AddressId a) { return in_super[index_of(a)] != 0; });
        };
        std::vector<char> entry_covered(index.size(), 0);
        for (std::uint64_t i = 0; i < index.size(); ++i) {
            entry_covered[i] = covered(index.entry(i)) ? 1 : 0;
            stats.outputs_covered += static_cast<std::uint64_t>(entry_covered[i]);
        }
        for (const auto e : engine.log().spent_entries) stats.inputs_covered += static_cast<std::uint64_t>(entry_covered[e]);
    }
    stats.total_outputs = engine.outpoints().size();
    stats.total_inputs = engine.log().spent_entries.size();

    stats.address_share_all = share(stats.addresses_covered, stats.total_addresses);
    stats.address_share_ge2 = share(stats.addresses_covered, stats.addresses_in_ge2);
    stats.output_share = share(stats.outputs_covered, stats.total_outputs);
    stats.input_share = share(stats.inputs_covered, stats.total_inputs);
    return stats;
}

std::uint64_t nearest_rank(std::uint64_t q, std::uint64_t n) {
    if (q < 2) throw Error(Errc::InvalidQ, "q must be >= 2, got " + std::to_string(q));
    // ceil((q-1) n / q) without overflowing for large n.
    const std::uint64_t whole = n / q;
    const std::uint64_t rest = n % q;
    return whole * (q - 1) + (rest * (q - 1) + q - 1) / q;
}

QuantileTable merge_increase_quantiles(std::span<const MergeEvent> events, std::uint64_t num_transactions,
                                       std::uint64_t window_size, const std::vector<std::uint64_t>& q_list) {
    if (window_size == 0) throw Error(Errc::InvalidParams, "quantile window size must be >= 1");
    for (auto q : q_list) {
        if (q < 2) throw Error(Errc::InvalidQ, "q must be >= 2, got " + std::to_string(q));
    }
    QuantileTable table;
    table.q_list = q_list;
    table.window_size = window_size;

    std::uint64_t windows = (num_transactions + window_size - 1) / window_size;
    for (const auto& e : events) windows = std::max(windows, e.tx_ordinal / window_size + 1);

    // Increases are small integers, so a per-window frequency table replaces sorting.
    std::vector<std::map<std::uint64_t, std::uint64_t>> freq(windows);
    std::vector<std::uint64_t> sizes(windows, 0);
    for (const auto& e : events) {
        const auto w = e.tx_ordinal / window_size;
        for (auto inc : e.increases) ++freq[w][inc];
        sizes[w] += e.increases.size();
    }

    table.rows.reserve(windows);
    for (std::uint64_t w = 0; w < windows; ++w) {
        QuantileRow row;
        row.window_index = w;
        row.n = sizes[w];
        for (auto q : q_list) {
            if (row.n == 0) {
                row.values.push_back(std::nullopt);
                continue;
            }
            const auto rank = nearest_rank(q, row.n);
            std::uint64_t seen = 0;
            for (const auto& [value, count] : freq[w]) {
                seen += count;
                if (seen >= rank) {
                    row.values.push_back(value);
                    break;
                }
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

bool TxRange::contains(Ordinal ordinal, std::uint64_t timestamp) const noexcept {
    const auto x = kind == Kind::Ordinal ? ordinal : timestamp;
    return x >= begin && x < end;
}

std::vector<FlaggedTransaction> flag_anomalous_transactions(const Engine& engine, double fraction, TxRange range) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(Errc::InvalidParams, "fraction must lie in (0, 1]");
    const auto& log = engine.log();
    std::uint64_t in_range = 0;
    for (Ordinal i = 0; i < log.txs.size(); ++i) in_range += range.contains(i, log.txs[i].timestamp) ? 1 : 0;
    if (in_range == 0) throw Error(Errc::EmptyRange, "no transactions in range");

    std::vector<FlaggedTransaction> candidates;
    for (const auto& e : log.merges) {
        if (!range.contains(e.tx_ordinal, log.txs[e.tx_ordinal].timestamp)) continue;
        candidates.push_back({e.tx_ordinal, e.txid, e.max_increase(), engine.find(e.representative)});
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        return a.max_increase != b.max_increase ? a.max_increase > b.max_increase : a.ordinal < b.ordinal;
    });
    // The small slack keeps e.g. 0.0001 * 10000 at exactly one.
    const auto keep = static_cast<std::uint64_t>(std::ceil(fraction * static_cast<double>(in_range) - 1e-9));
    if (candidates.size() > keep) candidates.resize(keep);
    return candidates;
}

std::vector<FlaggedCluster> flag_anomalous_clusters(const Engine& engine, std::uint64_t large_threshold) {
    if (large_threshold < 2) throw Error(Errc::InvalidParams, "large threshold must be >= 2");
    std::map<AddressId, FlaggedCluster> flagged;
    for (const auto& e : engine.log().merges) {
        const auto large = std::count_if(e.component_sizes.begin(), e.component_sizes.end(),
                                         [&](std::uint64_t s) { return s >= large_threshold; });
        if (large < 2) continue;
        const auto rep = engine.find(e.representative);
        auto& cluster = flagged[rep];
        cluster.representative = rep;
        cluster.size = engine.cluster_size(rep);
        cluster.events.push_back(e);
    }
    std::vector<FlaggedCluster> out;
    out.reserve(flagged.size());
    for (auto& [rep, cluster] : flagged) out.push_back(std::move(cluster));
    return out;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

void write_window_counts_csv(std::ostream& out, std::span<const WindowCounts> rows) {
    out << "window_start,window_end,transactions,new_addresses,clusters_reaching_size_2,clusters_ge2_cumulative\n";
    for (const auto& r : rows) {
        out << r.window.start << ',' << r.window.end << ',' << r.transactions << ',' << r.new_addresses << ','
            << r.clusters_reaching_size_2 << ',' << r.clusters_ge2_cumulative << '\n';
    }
}

void write_ratio_series_csv(std::ostream& out, std::span<const RatioRow> rows) {
    out << "window_start,window_end,transactions,new_addresses_per_tx,merging_txs_per_tx,"
           "addressable_outputs_per_tx,nontrivial_txs_per_tx,reuse_gap,merge_gap\n";
    for (const auto& r : rows) {
        out << r.window.start << ',' << r.window.end << ',' << r.transactions << ','
            << format_double(r.new_addresses_per_tx()) << ',' << format_double(r.merging_txs_per_tx()) << ','
            << format_double(r.addressable_outputs_per_tx()) << ',' << format_double(r.nontrivial_txs_per_tx())
            << ',' << format_double(r.reuse_gap()) << ',' << format_double(r.merge_gap()) << '\n';
    }
}

void write_histogram_csv(std::ostream& out, const SizeHistogram& histogram) {
    out << "bin_lower,bin_upper,clusters\n";
    std::uint64_t lower = 1;
    for (auto count : histogram.counts) {
        out << lower << ',' << lower * 10 << ',' << count << '\n';
        lower *= 10;
    }
}

void write_quantiles_csv(std::ostream& out, const QuantileTable& table) {
    out << "window_index,n";
    for (auto q : table.q_list) out << ",q" << q;
    out << '\n';
    for (const auto& row : table.rows) {
        out << row.window_index << ',' << row.n;
        for (const auto& v : row.values) {
            out << ',';
            if (v) out << *v;
        }
        out << '\n';
    }
}

void write_superclusters_csv(std::ostream& out, const SuperclusterStats& s) {
    out << "metric,value\n";
    out << "count," << s.count << '\n';
    out << "address_share_all," << format_double(s.address_share_all) << '\n';
    out << "address_share_ge2," << format_double(s.address_share_ge2) << '\n';
    out << "output_share," << format_double(s.output_share) << '\n';
    out << "input_share," << format_double(s.input_share) << '\n';
    out << "addresses_covered," << s.addresses_covered << '\n';
    out << "total_addresses," << s.total_addresses << '\n';
    out << "addresses_in_ge2," << s.addresses_in_ge2 << '\n';
    out << "outputs_covered," << s.outputs_covered << '\n';
    out << "total_outputs," << s.total_outputs << '\n';
    out << "inputs_covered," << s.inputs_covered << '\n';
    out << "total_inputs," << s.total_inputs << '\n';
    out << "excluded_clusters," << s.excluded.size() << '\n';
}

void write_flagged_transactions_csv(std::ostream& out, std::span<const FlaggedTransaction> rows,
                                    const Engine& engine) {
    out << "rank,ordinal,txid,max_increase,cluster\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out << i + 1 << ',' << r.ordinal << ',' << to_hex(r.txid) << ',' << r.max_increase << ','
            << engine.external(r.cluster) << '\n';
    }
}

void write_flagged_clusters_csv(std::ostream& out, std::span<const FlaggedCluster> rows, const Engine& engine) {
    out << "cluster,size,event_ordinal,event_txid,component_sizes\n";
    for (const auto& c : rows) {
        for (const auto& e : c.events) {
            out << engine.external(c.representative) << ',' << c.size << ',' << e.tx_ordinal << ',' << to_hex(e.txid)
                << ',';
            for (std::size_t i = 0; i < e.component_sizes.size(); ++i) {
                if (i) out << ' ';
                out << e.component_sizes[i];
            }
            out << '\n';
        }
    }
}

}  // namespace aclust
