#pragma once

// Measurement series over a completed engine: window counts, ratio series
// with their upper bounds, size histograms, super-cluster shares, merge
// increase quantiles and anomaly flags. Everything here is a pure function
// of engine state.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "aclust/engine.hpp"
#include "aclust/tx_metrics.hpp"

namespace aclust {

struct WindowSpec {
    enum class Mode : std::uint8_t { CalendarMonth, TransactionCount };

    Mode mode = Mode::CalendarMonth;
    std::uint64_t size = 1;  // transactions per window in count mode

    static WindowSpec month() { return {Mode::CalendarMonth, 1}; }
    static WindowSpec count(std::uint64_t n);
};

/// Half-open window. Unix seconds in month mode, ordinals in count mode.
struct Window {
    std::uint64_t start = 0;
    std::uint64_t end = 0;

    friend bool operator==(const Window&, const Window&) = default;
};

struct WindowCounts {
    Window window;
    std::uint64_t transactions = 0;
    std::uint64_t new_addresses = 0;
    std::uint64_t clusters_reaching_size_2 = 0;
    // Clusters with >= 2 addresses once every transaction up to this window is applied.
    std::int64_t clusters_ge2_cumulative = 0;

    friend bool operator==(const WindowCounts&, const WindowCounts&) = default;
};

std::vector<WindowCounts> window_counts(const EngineLog& log, WindowSpec spec);

struct RatioRow {
    Window window;
    std::uint64_t transactions = 0;
    std::uint64_t new_addresses = 0;
    std::uint64_t merging_txs = 0;
    std::uint64_t addressable_outputs = 0;
    std::uint64_t nontrivial_txs = 0;

    double new_addresses_per_tx() const { return ratio(new_addresses); }
    double merging_txs_per_tx() const { return ratio(merging_txs); }
    double addressable_outputs_per_tx() const { return ratio(addressable_outputs); }
    double nontrivial_txs_per_tx() const { return ratio(nontrivial_txs); }
    /// Address reuse gap (addressable - new) and merge gap (nontrivial - merging), per transaction.
    double reuse_gap() const { return addressable_outputs_per_tx() - new_addresses_per_tx(); }
    double merge_gap() const { return nontrivial_txs_per_tx() - merging_txs_per_tx(); }

  private:
    double ratio(std::uint64_t x) const { return static_cast<double>(x) / static_cast<double>(transactions); }
};

/// Windows without transactions are omitted.
std::vector<RatioRow> ratio_series(const EngineLog& log, WindowSpec spec);

/// counts[k] = clusters with size in [10^k, 10^(k+1)), for sizes >= 2.
struct SizeHistogram {
    std::vector<std::uint64_t> counts;

    std::uint64_t total() const noexcept;
    friend bool operator==(const SizeHistogram&, const SizeHistogram&) = default;
};

SizeHistogram size_histogram(const ClusterState& state);

struct SuperclusterStats {
    std::uint64_t count = 0;
    double address_share_all = 0.0;
    double address_share_ge2 = 0.0;
    double output_share = 0.0;
    double input_share = 0.0;

    std::uint64_t addresses_covered = 0;
    std::uint64_t total_addresses = 0;
    std::uint64_t addresses_in_ge2 = 0;
    std::uint64_t outputs_covered = 0;
    std::uint64_t total_outputs = 0;
    std::uint64_t inputs_covered = 0;
    std::uint64_t total_inputs = 0;

    std::vector<std::pair<AddressId, std::uint64_t>> superclusters;
    // Clusters at or above max_size, left out of every figure above.
    std::vector<std::pair<AddressId, std::uint64_t>> excluded;
};

SuperclusterStats supercluster_stats(const Engine& engine, std::uint64_t min_size = 1000,
                                     std::uint64_t max_size = 10'000'000);

inline const std::vector<std::uint64_t> kDefaultQuantiles{100, 1000, 10000, 100000};

/// 1-based nearest rank of the (q-1)-th q-quantile among n sorted values:
/// ceil((q-1) * n / q).
std::uint64_t nearest_rank(std::uint64_t q, std::uint64_t n);

struct QuantileRow {
    std::uint64_t window_index = 0;
    std::uint64_t n = 0;
    // One entry per q; nullopt when the window has no increases.
    std::vector<std::optional<std::uint64_t>> values;

    friend bool operator==(const QuantileRow&, const QuantileRow&) = default;
};

struct QuantileTable {
    std::vector<std::uint64_t> q_list;
    std::uint64_t window_size = 0;
    std::vector<QuantileRow> rows;
};

/// Pools increases per window of `window_size` transactions (by event
/// ordinal) over [0, num_transactions). Throws InvalidQ for q < 2.
QuantileTable merge_increase_quantiles(std::span<const MergeEvent> events, std::uint64_t num_transactions,
                                       std::uint64_t window_size = 250000,
                                       const std::vector<std::uint64_t>& q_list = kDefaultQuantiles);

struct TxRange {
    enum class Kind : std::uint8_t { Ordinal, Timestamp };

    Kind kind = Kind::Ordinal;
    std::uint64_t begin = 0;
    std::uint64_t end = UINT64_MAX;  // exclusive

    static TxRange all() { return {}; }
    static TxRange ordinals(std::uint64_t b, std::uint64_t e) { return {Kind::Ordinal, b, e}; }
    static TxRange timestamps(std::uint64_t b, std::uint64_t e) { return {Kind::Timestamp, b, e}; }
    bool contains(Ordinal ordinal, std::uint64_t timestamp) const noexcept;
};

struct FlaggedTransaction {
    Ordinal ordinal = 0;
    Txid txid{};
    std::uint64_t max_increase = 0;
    // Current cluster of the transaction's inputs.
    AddressId cluster{};

    friend bool operator==(const FlaggedTransaction&, const FlaggedTransaction&) = default;
};

/// Top ceil(fraction * transactions-in-range) merging transactions by their
/// largest single increase, ties to the smaller ordinal. Throws
/// InvalidParams for fraction outside (0, 1] and EmptyRange when the range
/// holds no transactions.
std::vector<FlaggedTransaction> flag_anomalous_transactions(const Engine& engine, double fraction = 0.0001,
                                                            TxRange range = TxRange::all());

struct FlaggedCluster {
    AddressId representative{};
    std::uint64_t size = 0;
    std::vector<MergeEvent> events;
};

/// Clusters with at least one merge that united two or more components of
/// size >= large_threshold. Throws InvalidParams for a threshold below 2.
std::vector<FlaggedCluster> flag_anomalous_clusters(const Engine& engine, std::uint64_t large_threshold);

// CSV emitters. Headers are fixed; see docs/FORMATS.md.
void write_window_counts_csv(std::ostream& out, std::span<const WindowCounts> rows);
void write_ratio_series_csv(std::ostream& out, std::span<const RatioRow> rows);
void write_histogram_csv(std::ostream& out, const SizeHistogram& histogram);
void write_quantiles_csv(std::ostream& out, const QuantileTable& table);
void write_superclusters_csv(std::ostream& out, const SuperclusterStats& stats);
void write_flagged_transactions_csv(std::ostream& out, std::span<const FlaggedTransaction> rows, const Engine& engine);
void write_flagged_clusters_csv(std::ostream& out, std::span<const FlaggedCluster> rows, const Engine& engine);

/// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace aclust
