#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aclust/analytics.hpp"
#include "aclust/codec.hpp"
#include "aclust/engine.hpp"
#include "aclust/graphs.hpp"
#include "aclust/synth.hpp"

namespace aclust::cli {

/// Process exit statuses, one per failure family.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kIoError = 2,
    kFormatError = 3,     // syntax, magic, version, truncation, record validation
    kDataError = 4,       // unknown outpoint, double spend, duplicate txid, unknown address/cluster
    kSnapshotError = 5,   // corrupt snapshot or version mismatch
    kParamError = 6,      // invalid parameters, q, range, tag file
    kInternalError = 7,
};

int exit_code_for(Errc code) noexcept;

enum class InputFormat : std::uint8_t { Text, Binary, Synthetic };

struct RunConfig {
    std::vector<std::string> inputs;
    InputFormat format = InputFormat::Text;
    SynthParams synth;
    ResolutionMode mode = ResolutionMode::Strict;

    WindowSpec window = WindowSpec::month();
    std::uint64_t quantile_window = 250000;
    std::vector<std::uint64_t> q_list = kDefaultQuantiles;

    std::uint64_t min_size = 1000;
    std::uint64_t max_size = 10'000'000;

    double fraction = 0.0001;
    TxRange range = TxRange::all();
    std::uint64_t large_threshold = 1000;

    FlowSelection flows;
    // External forms; when non-empty these replace the top-N selection.
    std::vector<std::string> flow_clusters;
    Satoshi min_flow = 0;
    bool self_loops = false;
    std::optional<std::string> tags;

    // External form of any member address; defaults to the largest cluster.
    std::optional<std::string> cluster;

    std::string out_dir = "out";
    std::optional<std::string> snapshot;
    std::optional<std::string> save_snapshot;
    std::size_t queue_capacity = 1024;
};

/// Builds engine state from the configured inputs (files in order, or the
/// synthetic generator), or restores it from `snapshot` when no input is
/// given.
Engine load_engine(const RunConfig& config, bool allow_snapshot);

/// Artifact name -> file contents. Rendering is pure; nothing touches disk.
using Artifacts = std::map<std::string, std::string>;

Artifacts render_summary(const Engine& engine, const RunConfig& config);
Artifacts render_metrics(const Engine& engine, const RunConfig& config);
Artifacts render_histogram(const Engine& engine);
Artifacts render_quantiles(const Engine& engine, const RunConfig& config);
Artifacts render_superclusters(const Engine& engine, const RunConfig& config);
Artifacts render_flags(const Engine& engine, const RunConfig& config);
Artifacts render_structure(const Engine& engine, const RunConfig& config);
Artifacts render_flows(const Engine& engine, const RunConfig& config, std::ostream& warnings);
Artifacts render_clusters(const Engine& engine);
Artifacts render_all(const Engine& engine, const RunConfig& config, std::ostream& warnings);

void write_artifacts(const std::string& dir, const Artifacts& artifacts);

/// Headline statistics printed after every clustering run.
void print_summary(std::ostream& out, const Engine& engine, const RunConfig& config);

/// Full pipeline: ingest, cluster, every analytics artifact, optional snapshot.
int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Restores `config.snapshot`, applies the suffix stream in `config.inputs`
/// and emits the same artifacts as cmd_run.
int cmd_resume(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Entry point for the `aclust` binary.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aclust::cli
