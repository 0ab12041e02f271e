#include "aclust/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "aclust/pipeline.hpp"

namespace aclust::cli {

namespace fs = std::filesystem;

int exit_code_for(Errc code) noexcept {
    switch (code) {
        case Errc::Io: return kIoError;
        case Errc::ScriptArityViolation:
        case Errc::CoinbaseShapeViolation:
        case Errc::EmptyOutputs:
        case Errc::SyntaxError:
        case Errc::ValidationError:
        case Errc::BadMagic:
        case Errc::BadVersion:
        case Errc::TruncatedRecord: return kFormatError;
        case Errc::DuplicateTxid:
        case Errc::UnknownOutpoint:
        case Errc::DoubleSpend:
        case Errc::UnknownAddress:
        case Errc::NotARepresentative:
        case Errc::UnknownCluster: return kDataError;
        case Errc::CorruptSnapshot:
        case Errc::VersionMismatch: return kSnapshotError;
        case Errc::InvalidParams:
        case Errc::InvalidQ:
        case Errc::EmptyRange:
        case Errc::MalformedTagFile: return kParamError;
        case Errc::InvariantViolation: return kInternalError;
    }
    return kInternalError;
}

namespace {

void feed_inputs(const RunConfig& config, Engine& engine) {
    if (config.format == InputFormat::Synthetic) {
        for (const auto& tx : generate_synthetic(config.synth)) engine.process_transaction(tx);
        return;
    }
    const auto format = config.format == InputFormat::Text ? StreamFormat::Text : StreamFormat::Binary;
    for (const auto& path : config.inputs) {
        FileRecordSource source(path, format, engine.num_transactions());
        ingest(source.reader(), engine, config.queue_capacity);
    }
}

std::string render(const auto& fn) {
    std::ostringstream out;
    fn(out);
    return std::move(out).str();
}

AddressId largest_cluster(const Engine& engine) {
    AddressId best{};
    std::uint64_t best_size = 0;
    for (const auto& [rep, size] : engine.clusters().clusters()) {
        if (size > best_size) {
            best = rep;
            best_size = size;
        }
    }
    return best;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

Engine load_engine(const RunConfig& config, bool allow_snapshot) {
    const bool have_input = config.format == InputFormat::Synthetic || !config.inputs.empty();
    if (!have_input) {
        if (allow_snapshot && config.snapshot) return Engine::restore(*config.snapshot);
        throw Error(Errc::InvalidParams, "no input: give --input, --format synthetic or --snapshot");
    }
    Engine engine(config.mode);
    feed_inputs(config, engine);
    return engine;
}

Artifacts render_summary(const Engine& engine, const RunConfig& config) {
    const auto stats = supercluster_stats(engine, config.min_size, config.max_size);
    return {{"summary.csv", render([&](std::ostream& o) {
                 o << "metric,value\n";
                 o << "transactions," << engine.num_transactions() << '\n';
                 o << "addresses," << engine.num_addresses() << '\n';
                 o << "outputs," << engine.outpoints().size() << '\n';
                 o << "inputs," << engine.log().spent_entries.size() << '\n';
                 o << "clusters," << engine.clusters().num_clusters() << '\n';
                 o << "clusters_ge2," << engine.clusters().num_clusters_ge2() << '\n';
                 o << "merge_events," << engine.log().merges.size() << '\n';
                 o << "superclusters," << stats.count << '\n';
                 o << "excluded_clusters," << stats.excluded.size() << '\n';
             })}};
}

Artifacts render_metrics(const Engine& engine, const RunConfig& config) {
    const auto counts = window_counts(engine.log(), config.window);
    const auto ratios = ratio_series(engine.log(), config.window);
    return {{"window_counts.csv", render([&](std::ostream& o) { write_window_counts_csv(o, counts); })},
            {"ratios.csv", render([&](std::ostream& o) { write_ratio_series_csv(o, ratios); })}};
}

Artifacts render_histogram(const Engine& engine) {
    const auto h = size_histogram(engine.clusters());
    return {{"histogram.csv", render([&](std::ostream& o) { write_histogram_csv(o, h); })}};
}

Artifacts render_quantiles(const Engine& engine, const RunConfig& config) {
    const auto table =
        merge_increase_quantiles(engine.log().merges, engine.num_transactions(), config.quantile_window, config.q_list);
    return {{"quantiles.csv", render([&](std::ostream& o) { write_quantiles_csv(o, table); })}};
}

Artifacts render_superclusters(const Engine& engine, const RunConfig& config) {
    const auto stats = supercluster_stats(engine, config.min_size, config.max_size);
    return {{"superclusters.csv", render([&](std::ostream& o) { write_superclusters_csv(o, stats); })},
            {"superclusters_list.csv", render([&](std::ostream& o) {
                 o << "cluster,size,status\n";
                 for (const auto& [rep, size] : stats.superclusters) {
                     o << csv_field(engine.external(rep)) << ',' << size << ",super\n";
                 }
                 for (const auto& [rep, size] : stats.excluded) {
                     o << csv_field(engine.external(rep)) << ',' << size << ",excluded\n";
                 }
             })}};
}

Artifacts render_flags(const Engine& engine, const RunConfig& config) {
    Artifacts out;
    std::vector<FlaggedTransaction> txs;
    if (engine.num_transactions() > 0) txs = flag_anomalous_transactions(engine, config.fraction, config.range);
    const auto clusters = flag_anomalous_clusters(engine, config.large_threshold);
    out["anomalous_transactions.csv"] =
        render([&](std::ostream& o) { write_flagged_transactions_csv(o, txs, engine); });
    out["anomalous_clusters.csv"] = render([&](std::ostream& o) { write_flagged_clusters_csv(o, clusters, engine); });
    return out;
}

Artifacts render_structure(const Engine& engine, const RunConfig& config) {
    BipartiteGraph g;
    if (config.cluster) {
        const auto id = engine.lookup(*config.cluster);
        if (!id) throw Error(Errc::UnknownCluster, *config.cluster);
        g = bipartite_subgraph(engine, *id);
    } else if (engine.num_addresses() > 0) {
        g = bipartite_subgraph(engine, largest_cluster(engine));
    }
    return {{"structure.dot", render([&](std::ostream& o) { export_dot(o, g); })},
            {"structure.graphml", render([&](std::ostream& o) { export_graphml(o, g); })}};
}

Artifacts render_flows(const Engine& engine, const RunConfig& config, std::ostream& warnings) {
    auto selection = config.flows;
    for (const auto& name : config.flow_clusters) {
        const auto id = engine.lookup(name);
        if (!id) throw Error(Errc::UnknownCluster, name);
        selection.explicit_clusters.push_back(*id);
    }
    auto g = flow_graph(engine, selection, config.min_flow, config.self_loops);
    if (config.tags) {
        std::ifstream in(*config.tags);
        if (!in) throw Error(Errc::Io, "cannot open " + *config.tags);
        for (const auto& conflict : apply_tags(g, engine, parse_tags(in))) {
            warnings << "warning: TagConflict in cluster " << engine.external(conflict.cluster) << ":";
            for (const auto& t : conflict.tags) {
                warnings << ' ' << t.address << '=' << t.label << '/' << tag_category_name(t.category);
            }
            warnings << '\n';
        }
    }
    return {{"flows.dot", render([&](std::ostream& o) { export_dot(o, g, engine); })},
            {"flows.graphml", render([&](std::ostream& o) { export_graphml(o, g, engine); })},
            {"flows_accounting.csv", render([&](std::ostream& o) {
                 o << "metric,satoshi\n";
                 o << "exported," << g.exported << '\n';
                 o << "filtered," << g.filtered << '\n';
                 o << "unselected," << g.unselected << '\n';
                 o << "total," << g.total << '\n';
             })}};
}

Artifacts render_clusters(const Engine& engine) {
    return {{"clusters.csv", render([&](std::ostream& o) {
                 o << "address,cluster,cluster_size,current_sat,max_sat\n";
                 for (std::uint32_t i = 0; i < engine.num_addresses(); ++i) {
                     const auto a = address_id(i);
                     const auto rep = engine.find(a);
                     const auto bal = engine.balance(a);
                     o << csv_field(engine.external(a)) << ',' << csv_field(engine.external(rep)) << ','
                       << engine.cluster_size(rep) << ',' << bal.current << ',' << bal.alltime_max << '\n';
                 }
             })}};
}

Artifacts render_all(const Engine& engine, const RunConfig& config, std::ostream& warnings) {
    Artifacts all;
    for (auto part : {render_summary(engine, config), render_clusters(engine), render_metrics(engine, config),
                      render_histogram(engine), render_quantiles(engine, config),
                      render_superclusters(engine, config), render_flags(engine, config),
                      render_structure(engine, config), render_flows(engine, config, warnings)}) {
        all.merge(part);
    }
    return all;
}

void write_artifacts(const std::string& dir, const Artifacts& artifacts) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::Io, "cannot create " + dir + ": " + ec.message());
    for (const auto& [name, contents] : artifacts) {
        const auto path = (fs::path(dir) / name).string();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << contents;
        if (!out.flush()) throw Error(Errc::Io, "write failure on " + path);
    }
}

void print_summary(std::ostream& out, const Engine& engine, const RunConfig& config) {
    const auto stats = supercluster_stats(engine, config.min_size, config.max_size);
    out << "transactions:     " << engine.num_transactions() << '\n'
        << "addresses:        " << engine.num_addresses() << '\n'
        << "clusters (>= 2):  " << engine.clusters().num_clusters_ge2() << '\n'
        << "super-clusters:   " << stats.count << " (sizes in [" << config.min_size << ", " << config.max_size
        << "), " << format_double(100.0 * stats.address_share_all) << "% of addresses)\n";
}

namespace {

int guarded(std::ostream& err, const auto& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInternalError;
    }
}

}  // namespace

int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto engine = load_engine(config, false);
        const auto artifacts = render_all(engine, config, err);
        write_artifacts(config.out_dir, artifacts);
        if (config.snapshot) engine.snapshot(*config.snapshot);
        print_summary(out, engine, config);
        return int{kOk};
    });
}

int cmd_resume(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!config.snapshot) throw Error(Errc::InvalidParams, "resume needs --snapshot");
        if (config.format == InputFormat::Synthetic) throw Error(Errc::InvalidParams, "resume reads suffix files");
        auto engine = Engine::restore(*config.snapshot);
        feed_inputs(config, engine);
        const auto artifacts = render_all(engine, config, err);
        write_artifacts(config.out_dir, artifacts);
        if (config.save_snapshot) engine.snapshot(*config.save_snapshot);
        print_summary(out, engine, config);
        return int{kOk};
    });
}

namespace {

struct RawOptions {
    std::string format = "text";
    std::string window = "month";
    std::string largest = "size";
    std::string range;
    std::string time_range;
    std::vector<std::string> inject;
    bool strict = false;
    bool lenient = false;
};

std::uint64_t parse_u64(const std::string& s, const char* what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw Error(Errc::InvalidParams, std::string("bad ") + what + ": " + s);
    }
    return v;
}

std::pair<std::uint64_t, std::uint64_t> parse_pair(const std::string& s, const char* what) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw Error(Errc::InvalidParams, std::string("expected A:B for ") + what);
    return {parse_u64(s.substr(0, colon), what), parse_u64(s.substr(colon + 1), what)};
}

void add_options(CLI::App& sub, RunConfig& c, RawOptions& raw) {
    sub.add_option("--input", c.inputs, "Input stream file(s), processed in order");
    sub.add_option("--format", raw.format, "Input format: text, binary or synthetic")
        ->check(CLI::IsMember({"text", "binary", "synthetic"}));
    sub.add_flag("--strict", raw.strict, "Unknown outpoints abort (default)");
    sub.add_flag("--lenient", raw.lenient, "Skip unknown outpoints for clustering");
    sub.add_option("--window", raw.window, "Window: 'month' or a transaction count");
    sub.add_option("--quantile-window", c.quantile_window, "Transactions per quantile window");
    sub.add_option("--q", c.q_list, "Quantile orders, comma separated")->delimiter(',');
    sub.add_option("--min-size", c.min_size, "Super-cluster lower size bound");
    sub.add_option("--max-size", c.max_size, "Super-cluster exclusive upper size bound");
    sub.add_option("--fraction", c.fraction, "Fraction of transactions to flag");
    sub.add_option("--range", raw.range, "Ordinal range A:B (half-open) for flagging");
    sub.add_option("--time-range", raw.time_range, "Timestamp range A:B (half-open) for flagging");
    sub.add_option("--large-threshold", c.large_threshold, "Cluster size counted as large");
    sub.add_option("--top-n", c.flows.top_n, "Largest clusters in the flow graph");
    sub.add_option("--largest", raw.largest, "Rank clusters by 'size' or 'received'")
        ->check(CLI::IsMember({"size", "received"}));
    sub.add_option("--flow-cluster", c.flow_clusters, "Explicit flow graph cluster (any member address)");
    sub.add_option("--min-flow", c.min_flow, "Drop flow edges lighter than this (satoshi)");
    sub.add_flag("--self-loops", c.self_loops, "Keep self-loop (change) flows");
    sub.add_option("--tags", c.tags, "Tag CSV: address,label,category");
    sub.add_option("--cluster", c.cluster, "Address whose cluster the structure graph shows");
    sub.add_option("--out", c.out_dir, "Output directory (synth: output file)");
    sub.add_option("--snapshot", c.snapshot, "Snapshot file");
    sub.add_option("--save-snapshot", c.save_snapshot, "Write the resumed state here (resume)");
    sub.add_option("--queue", c.queue_capacity, "Parser queue capacity; 0 parses inline");

    sub.add_option("--seed", c.synth.seed, "Generator seed");
    sub.add_option("--txs", c.synth.num_transactions, "Generated transactions");
    sub.add_option("--p-reuse", c.synth.p_reuse, "Probability an output reuses an address");
    sub.add_option("--mean-in", c.synth.mean_inputs, "Mean inputs per transaction");
    sub.add_option("--mean-out", c.synth.mean_outputs, "Mean outputs per transaction");
    sub.add_option("--op-return", c.synth.frac_op_return, "Fraction of OP_RETURN outputs");
    sub.add_option("--multisig", c.synth.frac_multisig, "Fraction of multisig outputs");
    sub.add_option("--coinbase-every", c.synth.coinbase_every, "Coinbase period in transactions");
    sub.add_option("--start-time", c.synth.start_time, "First timestamp (unix seconds)");
    sub.add_option("--mean-gap", c.synth.mean_gap_seconds, "Mean seconds between transactions");
    sub.add_option("--inject", raw.inject, "Large-large merge ORDINAL:SIZE (repeatable)");
}

void finish_options(RunConfig& c, const RawOptions& raw) {
    c.format = raw.format == "binary" ? InputFormat::Binary
               : raw.format == "synthetic" ? InputFormat::Synthetic
                                           : InputFormat::Text;
    if (raw.strict && raw.lenient) throw Error(Errc::InvalidParams, "--strict and --lenient are exclusive");
    c.mode = raw.lenient ? ResolutionMode::Lenient : ResolutionMode::Strict;
    c.window = raw.window == "month" ? WindowSpec::month() : WindowSpec::count(parse_u64(raw.window, "window"));
    c.flows.largest = raw.largest == "received" ? FlowSelection::Largest::ByTotalReceived
                                                : FlowSelection::Largest::ByAddressCount;
    if (!raw.range.empty() && !raw.time_range.empty()) {
        throw Error(Errc::InvalidParams, "--range and --time-range are exclusive");
    }
    if (!raw.range.empty()) {
        const auto [b, e] = parse_pair(raw.range, "range");
        c.range = TxRange::ordinals(b, e);
    }
    if (!raw.time_range.empty()) {
        const auto [b, e] = parse_pair(raw.time_range, "time range");
        c.range = TxRange::timestamps(b, e);
    }
    for (const auto& spec : raw.inject) {
        const auto [ordinal, size] = parse_pair(spec, "inject");
        if (size > 0xFFFFFFFFull) throw Error(Errc::InvalidParams, "injection size too large");
        c.synth.injections.push_back({ordinal, static_cast<std::uint32_t>(size)});
    }
}

int analysis(const RunConfig& c, std::ostream& out, std::ostream& err,
             const std::function<Artifacts(const Engine&)>& produce) {
    return guarded(err, [&] {
        const auto engine = load_engine(c, true);
        write_artifacts(c.out_dir, produce(engine));
        print_summary(out, engine, c);
        return int{kOk};
    });
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Address clustering under the multi-input heuristic, with clustering analytics", "aclust"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file of option values; command-line flags win");

    RunConfig config;
    RawOptions raw;
    struct Command {
        const char* name;
        const char* help;
    };
    const Command commands[] = {
        {"ingest-check", "Parse and validate an input stream"},
        {"cluster", "Cluster a stream; write clusters.csv and summary.csv"},
        {"metrics", "Window counts and ratio series"},
        {"histogram", "Cluster size histogram"},
        {"quantiles", "Merge increase quantiles"},
        {"superclusters", "Super-cluster statistics"},
        {"flag", "Flag anomalous merging transactions and clusters"},
        {"structure", "Bipartite address/transaction graph of one cluster"},
        {"flows", "Inter-cluster flow graph"},
        {"snapshot", "Cluster a stream and write a snapshot"},
        {"resume", "Restore a snapshot, apply a suffix stream, emit all artifacts"},
        {"synth", "Generate a synthetic transaction stream"},
        {"run", "Full pipeline: every artifact in one pass"},
    };
    // Options live on the top-level app; subcommands pass them through so
    // a config file can use plain keys.
    add_options(app, config, raw);
    std::map<std::string, CLI::App*> subs;
    for (const auto& cmd : commands) {
        auto* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->fallthrough();
        subs[cmd.name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    std::string name;
    for (const auto& [n, sub] : subs) {
        if (sub->parsed()) name = n;
    }
    const int status = guarded(err, [&] {
        finish_options(config, raw);
        return int{kOk};
    });
    if (status != kOk) return status;

    if (name == "run") return cmd_run(config, out, err);
    if (name == "resume") return cmd_resume(config, out, err);
    if (name == "synth") {
        return guarded(err, [&] {
            const auto records = generate_synthetic(config.synth);
            const auto format = raw.format == "binary" ? StreamFormat::Binary : StreamFormat::Text;
            write_stream_file(config.out_dir, format, records);
            out << "wrote " << records.size() << " transactions to " << config.out_dir << '\n';
            return int{kOk};
        });
    }
    if (name == "ingest-check") {
        return guarded(err, [&] {
            if (config.inputs.empty()) throw Error(Errc::InvalidParams, "ingest-check needs --input");
            if (config.format == InputFormat::Synthetic) throw Error(Errc::InvalidParams, "ingest-check reads files");
            const auto format = config.format == InputFormat::Text ? StreamFormat::Text : StreamFormat::Binary;
            std::uint64_t records = 0, inputs = 0, outputs = 0;
            for (const auto& path : config.inputs) {
                FileRecordSource source(path, format, records);
                while (auto tx = source.reader().next()) {
                    ++records;
                    inputs += tx->inputs.size();
                    outputs += tx->outputs.size();
                }
            }
            out << "records: " << records << "\ninputs:  " << inputs << "\noutputs: " << outputs << "\nok\n";
            return int{kOk};
        });
    }
    if (name == "snapshot") {
        return guarded(err, [&] {
            if (!config.snapshot) throw Error(Errc::InvalidParams, "snapshot needs --snapshot FILE");
            const auto engine = load_engine(config, false);
            engine.snapshot(*config.snapshot);
            print_summary(out, engine, config);
            return int{kOk};
        });
    }
    if (name == "cluster") {
        return guarded(err, [&] {
            const auto engine = load_engine(config, false);
            auto artifacts = render_clusters(engine);
            artifacts.merge(render_summary(engine, config));
            write_artifacts(config.out_dir, artifacts);
            if (config.snapshot) engine.snapshot(*config.snapshot);
            print_summary(out, engine, config);
            return int{kOk};
        });
    }
    if (name == "metrics") return analysis(config, out, err, [&](const Engine& e) { return render_metrics(e, config); });
    if (name == "histogram") return analysis(config, out, err, [&](const Engine& e) { return render_histogram(e); });
    if (name == "quantiles") {
        return analysis(config, out, err, [&](const Engine& e) { return render_quantiles(e, config); });
    }
    if (name == "superclusters") {
        return analysis(config, out, err, [&](const Engine& e) { return render_superclusters(e, config); });
    }
    if (name == "flag") return analysis(config, out, err, [&](const Engine& e) { return render_flags(e, config); });
    if (name == "structure") {
        return analysis(config, out, err, [&](const Engine& e) { return render_structure(e, config); });
    }
    if (name == "flows") {
        return analysis(config, out, err, [&](const Engine& e) { return render_flows(e, config, err); });
    }
    err << "error: unknown command\n";
    return kUsage;
}

}  // namespace aclust::cli
