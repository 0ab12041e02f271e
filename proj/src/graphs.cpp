#include "aclust/graphs.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

namespace aclust {

BipartiteGraph bipartite_subgraph(const Engine& engine, AddressId cluster) {
    if (index_of(cluster) >= engine.num_addresses()) {
        throw Error(Errc::UnknownCluster, "address id " + std::to_string(index_of(cluster)));
    }
    const auto& state = engine.clusters();
    BipartiteGraph g;
    g.cluster = state.representative(cluster);

    std::unordered_map<std::uint32_t, std::size_t> vertex_of;
    for (std::uint32_t i = index_of(g.cluster); i < engine.num_addresses(); ++i) {
        const auto id = address_id(i);
        if (state.representative(id) != g.cluster) continue;
        vertex_of.emplace(i, g.addresses.size());
        g.addresses.push_back({id, engine.external(id), engine.balance(id)});
    }

    const auto& log = engine.log();
    for (Ordinal ord = 0; ord < log.txs.size(); ++ord) {
        const auto& tx = log.txs[ord];
        if (tx.resolved_input_count == 0) continue;
        const auto inputs = engine.input_addresses(tx);
        if (inputs.empty() || state.representative(inputs.front()) != g.cluster) continue;
        const auto t = g.transactions.size();
        g.transactions.push_back({ord, tx.txid});
        for (const auto a : inputs) g.edges.emplace_back(t, vertex_of.at(index_of(a)));
    }
    return g;
}

namespace {

std::vector<std::pair<AddressId, Satoshi>> received_by_cluster(const Engine& engine) {
    std::map<AddressId, Satoshi> totals;
    const auto& index = engine.outpoints();
    for (const auto& e : index.entries()) {
        const auto addrs = index.addresses(e);
        if (addrs.empty()) continue;
        totals[engine.find(addrs.front())] += e.value;
    }
    return {totals.begin(), totals.end()};
}

std::vector<AddressId> select_clusters(const Engine& engine, const FlowSelection& sel) {
    std::vector<AddressId> reps;
    if (!sel.explicit_clusters.empty()) {
        for (const auto a : sel.explicit_clusters) {
            if (index_of(a) >= engine.num_addresses()) {
                throw Error(Errc::UnknownCluster, "address id " + std::to_string(index_of(a)));
            }
            reps.push_back(engine.find(a));
        }
    } else {
        std::vector<std::pair<AddressId, std::uint64_t>> ranked;
        if (sel.largest == FlowSelection::Largest::ByAddressCount) {
            ranked = engine.clusters().clusters();
        } else {
            for (const auto& [rep, sat] : received_by_cluster(engine)) ranked.emplace_back(rep, sat);
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        if (ranked.size() > sel.top_n) ranked.resize(sel.top_n);
        for (const auto& r : ranked) reps.push_back(r.first);
    }
    std::sort(reps.begin(), reps.end());
    reps.erase(std::unique(reps.begin(), reps.end()), reps.end());
    return reps;
}

}  // namespace

FlowGraph flow_graph(const Engine& engine, const FlowSelection& selection, Satoshi min_flow,
                     bool include_self_loops) {
    FlowGraph g;
    const auto reps = select_clusters(engine, selection);
    std::unordered_map<std::uint32_t, std::size_t> vertex_of;
    for (const auto rep : reps) {
        vertex_of.emplace(index_of(rep), g.vertices.size());
        g.vertices.push_back({rep, engine.cluster_size(rep), std::nullopt, std::nullopt});
    }

    const auto& index = engine.outpoints();
    const auto& log = engine.log();
    std::map<std::pair<std::size_t, std::size_t>, Satoshi> flows;
    for (Ordinal ord = 0; ord < log.txs.size(); ++ord) {
        const auto& tx = log.txs[ord];
        if (tx.coinbase) continue;

        const auto inputs = engine.input_addresses(tx);
        std::optional<AddressId> source;
        if (!inputs.empty()) {
            source = engine.find(inputs.front());
            for (const auto a : inputs) {
                if (engine.find(a) != *source) {
                    throw Error(Errc::InvariantViolation, "transaction inputs span several clusters", ord);
                }
            }
        }
        const auto from = source ? vertex_of.find(index_of(*source)) : vertex_of.end();

        for (std::uint64_t k = 0; k < tx.output_count; ++k) {
            const auto& out = index.entry(tx.first_output + k);
            g.total += out.value;
            const auto addrs = index.addresses(out);
            if (from == vertex_of.end() || addrs.empty()) {
                g.unselected += out.value;
                continue;
            }
            const auto to = vertex_of.find(index_of(engine.find(addrs.front())));
            if (to == vertex_of.end()) {
                g.unselected += out.value;
                continue;
            }
            flows[{from->second, to->second}] += out.value;
        }
    }

    for (const auto& [key, weight] : flows) {
        const bool self = key.first == key.second;
        if ((self && !include_self_loops) || weight < min_flow) {
            g.filtered += weight;
            continue;
        }
        g.exported += weight;
        g.edges.push_back({key.first, key.second, weight});
    }
    return g;
}

namespace {

// RFC 4180 field splitting for one line.
bool split_csv(const std::string& line, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            if (!field.empty() || was_quoted) return false;
            quoted = was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else {
            if (was_quoted) return false;
            field += c;
        }
    }
    if (quoted) return false;
    fields.push_back(std::move(field));
    return true;
}

}  // namespace

std::vector<TagEntry> parse_tags(std::istream& in) {
    std::vector<TagEntry> tags;
    std::set<std::string> seen;
    std::string line;
    std::vector<std::string> fields;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!split_csv(line, fields) || fields.size() != 3) {
            throw Error(Errc::MalformedTagFile, "expected address,label,category", line_no);
        }
        if (line_no == 1 && fields[0] == "address" && fields[1] == "label" && fields[2] == "category") continue;
        TagEntry tag;
        tag.address = fields[0];
        tag.label = fields[1];
        if (tag.address.empty() || !parse_tag_category(fields[2], tag.category)) {
            throw Error(Errc::MalformedTagFile, "bad address or category \"" + fields[2] + "\"", line_no);
        }
        if (!seen.insert(tag.address).second) {
            throw Error(Errc::MalformedTagFile, "address tagged twice: " + tag.address, line_no);
        }
        tags.push_back(std::move(tag));
    }
    return tags;
}

std::vector<TagConflict> apply_tags(FlowGraph& graph, const Engine& engine, const std::vector<TagEntry>& tags) {
    std::unordered_map<std::uint32_t, std::size_t> vertex_of;
    for (std::size_t i = 0; i < graph.vertices.size(); ++i) {
        vertex_of.emplace(index_of(graph.vertices[i].representative), i);
    }
    std::map<std::size_t, std::vector<TagEntry>> by_vertex;
    for (const auto& tag : tags) {
        const auto id = engine.lookup(tag.address);
        if (!id) continue;
        const auto it = vertex_of.find(index_of(engine.find(*id)));
        if (it != vertex_of.end()) by_vertex[it->second].push_back(tag);
    }

    std::vector<TagConflict> conflicts;
    for (auto& [v, list] : by_vertex) {
        auto& vertex = graph.vertices[v];
        const bool agree = std::all_of(list.begin(), list.end(), [&](const TagEntry& t) {
            return t.label == list.front().label && t.category == list.front().category;
        });
        if (agree) {
            vertex.label = list.front().label;
            vertex.category = list.front().category;
        } else {
            vertex.label.reset();
            vertex.category.reset();
            conflicts.push_back({vertex.representative, std::move(list)});
        }
    }
    return conflicts;
}

std::string_view category_color(std::optional<TagCategory> category) noexcept {
    if (!category) return "gray";
    switch (*category) {
        case TagCategory::DarknetMarket: return "red";
        case TagCategory::Gambling: return "purple";
        case TagCategory::Exchange: return "green";
        case TagCategory::MiningPool: return "blue";
        case TagCategory::PaymentProcessor: return "orange";
        case TagCategory::Other: return "yellow";
    }
    return "gray";
}

namespace {

std::string dot_quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    out += '"';
    return out;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string addr_node(AddressId a) { return "a" + std::to_string(index_of(a)); }
std::string tx_node(Ordinal o) { return "t" + std::to_string(o); }
std::string cluster_node(AddressId a) { return "c" + std::to_string(index_of(a)); }

struct GraphmlKey {
    const char* id;
    const char* domain;
    const char* type;
};

void graphml_open(std::ostream& out, std::initializer_list<GraphmlKey> keys, const char* edge_default) {
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n";
    for (const auto& k : keys) {
        out << "  <key id=\"" << k.id << "\" for=\"" << k.domain << "\" attr.name=\"" << k.id << "\" attr.type=\""
            << k.type << "\"/>\n";
    }
    out << "  <graph id=\"G\" edgedefault=\"" << edge_default << "\">\n";
}

void graphml_close(std::ostream& out) { out << "  </graph>\n</graphml>\n"; }

void data(std::ostream& out, const char* key, std::string_view value) {
    out << "<data key=\"" << key << "\">" << xml_escape(value) << "</data>";
}

}  // namespace

void export_dot(std::ostream& out, const BipartiteGraph& g) {
    out << "graph " << dot_quote("cluster_" + std::to_string(index_of(g.cluster))) << " {\n";
    out << "  node [style=filled];\n";
    for (const auto& a : g.addresses) {
        out << "  " << addr_node(a.id) << " [kind=\"address\", label=" << dot_quote(a.external)
            << ", fillcolor=\"white\", current_sat=" << a.balance.current << ", max_sat=" << a.balance.alltime_max
            << "];\n";
    }
    for (const auto& t : g.transactions) {
        out << "  " << tx_node(t.ordinal) << " [kind=\"transaction\", label=\"" << t.ordinal << "\", txid=\""
            << to_hex(t.txid) << "\", fillcolor=\"gray\"];\n";
    }
    for (const auto& [t, a] : g.edges) {
        out << "  " << tx_node(g.transactions[t].ordinal) << " -- " << addr_node(g.addresses[a].id) << ";\n";
    }
    out << "}\n";
}

void export_graphml(std::ostream& out, const BipartiteGraph& g) {
    graphml_open(out,
                 {{"kind", "node", "string"},
                  {"label", "node", "string"},
                  {"fillcolor", "node", "string"},
                  {"current_sat", "node", "long"},
                  {"max_sat", "node", "long"},
                  {"txid", "node", "string"},
                  {"ordinal", "node", "long"}},
                 "undirected");
    for (const auto& a : g.addresses) {
        out << "    <node id=\"" << addr_node(a.id) << "\">";
        data(out, "kind", "address");
        data(out, "label", a.external);
        data(out, "fillcolor", "white");
        data(out, "current_sat", std::to_string(a.balance.current));
        data(out, "max_sat", std::to_string(a.balance.alltime_max));
        out << "</node>\n";
    }
    for (const auto& t : g.transactions) {
        out << "    <node id=\"" << tx_node(t.ordinal) << "\">";
        data(out, "kind", "transaction");
        data(out, "fillcolor", "gray");
        data(out, "txid", to_hex(t.txid));
        data(out, "ordinal", std::to_string(t.ordinal));
        out << "</node>\n";
    }
    for (const auto& [t, a] : g.edges) {
        out << "    <edge source=\"" << tx_node(g.transactions[t].ordinal) << "\" target=\""
            << addr_node(g.addresses[a].id) << "\"/>\n";
    }
    graphml_close(out);
}

void export_dot(std::ostream& out, const FlowGraph& g, const Engine& engine) {
    out << "digraph flows {\n";
    out << "  node [style=filled];\n";
    for (const auto& v : g.vertices) {
        out << "  " << cluster_node(v.representative)
            << " [label=" << dot_quote(v.label ? *v.label : engine.external(v.representative)) << ", size=" << v.size
            << ", category=\"" << (v.category ? tag_category_name(*v.category) : std::string_view("untagged"))
            << "\", fillcolor=\"" << category_color(v.category) << "\"];\n";
    }
    for (const auto& e : g.edges) {
        out << "  " << cluster_node(g.vertices[e.from].representative) << " -> "
            << cluster_node(g.vertices[e.to].representative) << " [weight_sat=" << e.weight << "];\n";
    }
    out << "}\n";
}

void export_graphml(std::ostream& out, const FlowGraph& g, const Engine& engine) {
    graphml_open(out,
                 {{"label", "node", "string"},
                  {"size", "node", "long"},
                  {"category", "node", "string"},
                  {"fillcolor", "node", "string"},
                  {"weight_sat", "edge", "long"}},
                 "directed");
    for (const auto& v : g.vertices) {
        out << "    <node id=\"" << cluster_node(v.representative) << "\">";
        data(out, "label", v.label ? *v.label : engine.external(v.representative));
        data(out, "size", std::to_string(v.size));
        data(out, "category", v.category ? tag_category_name(*v.category) : std::string_view("untagged"));
        data(out, "fillcolor", category_color(v.category));
        out << "</node>\n";
    }
    for (const auto& e : g.edges) {
        out << "    <edge source=\"" << cluster_node(g.vertices[e.from].representative) << "\" target=\""
            << cluster_node(g.vertices[e.to].representative) << "\">";
        data(out, "weight_sat", std::to_string(e.weight));
        out << "</edge>\n";
    }
    graphml_close(out);
}

}  // namespace aclust
