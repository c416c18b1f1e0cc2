#include "mlt/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace mlt {

namespace {

void check_vertex(int v, int p, const std::string& what) {
    if (v < 1 || v > p) {
        throw graph_error(what + ": vertex " + std::to_string(v) +
                          " out of range 1.." + std::to_string(p));
    }
}

std::vector<Edge> canonicalize_directed(std::vector<Edge> edges, int p) {
    for (const auto& [i, j] : edges) {
        check_vertex(i, p, "directed edge");
        check_vertex(j, p, "directed edge");
        if (i == j) {
            throw graph_error("self-loop " + std::to_string(i) + " -> " +
                              std::to_string(j) + " is not allowed");
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<Edge> canonicalize_bidirected(std::vector<Edge> edges, int p) {
    for (auto& [i, j] : edges) {
        check_vertex(i, p, "bidirected edge");
        check_vertex(j, p, "bidirected edge");
        if (i == j) {
            throw graph_error("self-loop " + std::to_string(i) + " <-> " +
                              std::to_string(j) + " is not allowed");
        }
        if (i > j) std::swap(i, j);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

// Connected components of an undirected adjacency structure, ordered by
// smallest contained vertex.
std::vector<std::vector<int>> undirected_components(
    int p, const std::vector<std::vector<int>>& adj) {
    std::vector<int> comp(p + 1, -1);
    std::vector<std::vector<int>> out;
    for (int v = 1; v <= p; ++v) {
        if (comp[v] != -1) continue;
        const int id = static_cast<int>(out.size());
        std::vector<int> members;
        std::vector<int> stack{v};
        comp[v] = id;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            members.push_back(u);
            for (int w : adj[u]) {
                if (comp[w] == -1) {
                    comp[w] = id;
                    stack.push_back(w);
                }
            }
        }
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    return out;
}

bool connected_on(const std::vector<int>& verts,
                  const std::vector<std::vector<int>>& adj) {
    if (verts.empty()) return true;
    std::set<int> vs(verts.begin(), verts.end());
    std::set<int> seen;
    std::vector<int> stack{verts.front()};
    seen.insert(verts.front());
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int w : adj[u]) {
            if (vs.count(w) && !seen.count(w)) {
                seen.insert(w);
                stack.push_back(w);
            }
        }
    }
    return seen.size() == vs.size();
}

}  // namespace

MixedGraph::MixedGraph(int p, std::vector<Edge> directed,
                       std::vector<Edge> bidirected)
    : p_(p),
      directed_(canonicalize_directed(std::move(directed), p)),
      bidirected_(canonicalize_bidirected(std::move(bidirected), p)) {
    if (p < 1) throw graph_error("graph needs at least one vertex");
}

bool MixedGraph::has_directed(int i, int j) const {
    return std::binary_search(directed_.begin(), directed_.end(), Edge{i, j});
}

bool MixedGraph::has_bidirected(int i, int j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(bidirected_.begin(), bidirected_.end(), Edge{i, j});
}

bool MixedGraph::adjacent(int i, int j) const {
    return has_directed(i, j) || has_directed(j, i) || has_bidirected(i, j);
}

std::vector<int> MixedGraph::parents(int j) const {
    std::vector<int> out;
    for (const auto& [a, b] : directed_) {
        if (b == j) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
}

MixedGraph parse_graph(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    int p = -1;
    std::vector<Edge> directed;
    std::vector<Edge> bidirected;

    auto fail = [&](const std::string& msg) -> void {
        throw parse_error("line " + std::to_string(lineno) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++lineno;
        // strip trailing CR and surrounding whitespace
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' ||
                                 line.back() == '\t'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        line = line.substr(start);
        if (line[0] == '#') continue;

        std::istringstream ls(line);
        if (p < 0) {
            std::string key;
            ls >> key;
            if (key != "p") fail("expected 'p <integer>' header, got '" + line + "'");
            if (!(ls >> p) || p < 1) fail("invalid vertex count");
            std::string rest;
            if (ls >> rest) fail("trailing tokens after vertex count");
            continue;
        }
        int a = 0, b = 0;
        std::string arrow;
        if (!(ls >> a >> arrow >> b)) fail("malformed edge line '" + line + "'");
        std::string rest;
        if (ls >> rest) fail("trailing tokens on edge line");
        if (arrow != "->" && arrow != "<->") fail("unknown edge kind '" + arrow + "'");
        if (a < 1 || a > p || b < 1 || b > p) fail("vertex index out of range");
        if (a == b) fail("self-loop " + std::to_string(a) + " " + arrow + " " + std::to_string(b));
        if (arrow == "->") directed.emplace_back(a, b);
        else bidirected.emplace_back(a, b);
    }
    if (p < 0) throw parse_error("missing 'p <integer>' header");
    return MixedGraph(p, std::move(directed), std::move(bidirected));
}

std::string serialize_graph(const MixedGraph& g) {
    std::ostringstream out;
    out << "p " << g.p() << "\n";
    for (const auto& [i, j] : g.directed()) out << i << " -> " << j << "\n";
    for (const auto& [i, j] : g.bidirected()) out << i << " <-> " << j << "\n";
    return out.str();
}

ComponentDecomposition bidirected_components(const MixedGraph& g) {
    std::vector<std::vector<int>> adj(g.p() + 1);
    for (const auto& [i, j] : g.bidirected()) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    ComponentDecomposition dec;
    dec.components = undirected_components(g.p(), adj);
    for (const auto& comp : dec.components) {
        std::set<int> pa(comp.begin(), comp.end());
        for (int v : comp) {
            for (int u : g.parents(v)) pa.insert(u);
        }
        dec.parent_closures.emplace_back(pa.begin(), pa.end());
    }
    return dec;
}

MltReport mlt_zero_mean(const MixedGraph& g) {
    MltReport rep;
    rep.decomposition = bidirected_components(g);
    int best = 0;
    int best_j = 0;
    for (std::size_t j = 0; j < rep.decomposition.size(); ++j) {
        const int size = static_cast<int>(rep.decomposition.parent_closures[j].size());
        if (size > best) {
            best = size;
            best_j = static_cast<int>(j);
        }
    }
    rep.threshold_zero_mean = best;
    rep.threshold_unknown_mean = best + 1;
    rep.achieving_component = best_j;
    return rep;
}

bool is_acyclic(const MixedGraph& g) {
    // Kahn topological sort on the directed part.
    std::vector<int> indeg(g.p() + 1, 0);
    std::vector<std::vector<int>> children(g.p() + 1);
    for (const auto& [i, j] : g.directed()) {
        ++indeg[j];
        children[i].push_back(j);
    }
    std::vector<int> stack;
    for (int v = 1; v <= g.p(); ++v) {
        if (indeg[v] == 0) stack.push_back(v);
    }
    int removed = 0;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        ++removed;
        for (int w : children[u]) {
            if (--indeg[w] == 0) stack.push_back(w);
        }
    }
    return removed == g.p();
}

MixedGraph saturate(const MixedGraph& g) {
    auto dec = bidirected_components(g);
    std::vector<Edge> bi = g.bidirected();
    for (const auto& comp : dec.components) {
        for (std::size_t a = 0; a < comp.size(); ++a) {
            for (std::size_t b = a + 1; b < comp.size(); ++b) {
                bi.emplace_back(comp[a], comp[b]);
            }
        }
    }
    return MixedGraph(g.p(), g.directed(), std::move(bi));
}

ComponentSubgraph component_subgraph(const MixedGraph& g, int j) {
    auto dec = bidirected_components(g);
    if (j < 0 || j >= static_cast<int>(dec.size())) {
        throw graph_error("component index " + std::to_string(j) +
                          " out of range");
    }
    const auto& comp = dec.components[j];
    const auto& pa = dec.parent_closures[j];

    std::vector<int> relabel(g.p() + 1, 0);
    for (std::size_t k = 0; k < pa.size(); ++k) relabel[pa[k]] = static_cast<int>(k) + 1;
    std::set<int> core_set(comp.begin(), comp.end());

    std::vector<Edge> directed;
    for (const auto& [a, b] : g.directed()) {
        if (core_set.count(b) && relabel[a] != 0) {
            directed.emplace_back(relabel[a], relabel[b]);
        }
    }
    std::vector<Edge> bidirected;
    for (const auto& [a, b] : g.bidirected()) {
        if (core_set.count(a) && core_set.count(b)) {
            bidirected.emplace_back(relabel[a], relabel[b]);
        }
    }
    ComponentSubgraph out{
        MixedGraph(static_cast<int>(pa.size()), std::move(directed),
                   std::move(bidirected)),
        pa, {}};
    for (int v : comp) out.core.push_back(relabel[v]);
    std::sort(out.core.begin(), out.core.end());
    return out;
}

ReductionPair reduction_subgraph(const MixedGraph& gj) {
    // Recover the core: heads of directed edges plus bidirected endpoints.
    std::set<int> core;
    for (const auto& [a, b] : gj.directed()) core.insert(b);
    for (const auto& [a, b] : gj.bidirected()) {
        core.insert(a);
        core.insert(b);
    }
    if (core.empty()) {
        if (gj.p() != 1) {
            throw graph_error("reduction_subgraph: edgeless input with p > 1 "
                              "is not a component subgraph");
        }
        core.insert(1);
    }
    std::vector<std::vector<int>> adj(gj.p() + 1);
    for (const auto& [a, b] : gj.bidirected()) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<int> core_list(core.begin(), core.end());
    if (!connected_on(core_list, adj)) {
        throw graph_error("reduction_subgraph: bidirected part is not "
                          "connected on the core");
    }
    std::vector<Edge> kept;
    for (int v = 1; v <= gj.p(); ++v) {
        if (core.count(v)) continue;
        // external vertex: keep its edge to the smallest-labeled child
        int child = 0;
        bool extra = false;
        for (const auto& [a, b] : gj.directed()) {
            if (a == v) {
                if (!core.count(b)) extra = true;
                else if (child == 0 || b < child) child = b;
            }
            if (b == v) extra = true;
        }
        for (const auto& [a, b] : gj.bidirected()) {
            if (a == v || b == v) extra = true;
        }
        if (child == 0 || extra) {
            throw graph_error("reduction_subgraph: vertex " + std::to_string(v) +
                              " is not an external parent of the core");
        }
        kept.emplace_back(v, child);
    }
    MixedGraph h(gj.p(), kept, gj.bidirected());
    std::vector<Edge> bi = gj.bidirected();
    for (const auto& e : kept) bi.push_back(e);
    MixedGraph h_bi(gj.p(), {}, std::move(bi));
    return {std::move(h), std::move(h_bi)};
}

std::vector<int> peripheral_ordering(const MixedGraph& g) {
    return peripheral_ordering(g, 0);
}

std::vector<int> peripheral_ordering(const MixedGraph& g, int last) {
    if (!g.directed().empty()) {
        throw graph_error("peripheral_ordering: graph has directed edges");
    }
    if (last < 0 || last > g.p()) {
        throw graph_error("peripheral_ordering: last vertex out of range");
    }
    std::vector<std::vector<int>> adj(g.p() + 1);
    for (const auto& [i, j] : g.bidirected()) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    std::vector<int> all(g.p());
    std::iota(all.begin(), all.end(), 1);
    if (!connected_on(all, adj)) {
        throw graph_error("peripheral_ordering: graph is not connected");
    }

    // Repeatedly remove the smallest vertex whose removal keeps the rest
    // connected; the removal order itself has connected suffixes. A
    // requested final vertex is never removed early; this is always
    // possible because a connected graph on two or more vertices has at
    // least two non-cut vertices.
    std::vector<int> remaining = all;
    std::vector<int> order;
    while (remaining.size() > 1) {
        bool found = false;
        for (std::size_t k = 0; k < remaining.size() && !found; ++k) {
            if (remaining[k] == last) continue;
            std::vector<int> rest;
            for (std::size_t l = 0; l < remaining.size(); ++l) {
                if (l != k) rest.push_back(remaining[l]);
            }
            if (connected_on(rest, adj)) {
                order.push_back(remaining[k]);
                remaining = std::move(rest);
                found = true;
            }
        }
        if (!found) {
            throw graph_error("peripheral_ordering: no removable vertex found");
        }
    }
    order.push_back(remaining.front());

    // verify suffix connectivity before returning
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        std::vector<int> suffix(order.begin() + static_cast<long>(i) + 1, order.end());
        if (!connected_on(suffix, adj)) {
            throw graph_error("peripheral_ordering: suffix connectivity "
                              "verification failed");
        }
    }
    return order;
}

MixedGraph make_graph(const std::string& kind, int p) {
    if (kind == "experiment") {
        if (p < 12 || p % 2 != 0) {
            throw graph_error("experiment graph needs even p >= 12");
        }
        const int h = p / 2;
        std::vector<Edge> d;
        for (int i = 1; i < h; ++i) d.emplace_back(i, i + 1);
        d.emplace_back(h, 1);
        for (int i = 1; i <= h - 3; ++i) d.emplace_back(i + 3, i);
        d.emplace_back(1, h - 2);
        d.emplace_back(2, h - 1);
        d.emplace_back(3, h);
        for (int i = 1; i <= h; ++i) d.emplace_back(h + i, i);
        return MixedGraph(p, std::move(d), {});
    }
    if (kind == "directed-cycle") {
        if (p < 3) throw graph_error("directed cycle needs p >= 3");
        std::vector<Edge> d;
        for (int i = 1; i < p; ++i) d.emplace_back(i, i + 1);
        d.emplace_back(p, 1);
        return MixedGraph(p, std::move(d), {});
    }
    if (kind == "bidirected-path") {
        if (p < 2) throw graph_error("bidirected path needs p >= 2");
        std::vector<Edge> b;
        for (int i = 1; i < p; ++i) b.emplace_back(i, i + 1);
        return MixedGraph(p, {}, std::move(b));
    }
    if (kind == "bidirected-complete") {
        if (p < 2) throw graph_error("complete bidirected graph needs p >= 2");
        std::vector<Edge> b;
        for (int i = 1; i <= p; ++i) {
            for (int j = i + 1; j <= p; ++j) b.emplace_back(i, j);
        }
        return MixedGraph(p, {}, std::move(b));
    }
    if (kind == "fig1a") {
        if (p != 0 && p != 6) throw graph_error("fig1a has p = 6");
        return MixedGraph(6,
                          {{1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}, {3, 5}, {4, 6}, {5, 6}},
                          {});
    }
    if (kind == "fig1b") {
        if (p != 0 && p != 6) throw graph_error("fig1b has p = 6");
        return MixedGraph(6,
                          {{1, 2}, {1, 3}, {2, 3}, {4, 2}, {3, 4}, {3, 5}, {4, 6}, {5, 6}},
                          {{4, 5}, {5, 6}});
    }
    throw graph_error("unknown graph kind '" + kind + "'");
}

}  // namespace mlt
