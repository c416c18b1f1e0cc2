#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mlt {

class graph_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class parse_error : public graph_error {
public:
    using graph_error::graph_error;
};

using Edge = std::pair<int, int>;

/// Mixed graph on vertices 1..p with directed edges i->j and bidirected
/// edges i<->j. Immutable after construction; edge sets are kept sorted
/// and deduplicated, bidirected pairs stored with smaller vertex first.
class MixedGraph {
public:
    MixedGraph(int p, std::vector<Edge> directed, std::vector<Edge> bidirected);

    int p() const { return p_; }
    const std::vector<Edge>& directed() const { return directed_; }
    const std::vector<Edge>& bidirected() const { return bidirected_; }

    bool has_directed(int i, int j) const;
    bool has_bidirected(int i, int j) const;
    bool adjacent(int i, int j) const;

    /// pa(j) = {k : k -> j}, sorted.
    std::vector<int> parents(int j) const;

private:
    int p_;
    std::vector<Edge> directed_;
    std::vector<Edge> bidirected_;
};

/// Connected components C_1,...,C_l of the bidirected part, ordered by
/// smallest contained vertex, together with their parent closures Pa(C_j).
struct ComponentDecomposition {
    std::vector<std::vector<int>> components;
    std::vector<std::vector<int>> parent_closures;

    std::size_t size() const { return components.size(); }
};

struct MltReport {
    int threshold_zero_mean;
    int threshold_unknown_mean;
    int achieving_component;  // 0-based index into decomposition
    ComponentDecomposition decomposition;
};

MixedGraph parse_graph(const std::string& text);
std::string serialize_graph(const MixedGraph& g);

ComponentDecomposition bidirected_components(const MixedGraph& g);
MltReport mlt_zero_mean(const MixedGraph& g);
bool is_acyclic(const MixedGraph& g);

/// Completes each bidirected component to a clique; directed part unchanged.
MixedGraph saturate(const MixedGraph& g);

/// Subgraph on Pa(C_j), relabeled 1..|Pa(C_j)| preserving vertex order.
/// labels[k] is the original vertex carried by new vertex k+1; core holds
/// the relabeled members of C_j.
struct ComponentSubgraph {
    MixedGraph graph;
    std::vector<int> labels;
    std::vector<int> core;
};

ComponentSubgraph component_subgraph(const MixedGraph& g, int j);

/// H keeps the bidirected part plus one outgoing edge per external parent
/// (toward its smallest-labeled child in the core); h_bidirected converts
/// those directed edges to bidirected ones and is connected.
struct ReductionPair {
    MixedGraph h;
    MixedGraph h_bidirected;
};

ReductionPair reduction_subgraph(const MixedGraph& gj);

/// Vertex order of a connected bidirected graph whose every suffix induces
/// a connected subgraph. Verified before returning. The second form pins
/// the final vertex (0 leaves the choice to the algorithm).
std::vector<int> peripheral_ordering(const MixedGraph& g);
std::vector<int> peripheral_ordering(const MixedGraph& g, int last);

/// Built-in graph families: "experiment", "directed-cycle",
/// "bidirected-path", "bidirected-complete", "fig1a", "fig1b".
MixedGraph make_graph(const std::string& kind, int p);

}  // namespace mlt
