#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "paresis/windowing.hpp"

namespace paresis {

// Discrete Bayesian network over clinical attributes: structure and bins come
// from a text config, CPTs from metadata counts, queries from exact variable
// elimination.

struct NodeSpec {
    std::string name;
    std::vector<std::string> states;  // ordered, at least 2
    // numeric nodes: k-1 strictly increasing edges split the real line into k
    // half-open bins [e_i, e_{i+1}); values below the first edge take state 0
    std::vector<double> bin_edges;
    std::vector<double> midpoints;  // one per state when the node is numeric

    bool numeric() const { return !midpoints.empty(); }
    size_t arity() const { return states.size(); }
    int state_index(std::string_view s) const;
    size_t bin_of(double value) const;
};

struct CausalGraph {
    std::vector<NodeSpec> nodes;
    std::vector<std::pair<size_t, size_t>> edges;  // parent -> child

    int node_index(std::string_view name) const;
    std::vector<size_t> parents_of(size_t child) const;  // ascending
};

// text format: `node <name>` blocks with `states ...` and optional
// `bins ...` / `midpoints ...` lines, then `edge <parent> -> <child>` lines;
// '#' starts a comment
CausalGraph parse_structure(const std::string& text);
CausalGraph load_structure(const std::string& path);

const char* default_structure_text();
CausalGraph default_structure();

// node name -> observed state value
using Evidence = std::map<std::string, std::string>;
// node name -> state name, one entry per graph node
using StateRecord = std::map<std::string, std::string>;

// bins a recording's sidecar facts into the graph's node states; every graph
// node must resolve (a missing UE-FMA score is a validation error)
StateRecord record_from_meta(const CausalGraph& g, const Recording& rec);

struct CausalModel {
    CausalGraph graph;
    double alpha = 1.0;
    // per node: parents sorted ascending; cpt laid out row-major with the
    // parent combination as the row (last parent fastest) and the node state
    // as the column; every row sums to 1
    std::vector<std::vector<size_t>> parents;
    std::vector<std::vector<double>> cpt;
};

// P(x | pa) = (count + alpha) / (row count + alpha * arity); alpha = 0 leaves
// unseen parent rows uniform and reports them through `warnings`
CausalModel fit_cpts(const CausalGraph& g, const std::vector<StateRecord>& records, double alpha,
                     std::vector<std::string>* warnings = nullptr);

// exact P(query | evidence); evidence on the query itself collapses to a
// point mass after the usual consistency check
std::vector<double> posterior(const CausalModel& m, const Evidence& evidence,
                              const std::string& query);

// sum over states of P(state | evidence) * midpoint(state)
double expected_value(const CausalModel& m, const Evidence& evidence, const std::string& node);

// definitional cross-check: full joint enumeration, refused above 1e6 states
std::vector<double> joint_enumeration_oracle(const CausalModel& m, const Evidence& evidence,
                                             const std::string& query);

std::string model_to_json(const CausalModel& m);
CausalModel model_from_json(const std::string& text);
void save_model(const CausalModel& m, const std::string& path);
CausalModel load_model(const std::string& path);

}  // namespace paresis
