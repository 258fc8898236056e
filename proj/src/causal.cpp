#include "paresis/causal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "paresis/common.hpp"

namespace paresis {

int NodeSpec::state_index(std::string_view s) const {
    for (size_t i = 0; i < states.size(); ++i)
        if (states[i] == s) return static_cast<int>(i);
    return -1;
}

size_t NodeSpec::bin_of(double value) const {
    // count of edges <= value; edges are strictly increasing
    return static_cast<size_t>(
        std::upper_bound(bin_edges.begin(), bin_edges.end(), value) - bin_edges.begin());
}

int CausalGraph::node_index(std::string_view name) const {
    for (size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].name == name) return static_cast<int>(i);
    return -1;
}

std::vector<size_t> CausalGraph::parents_of(size_t child) const {
    std::vector<size_t> out;
    for (const auto& [p, c] : edges)
        if (c == child) out.push_back(p);
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

void check_acyclic(const CausalGraph& g) {
    const size_t n = g.nodes.size();
    std::vector<std::vector<size_t>> children(n);
    for (const auto& [p, c] : g.edges) children[p].push_back(c);

    std::vector<int> color(n, 0);  // 0 unseen, 1 on stack, 2 done
    std::vector<size_t> path;

    auto dfs = [&](auto&& self, size_t v) -> void {
        color[v] = 1;
        path.push_back(v);
        for (size_t w : children[v]) {
            if (color[w] == 1) {
                std::string msg = "structure contains a cycle: ";
                size_t start = 0;
                while (path[start] != w) ++start;
                for (size_t i = start; i < path.size(); ++i)
                    msg += g.nodes[path[i]].name + " -> ";
                msg += g.nodes[w].name;
                throw ConfigError(msg);
            }
            if (color[w] == 0) self(self, w);
        }
        path.pop_back();
        color[v] = 2;
    };
    for (size_t v = 0; v < n; ++v)
        if (color[v] == 0) dfs(dfs, v);
}

void validate_graph(const CausalGraph& g) {
    std::set<std::string> names;
    for (const NodeSpec& node : g.nodes) {
        if (!names.insert(node.name).second)
            throw ConfigError("duplicate node '" + node.name + "'");
        if (node.states.size() < 2)
            throw ConfigError("node '" + node.name + "' needs at least 2 states");
        std::set<std::string> st(node.states.begin(), node.states.end());
        if (st.size() != node.states.size())
            throw ConfigError("node '" + node.name + "' repeats a state");
        if (!node.bin_edges.empty()) {
            if (node.bin_edges.size() != node.states.size() - 1)
                throw ConfigError("node '" + node.name + "': " +
                                  std::to_string(node.states.size()) + " states need " +
                                  std::to_string(node.states.size() - 1) + " bin edges, got " +
                                  std::to_string(node.bin_edges.size()));
            for (size_t i = 1; i < node.bin_edges.size(); ++i)
                if (!(node.bin_edges[i - 1] < node.bin_edges[i]))
                    throw ConfigError("node '" + node.name + "': bin edges must increase");
        }
        if (!node.midpoints.empty() && node.midpoints.size() != node.states.size())
            throw ConfigError("node '" + node.name + "' needs one midpoint per state");
    }
    std::set<std::pair<size_t, size_t>> seen;
    for (const auto& [p, c] : g.edges) {
        if (p == c)
            throw ConfigError("structure contains a cycle: " + g.nodes[p].name + " -> " +
                              g.nodes[c].name);
        if (!seen.insert({p, c}).second)
            throw ConfigError("duplicate edge " + g.nodes[p].name + " -> " + g.nodes[c].name);
    }
    check_acyclic(g);
}

double parse_number(const std::string& tok, size_t lineno) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ConfigError("structure line " + std::to_string(lineno) + ": bad number '" + tok +
                          "'");
    return out;
}

}  // namespace

CausalGraph parse_structure(const std::string& text) {
    CausalGraph g;
    std::vector<std::tuple<std::string, std::string, size_t>> edge_names;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    NodeSpec* current = nullptr;

    while (std::getline(in, line)) {
        ++lineno;
        if (size_t hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;

        const std::string where = "structure line " + std::to_string(lineno);
        if (tok[0] == "node") {
            if (tok.size() != 2) throw ConfigError(where + ": expected 'node <name>'");
            g.nodes.push_back(NodeSpec{tok[1], {}, {}, {}});
            current = &g.nodes.back();
        } else if (tok[0] == "states") {
            if (!current) throw ConfigError(where + ": 'states' outside a node block");
            current->states.assign(tok.begin() + 1, tok.end());
        } else if (tok[0] == "bins") {
            if (!current) throw ConfigError(where + ": 'bins' outside a node block");
            for (size_t i = 1; i < tok.size(); ++i)
                current->bin_edges.push_back(parse_number(tok[i], lineno));
        } else if (tok[0] == "midpoints") {
            if (!current) throw ConfigError(where + ": 'midpoints' outside a node block");
            for (size_t i = 1; i < tok.size(); ++i)
                current->midpoints.push_back(parse_number(tok[i], lineno));
        } else if (tok[0] == "edge") {
            if (tok.size() != 4 || tok[2] != "->")
                throw ConfigError(where + ": expected 'edge <parent> -> <child>'");
            edge_names.emplace_back(tok[1], tok[3], lineno);
        } else {
            throw ConfigError(where + ": unknown directive '" + tok[0] + "'");
        }
    }

    for (const auto& [pname, cname, ln] : edge_names) {
        int p = g.node_index(pname), c = g.node_index(cname);
        if (p < 0)
            throw ConfigError("structure line " + std::to_string(ln) + ": unknown node '" +
                              pname + "'");
        if (c < 0)
            throw ConfigError("structure line " + std::to_string(ln) + ": unknown node '" +
                              cname + "'");
        g.edges.emplace_back(static_cast<size_t>(p), static_cast<size_t>(c));
    }
    validate_graph(g);
    return g;
}

CausalGraph load_structure(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open structure file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_structure(ss.str());
}

const char* default_structure_text() {
    return R"(# clinical attribute network
node Age
  states <55 55-70 >70
  bins 55 70
  midpoints 45 62.5 78

node Sex
  states F M

node Paretic
  states Left Right

node Impairment
  states Mild Moderate Severe

node Time
  states <90 90-365 >365
  bins 90 365
  midpoints 45 227.5 500

node UE-FMA
  states severe moderate mild
  bins 29 48
  midpoints 14 38 57

edge Age -> Paretic
edge Sex -> Paretic
edge Paretic -> Impairment
edge Time -> Impairment
edge Impairment -> UE-FMA
)";
}

CausalGraph default_structure() { return parse_structure(default_structure_text()); }

StateRecord record_from_meta(const CausalGraph& g, const Recording& rec) {
    StateRecord out;
    auto bin_state = [&](const NodeSpec& node, double value) -> std::string {
        if (node.bin_edges.empty())
            throw ConfigError("node '" + node.name + "' needs bins to ingest numeric metadata");
        return node.states[node.bin_of(value)];
    };
    auto named_state = [&](const NodeSpec& node, const std::string& value) -> std::string {
        if (node.state_index(value) < 0)
            throw ValidationError("recording '" + rec.id + "': state '" + value +
                                  "' not valid for node '" + node.name + "'");
        return value;
    };
    for (const NodeSpec& node : g.nodes) {
        if (node.name == "Age")
            out[node.name] = bin_state(node, static_cast<double>(rec.meta.age_years));
        else if (node.name == "Sex")
            out[node.name] = named_state(node, rec.meta.sex);
        else if (node.name == "Paretic")
            out[node.name] = named_state(node, rec.paretic_side);
        else if (node.name == "Impairment")
            out[node.name] = named_state(node, rec.meta.impairment);
        else if (node.name == "Time")
            out[node.name] = bin_state(node, rec.meta.time_since_stroke_days);
        else if (node.name == "UE-FMA") {
            if (!rec.meta.ue_fma)
                throw ValidationError("recording '" + rec.id + "': UE-FMA score missing");
            out[node.name] = bin_state(node, static_cast<double>(*rec.meta.ue_fma));
        } else {
            throw ConfigError("no metadata source for node '" + node.name + "'");
        }
    }
    return out;
}

CausalModel fit_cpts(const CausalGraph& g, const std::vector<StateRecord>& records, double alpha,
                     std::vector<std::string>* warnings) {
    if (alpha < 0.0) throw ConfigError("fit_cpts: negative pseudo-count");
    validate_graph(g);

    const size_t nn = g.nodes.size();
    CausalModel m;
    m.graph = g;
    m.alpha = alpha;
    m.parents.resize(nn);
    m.cpt.resize(nn);

    // resolve every record up front so errors name the offending record
    std::vector<std::vector<size_t>> states(records.size(), std::vector<size_t>(nn));
    for (size_t r = 0; r < records.size(); ++r) {
        for (size_t i = 0; i < nn; ++i) {
            auto it = records[r].find(g.nodes[i].name);
            if (it == records[r].end())
                throw ValidationError("record " + std::to_string(r) + " missing node '" +
                                      g.nodes[i].name + "'");
            int s = g.nodes[i].state_index(it->second);
            if (s < 0)
                throw ValidationError("record " + std::to_string(r) + ": state '" + it->second +
                                      "' not valid for node '" + g.nodes[i].name + "'");
            states[r][i] = static_cast<size_t>(s);
        }
    }

    for (size_t i = 0; i < nn; ++i) {
        m.parents[i] = g.parents_of(i);
        const size_t k = g.nodes[i].arity();
        size_t rows = 1;
        for (size_t p : m.parents[i]) rows *= g.nodes[p].arity();

        std::vector<double> counts(rows * k, 0.0);
        for (const std::vector<size_t>& st : states) {
            size_t row = 0;
            for (size_t p : m.parents[i]) row = row * g.nodes[p].arity() + st[p];
            counts[row * k + st[i]] += 1.0;
        }

        m.cpt[i].assign(rows * k, 0.0);
        for (size_t row = 0; row < rows; ++row) {
            double total = 0.0;
            for (size_t s = 0; s < k; ++s) total += counts[row * k + s];
            const double denom = total + alpha * static_cast<double>(k);
            if (denom == 0.0) {
                for (size_t s = 0; s < k; ++s)
                    m.cpt[i][row * k + s] = 1.0 / static_cast<double>(k);
                if (warnings)
                    warnings->push_back("node '" + g.nodes[i].name + "': parent combination " +
                                        std::to_string(row) +
                                        " unseen with no smoothing; using a uniform row");
            } else {
                for (size_t s = 0; s < k; ++s)
                    m.cpt[i][row * k + s] = (counts[row * k + s] + alpha) / denom;
            }
        }
    }
    return m;
}

namespace {

struct Factor {
    std::vector<size_t> vars;  // ascending node ids
    std::vector<size_t> card;
    std::vector<double> vals;  // row-major, last var fastest
};

size_t value_count(const std::vector<size_t>& card) {
    size_t n = 1;
    for (size_t c : card) n *= c;
    return n;
}

// strides into `f` aligned to a reference variable list (0 where absent)
std::vector<size_t> aligned_strides(const Factor& f, const std::vector<size_t>& ref_vars) {
    std::vector<size_t> own(f.vars.size());
    size_t acc = 1;
    for (size_t i = f.vars.size(); i-- > 0;) {
        own[i] = acc;
        acc *= f.card[i];
    }
    std::vector<size_t> out(ref_vars.size(), 0);
    for (size_t j = 0; j < ref_vars.size(); ++j)
        for (size_t i = 0; i < f.vars.size(); ++i)
            if (f.vars[i] == ref_vars[j]) out[j] = own[i];
    return out;
}

Factor multiply(const Factor& a, const Factor& b) {
    Factor r;
    std::set_union(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(),
                   std::back_inserter(r.vars));
    r.card.resize(r.vars.size());
    for (size_t j = 0; j < r.vars.size(); ++j) {
        for (size_t i = 0; i < a.vars.size(); ++i)
            if (a.vars[i] == r.vars[j]) r.card[j] = a.card[i];
        for (size_t i = 0; i < b.vars.size(); ++i)
            if (b.vars[i] == r.vars[j]) r.card[j] = b.card[i];
    }
    const std::vector<size_t> sa = aligned_strides(a, r.vars);
    const std::vector<size_t> sb = aligned_strides(b, r.vars);
    r.vals.assign(value_count(r.card), 0.0);

    std::vector<size_t> digit(r.vars.size(), 0);
    size_t ia = 0, ib = 0;
    for (size_t idx = 0; idx < r.vals.size(); ++idx) {
        r.vals[idx] = a.vals[ia] * b.vals[ib];
        for (size_t j = r.vars.size(); j-- > 0;) {
            if (++digit[j] < r.card[j]) {
                ia += sa[j];
                ib += sb[j];
                break;
            }
            ia -= sa[j] * (r.card[j] - 1);
            ib -= sb[j] * (r.card[j] - 1);
            digit[j] = 0;
        }
    }
    return r;
}

Factor sum_out(const Factor& f, size_t var) {
    Factor r;
    for (size_t i = 0; i < f.vars.size(); ++i)
        if (f.vars[i] != var) {
            r.vars.push_back(f.vars[i]);
            r.card.push_back(f.card[i]);
        }
    r.vals.assign(value_count(r.card), 0.0);
    const std::vector<size_t> sr = aligned_strides(r, f.vars);

    std::vector<size_t> digit(f.vars.size(), 0);
    size_t ir = 0;
    for (size_t idx = 0; idx < f.vals.size(); ++idx) {
        r.vals[ir] += f.vals[idx];
        for (size_t j = f.vars.size(); j-- > 0;) {
            if (++digit[j] < f.card[j]) {
                ir += sr[j];
                break;
            }
            ir -= sr[j] * (f.card[j] - 1);
            digit[j] = 0;
        }
    }
    return r;
}

Factor reduce(const Factor& f, size_t var, size_t state) {
    size_t pos = f.vars.size();
    for (size_t i = 0; i < f.vars.size(); ++i)
        if (f.vars[i] == var) pos = i;
    if (pos == f.vars.size()) return f;

    Factor r;
    for (size_t i = 0; i < f.vars.size(); ++i)
        if (i != pos) {
            r.vars.push_back(f.vars[i]);
            r.card.push_back(f.card[i]);
        }
    r.vals.assign(value_count(r.card), 0.0);

    std::vector<size_t> sf = aligned_strides(f, f.vars);
    std::vector<size_t> digit(r.vars.size(), 0);
    for (size_t idx = 0; idx < r.vals.size(); ++idx) {
        size_t fi = sf[pos] * state;
        size_t dj = 0;
        for (size_t i = 0; i < f.vars.size(); ++i)
            if (i != pos) fi += sf[i] * digit[dj++];
        r.vals[idx] = f.vals[fi];
        for (size_t j = r.vars.size(); j-- > 0;) {
            if (++digit[j] < r.card[j]) break;
            digit[j] = 0;
        }
    }
    return r;
}

void validate_model(const CausalModel& m) {
    validate_graph(m.graph);
    const size_t nn = m.graph.nodes.size();
    if (m.parents.size() != nn || m.cpt.size() != nn)
        throw ValidationError("model tables do not match the node list");
    for (size_t i = 0; i < nn; ++i) {
        if (m.parents[i] != m.graph.parents_of(i))
            throw ValidationError("node '" + m.graph.nodes[i].name +
                                  "': stored parents do not match the edge list");
        const size_t k = m.graph.nodes[i].arity();
        size_t rows = 1;
        for (size_t p : m.parents[i]) rows *= m.graph.nodes[p].arity();
        if (m.cpt[i].size() != rows * k)
            throw ValidationError("node '" + m.graph.nodes[i].name + "': table size " +
                                  std::to_string(m.cpt[i].size()) + " != " +
                                  std::to_string(rows * k));
        for (size_t row = 0; row < rows; ++row) {
            double sum = 0.0;
            for (size_t s = 0; s < k; ++s) {
                double p = m.cpt[i][row * k + s];
                if (p < 0.0 || p > 1.0)
                    throw ValidationError("node '" + m.graph.nodes[i].name +
                                          "': probability outside [0, 1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw ValidationError("node '" + m.graph.nodes[i].name + "': row " +
                                      std::to_string(row) + " sums to " + std::to_string(sum));
        }
    }
}

Factor cpt_factor(const CausalModel& m, size_t node) {
    const size_t k = m.graph.nodes[node].arity();
    Factor f;
    f.vars = m.parents[node];
    f.vars.push_back(node);
    std::sort(f.vars.begin(), f.vars.end());
    f.card.resize(f.vars.size());
    for (size_t i = 0; i < f.vars.size(); ++i) f.card[i] = m.graph.nodes[f.vars[i]].arity();
    f.vals.assign(value_count(f.card), 0.0);

    std::vector<size_t> digit(f.vars.size(), 0);
    for (size_t idx = 0; idx < f.vals.size(); ++idx) {
        size_t row = 0;
        for (size_t p : m.parents[node]) {
            size_t pos = static_cast<size_t>(
                std::lower_bound(f.vars.begin(), f.vars.end(), p) - f.vars.begin());
            row = row * m.graph.nodes[p].arity() + digit[pos];
        }
        size_t npos = static_cast<size_t>(
            std::lower_bound(f.vars.begin(), f.vars.end(), node) - f.vars.begin());
        f.vals[idx] = m.cpt[node][row * k + digit[npos]];
        for (size_t j = f.vars.size(); j-- > 0;) {
            if (++digit[j] < f.card[j]) break;
            digit[j] = 0;
        }
    }
    return f;
}

struct QueryContext {
    std::map<size_t, size_t> ev;  // node -> observed state
    size_t query = 0;
};

QueryContext resolve_query(const CausalModel& m, const Evidence& evidence,
                           const std::string& query) {
    QueryContext ctx;
    int qi = m.graph.node_index(query);
    if (qi < 0) throw ConfigError("unknown query node '" + query + "'");
    ctx.query = static_cast<size_t>(qi);
    for (const auto& [name, state] : evidence) {
        int ni = m.graph.node_index(name);
        if (ni < 0) throw ConfigError("unknown node '" + name + "' in evidence");
        int si = m.graph.nodes[static_cast<size_t>(ni)].state_index(state);
        if (si < 0)
            throw ConfigError("state '" + state + "' not valid for node '" + name + "'");
        ctx.ev[static_cast<size_t>(ni)] = static_cast<size_t>(si);
    }
    return ctx;
}

std::vector<double> normalize_posterior(std::vector<double> dist) {
    double z = std::accumulate(dist.begin(), dist.end(), 0.0);
    if (!(z > 0.0))
        throw ImpossibleEvidenceError("evidence has zero probability under the model");
    for (double& p : dist) p /= z;
    return dist;
}

}  // namespace

std::vector<double> posterior(const CausalModel& m, const Evidence& evidence,
                              const std::string& query) {
    validate_model(m);
    QueryContext ctx = resolve_query(m, evidence, query);
    const size_t nn = m.graph.nodes.size();

    std::vector<Factor> factors;
    factors.reserve(nn);
    for (size_t i = 0; i < nn; ++i) {
        Factor f = cpt_factor(m, i);
        for (const auto& [v, s] : ctx.ev) f = reduce(f, v, s);
        factors.push_back(std::move(f));
    }

    const bool query_observed = ctx.ev.count(ctx.query) > 0;
    std::set<size_t> to_eliminate;
    for (size_t v = 0; v < nn; ++v)
        if (!ctx.ev.count(v) && (query_observed || v != ctx.query)) to_eliminate.insert(v);

    while (!to_eliminate.empty()) {
        // min-degree: fewest distinct co-occurring variables; ties to the
        // lowest node id so elimination order is deterministic
        size_t best = 0, best_deg = SIZE_MAX;
        bool found = false;
        for (size_t v : to_eliminate) {
            std::set<size_t> nbr;
            for (const Factor& f : factors)
                if (std::binary_search(f.vars.begin(), f.vars.end(), v))
                    for (size_t w : f.vars)
                        if (w != v) nbr.insert(w);
            if (!found || nbr.size() < best_deg) {
                best = v;
                best_deg = nbr.size();
                found = true;
            }
        }
        Factor prod;
        prod.vals = {1.0};
        std::vector<Factor> rest;
        for (Factor& f : factors) {
            if (std::binary_search(f.vars.begin(), f.vars.end(), best))
                prod = multiply(prod, f);
            else
                rest.push_back(std::move(f));
        }
        rest.push_back(sum_out(prod, best));
        factors = std::move(rest);
        to_eliminate.erase(best);
    }

    Factor joint;
    joint.vals = {1.0};
    for (const Factor& f : factors) joint = multiply(joint, f);

    const size_t k = m.graph.nodes[ctx.query].arity();
    std::vector<double> dist(k, 0.0);
    if (query_observed) {
        if (joint.vals.size() != 1)
            throw ContractError("posterior: unexpected scope after elimination");
        if (!(joint.vals[0] > 0.0))
            throw ImpossibleEvidenceError("evidence has zero probability under the model");
        dist[ctx.ev.at(ctx.query)] = 1.0;
        return dist;
    }
    if (joint.vars != std::vector<size_t>{ctx.query})
        throw ContractError("posterior: unexpected scope after elimination");
    return normalize_posterior(joint.vals);
}

double expected_value(const CausalModel& m, const Evidence& evidence, const std::string& node) {
    int ni = m.graph.node_index(node);
    if (ni < 0) throw ConfigError("unknown query node '" + node + "'");
    const NodeSpec& spec = m.graph.nodes[static_cast<size_t>(ni)];
    if (!spec.numeric())
        throw ContractError("node '" + node + "' carries no midpoints; expected value undefined");
    std::vector<double> dist = posterior(m, evidence, node);
    double ev = 0.0;
    for (size_t s = 0; s < dist.size(); ++s) ev += dist[s] * spec.midpoints[s];
    return ev;
}

std::vector<double> joint_enumeration_oracle(const CausalModel& m, const Evidence& evidence,
                                             const std::string& query) {
    validate_model(m);
    QueryContext ctx = resolve_query(m, evidence, query);
    const size_t nn = m.graph.nodes.size();

    size_t total = 1;
    for (const NodeSpec& node : m.graph.nodes) {
        if (node.arity() != 0 && total > 1000000 / node.arity())
            throw ContractError("joint enumeration refused: state space exceeds 1e6");
        total *= node.arity();
    }

    std::vector<double> dist(m.graph.nodes[ctx.query].arity(), 0.0);
    std::vector<size_t> st(nn, 0);
    for (size_t idx = 0; idx < total; ++idx) {
        bool consistent = true;
        for (const auto& [v, s] : ctx.ev)
            if (st[v] != s) {
                consistent = false;
                break;
            }
        if (consistent) {
            double p = 1.0;
            for (size_t i = 0; i < nn; ++i) {
                size_t row = 0;
                for (size_t par : m.parents[i])
                    row = row * m.graph.nodes[par].arity() + st[par];
                p *= m.cpt[i][row * m.graph.nodes[i].arity() + st[i]];
            }
            dist[st[ctx.query]] += p;
        }
        for (size_t j = nn; j-- > 0;) {
            if (++st[j] < m.graph.nodes[j].arity()) break;
            st[j] = 0;
        }
    }
    return normalize_posterior(std::move(dist));
}

std::string model_to_json(const CausalModel& m) {
    nlohmann::json j;
    j["alpha"] = m.alpha;
    j["nodes"] = nlohmann::json::array();
    for (size_t i = 0; i < m.graph.nodes.size(); ++i) {
        const NodeSpec& n = m.graph.nodes[i];
        nlohmann::json jn;
        jn["name"] = n.name;
        jn["states"] = n.states;
        if (!n.bin_edges.empty()) jn["bins"] = n.bin_edges;
        if (!n.midpoints.empty()) jn["midpoints"] = n.midpoints;
        jn["cpt"] = m.cpt[i];
        j["nodes"].push_back(std::move(jn));
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& [p, c] : m.graph.edges)
        j["edges"].push_back({m.graph.nodes[p].name, m.graph.nodes[c].name});
    return j.dump(2) + "\n";
}

CausalModel model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    CausalModel m;
    try {
        m.alpha = j.at("alpha").get<double>();
        for (const auto& jn : j.at("nodes")) {
            NodeSpec n;
            n.name = jn.at("name").get<std::string>();
            n.states = jn.at("states").get<std::vector<std::string>>();
            if (jn.contains("bins")) n.bin_edges = jn["bins"].get<std::vector<double>>();
            if (jn.contains("midpoints"))
                n.midpoints = jn["midpoints"].get<std::vector<double>>();
            m.graph.nodes.push_back(std::move(n));
            m.cpt.push_back(jn.at("cpt").get<std::vector<double>>());
        }
        for (const auto& je : j.at("edges")) {
            std::string pname = je.at(0).get<std::string>();
            std::string cname = je.at(1).get<std::string>();
            int p = m.graph.node_index(pname), c = m.graph.node_index(cname);
            if (p < 0 || c < 0)
                throw ValidationError("model file: edge references unknown node");
            m.graph.edges.emplace_back(static_cast<size_t>(p), static_cast<size_t>(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    for (size_t i = 0; i < m.graph.nodes.size(); ++i)
        m.parents.push_back(m.graph.parents_of(i));
    validate_model(m);
    return m;
}

void save_model(const CausalModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model file '" + path + "'");
    out << model_to_json(m);
}

CausalModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace paresis
