#include "siftrank/graphrank.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "siftrank/types.hpp"

namespace siftrank::graph {

void CallGraph::add_node(const std::string& id) {
    if (index_.emplace(id, nodes_.size()).second) nodes_.push_back(id);
}

void CallGraph::add_edge(const std::string& caller, const std::string& callee) {
    add_node(caller);
    add_node(callee);
    std::string key = caller;
    key += '\n';
    key += callee;
    if (edge_index_.emplace(std::move(key), edges_.size()).second) edges_.emplace_back(caller, callee);
}

namespace {

bool skippable(const std::string& line) {
    const auto first = line.find_first_not_of(" \t\r");
    return first == std::string::npos || line[first] == '#';
}

}  // namespace

CallGraph parse_edge_list(std::istream& in, std::string_view source) {
    CallGraph graph;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skippable(line)) continue;
        std::istringstream fields(line);
        std::string caller, callee, extra;
        if (!(fields >> caller >> callee) || (fields >> extra)) {
            throw InputError(std::string(source) + ":" + std::to_string(line_no) +
                             ": expected 'caller callee'");
        }
        graph.add_edge(caller, callee);
    }
    return graph;
}

std::vector<std::string> parse_id_list(std::istream& in) {
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (skippable(line)) continue;
        std::istringstream fields(line);
        std::string id;
        fields >> id;
        ids.push_back(std::move(id));
    }
    return ids;
}

std::string CallChain::id() const {
    std::string out;
    for (std::size_t i = 0; i < functions.size(); ++i) {
        if (i) out += kChainSeparator;
        out += functions[i];
    }
    return out;
}

std::vector<std::string> split_chain_id(std::string_view id) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = id.find(kChainSeparator, start);
        parts.emplace_back(id.substr(start, pos == std::string_view::npos ? id.npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + kChainSeparator.size();
    }
    return parts;
}

std::vector<CallChain> generate_call_chains(
    const CallGraph& graph, std::span<const std::string> changed,
    const std::unordered_map<std::string, std::string>& summaries) {
    auto describe = [&](const std::string& fn) {
        auto it = summaries.find(fn);
        return it == summaries.end() ? fn : fn + ": " + it->second;
    };

    std::vector<CallChain> chains;
    std::unordered_set<std::string> changed_set;
    for (const auto& fn : changed) {
        if (!changed_set.insert(fn).second) continue;
        chains.push_back(CallChain{{fn}, describe(fn)});
    }
    for (const auto& [caller, callee] : graph.edges()) {
        if (caller == callee) continue;
        if (!changed_set.contains(caller) || !changed_set.contains(callee)) continue;
        std::string text = describe(caller);
        text += "\n\n";
        text += caller;
        text += " calls ";
        text += callee;
        text += ".\n\n";
        text += describe(callee);
        chains.push_back(CallChain{{caller, callee}, std::move(text)});
    }
    return chains;
}

std::vector<FunctionWeight> compute_function_weights(std::span<const CallChain> ranked_chains,
                                                     bool survivors_only) {
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<FunctionWeight> out;
    for (const auto& chain : ranked_chains) {
        if (chain.rank < 1 || chain.iterations < 1) {
            throw InputError("chain '" + chain.id() + "' lacks a rank or iteration count");
        }
        if (survivors_only && chain.iterations <= 1) continue;
        for (const auto& fn : chain.functions) {
            auto [it, fresh] = slot.emplace(fn, out.size());
            if (fresh) {
                out.push_back(FunctionWeight{fn, chain.rank, chain.iterations, 0.0});
            } else {
                auto& w = out[it->second];
                w.best_rank = std::min(w.best_rank, chain.rank);
                w.max_iterations = std::max(w.max_iterations, chain.iterations);
            }
        }
    }
    for (auto& w : out) {
        w.weight = static_cast<double>(w.max_iterations) / static_cast<double>(w.best_rank);
    }
    std::sort(out.begin(), out.end(), [](const FunctionWeight& a, const FunctionWeight& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return a.id < b.id;
    });
    return out;
}

void assign_cluster_metrics(Cluster& cluster, std::span<const double> member_weights) {
    cluster.mass = std::accumulate(member_weights.begin(), member_weights.end(), 0.0);
    const auto size = static_cast<double>(member_weights.size());
    cluster.density = size > 0 ? cluster.mass / size : 0.0;
    cluster.score = cluster.mass * cluster.density;
}

namespace {

constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();
constexpr double kScoreEpsilon = 1e-12;

/// Undirected graph over the weighted functions only.
struct WeightedGraph {
    std::vector<std::string> ids;
    std::vector<double> weight;
    std::vector<std::vector<std::size_t>> adj;
};

WeightedGraph restrict_to_weighted(const CallGraph& graph, std::span<const FunctionWeight> weights) {
    WeightedGraph g;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& w : weights) {
        if (!graph.contains(w.id) || index.contains(w.id)) continue;
        index.emplace(w.id, g.ids.size());
        g.ids.push_back(w.id);
        g.weight.push_back(w.weight);
    }
    g.adj.resize(g.ids.size());
    for (const auto& [a, b] : graph.edges()) {
        auto ia = index.find(a);
        auto ib = index.find(b);
        if (ia == index.end() || ib == index.end() || ia->second == ib->second) continue;
        g.adj[ia->second].push_back(ib->second);
        g.adj[ib->second].push_back(ia->second);
    }
    for (auto& n : g.adj) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    return g;
}

/// Nodes within `radius` hops of `source`, in BFS order.
std::vector<std::size_t> ball(const WeightedGraph& g, std::size_t source, std::size_t radius) {
    std::vector<std::size_t> dist(g.ids.size(), kUnreachable);
    std::vector<std::size_t> order{source};
    dist[source] = 0;
    for (std::size_t head = 0; head < order.size(); ++head) {
        const auto u = order[head];
        if (dist[u] == radius) continue;
        for (auto v : g.adj[u]) {
            if (dist[v] == kUnreachable) {
                dist[v] = dist[u] + 1;
                order.push_back(v);
            }
        }
    }
    return order;
}

/// Eccentricity of `source` in the subgraph induced by `in_set`
/// (kUnreachable if some member cannot be reached).
std::size_t eccentricity(const WeightedGraph& g, const std::vector<char>& in_set,
                         std::size_t set_size, std::size_t source) {
    std::vector<std::size_t> dist(g.ids.size(), kUnreachable);
    std::vector<std::size_t> queue{source};
    dist[source] = 0;
    std::size_t far = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto u = queue[head];
        far = std::max(far, dist[u]);
        for (auto v : g.adj[u]) {
            if (in_set[v] && dist[v] == kUnreachable) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return queue.size() == set_size ? far : kUnreachable;
}

std::size_t induced_diameter(const WeightedGraph& g, std::span<const std::size_t> members) {
    std::vector<char> in_set(g.ids.size(), 0);
    for (auto m : members) in_set[m] = 1;
    std::size_t diameter = 0;
    for (auto m : members) {
        const auto e = eccentricity(g, in_set, members.size(), m);
        if (e == kUnreachable) return kUnreachable;
        diameter = std::max(diameter, e);
    }
    return diameter;
}

struct Candidate {
    std::vector<std::size_t> members;  // weighted-graph indices
    double mass = 0.0;

    double score() const { return mass * mass / static_cast<double>(members.size()); }
};

std::vector<std::string> sorted_ids(const WeightedGraph& g, std::span<const std::size_t> members) {
    std::vector<std::string> ids;
    ids.reserve(members.size());
    for (auto m : members) ids.push_back(g.ids[m]);
    std::sort(ids.begin(), ids.end());
    return ids;
}

/// Higher score, then higher mass, then lexicographically smaller members.
bool better(const WeightedGraph& g, const Candidate& a, const Candidate& b) {
    const double sa = a.score();
    const double sb = b.score();
    const double tol = kScoreEpsilon * std::max({1.0, std::abs(sa), std::abs(sb)});
    if (sa > sb + tol) return true;
    if (sb > sa + tol) return false;
    if (std::abs(a.mass - b.mass) > tol) return a.mass > b.mass;
    return sorted_ids(g, a.members) < sorted_ids(g, b.members);
}

/// Exhaustive search over connected subsets of `region` (seed first) that
/// contain the seed. |region| must fit in 64 bits.
Candidate best_exact(const WeightedGraph& g, std::span<const std::size_t> region,
                     std::size_t bound) {
    const std::size_t k = region.size();
    std::unordered_map<std::size_t, std::size_t> local;
    for (std::size_t i = 0; i < k; ++i) local.emplace(region[i], i);
    std::vector<std::uint64_t> adj(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
        for (auto v : g.adj[region[i]]) {
            if (auto it = local.find(v); it != local.end()) adj[i] |= std::uint64_t{1} << it->second;
        }
    }

    auto diameter_of = [&](std::uint64_t set) {
        std::size_t diameter = 0;
        for (std::uint64_t rest = set; rest; rest &= rest - 1) {
            std::uint64_t frontier = rest & (~rest + 1);
            std::uint64_t seen = frontier;
            std::size_t depth = 0;
            while (true) {
                std::uint64_t next = 0;
                for (std::uint64_t f = frontier; f; f &= f - 1) next |= adj[std::countr_zero(f)];
                next &= set & ~seen;
                if (!next) break;
                seen |= next;
                frontier = next;
                ++depth;
            }
            if (seen != set) return kUnreachable;
            diameter = std::max(diameter, depth);
            if (diameter > bound) return diameter;
        }
        return diameter;
    };

    auto to_candidate = [&](std::uint64_t set) {
        Candidate c;
        for (std::uint64_t s = set; s; s &= s - 1) {
            const auto m = region[std::countr_zero(s)];
            c.members.push_back(m);
            c.mass += g.weight[m];
        }
        return c;
    };

    Candidate best = to_candidate(1);
    auto visit = [&](auto&& self, std::uint64_t set, std::uint64_t frontier, std::uint64_t excluded) -> void {
        if (set != 1 && diameter_of(set) <= bound) {
            auto c = to_candidate(set);
            if (better(g, c, best)) best = std::move(c);
        }
        for (std::uint64_t f = frontier; f;) {
            const auto v = std::countr_zero(f);
            const std::uint64_t bit = std::uint64_t{1} << v;
            f &= f - 1;
            const std::uint64_t earlier = frontier & ~f & ~bit;
            const std::uint64_t next_set = set | bit;
            const std::uint64_t next_excluded = excluded | earlier;
            const std::uint64_t next_frontier = (f | adj[v]) & ~next_set & ~next_excluded;
            self(self, next_set, next_frontier, next_excluded);
        }
    };
    visit(visit, 1, adj[0], 0);
    return best;
}

/// Best-weight-first admission from the seed, keeping every admitted node
/// that leaves the induced diameter within bound; returns the best-scoring
/// prefix of the admission sequence.
Candidate best_greedy(const WeightedGraph& g, std::size_t seed, std::size_t bound) {
    std::vector<char> in_set(g.ids.size(), 0);
    in_set[seed] = 1;
    Candidate current{{seed}, g.weight[seed]};
    Candidate best = current;

    for (;;) {
        std::vector<std::size_t> frontier;
        for (auto m : current.members) {
            for (auto v : g.adj[m]) {
                if (!in_set[v]) frontier.push_back(v);
            }
        }
        std::sort(frontier.begin(), frontier.end());
        frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
        std::sort(frontier.begin(), frontier.end(), [&](std::size_t a, std::size_t b) {
            if (g.weight[a] != g.weight[b]) return g.weight[a] > g.weight[b];
            return g.ids[a] < g.ids[b];
        });

        bool admitted = false;
        for (auto c : frontier) {
            in_set[c] = 1;
            // Adding c only shortens paths among existing members, so c's
            // own eccentricity decides admissibility.
            if (eccentricity(g, in_set, current.members.size() + 1, c) <= bound) {
                current.members.push_back(c);
                current.mass += g.weight[c];
                admitted = true;
                break;
            }
            in_set[c] = 0;
        }
        if (!admitted) break;
        if (better(g, current, best)) best = current;
    }
    return best;
}

}  // namespace

std::vector<Cluster> build_clusters(const CallGraph& graph, std::span<const FunctionWeight> weights,
                                    const ClusterOptions& options) {
    const auto g = restrict_to_weighted(graph, weights);

    std::vector<std::size_t> seeds(g.ids.size());
    std::iota(seeds.begin(), seeds.end(), std::size_t{0});
    std::sort(seeds.begin(), seeds.end(), [&](std::size_t a, std::size_t b) {
        if (g.weight[a] != g.weight[b]) return g.weight[a] > g.weight[b];
        return g.ids[a] < g.ids[b];
    });
    std::vector<std::size_t> bounds = options.diameters;
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
    const std::size_t exact_limit = std::min<std::size_t>(options.exact_limit, 64);

    std::vector<Cluster> out;
    std::unordered_set<std::string> seen;
    for (auto seed : seeds) {
        for (auto bound : bounds) {
            const auto region = ball(g, seed, bound);
            Candidate best = region.size() <= exact_limit ? best_exact(g, region, bound)
                                                          : best_greedy(g, seed, bound);

            Cluster cluster;
            cluster.seed = g.ids[seed];
            cluster.diameter_bound = bound;
            cluster.diameter = induced_diameter(g, best.members);
            std::vector<std::pair<std::string, double>> named;
            for (auto m : best.members) named.emplace_back(g.ids[m], g.weight[m]);
            std::sort(named.begin(), named.end());
            std::vector<double> member_weights;
            std::string key;
            for (auto& [id, w] : named) {
                key += id;
                key += '\n';
                cluster.members.push_back(id);
                member_weights.push_back(w);
            }
            if (!seen.insert(std::move(key)).second) continue;
            assign_cluster_metrics(cluster, member_weights);
            out.push_back(std::move(cluster));
        }
    }
    return out;
}

std::vector<Cluster> score_clusters(std::vector<Cluster> clusters) {
    std::erase_if(clusters, [](const Cluster& c) { return c.members.empty(); });
    std::stable_sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.mass != b.mass) return a.mass > b.mass;
        return a.seed < b.seed;
    });
    return clusters;
}

}  // namespace siftrank::graph
