#pragma once

#include <cstddef>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace siftrank::graph {

/// Directed call graph over function identifiers. Duplicate edges collapse.
class CallGraph {
public:
    void add_node(const std::string& id);
    void add_edge(const std::string& caller, const std::string& callee);

    bool contains(const std::string& id) const { return index_.contains(id); }
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<std::pair<std::string, std::string>>& edges() const { return edges_; }

private:
    std::vector<std::string> nodes_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::pair<std::string, std::string>> edges_;
    std::unordered_map<std::string, std::size_t> edge_index_;
};

/// `caller callee` per line; blank lines and `#` comments skipped.
/// Throws InputError naming the offending line.
CallGraph parse_edge_list(std::istream& in, std::string_view source = "<edges>");

/// One identifier per line; blank lines and `#` comments skipped.
std::vector<std::string> parse_id_list(std::istream& in);

inline constexpr std::string_view kChainSeparator = "->";

/// A single changed function, or a caller->callee pair of changed functions.
struct CallChain {
    std::vector<std::string> functions;
    std::string text;
    std::size_t rank = 0;        // best final rank from the ranking run
    std::size_t iterations = 0;  // iterations survived

    std::string id() const;
};

/// Inverse of CallChain::id().
std::vector<std::string> split_chain_id(std::string_view id);

/// One chain per changed function, then one per distinct edge whose two
/// (distinct) endpoints are both changed. Chain text joins the functions'
/// summaries, falling back to the function id where no summary is known.
std::vector<CallChain> generate_call_chains(
    const CallGraph& graph, std::span<const std::string> changed,
    const std::unordered_map<std::string, std::string>& summaries = {});

struct FunctionWeight {
    std::string id;
    std::size_t best_rank = 0;       // r_f
    std::size_t max_iterations = 0;  // k_f
    double weight = 0.0;             // k_f / r_f
};

/// Per function: best (lowest) rank and most iterations over every chain
/// containing it. With `survivors_only`, chains that did not survive past
/// the first iteration are ignored. Sorted by weight descending, then id.
std::vector<FunctionWeight> compute_function_weights(std::span<const CallChain> ranked_chains,
                                                     bool survivors_only);

struct Cluster {
    std::string seed;
    std::size_t diameter_bound = 0;  // d the cluster was grown under
    std::size_t diameter = 0;        // actual diameter of the member subgraph
    std::vector<std::string> members;  // sorted
    double mass = 0.0;
    double density = 0.0;
    double score = 0.0;
};

struct ClusterOptions {
    std::vector<std::size_t> diameters{1, 2, 3};
    // Seeds whose d-neighbourhood holds at most this many weighted
    // functions get an exhaustive search; larger ones are grown greedily.
    std::size_t exact_limit = 16;
};

/// For every weighted function (as seed) and every diameter bound d, finds
/// the best-scoring connected member set containing the seed whose induced
/// undirected subgraph has diameter <= d. Identical member sets found from
/// several seeds or bounds are reported once, under the heaviest seed and
/// the smallest bound. Weighted functions missing from the graph are
/// ignored.
std::vector<Cluster> build_clusters(const CallGraph& graph, std::span<const FunctionWeight> weights,
                                    const ClusterOptions& options = {});

/// Drops empty clusters and sorts by score (mass^2 / size) descending,
/// then mass descending, then seed.
std::vector<Cluster> score_clusters(std::vector<Cluster> clusters);

/// Fills mass, density and score from member weights.
void assign_cluster_metrics(Cluster& cluster, std::span<const double> member_weights);

}  // namespace siftrank::graph
