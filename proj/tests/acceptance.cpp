// Acceptance suite. One line per criterion: PASS, FAIL or SKIP, then detail.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "siftrank/chat_client.hpp"
#include "siftrank/engine.hpp"
#include "siftrank/graphrank.hpp"
#include "siftrank/llm_ranker.hpp"
#include "siftrank/oracle_ranker.hpp"

using namespace siftrank;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const char* status, const std::string& name, const std::string& detail) {
    std::printf("%-4s %s: %s\n", status, name.c_str(), detail.c_str());
    std::fflush(stdout);
}

void verdict(bool ok, const std::string& name, const std::string& detail) {
    if (!ok) ++failures;
    report(ok ? "PASS" : "FAIL", name, detail);
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

unsigned workers() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

/// Corpus d0..d{n-1} with a ground truth that is a random permutation of it,
/// so corpus position says nothing about relevance.
struct Synthetic {
    std::vector<Document> docs;
    std::vector<std::string> truth;  // best first
};

Synthetic synthetic(std::size_t n, std::uint64_t seed) {
    Synthetic s;
    for (std::size_t i = 0; i < n; ++i) {
        s.docs.push_back(Document{"d" + std::to_string(i), "document " + std::to_string(i), i, std::nullopt});
        s.truth.push_back(s.docs.back().id);
    }
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    std::shuffle(s.truth.begin(), s.truth.end(), rng);
    return s;
}

std::uint64_t total_calls(const RankingOutcome& out) {
    std::uint64_t calls = 0;
    for (const auto& it : out.iterations) calls += it.ranker_calls;
    return calls;
}

// ---------------------------------------------------------------------------

void permutation_invariance() {
    const auto start = Clock::now();
    std::mt19937_64 rng(1);
    int bad = 0;
    std::size_t runs = 0;
    for (int r = 0; r < 1000; ++r) {
        const std::size_t n = 1 + rng() % 300;
        RankConfig cfg;
        cfg.batch_size = 2 + rng() % 19;
        cfg.max_trials = 2 + rng() % 49;
        cfg.stability_window = 2 + rng() % (cfg.max_trials - 1);
        cfg.statistic = rng() % 2 ? Statistic::mean : Statistic::median;
        cfg.inflection_method = rng() % 2 ? InflectionMethod::elbow : InflectionMethod::gap;
        cfg.inflection_tolerance = rng() % 3;
        cfg.rng_seed = rng();
        cfg.concurrency_cap = workers();
        auto s = synthetic(n, cfg.rng_seed);
        const NoiseKind kind = rng() % 2 ? NoiseKind::adjacent_swap : NoiseKind::uniform_shuffle;
        OracleRanker oracle(s.truth, NoiseModel{kind, 0.05 + 0.5 * static_cast<double>(rng() % 100) / 100.0, rng()});
        const auto out = run_ranking(s.docs, "q", cfg, oracle);
        std::multiset<std::string> in_ids, out_ids;
        for (const auto& d : s.docs) in_ids.insert(d.id);
        for (const auto& d : out.ranking) out_ids.insert(d.id);
        if (in_ids != out_ids || out.ranking.size() != n) ++bad;
        ++runs;
    }
    const double t = seconds_since(start);
    verdict(bad == 0 && t < 60.0, "permutation invariance",
            fmt("%zu random corpora, %d multiset mismatches, %.1f s (limit 60 s)", runs, bad, t));
}

void noiseless_oracle() {
    const auto start = Clock::now();
    int top_correct = 0;
    int iterations_total = 0;
    int iterations_at_window = 0;
    int iterations_call_match = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto s = synthetic(500, seed);
        OracleRanker oracle(s.truth);
        RankConfig cfg;
        cfg.rng_seed = seed;
        cfg.concurrency_cap = workers();
        const auto out = run_ranking(s.docs, "q", cfg, oracle);
        if (out.ranking.front().id == s.truth.front()) ++top_correct;
        for (const auto& it : out.iterations) {
            ++iterations_total;
            const bool at_window = it.reason == ConvergenceReason::ordering_stable &&
                                   it.convergence_trial == cfg.stability_window;
            if (at_window) ++iterations_at_window;
            // W trials of floor(|C|/S) full batches, or one batch when |C| <= S.
            const std::size_t per_trial = it.corpus_size <= cfg.batch_size ? 1 : it.corpus_size / cfg.batch_size;
            if (it.ranker_calls == cfg.stability_window * per_trial) ++iterations_call_match;
        }
    }
    const double t = seconds_since(start);
    verdict(top_correct == 100, "noiseless oracle: true best ranked first",
            fmt("%d/100 seeds, %.1f s (limit 30 s)", top_correct, t));
    verdict(iterations_at_window == iterations_total && iterations_call_match == iterations_total && t < 30.0,
            "noiseless oracle: ordering stability at t* = W with W*floor(|C|/S) calls",
            fmt("%d/%d iterations stopped by ordering stability at trial W, %d/%d matched the call count",
                iterations_at_window, iterations_total, iterations_call_match, iterations_total));
}

/// One shuffled pass of S-sized batches, each document scored by its
/// position in its batch; ties go to corpus order. The n mod S leftovers
/// rank after every placed document.
std::vector<std::string> one_pass_baseline(const Synthetic& s, OracleRanker& oracle,
                                           std::size_t batch_size, std::uint64_t seed) {
    const std::size_t n = s.docs.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    fisher_yates(std::span(order), rng);
    std::vector<double> score(n, static_cast<double>(batch_size) + 1.0);
    const std::size_t full = n / batch_size * batch_size;
    for (std::size_t start = 0; start < full; start += batch_size) {
        BatchRequest request;
        request.query = "q";
        std::unordered_map<std::string, std::size_t> doc_of;
        for (std::size_t i = start; i < start + batch_size; ++i) {
            const auto& d = s.docs[order[i]];
            request.entries.push_back(BatchEntry{"k" + d.id, d.id, d.text});
            doc_of["k" + d.id] = order[i];
        }
        const auto ranked = oracle.rank_batch(request);
        for (std::size_t pos = 0; pos < ranked.ordered_keys.size(); ++pos) {
            score[doc_of.at(ranked.ordered_keys[pos])] = static_cast<double>(pos + 1);
        }
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(s.docs[i].id);
    return out;
}

double recall_at(const std::vector<std::string>& ranking, const std::vector<std::string>& truth, std::size_t k) {
    std::unordered_set<std::string> top(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(k));
    std::size_t hit = 0;
    for (std::size_t i = 0; i < k && i < ranking.size(); ++i) hit += top.count(ranking[i]);
    return static_cast<double>(hit) / static_cast<double>(k);
}

void noise_robustness() {
    const auto start = Clock::now();
    int wins = 0;
    double sift_sum = 0.0, base_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto s = synthetic(300, seed);
        OracleRanker oracle(s.truth, NoiseModel{NoiseKind::adjacent_swap, 0.2, seed});
        RankConfig cfg;
        cfg.rng_seed = seed;
        cfg.concurrency_cap = workers();
        const auto out = run_ranking(s.docs, "q", cfg, oracle);
        std::vector<std::string> ranked;
        for (const auto& d : out.ranking) ranked.push_back(d.id);
        const double sift = recall_at(ranked, s.truth, 10);
        const double base = recall_at(one_pass_baseline(s, oracle, cfg.batch_size, seed), s.truth, 10);
        sift_sum += sift;
        base_sum += base;
        if (sift >= base) ++wins;
    }
    verdict(wins >= 95, "noise robustness vs one-pass batching",
            fmt("recall@10 at least the baseline's in %d/100 seeds (need 95); mean %.3f vs %.3f; %.1f s", wins,
                sift_sum / 100, base_sum / 100, seconds_since(start)));
}

void linearity() {
    auto calls_for = [](std::size_t n, std::uint64_t seed) {
        auto s = synthetic(n, seed);
        OracleRanker oracle(s.truth);
        RankConfig cfg;
        cfg.rng_seed = seed;
        cfg.concurrency_cap = workers();
        return total_calls(run_ranking(s.docs, "q", cfg, oracle));
    };
    const auto small = calls_for(1000, 99);
    const auto large = calls_for(2000, 99);
    const double ratio = static_cast<double>(large) / static_cast<double>(small);
    // Context only: the same ratio over calls summed across seeds.
    std::uint64_t small_sum = 0, large_sum = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        small_sum += calls_for(1000, seed);
        large_sum += calls_for(2000, seed);
    }
    verdict(ratio >= 1.8 && ratio <= 2.6, "linear call growth",
            fmt("%llu calls for n=1000, %llu for n=2000, ratio %.3f (need 1.8..2.6); summed over seeds 1-10: %.3f",
                static_cast<unsigned long long>(small), static_cast<unsigned long long>(large), ratio,
                static_cast<double>(large_sum) / static_cast<double>(small_sum)));
}

void weight_formula() {
    std::vector<graph::CallChain> chains{
        {{"a"}, "", 1, 5}, {{"b"}, "", 2, 5}, {{"c"}, "", 3, 4}, {{"d"}, "", 4, 4}};
    const auto w = graph::compute_function_weights(chains, false);
    std::map<std::string, double> got;
    for (const auto& f : w) got[f.id] = f.weight;
    const std::map<std::string, double> want{{"a", 5.0}, {"b", 2.5}, {"c", 1.333}, {"d", 1.0}};
    bool ok = got.size() == want.size();
    std::string detail;
    for (const auto& [id, x] : want) {
        ok = ok && got.count(id) && std::abs(got[id] - x) <= 0.01;
        detail += fmt("%s=%.3f ", id.c_str(), got[id]);
    }
    verdict(ok, "function weight formula", detail + "(want 5.0 2.5 1.333 1.0 within 0.01)");
}

// Random undirected graph over n weighted nodes plus a few unweighted ones.
struct RandomGraph {
    graph::CallGraph graph;
    std::vector<graph::FunctionWeight> weights;
    std::vector<std::vector<int>> adj;  // weighted nodes only
    std::vector<double> w;
};

RandomGraph random_graph(std::mt19937_64& rng, int n) {
    RandomGraph g;
    g.adj.assign(n, std::vector<int>(n, 0));
    const double density = 0.1 + 0.6 * static_cast<double>(rng() % 1000) / 1000.0;
    for (int i = 0; i < n; ++i) {
        g.graph.add_node("w" + std::to_string(i));
        for (int j = i + 1; j < n; ++j) {
            if (static_cast<double>(rng() % 1000) / 1000.0 < density) {
                g.adj[i][j] = g.adj[j][i] = 1;
                if (rng() % 2) g.graph.add_edge("w" + std::to_string(i), "w" + std::to_string(j));
                else g.graph.add_edge("w" + std::to_string(j), "w" + std::to_string(i));
            }
        }
    }
    // Unweighted bystanders must not shorten distances.
    for (int u = 0; u < 3; ++u) {
        const std::string id = "u" + std::to_string(u);
        g.graph.add_edge("w" + std::to_string(rng() % n), id);
        g.graph.add_edge(id, "w" + std::to_string(rng() % n));
    }
    for (int i = 0; i < n; ++i) {
        const std::size_t r = 1 + rng() % 30, k = 1 + rng() % 6;
        g.w.push_back(static_cast<double>(k) / static_cast<double>(r));
        g.weights.push_back(graph::FunctionWeight{"w" + std::to_string(i), r, k, g.w.back()});
    }
    return g;
}

/// All-pairs distances inside the subgraph induced by `members`; -1 if
/// disconnected.
int true_diameter(const std::vector<std::vector<int>>& adj, const std::vector<int>& members) {
    const std::size_t m = members.size();
    constexpr int inf = 1 << 20;
    std::vector<std::vector<int>> d(m, std::vector<int>(m, inf));
    for (std::size_t i = 0; i < m; ++i) {
        d[i][i] = 0;
        for (std::size_t j = 0; j < m; ++j) {
            if (adj[members[i]][members[j]]) d[i][j] = 1;
        }
    }
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    int diameter = 0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (d[i][j] >= inf) return -1;
            diameter = std::max(diameter, d[i][j]);
        }
    return diameter;
}

void cluster_oracle_equivalence() {
    const auto start = Clock::now();
    std::mt19937_64 rng(2026);
    int mismatches = 0, checks = 0;
    for (int round = 0; round < 50; ++round) {
        const int n = 1 + static_cast<int>(rng() % 10);
        auto g = random_graph(rng, n);
        for (std::size_t d : {1u, 2u, 3u}) {
            double brute = 0.0;
            for (unsigned mask = 1; mask < (1u << n); ++mask) {
                std::vector<int> members;
                double mass = 0.0;
                for (int i = 0; i < n; ++i) {
                    if (mask >> i & 1) {
                        members.push_back(i);
                        mass += g.w[i];
                    }
                }
                const int diam = true_diameter(g.adj, members);
                if (diam < 0 || diam > static_cast<int>(d)) continue;
                brute = std::max(brute, mass * mass / static_cast<double>(members.size()));
            }
            graph::ClusterOptions opts;
            opts.diameters = {d};
            const auto clusters = graph::score_clusters(graph::build_clusters(g.graph, g.weights, opts));
            ++checks;
            if (clusters.empty() || std::abs(clusters[0].score - brute) > 1e-9 * std::max(1.0, brute)) ++mismatches;
        }
    }
    const double t = seconds_since(start);
    verdict(mismatches == 0 && t < 20.0, "cluster search equals exhaustive enumeration",
            fmt("%d/%d (graph, d) top scores matched, %.2f s (limit 20 s)", checks - mismatches, checks, t));
}

void cluster_identity() {
    std::mt19937_64 rng(7);
    std::size_t emitted = 0;
    int bad = 0;
    auto check_all = [&](const RandomGraph& g, const graph::ClusterOptions& opts) {
        std::unordered_map<std::string, int> index;
        for (int i = 0; i < static_cast<int>(g.w.size()); ++i) index["w" + std::to_string(i)] = i;
        for (const auto& c : graph::score_clusters(graph::build_clusters(g.graph, g.weights, opts))) {
            ++emitted;
            std::vector<int> members;
            double mass = 0.0;
            for (const auto& id : c.members) {
                members.push_back(index.at(id));
                mass += g.w[index.at(id)];
            }
            const int diam = true_diameter(g.adj, members);
            const double score = mass * mass / static_cast<double>(members.size());
            if (std::abs(c.score - score) > 1e-9 || std::abs(c.mass - mass) > 1e-9 || diam < 0 ||
                diam > static_cast<int>(c.diameter_bound) || diam != static_cast<int>(c.diameter)) {
                ++bad;
            }
        }
    };
    for (int round = 0; round < 50; ++round) check_all(random_graph(rng, 1 + static_cast<int>(rng() % 10)), {});
    // Larger graphs exercise the greedy path as well.
    for (int round = 0; round < 20; ++round) {
        graph::ClusterOptions opts;
        opts.exact_limit = round % 2 ? 0 : 12;
        check_all(random_graph(rng, 20 + static_cast<int>(rng() % 40)), opts);
    }
    verdict(bad == 0 && emitted > 0, "cluster score and diameter identities",
            fmt("%zu emitted clusters checked, %d violations", emitted, bad));
}

void repair_fuzz() {
    std::mt19937_64 rng(31337);
    const std::vector<std::string> fragments{
        "RANKING:", "RANKING: [", "]", "[", "\"", ",", " ", "\n", "EXPLANATION:", "null", "{", "}", "\\",
        "ranking", "1.", "-", "->", "\xE2\x9C\x93", "\xFF", "\t", "::", "KEY", "key"};
    int violations = 0, errors = 0;
    for (int round = 0; round < 10000; ++round) {
        const std::size_t m = 1 + rng() % 12;
        Rng key_rng(rng());
        std::vector<std::string> keys = make_batch_keys(m, key_rng, {}, 1 + rng() % 8);
        std::string raw;
        const std::size_t pieces = rng() % 40;
        for (std::size_t p = 0; p < pieces; ++p) {
            switch (rng() % 6) {
                case 0:
                case 1: raw += keys[rng() % m]; break;
                case 2: raw += fragments[rng() % fragments.size()]; break;
                case 3: raw += keys[rng() % m].substr(0, 1 + rng() % keys[0].size()); break;
                case 4: raw += static_cast<char>(rng() % 256); break;
                default: raw += "x" + keys[rng() % m]; break;
            }
        }
        try {
            const auto out = parse_and_repair(raw, keys);
            std::vector<std::string> a = out, b = keys;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            if (a != b) ++violations;
        } catch (const RankerError&) {
            ++errors;
        } catch (...) {
            ++violations;
        }
    }
    verdict(violations == 0, "repair always yields a permutation or an error",
            fmt("10000 adversarial outputs, %d unrepairable (errored), %d violations", errors, violations));
}

void live_tld() {
    const char* enabled = std::getenv("SIFTRANK_LIVE");
    const char* key_env = std::getenv("SIFTRANK_LIVE_KEY_ENV");
    const std::string key_name = key_env ? key_env : "OPENAI_API_KEY";
    const char* key = std::getenv(key_name.c_str());
    if (!enabled || std::string(enabled) != "1" || !key || !*key) {
        report("SKIP", "live TLD run", "set SIFTRANK_LIVE=1 and " + key_name + " to run against a real model");
        return;
    }
    std::ifstream in(SIFTRANK_DATA_DIR "/tlds.txt");
    std::vector<Document> docs;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) docs.push_back(Document{line, line, docs.size(), std::nullopt});
    }
    ModelEndpoint ep;
    ep.api_key = key;
    if (const char* url = std::getenv("SIFTRANK_LIVE_BASE_URL")) ep.base_url = url;
    if (const char* model = std::getenv("SIFTRANK_LIVE_MODEL")) ep.model = model;
    HttpChatClient client(ep);
    LlmRanker ranker(client);
    RankConfig cfg;
    cfg.concurrency_cap = 16;
    cfg.retry_backoff_ms = 500;
    try {
        client.verify_credentials();
        const auto out = run_ranking(
            docs, "Which of these top-level domains relates most closely to the concept of theoretical mathematics?",
            cfg, ranker);
        const std::set<std::string> expected{".phd", ".science", ".degree", ".academy", ".university"};
        int hits = 0;
        std::string top;
        for (std::size_t i = 0; i < 3; ++i) {
            hits += expected.count(out.ranking[i].id);
            top += out.ranking[i].id + " ";
        }
        verdict(hits >= 2, "live TLD run",
                fmt("top three %s; %d in the expected set; %zu iterations, %llu requests", top.c_str(), hits,
                    out.iterations.size(), static_cast<unsigned long long>(out.usage.requests)));
    } catch (const std::exception& e) {
        verdict(false, "live TLD run", e.what());
    }
}

}  // namespace

int main() {
    permutation_invariance();
    noiseless_oracle();
    noise_robustness();
    linearity();
    weight_formula();
    cluster_oracle_equivalence();
    cluster_identity();
    repair_fuzz();
    live_tld();
    std::printf("%d criterion line(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
