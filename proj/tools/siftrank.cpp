#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "siftrank/chat_client.hpp"
#include "siftrank/engine.hpp"
#include "siftrank/graphrank.hpp"
#include "siftrank/io.hpp"
#include "siftrank/llm_ranker.hpp"
#include "siftrank/oracle_ranker.hpp"
#include "siftrank/preprocess.hpp"

namespace {

using namespace siftrank;

struct ModelFlags {
    std::string model = ModelEndpoint{}.model;
    std::string base_url = ModelEndpoint{}.base_url;
    std::string api_key_env = "OPENAI_API_KEY";
    double rps = 0.0;
    std::string reasoning_effort;

    void attach(CLI::App& cmd) {
        cmd.add_option("--model", model, "Chat model name")->capture_default_str();
        cmd.add_option("--base-url", base_url, "OpenAI-compatible API root")->capture_default_str();
        cmd.add_option("--api-key-env", api_key_env, "Environment variable holding the API key")
            ->capture_default_str();
        cmd.add_option("--rps", rps, "Client-side request rate limit (0 = off)");
        cmd.add_option("--reasoning-effort", reasoning_effort, "Passed through to the model");
    }

    // Fails before anything is spent when the key is missing or rejected.
    std::unique_ptr<HttpChatClient> connect() const {
        const char* key = std::getenv(api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw AuthError("environment variable " + api_key_env + " is not set");
        }
        ModelEndpoint endpoint;
        endpoint.base_url = base_url;
        endpoint.model = model;
        endpoint.api_key = key;
        endpoint.requests_per_second = rps;
        if (!reasoning_effort.empty()) endpoint.reasoning_effort = reasoning_effort;
        auto client = std::make_unique<HttpChatClient>(std::move(endpoint));
        client->verify_credentials();
        return client;
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return in;
}

// Writes to `path`, or stdout for "-" / empty.
template <typename Fn>
void write_output(const std::string& path, Fn&& fn) {
    if (path.empty() || path == "-") {
        fn(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    fn(out);
}

struct RankFlags {
    std::string input;
    std::string output;
    std::string query;
    std::string query_file;
    std::string ranker = "llm";
    std::string oracle_order;
    std::string statistic = "mean";
    std::string inflection = "elbow";
    bool summarize = false;
    bool reasoning = false;
    bool reproducible = false;
    RankConfig config;
    ModelFlags model;
};

int cmd_rank(RankFlags& f) {
    f.config.statistic = parse_statistic(f.statistic);
    f.config.inflection_method = parse_inflection_method(f.inflection);
    f.config.validate();

    std::string query = f.query;
    if (!f.query_file.empty()) query = read_file(f.query_file);
    while (!query.empty() && (query.back() == '\n' || query.back() == '\r')) query.pop_back();
    if (query.empty()) throw InputError("a query is required (--query or --query-file)");

    auto corpus = io::load_corpus_file(f.input);

    std::unique_ptr<HttpChatClient> client;
    if (f.ranker == "llm" || f.summarize) client = f.model.connect();

    io::RunReport report;
    report.query = query;
    report.ranker = f.ranker;

    const auto start = std::chrono::steady_clock::now();
    if (f.summarize) {
        SummarizerOptions opts;
        opts.concurrency_cap = f.config.concurrency_cap;
        opts.retry_limit = f.config.retry_limit;
        opts.retry_backoff_ms = f.config.retry_backoff_ms;
        const auto s = summarize_corpus(corpus, *client, opts);
        for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
        report.summarization_usage = s.usage;
    }

    std::unique_ptr<BatchRanker> ranker;
    if (f.ranker == "llm") {
        report.model = f.model.model;
        ranker = std::make_unique<LlmRanker>(*client, PromptOptions{f.reasoning});
    } else {
        if (f.oracle_order.empty()) throw InputError("--ranker oracle needs --oracle-order");
        auto in = open_input(f.oracle_order);
        ranker = std::make_unique<OracleRanker>(graph::parse_id_list(in));
    }

    report.config = f.config;
    report.outcome = run_ranking(corpus, query, f.config, *ranker);
    if (!f.reproducible) {
        report.wall_time = std::chrono::steady_clock::now() - start;
    }

    write_output(f.output, [&](std::ostream& out) { out << io::to_json(report).dump(2) << '\n'; });
    return 0;
}

struct ChainFlags {
    std::string graph;
    std::string changed;
    std::string summaries;
    std::string output;
};

int cmd_chains(const ChainFlags& f) {
    auto graph_in = open_input(f.graph);
    const auto graph = graph::parse_edge_list(graph_in, f.graph);
    auto changed_in = open_input(f.changed);
    const auto changed = graph::parse_id_list(changed_in);

    std::unordered_map<std::string, std::string> summaries;
    if (!f.summaries.empty()) {
        for (auto& d : io::load_corpus_file(f.summaries)) {
            summaries.emplace(d.id, d.summary ? *d.summary : d.text);
        }
    }

    const auto chains = graph::generate_call_chains(graph, changed, summaries);
    std::vector<Document> docs;
    docs.reserve(chains.size());
    for (const auto& c : chains) {
        docs.push_back(Document{c.id(), c.text, docs.size(), std::nullopt});
    }
    write_output(f.output, [&](std::ostream& out) { io::write_jsonl(out, docs); });
    std::cerr << chains.size() << " chains from " << changed.size() << " changed functions\n";
    return 0;
}

struct ClusterFlags {
    std::string report;
    std::string graph;
    std::string output;
    bool survivors_only = true;
    std::vector<std::size_t> diameters{1, 2, 3};
    std::size_t exact_limit = graph::ClusterOptions{}.exact_limit;
};

int cmd_cluster(const ClusterFlags& f) {
    const auto report = nlohmann::json::parse(read_file(f.report), nullptr, false);
    if (report.is_discarded()) throw InputError(f.report + ": invalid JSON");
    auto graph_in = open_input(f.graph);
    const auto graph = graph::parse_edge_list(graph_in, f.graph);

    std::vector<graph::CallChain> known;
    for (auto& chain : io::chains_from_report(report)) {
        bool ok = true;
        for (const auto& fn : chain.functions) {
            if (!graph.contains(fn)) {
                std::cerr << "warning: skipping chain '" << chain.id() << "': unknown function '" << fn
                          << "'\n";
                ok = false;
                break;
            }
        }
        if (ok) known.push_back(std::move(chain));
    }

    const auto weights = graph::compute_function_weights(known, f.survivors_only);
    graph::ClusterOptions opts;
    opts.diameters = f.diameters;
    opts.exact_limit = f.exact_limit;
    const auto clusters = graph::score_clusters(graph::build_clusters(graph, weights, opts));
    if (clusters.empty()) std::cerr << "warning: no clusters (no weighted functions)\n";
    write_output(f.output, [&](std::ostream& out) { io::write_cluster_table(out, clusters); });
    return 0;
}

struct SummarizeFlags {
    std::string input;
    std::string output;
    std::string focus;
    bool force = false;
    std::size_t concurrency = 1;
    std::size_t retries = 2;
    ModelFlags model;
};

int cmd_summarize(const SummarizeFlags& f) {
    auto corpus = io::load_corpus_file(f.input);
    auto client = f.model.connect();
    SummarizerOptions opts;
    opts.concurrency_cap = f.concurrency;
    opts.retry_limit = f.retries;
    opts.force = f.force;
    if (!f.focus.empty()) {
        opts.prompt = SummaryTemplate::query_focused;
        opts.query_focus = f.focus;
    }
    const auto s = summarize_corpus(corpus, *client, opts);
    for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
    std::cerr << s.summarized << " summarized, " << s.skipped << " skipped, " << s.degraded
              << " degraded; " << s.usage.requests << " requests\n";
    write_output(f.output, [&](std::ostream& out) { io::write_jsonl(out, corpus); });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Listwise ranking with a language model, plus call-graph cluster triage"};
    app.require_subcommand(1);

    RankFlags rank;
    auto* rank_cmd = app.add_subcommand("rank", "Rank a corpus against a query");
    rank_cmd->add_option("input", rank.input, "JSON-lines or plain-text corpus")->required();
    rank_cmd->add_option("-o,--output", rank.output, "Report path (default stdout)");
    auto* q = rank_cmd->add_option("-q,--query", rank.query, "Query text");
    rank_cmd->add_option("--query-file", rank.query_file, "File holding the query")->excludes(q);
    rank_cmd->add_option("-s,--batch-size", rank.config.batch_size)->capture_default_str();
    rank_cmd->add_option("-t,--max-trials", rank.config.max_trials)->capture_default_str();
    rank_cmd->add_option("-w,--window", rank.config.stability_window)->capture_default_str();
    rank_cmd->add_option("--statistic", rank.statistic)
        ->check(CLI::IsMember({"mean", "median"}))
        ->capture_default_str();
    rank_cmd->add_option("--inflection", rank.inflection)
        ->check(CLI::IsMember({"elbow", "gap"}))
        ->capture_default_str();
    rank_cmd->add_option("--tolerance", rank.config.inflection_tolerance,
                         "Allowed spread of the inflection index over the window");
    rank_cmd->add_option("--seed", rank.config.rng_seed)->capture_default_str();
    rank_cmd->add_option("--concurrency", rank.config.concurrency_cap)->capture_default_str();
    rank_cmd->add_option("--retries", rank.config.retry_limit)->capture_default_str();
    rank_cmd->add_option("--retry-backoff-ms", rank.config.retry_backoff_ms);
    rank_cmd->add_option("--max-requests", rank.config.max_requests, "Abort past this many calls");
    rank_cmd->add_option("--ranker", rank.ranker)
        ->check(CLI::IsMember({"llm", "oracle"}))
        ->capture_default_str();
    rank_cmd->add_option("--oracle-order", rank.oracle_order, "Ids best first, one per line");
    rank_cmd->add_flag("--summarize", rank.summarize, "Summarize documents before ranking");
    rank_cmd->add_flag("--reasoning", rank.reasoning, "Ask the model to explain each ordering");
    rank_cmd->add_flag("--reproducible", rank.reproducible, "Omit wall time from the report");
    rank.model.attach(*rank_cmd);

    ChainFlags chains;
    auto* chains_cmd = app.add_subcommand("chains", "Build call chains from changed functions");
    chains_cmd->add_option("--graph", chains.graph, "Edge list: caller callee")->required();
    chains_cmd->add_option("--changed", chains.changed, "Changed function ids")->required();
    chains_cmd->add_option("--summaries", chains.summaries, "JSON-lines function summaries");
    chains_cmd->add_option("-o,--output", chains.output, "Chain corpus path (default stdout)");

    ClusterFlags cluster;
    auto* cluster_cmd = app.add_subcommand("cluster", "Cluster ranked chains on the call graph");
    cluster_cmd->add_option("report", cluster.report, "Report from `rank` over chains")->required();
    cluster_cmd->add_option("--graph", cluster.graph, "Edge list: caller callee")->required();
    cluster_cmd->add_option("-o,--output", cluster.output, "CSV path (default stdout)");
    cluster_cmd->add_flag("--survivors-only,!--all-chains", cluster.survivors_only,
                          "Ignore chains cut after the first iteration")
        ->capture_default_str();
    cluster_cmd->add_option("--diameters", cluster.diameters)->capture_default_str();
    cluster_cmd->add_option("--exact-limit", cluster.exact_limit)->capture_default_str();

    SummarizeFlags summ;
    auto* summ_cmd = app.add_subcommand("summarize", "Attach model summaries to a corpus");
    summ_cmd->add_option("input", summ.input)->required();
    summ_cmd->add_option("-o,--output", summ.output, "JSON-lines path (default stdout)");
    summ_cmd->add_option("--focus", summ.focus, "Steer summaries towards this query");
    summ_cmd->add_flag("--force", summ.force, "Redo existing summaries");
    summ_cmd->add_option("--concurrency", summ.concurrency)->capture_default_str();
    summ_cmd->add_option("--retries", summ.retries)->capture_default_str();
    summ.model.attach(*summ_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*rank_cmd) return cmd_rank(rank);
        if (*chains_cmd) return cmd_chains(chains);
        if (*cluster_cmd) return cmd_cluster(cluster);
        if (*summ_cmd) return cmd_summarize(summ);
    } catch (const RankingAborted& e) {
        std::cerr << "error: " << e.what() << " (" << e.completed().size()
                  << " iterations completed, " << e.usage().requests << " requests)\n";
        return 3;
    } catch (const AuthError& e) {
        std::cerr << "error: authentication: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
