#include "siftrank/io.hpp"

#include <cstdio>
#include <fstream>

namespace siftrank::io {

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

std::string id_from_json(const nlohmann::json& value, const std::string& source, std::size_t line) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    throw ParseError(source, line, "\"id\" must be a string or integer");
}

std::string format_fixed(double value, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, value);
    return buf;
}

}  // namespace

std::vector<Document> load_corpus(std::istream& in, std::string_view source_view, CorpusFormat format) {
    const std::string source(source_view);
    std::vector<std::pair<std::size_t, std::string>> lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        lines.emplace_back(line_no, std::string(strip_cr(line)));
    }
    if (lines.empty()) throw InputError(source + ": no documents");

    if (format == CorpusFormat::automatic) {
        const auto& first = lines.front().second;
        const auto pos = first.find_first_not_of(" \t");
        format = first[pos] == '{' ? CorpusFormat::jsonl : CorpusFormat::text;
    }

    std::vector<Document> corpus;
    corpus.reserve(lines.size());
    for (auto& [no, text] : lines) {
        Document doc;
        doc.origin_index = corpus.size();
        if (format == CorpusFormat::text) {
            doc.id = std::to_string(no);
            doc.text = std::move(text);
        } else {
            const auto obj = nlohmann::json::parse(text, nullptr, false);
            if (obj.is_discarded()) throw ParseError(source, no, "invalid JSON");
            if (!obj.is_object()) throw ParseError(source, no, "expected a JSON object");
            const auto t = obj.find("text");
            if (t == obj.end() || !t->is_string()) {
                throw ParseError(source, no, "missing string field \"text\"");
            }
            doc.text = t->get<std::string>();
            if (doc.text.empty()) throw ParseError(source, no, "empty \"text\"");
            const auto id = obj.find("id");
            doc.id = id == obj.end() ? std::to_string(no) : id_from_json(*id, source, no);
            if (auto s = obj.find("summary"); s != obj.end() && s->is_string() &&
                                              !s->get_ref<const std::string&>().empty()) {
                doc.summary = s->get<std::string>();
            }
        }
        corpus.push_back(std::move(doc));
    }
    validate_corpus(corpus);
    return corpus;
}

std::vector<Document> load_corpus_file(const std::string& path, CorpusFormat format) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return load_corpus(in, path, format);
}

void write_jsonl(std::ostream& out, std::span<const Document> corpus) {
    for (const auto& d : corpus) {
        nlohmann::ordered_json obj;
        obj["id"] = d.id;
        obj["text"] = d.text;
        if (d.summary) obj["summary"] = *d.summary;
        out << obj.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) << '\n';
    }
}

nlohmann::ordered_json to_json(const RunReport& report) {
    using nlohmann::ordered_json;
    const auto& c = report.config;
    ordered_json j;
    j["query"] = report.query;
    j["config"] = {
        {"ranker", report.ranker},
        {"model", report.model ? ordered_json(*report.model) : ordered_json()},
        {"batch_size", c.batch_size},
        {"max_trials", c.max_trials},
        {"stability_window", c.stability_window},
        {"statistic", std::string(to_string(c.statistic))},
        {"inflection", std::string(to_string(c.inflection_method))},
        {"tolerance", c.inflection_tolerance},
        {"seed", c.rng_seed},
        {"concurrency", c.concurrency_cap},
        {"retry_limit", c.retry_limit},
        {"max_requests", c.max_requests},
    };

    auto& iterations = j["iterations"] = ordered_json::array();
    for (const auto& it : report.outcome.iterations) {
        iterations.push_back({
            {"iteration", it.iteration},
            {"corpus_size", it.corpus_size},
            {"convergence_trial", it.convergence_trial},
            {"reason", std::string(to_string(it.reason))},
            {"inflection", it.inflection},
            {"frozen", it.frozen.size()},
            {"ranker_calls", it.ranker_calls},
        });
    }

    auto& docs = j["documents"] = ordered_json::array();
    for (const auto& d : report.outcome.ranking) {
        docs.push_back({
            {"rank", d.final_rank},
            {"id", d.id},
            {"score", d.last_score},
            {"iterations", d.iterations_survived},
            {"exposures", d.exposures},
        });
    }

    auto usage_json = [](const UsageTotals& u) {
        return ordered_json{{"requests", u.requests},
                            {"input_tokens", u.input_tokens},
                            {"output_tokens", u.output_tokens}};
    };
    j["usage"]["ranking"] = usage_json(report.outcome.usage);
    if (report.summarization_usage) j["usage"]["summarization"] = usage_json(*report.summarization_usage);

    if (!report.outcome.explanations.empty()) {
        auto& ex = j["explanations"] = ordered_json::array();
        for (const auto& e : report.outcome.explanations) {
            ex.push_back({{"iteration", e.iteration},
                          {"trial", e.trial},
                          {"ordered_ids", e.ordered_ids},
                          {"reasoning", e.reasoning}});
        }
    }
    if (report.wall_time) j["wall_time_seconds"] = report.wall_time->count();
    return j;
}

std::vector<graph::CallChain> chains_from_report(const nlohmann::json& report) {
    const auto docs = report.find("documents");
    if (docs == report.end() || !docs->is_array()) {
        throw InputError("report has no \"documents\" array");
    }
    std::vector<graph::CallChain> chains;
    chains.reserve(docs->size());
    for (const auto& d : *docs) {
        if (!d.is_object() || !d.contains("id") || !d.contains("rank") || !d.contains("iterations")) {
            throw InputError("report document lacks id, rank or iterations");
        }
        graph::CallChain chain;
        chain.functions = graph::split_chain_id(d.at("id").get<std::string>());
        chain.rank = d.at("rank").get<std::size_t>();
        chain.iterations = d.at("iterations").get<std::size_t>();
        chains.push_back(std::move(chain));
    }
    return chains;
}

void write_cluster_table(std::ostream& out, std::span<const graph::Cluster> ranked) {
    out << "rank,seed,diameter,size,mass,density,score\n";
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& c = ranked[i];
        out << (i + 1) << ',' << c.seed << ',' << c.diameter << ',' << c.members.size() << ','
            << format_fixed(c.mass, 4) << ',' << format_fixed(c.density, 4) << ','
            << format_fixed(c.score, 4) << '\n';
    }
}

}  // namespace siftrank::io
