#pragma once

#include <chrono>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "siftrank/engine.hpp"
#include "siftrank/graphrank.hpp"
#include "siftrank/types.hpp"

namespace siftrank::io {

/// Malformed input with the 1-based line it was found on.
class ParseError : public InputError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : InputError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

enum class CorpusFormat { automatic, jsonl, text };

/// JSON lines (`{"id": ..., "text": ..., "summary": ...}`, id optional) or
/// plain text with one document per non-blank line. Missing ids become the
/// 1-based line number. `automatic` picks JSON lines when the first
/// non-blank line starts with '{'.
std::vector<Document> load_corpus(std::istream& in, std::string_view source,
                                  CorpusFormat format = CorpusFormat::automatic);

std::vector<Document> load_corpus_file(const std::string& path,
                                       CorpusFormat format = CorpusFormat::automatic);

void write_jsonl(std::ostream& out, std::span<const Document> corpus);

struct RunReport {
    RankConfig config;
    std::string query;
    std::string ranker;  // "llm" or "oracle"
    std::optional<std::string> model;
    RankingOutcome outcome;
    std::optional<UsageTotals> summarization_usage;
    std::optional<std::chrono::duration<double>> wall_time;
};

nlohmann::ordered_json to_json(const RunReport& report);

/// Ranked chains out of a report's `documents` array. Chain ids name their
/// functions joined by "->".
std::vector<graph::CallChain> chains_from_report(const nlohmann::json& report);

/// rank,seed,diameter,size,mass,density,score; clusters must already be sorted.
void write_cluster_table(std::ostream& out, std::span<const graph::Cluster> ranked);

}  // namespace siftrank::io
