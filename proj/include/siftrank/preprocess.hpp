#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siftrank/chat_client.hpp"
#include "siftrank/ranker.hpp"
#include "siftrank/types.hpp"

namespace siftrank {

enum class SummaryTemplate {
    // Short technical summary followed by a one-sentence business summary.
    function_overview,
    // Same, steered towards what matters for the ranking query.
    query_focused,
};

struct SummaryJob {
    std::string document_id;
    std::string source_text;
    SummaryTemplate prompt = SummaryTemplate::function_overview;
    std::optional<std::string> query_focus;
};

struct SummaryResult {
    std::string document_id;
    std::string summary;  // empty when the model never produced one
    bool degraded = false;
    std::string warning;
};

struct SummarizerOptions {
    std::size_t concurrency_cap = 1;
    std::size_t retry_limit = 2;
    std::uint32_t retry_backoff_ms = 0;
    bool force = false;  // re-summarize documents that already carry a summary
    SummaryTemplate prompt = SummaryTemplate::function_overview;
    std::optional<std::string> query_focus;
};

ChatRequest build_summary_prompt(const SummaryJob& job);

/// Rejects an empty source text with InputError. Model failures after the
/// retry budget produce a degraded result instead of an exception.
SummaryResult summarize(const SummaryJob& job, ChatClient& client, UsageLedger& ledger,
                        std::size_t retry_limit = 2, std::uint32_t retry_backoff_ms = 0);

struct SummarizationReport {
    std::size_t summarized = 0;
    std::size_t skipped = 0;   // already summarized
    std::size_t degraded = 0;  // left unsummarized after failures
    std::vector<std::string> warnings;
    UsageTotals usage;
};

/// Fills Document::summary in place. Documents are never added, dropped or
/// reordered; degraded documents keep ranking on their original text.
SummarizationReport summarize_corpus(std::span<Document> corpus, ChatClient& client,
                                     const SummarizerOptions& options);

}  // namespace siftrank
