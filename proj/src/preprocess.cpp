#include "siftrank/preprocess.hpp"

#include <cctype>
#include <chrono>
#include <mutex>
#include <thread>

#include "parallel.hpp"

namespace siftrank {

namespace {

constexpr std::string_view kOverviewInstruction =
    "In just a few sentences, summarize what this function appears to be doing. Provide "
    "roughly 3 sentences of medium-level technical explanation (e.g., if a developer were "
    "speaking to a technical product manager), and then 1 sentence of high-level business "
    "explanation (e.g., if a technical product manager were speaking to a sales "
    "representative).";

bool blank(std::string_view s) {
    for (unsigned char c : s) {
        if (!std::isspace(c)) return false;
    }
    return true;
}

}  // namespace

ChatRequest build_summary_prompt(const SummaryJob& job) {
    std::string user(kOverviewInstruction);
    if (job.prompt == SummaryTemplate::query_focused && job.query_focus) {
        user += " Focus on whatever in it bears on the following: ";
        user += *job.query_focus;
    }
    user += "\n\n";
    user += job.source_text;
    return ChatRequest{{{"user", std::move(user)}}};
}

SummaryResult summarize(const SummaryJob& job, ChatClient& client, UsageLedger& ledger,
                        std::size_t retry_limit, std::uint32_t retry_backoff_ms) {
    if (job.source_text.empty()) {
        throw InputError("document '" + job.document_id + "' has no text to summarize");
    }
    const auto prompt = build_summary_prompt(job);
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= retry_limit; ++attempt) {
        try {
            auto response = client.complete(prompt);
            ledger.record(response.usage);
            if (!blank(response.content)) {
                return SummaryResult{job.document_id, std::move(response.content), false, {}};
            }
            last_error = "model returned an empty summary";
        } catch (const AuthError&) {
            ledger.record_failed_request();
            throw;
        } catch (const std::exception& e) {
            ledger.record_failed_request();
            last_error = e.what();
        }
        if (attempt < retry_limit && retry_backoff_ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(
                static_cast<std::uint64_t>(retry_backoff_ms) << std::min<std::size_t>(attempt, 16)));
        }
    }
    return SummaryResult{job.document_id, {}, true,
                         "summary failed for '" + job.document_id + "': " + last_error};
}

SummarizationReport summarize_corpus(std::span<Document> corpus, ChatClient& client,
                                     const SummarizerOptions& options) {
    SummarizationReport report;
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (corpus[i].text.empty()) {
            throw InputError("document '" + corpus[i].id + "' has no text to summarize");
        }
        if (corpus[i].summary && !options.force) {
            ++report.skipped;
        } else {
            pending.push_back(i);
        }
    }

    UsageLedger ledger;
    std::vector<SummaryResult> results(pending.size());
    detail::parallel_for(pending.size(), options.concurrency_cap, [&](std::size_t j) {
        const Document& doc = corpus[pending[j]];
        SummaryJob job{doc.id, doc.text, options.prompt, options.query_focus};
        results[j] = summarize(job, client, ledger, options.retry_limit, options.retry_backoff_ms);
    });

    for (std::size_t j = 0; j < pending.size(); ++j) {
        Document& doc = corpus[pending[j]];
        auto& r = results[j];
        if (r.degraded) {
            ++report.degraded;
            report.warnings.push_back(std::move(r.warning));
        } else {
            ++report.summarized;
            doc.summary = std::move(r.summary);
        }
    }
    report.usage = ledger.totals();
    return report;
}

}  // namespace siftrank
