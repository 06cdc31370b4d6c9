#include <doctest.h>

#include <atomic>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "siftrank/preprocess.hpp"

using namespace siftrank;

namespace {

/// Summarizes by echoing the first word of the source; fails for sources
/// containing "broken".
class FakeSummarizer : public ChatClient {
public:
    ChatResponse complete(const ChatRequest& request) override {
        ++calls;
        const auto& user = request.messages.back().content;
        if (user.find("broken") != std::string::npos) throw TransportError("boom");
        if (user.find("silent") != std::string::npos) return {"   \n", {10, 0}};
        const auto body = user.substr(user.rfind("\n\n") + 2);
        {
            std::lock_guard lock(mutex);
            seen.insert(body);
        }
        return {"summary: " + body, {10, 3}};
    }
    std::atomic<int> calls{0};
    std::mutex mutex;
    std::set<std::string> seen;
};

std::vector<Document> functions(std::size_t n) {
    std::vector<Document> docs;
    for (std::size_t i = 0; i < n; ++i) {
        docs.push_back(Document{"fn" + std::to_string(i), "int f" + std::to_string(i) + "() { return 0; }", i,
                                std::nullopt});
    }
    return docs;
}

}  // namespace

TEST_CASE("summary prompt embeds the source and the optional focus") {
    SummaryJob job{"f", "void f() {}", SummaryTemplate::function_overview, std::nullopt};
    auto p = build_summary_prompt(job);
    REQUIRE(p.messages.size() == 1);
    const auto& text = p.messages[0].content;
    CHECK(text.find("void f() {}") != std::string::npos);
    CHECK(text.find("sentence") != std::string::npos);
    CHECK(build_summary_prompt(job) == p);

    job.prompt = SummaryTemplate::query_focused;
    job.query_focus = "authentication bypass";
    CHECK(build_summary_prompt(job).messages[0].content.find("authentication bypass") != std::string::npos);
}

TEST_CASE("empty source is rejected") {
    FakeSummarizer client;
    UsageLedger ledger;
    CHECK_THROWS_AS(summarize(SummaryJob{"x", ""}, client, ledger), InputError);
    CHECK(client.calls == 0);
}

TEST_CASE("2,197 functions summarized under bounded concurrency") {
    FakeSummarizer client;
    auto docs = functions(2197);
    SummarizerOptions opts;
    opts.concurrency_cap = 16;
    auto report = summarize_corpus(docs, client, opts);
    CHECK(report.summarized == 2197);
    CHECK(report.degraded == 0);
    CHECK(report.usage.requests == 2197);
    CHECK(report.usage.input_tokens == 21970);
    CHECK(report.usage.output_tokens == 6591);
    CHECK(client.seen.size() == 2197);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        REQUIRE(docs[i].summary);
        CHECK(*docs[i].summary == "summary: " + docs[i].text);
        CHECK(docs[i].id == "fn" + std::to_string(i));
        CHECK(docs[i].ranking_text() == *docs[i].summary);
    }
}

TEST_CASE("failures degrade to the original text with a warning") {
    FakeSummarizer client;
    auto docs = functions(4);
    docs[1].text = "broken function";
    docs[3].text = "silent function";
    SummarizerOptions opts;
    opts.retry_limit = 2;
    auto report = summarize_corpus(docs, client, opts);
    CHECK(report.summarized == 2);
    CHECK(report.degraded == 2);
    REQUIRE(report.warnings.size() == 2);
    CHECK(report.warnings[0].find("fn1") != std::string::npos);
    CHECK_FALSE(docs[1].summary);
    CHECK(docs[1].ranking_text() == "broken function");
    // two good calls plus three attempts for each failing document
    CHECK(report.usage.requests == 2 + 3 + 3);
}

TEST_CASE("existing summaries are skipped unless forced") {
    FakeSummarizer client;
    auto docs = functions(3);
    docs[0].summary = "kept";
    auto report = summarize_corpus(docs, client, {});
    CHECK(report.skipped == 1);
    CHECK(report.summarized == 2);
    CHECK(*docs[0].summary == "kept");

    SummarizerOptions force;
    force.force = true;
    auto again = summarize_corpus(docs, client, force);
    CHECK(again.skipped == 0);
    CHECK(again.summarized == 3);
    CHECK(*docs[0].summary != "kept");
}

TEST_CASE("auth failure is not swallowed") {
    class Rejecting : public ChatClient {
    public:
        ChatResponse complete(const ChatRequest&) override { throw AuthError("401"); }
    } client;
    auto docs = functions(2);
    CHECK_THROWS_AS(summarize_corpus(docs, client, {}), AuthError);
}
