#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace siftrank {

/// One document inside a batch. `key` is the opaque token shown to the
/// model; `id` is the corpus identifier, never shown to a remote model.
struct BatchEntry {
    std::string key;
    std::string id;
    std::string text;
};

struct BatchRequest {
    std::string query;
    std::vector<BatchEntry> entries;  // presentation order
    std::size_t attempt = 0;
};

struct TokenUsage {
    std::uint64_t input_tokens = 0;
    std::uint64_t output_tokens = 0;
};

struct BatchOrdering {
    std::vector<std::string> ordered_keys;  // most relevant first
    std::optional<std::string> reasoning;
    TokenUsage usage;
};

/// Raised by a ranker for a failed attempt. `raw_response` carries the
/// model output (or transport message) that caused the failure.
class RankerError : public std::runtime_error {
public:
    RankerError(const std::string& what, std::string raw_response = {})
        : std::runtime_error(what), raw_response_(std::move(raw_response)) {}

    const std::string& raw_response() const { return raw_response_; }

private:
    std::string raw_response_;
};

/// Batch-ranking capability. Implementations must tolerate concurrent calls.
class BatchRanker {
public:
    virtual ~BatchRanker() = default;
    virtual BatchOrdering rank_batch(const BatchRequest& request) = 0;
};

struct UsageTotals {
    std::uint64_t requests = 0;
    std::uint64_t input_tokens = 0;
    std::uint64_t output_tokens = 0;
};

/// Thread-safe running totals for model traffic.
class UsageLedger {
public:
    void record(const TokenUsage& usage) {
        requests_.fetch_add(1, std::memory_order_relaxed);
        input_.fetch_add(usage.input_tokens, std::memory_order_relaxed);
        output_.fetch_add(usage.output_tokens, std::memory_order_relaxed);
    }

    /// A request that produced no usable response still counts as traffic.
    void record_failed_request() { requests_.fetch_add(1, std::memory_order_relaxed); }

    UsageTotals totals() const {
        return {requests_.load(), input_.load(), output_.load()};
    }

private:
    std::atomic<std::uint64_t> requests_{0};
    std::atomic<std::uint64_t> input_{0};
    std::atomic<std::uint64_t> output_{0};
};

}  // namespace siftrank
