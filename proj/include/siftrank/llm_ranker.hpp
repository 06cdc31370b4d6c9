#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "siftrank/chat_client.hpp"
#include "siftrank/random.hpp"
#include "siftrank/ranker.hpp"

namespace siftrank {

inline constexpr std::size_t kDefaultKeyLength = 8;

/// `count` distinct alphanumeric tokens. Tokens occurring inside any of
/// `texts` are redrawn so a key can never be mistaken for content.
std::vector<std::string> make_batch_keys(std::size_t count, Rng& rng,
                                         std::span<const std::string> texts = {},
                                         std::size_t length = kDefaultKeyLength);

struct PromptOptions {
    bool reasoning = false;
};

/// Marker preceding the machine-readable ordering in the model's reply.
inline constexpr std::string_view kRankingMarker = "RANKING:";
inline constexpr std::string_view kExplanationMarker = "EXPLANATION:";

/// System + user messages. Documents are presented as a JSON object
/// mapping key to text, in presentation order.
ChatRequest build_prompt(const BatchRequest& request, const PromptOptions& options = {});

/// Recovers an ordering of `expected_keys` from free-form model output.
/// Keys are taken in order of first mention (after the ranking marker when
/// one is present), unknown tokens are dropped, duplicates keep their first
/// occurrence, and keys never mentioned are appended in presentation order.
/// Throws RankerError when no expected key is mentioned at all.
std::vector<std::string> parse_and_repair(std::string_view raw,
                                          std::span<const std::string> expected_keys);

std::optional<std::string> extract_reasoning(std::string_view raw);

/// Batch ranker backed by a chat model. One model call per rank_batch;
/// retries are the caller's business.
class LlmRanker : public BatchRanker {
public:
    LlmRanker(ChatClient& client, PromptOptions options = {});

    BatchOrdering rank_batch(const BatchRequest& request) override;

private:
    ChatClient& client_;
    PromptOptions options_;
};

}  // namespace siftrank
