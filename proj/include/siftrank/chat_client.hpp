#pragma once

#include <chrono>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "siftrank/ranker.hpp"

namespace siftrank {

struct ChatMessage {
    std::string role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;

    bool operator==(const ChatRequest&) const = default;
};

struct ChatResponse {
    std::string content;
    TokenUsage usage;
};

/// Something that answers chat-completion requests. Must be thread-safe.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// Network failure, non-2xx status other than auth, or malformed body.
class TransportError : public RankerError {
public:
    using RankerError::RankerError;
};

/// 401/403 from the endpoint. Never worth retrying.
class AuthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModelEndpoint {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-5-nano";
    std::string api_key;
    std::optional<double> temperature;
    std::optional<std::string> reasoning_effort;
    std::chrono::seconds timeout{120};
    // 0 disables client-side rate limiting.
    double requests_per_second = 0.0;
};

/// Token bucket with capacity one second's worth of requests.
class RateLimiter {
public:
    explicit RateLimiter(double per_second);
    void acquire();

private:
    using Clock = std::chrono::steady_clock;
    double rate_;
    double capacity_;
    double tokens_;
    Clock::time_point last_;
    std::mutex mutex_;
};

/// Splits "https://host:port/v1" into ("https://host:port", "/v1").
std::pair<std::string, std::string> split_base_url(std::string_view base_url);

/// OpenAI-compatible chat-completions body.
nlohmann::json make_chat_body(const ChatRequest& request, const ModelEndpoint& endpoint);

/// Extracts the first choice's content and token usage from a response body.
ChatResponse parse_chat_response(std::string_view body);

class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ModelEndpoint endpoint);

    ChatResponse complete(const ChatRequest& request) override;

    /// Cheap authenticated GET of the model listing. Throws AuthError on
    /// 401/403 and TransportError when the host is unreachable. Endpoints
    /// without a listing route (404) are accepted.
    void verify_credentials();

    const ModelEndpoint& endpoint() const { return endpoint_; }

private:
    ModelEndpoint endpoint_;
    std::string host_;
    std::string path_prefix_;
    std::optional<RateLimiter> limiter_;
};

}  // namespace siftrank
