#include "siftrank/chat_client.hpp"

#include <algorithm>
#include <thread>

#include <httplib.h>

namespace siftrank {

RateLimiter::RateLimiter(double per_second)
    : rate_(per_second), capacity_(std::max(1.0, per_second)), tokens_(capacity_), last_(Clock::now()) {
    if (!(per_second > 0.0)) throw std::invalid_argument("rate must be positive");
}

void RateLimiter::acquire() {
    std::unique_lock lock(mutex_);
    for (;;) {
        const auto now = Clock::now();
        const double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
        lock.unlock();
        std::this_thread::sleep_for(wait);
        lock.lock();
    }
}

std::pair<std::string, std::string> split_base_url(std::string_view base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw std::invalid_argument("base URL needs a scheme: " + std::string(base_url));
    }
    const auto path_start = base_url.find('/', scheme_end + 3);
    std::string host(base_url.substr(0, path_start));
    std::string path = path_start == std::string_view::npos ? std::string()
                                                            : std::string(base_url.substr(path_start));
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {std::move(host), std::move(path)};
}

nlohmann::json make_chat_body(const ChatRequest& request, const ModelEndpoint& endpoint) {
    nlohmann::json body;
    body["model"] = endpoint.model;
    auto& messages = body["messages"] = nlohmann::json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    if (endpoint.temperature) body["temperature"] = *endpoint.temperature;
    if (endpoint.reasoning_effort) body["reasoning_effort"] = *endpoint.reasoning_effort;
    return body;
}

ChatResponse parse_chat_response(std::string_view body) {
    const auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw TransportError("response body is not a JSON object", std::string(body));
    }
    const auto choices = doc.find("choices");
    if (choices == doc.end() || !choices->is_array() || choices->empty()) {
        throw TransportError("response has no choices", std::string(body));
    }
    const auto& message = (*choices)[0].value("message", nlohmann::json::object());
    ChatResponse out;
    if (auto c = message.find("content"); c != message.end() && c->is_string()) {
        out.content = c->get<std::string>();
    }
    if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
        out.usage.input_tokens = usage->value("prompt_tokens", std::uint64_t{0});
        out.usage.output_tokens = usage->value("completion_tokens", std::uint64_t{0});
    }
    return out;
}

HttpChatClient::HttpChatClient(ModelEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    std::tie(host_, path_prefix_) = split_base_url(endpoint_.base_url);
    if (endpoint_.requests_per_second > 0.0) limiter_.emplace(endpoint_.requests_per_second);
}

namespace {

httplib::Client make_client(const std::string& host, const ModelEndpoint& endpoint) {
    httplib::Client client(host);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(endpoint.timeout);
    client.set_write_timeout(endpoint.timeout);
    if (!endpoint.api_key.empty()) client.set_bearer_token_auth(endpoint.api_key);
    return client;
}

}  // namespace

ChatResponse HttpChatClient::complete(const ChatRequest& request) {
    if (limiter_) limiter_->acquire();
    auto client = make_client(host_, endpoint_);
    const auto body = make_chat_body(request, endpoint_).dump();
    auto res = client.Post(path_prefix_ + "/chat/completions", body, "application/json");
    if (!res) {
        throw TransportError("request failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 401 || res->status == 403) {
        throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status < 200 || res->status >= 300) {
        throw TransportError("HTTP " + std::to_string(res->status), res->body);
    }
    return parse_chat_response(res->body);
}

void HttpChatClient::verify_credentials() {
    auto client = make_client(host_, endpoint_);
    auto res = client.Get(path_prefix_ + "/models");
    if (!res) {
        throw TransportError("cannot reach " + host_ + ": " + httplib::to_string(res.error()));
    }
    if (res->status == 401 || res->status == 403) {
        throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
    }
}

}  // namespace siftrank
