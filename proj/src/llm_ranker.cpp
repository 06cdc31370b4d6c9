#include "siftrank/llm_ranker.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace siftrank {

namespace {

constexpr std::string_view kKeyAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
constexpr int kKeyRedraws = 64;

bool is_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string draw_key(Rng& rng, std::size_t length) {
    std::string key(length, ' ');
    for (auto& c : key) c = kKeyAlphabet[uniform_below(rng, kKeyAlphabet.size())];
    return key;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

constexpr std::string_view kSystemPrompt =
    "You are a ranking assistant. You order documents by how relevant each one is to a "
    "query. Judge documents against each other, most relevant first. Every key must appear "
    "exactly once in your answer.";

}  // namespace

std::vector<std::string> make_batch_keys(std::size_t count, Rng& rng,
                                         std::span<const std::string> texts, std::size_t length) {
    if (length == 0) throw std::invalid_argument("key length must be positive");
    std::vector<std::string> keys;
    keys.reserve(count);
    std::unordered_set<std::string> seen;
    while (keys.size() < count) {
        std::string key = draw_key(rng, length);
        for (int redraw = 0; redraw < kKeyRedraws; ++redraw) {
            const bool in_text = std::any_of(texts.begin(), texts.end(), [&](const std::string& t) {
                return t.find(key) != std::string::npos;
            });
            if (!in_text) break;
            key = draw_key(rng, length);
        }
        if (seen.insert(key).second) keys.push_back(std::move(key));
    }
    return keys;
}

ChatRequest build_prompt(const BatchRequest& request, const PromptOptions& options) {
    nlohmann::ordered_json documents = nlohmann::ordered_json::object();
    for (const auto& e : request.entries) documents[e.key] = e.text;

    std::string user;
    user += "Query:\n";
    user += request.query;
    user += "\n\nDocuments (JSON object mapping each key to its document):\n";
    user += documents.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
    user += "\n\nOrder all ";
    user += std::to_string(request.entries.size());
    user += " keys from most to least relevant to the query.\n";
    if (options.reasoning) {
        user += "First write one line starting with ";
        user += kExplanationMarker;
        user += " that briefly explains your ordering. Then write ";
    } else {
        user += "Write ";
    }
    user += "a single line of the form\n";
    user += kRankingMarker;
    user += " [\"KEY\", \"KEY\", ...]\nlisting only the keys.";
    if (!options.reasoning) user += " Do not write anything else.";

    return ChatRequest{{{"system", std::string(kSystemPrompt)}, {"user", std::move(user)}}};
}

std::vector<std::string> parse_and_repair(std::string_view raw,
                                          std::span<const std::string> expected_keys) {
    if (expected_keys.empty()) throw std::invalid_argument("expected key set is empty");
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < expected_keys.size(); ++i) index.emplace(expected_keys[i], i);

    auto scan = [&](std::string_view text) {
        std::vector<bool> taken(expected_keys.size(), false);
        std::vector<std::string> ordered;
        std::size_t i = 0;
        while (i < text.size()) {
            if (!is_key_char(text[i])) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < text.size() && is_key_char(text[j])) ++j;
            if (auto it = index.find(text.substr(i, j - i)); it != index.end() && !taken[it->second]) {
                taken[it->second] = true;
                ordered.push_back(expected_keys[it->second]);
            }
            i = j;
        }
        return std::pair{std::move(ordered), std::move(taken)};
    };

    auto [ordered, taken] = [&] {
        if (auto marker = raw.rfind(kRankingMarker); marker != std::string_view::npos) {
            auto after = scan(raw.substr(marker + kRankingMarker.size()));
            if (!after.first.empty()) return after;
        }
        return scan(raw);
    }();

    if (ordered.empty()) {
        throw RankerError("model output names none of the batch keys", std::string(raw));
    }
    for (std::size_t i = 0; i < expected_keys.size(); ++i) {
        if (!taken[i]) ordered.push_back(expected_keys[i]);
    }
    return ordered;
}

std::optional<std::string> extract_reasoning(std::string_view raw) {
    const auto start = raw.find(kExplanationMarker);
    if (start == std::string_view::npos) return std::nullopt;
    auto rest = raw.substr(start + kExplanationMarker.size());
    if (auto end = rest.find(kRankingMarker); end != std::string_view::npos) rest = rest.substr(0, end);
    rest = trim(rest);
    if (rest.empty()) return std::nullopt;
    return std::string(rest);
}

LlmRanker::LlmRanker(ChatClient& client, PromptOptions options)
    : client_(client), options_(options) {}

BatchOrdering LlmRanker::rank_batch(const BatchRequest& request) {
    std::vector<std::string> keys;
    keys.reserve(request.entries.size());
    for (const auto& e : request.entries) keys.push_back(e.key);

    if (keys.size() == 1) return BatchOrdering{std::move(keys), std::nullopt, {}};

    const auto response = client_.complete(build_prompt(request, options_));
    BatchOrdering ordering;
    ordering.usage = response.usage;
    ordering.ordered_keys = parse_and_repair(response.content, keys);
    if (options_.reasoning) ordering.reasoning = extract_reasoning(response.content);
    return ordering;
}

}  // namespace siftrank
