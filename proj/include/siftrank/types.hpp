#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace siftrank {

/// Unit of retrieval. `summary`, when present, is what the ranker sees;
/// `text` is always kept as the original payload.
struct Document {
    std::string id;
    std::string text;
    std::size_t origin_index = 0;
    std::optional<std::string> summary;

    const std::string& ranking_text() const { return summary ? *summary : text; }
};

enum class Statistic { mean, median };
enum class InflectionMethod { elbow, gap };

struct RankConfig {
    std::size_t batch_size = 10;       // S
    std::size_t max_trials = 50;       // T
    std::size_t stability_window = 5;  // W
    Statistic statistic = Statistic::mean;
    InflectionMethod inflection_method = InflectionMethod::elbow;
    std::size_t inflection_tolerance = 0;
    std::size_t concurrency_cap = 1;
    std::uint64_t rng_seed = 0;
    std::size_t retry_limit = 2;
    // Base delay for exponential backoff between ranker retries.
    std::uint32_t retry_backoff_ms = 0;
    // 0 = unlimited.
    std::size_t max_requests = 0;

    /// Throws ConfigError when a bound is violated.
    void validate() const;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string_view to_string(Statistic s);
std::string_view to_string(InflectionMethod m);
Statistic parse_statistic(std::string_view s);
InflectionMethod parse_inflection_method(std::string_view s);

}  // namespace siftrank
