#include "siftrank/types.hpp"

namespace siftrank {

void RankConfig::validate() const {
    if (batch_size < 2) throw ConfigError("batch size must be at least 2");
    if (max_trials < 1) throw ConfigError("max trials must be at least 1");
    if (stability_window < 2) throw ConfigError("stability window must be at least 2");
    if (stability_window > max_trials) {
        throw ConfigError("stability window cannot exceed max trials");
    }
    if (concurrency_cap < 1) throw ConfigError("concurrency must be at least 1");
}

std::string_view to_string(Statistic s) { return s == Statistic::mean ? "mean" : "median"; }

std::string_view to_string(InflectionMethod m) {
    return m == InflectionMethod::elbow ? "elbow" : "gap";
}

Statistic parse_statistic(std::string_view s) {
    if (s == "mean") return Statistic::mean;
    if (s == "median") return Statistic::median;
    throw ConfigError("unknown statistic: " + std::string(s));
}

InflectionMethod parse_inflection_method(std::string_view s) {
    if (s == "elbow") return InflectionMethod::elbow;
    if (s == "gap") return InflectionMethod::gap;
    throw ConfigError("unknown inflection method: " + std::string(s));
}

}  // namespace siftrank
