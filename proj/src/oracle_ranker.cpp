#include "siftrank/oracle_ranker.hpp"

#include <algorithm>
#include <stdexcept>

namespace siftrank {

std::vector<std::string> oracle_rank(std::span<const std::string> ids,
                                     const std::unordered_map<std::string, std::size_t>& truth,
                                     const NoiseModel& noise, Rng& rng) {
    if (noise.probability < 0.0 || noise.probability > 1.0) {
        throw std::invalid_argument("noise probability must lie in [0, 1]");
    }
    std::vector<std::pair<std::size_t, std::string>> ranked;
    ranked.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = truth.find(id);
        if (it == truth.end()) throw RankerError("oracle has no ground truth for id '" + id + "'");
        ranked.emplace_back(it->second, id);
    }
    std::sort(ranked.begin(), ranked.end());

    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (auto& [rank, id] : ranked) out.push_back(std::move(id));

    switch (noise.kind) {
        case NoiseKind::none:
            break;
        case NoiseKind::adjacent_swap:
            for (std::size_t i = 0; i + 1 < out.size(); ++i) {
                if (uniform_unit(rng) < noise.probability) std::swap(out[i], out[i + 1]);
            }
            break;
        case NoiseKind::uniform_shuffle:
            if (uniform_unit(rng) < noise.probability) fisher_yates(std::span(out), rng);
            break;
    }
    return out;
}

OracleRanker::OracleRanker(std::vector<std::string> order, NoiseModel noise)
    : order_(std::move(order)), noise_(noise) {
    if (noise_.probability < 0.0 || noise_.probability > 1.0) {
        throw std::invalid_argument("noise probability must lie in [0, 1]");
    }
    truth_.reserve(order_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) {
        if (!truth_.emplace(order_[i], i).second) {
            throw std::invalid_argument("duplicate id in oracle order: " + order_[i]);
        }
    }
}

std::size_t OracleRanker::truth_rank(const std::string& id) const {
    auto it = truth_.find(id);
    if (it == truth_.end()) throw RankerError("oracle has no ground truth for id '" + id + "'");
    return it->second;
}

BatchOrdering OracleRanker::rank_batch(const BatchRequest& request) {
    std::vector<std::string> ids;
    ids.reserve(request.entries.size());
    std::uint64_t h = fnv1a(request.query);
    for (const auto& e : request.entries) {
        ids.push_back(e.id);
        h = fnv1a(e.key, h);
        h = fnv1a(e.id, h);
    }
    Rng rng(mix_seed(noise_.seed, h, request.attempt));
    const auto ordered_ids = oracle_rank(ids, truth_, noise_, rng);

    std::unordered_map<std::string, const std::string*> key_of;
    for (const auto& e : request.entries) key_of.emplace(e.id, &e.key);

    BatchOrdering ordering;
    ordering.ordered_keys.reserve(ordered_ids.size());
    for (const auto& id : ordered_ids) ordering.ordered_keys.push_back(*key_of.at(id));
    return ordering;
}

}  // namespace siftrank
