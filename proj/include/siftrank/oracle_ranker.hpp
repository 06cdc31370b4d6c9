#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "siftrank/random.hpp"
#include "siftrank/ranker.hpp"

namespace siftrank {

enum class NoiseKind { none, adjacent_swap, uniform_shuffle };

struct NoiseModel {
    NoiseKind kind = NoiseKind::none;
    double probability = 0.0;  // in [0, 1]
    std::uint64_t seed = 0;
};

/// Sorts `ids` by ground truth (lower relevance rank = better) and applies
/// noise drawn from `rng`. adjacent_swap makes a single left-to-right pass,
/// swapping positions (i, i+1) with the given probability; uniform_shuffle
/// replaces the whole ordering by a uniform permutation with the given
/// probability.
std::vector<std::string> oracle_rank(std::span<const std::string> ids,
                                     const std::unordered_map<std::string, std::size_t>& truth,
                                     const NoiseModel& noise, Rng& rng);

/// Synthetic stand-in for a model: knows a total order over corpus ids.
/// Noise for each call is seeded from the request contents, so results do
/// not depend on thread scheduling.
class OracleRanker : public BatchRanker {
public:
    /// `order` lists ids best first.
    OracleRanker(std::vector<std::string> order, NoiseModel noise = {});

    BatchOrdering rank_batch(const BatchRequest& request) override;

    std::size_t truth_rank(const std::string& id) const;
    const std::vector<std::string>& order() const { return order_; }

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, std::size_t> truth_;
    NoiseModel noise_;
};

}  // namespace siftrank
