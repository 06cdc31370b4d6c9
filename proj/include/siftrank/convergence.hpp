#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siftrank/types.hpp"

namespace siftrank {

/// Partition index into a sorted score curve: the number of leading
/// (best) items kept above the knee. Always in [1, n-1] when present.
using InflectionIndex = std::size_t;

/// Knee of an ascending score curve by maximum second difference of the
/// min-max normalised curve. Returns nullopt when no positive curvature
/// exists (flat or exactly linear curve), or when the curve has fewer than
/// three points.
std::optional<InflectionIndex> find_inflection_elbow(std::span<const double> sorted_scores);

/// Index i maximising sorted[i] - sorted[i-1] (1-based, gap after item i).
/// Ties resolve to the smallest i. Requires at least two points.
InflectionIndex find_inflection_gap(std::span<const double> sorted_scores);

enum class Stability { none, ordering_stable, inflection_stable };

std::string_view to_string(Stability s);

/// Trailing window of per-trial rankings and inflection indices.
class StabilityHistory {
public:
    explicit StabilityHistory(std::size_t window);

    void push(std::vector<std::size_t> ranking, InflectionIndex inflection);

    std::size_t window() const { return window_; }
    std::size_t size() const { return rankings_.size(); }
    const std::deque<std::vector<std::size_t>>& rankings() const { return rankings_; }
    const std::deque<InflectionIndex>& inflections() const { return inflections_; }

private:
    std::size_t window_;
    std::deque<std::vector<std::size_t>> rankings_;
    std::deque<InflectionIndex> inflections_;
};

/// Ordering stability is checked first: all W rankings identical. Otherwise
/// inflection stability: max - min of the W indices within `tolerance`.
Stability check_stability(const StabilityHistory& history, std::size_t tolerance);

}  // namespace siftrank
