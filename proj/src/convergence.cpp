#include "siftrank/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace siftrank {

namespace {

// Second differences below this (on a curve normalised to [0, 1]) are
// floating-point residue of an exactly linear curve.
constexpr double kCurvatureEpsilon = 1e-12;
constexpr double kGapEpsilon = 1e-12;

}  // namespace

std::optional<InflectionIndex> find_inflection_elbow(std::span<const double> sorted_scores) {
    const std::size_t n = sorted_scores.size();
    if (n < 3) return std::nullopt;

    const double lo = sorted_scores.front();
    const double range = sorted_scores.back() - lo;
    if (!(range > 0.0)) return std::nullopt;

    double best = kCurvatureEpsilon;
    std::optional<InflectionIndex> knee;
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double prev = (sorted_scores[j - 1] - lo) / range;
        const double here = (sorted_scores[j] - lo) / range;
        const double next = (sorted_scores[j + 1] - lo) / range;
        const double curvature = next - 2.0 * here + prev;
        if (curvature > best + kCurvatureEpsilon) {
            best = curvature;
            knee = j + 1;
        }
    }
    return knee;
}

InflectionIndex find_inflection_gap(std::span<const double> sorted_scores) {
    if (sorted_scores.size() < 2) {
        throw std::invalid_argument("gap detection needs at least two scores");
    }
    InflectionIndex best_index = 1;
    double best_gap = sorted_scores[1] - sorted_scores[0];
    for (std::size_t i = 2; i < sorted_scores.size(); ++i) {
        const double gap = sorted_scores[i] - sorted_scores[i - 1];
        if (gap > best_gap + kGapEpsilon) {
            best_gap = gap;
            best_index = i;
        }
    }
    return best_index;
}

std::string_view to_string(Stability s) {
    switch (s) {
        case Stability::ordering_stable: return "ordering_stable";
        case Stability::inflection_stable: return "inflection_stable";
        case Stability::none: break;
    }
    return "none";
}

StabilityHistory::StabilityHistory(std::size_t window) : window_(window) {
    if (window_ < 2) throw std::invalid_argument("stability window must be at least 2");
}

void StabilityHistory::push(std::vector<std::size_t> ranking, InflectionIndex inflection) {
    rankings_.push_back(std::move(ranking));
    inflections_.push_back(inflection);
    while (rankings_.size() > window_) {
        rankings_.pop_front();
        inflections_.pop_front();
    }
}

Stability check_stability(const StabilityHistory& history, std::size_t tolerance) {
    if (history.size() < history.window()) return Stability::none;

    const auto& rankings = history.rankings();
    const bool same_order = std::all_of(rankings.begin() + 1, rankings.end(),
                                        [&](const auto& r) { return r == rankings.front(); });
    if (same_order) return Stability::ordering_stable;

    const auto [lo, hi] =
        std::minmax_element(history.inflections().begin(), history.inflections().end());
    if (*hi - *lo <= tolerance) return Stability::inflection_stable;
    return Stability::none;
}

}  // namespace siftrank
