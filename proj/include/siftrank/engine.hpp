#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "siftrank/convergence.hpp"
#include "siftrank/ranker.hpp"
#include "siftrank/types.hpp"

namespace siftrank {

// ---------------------------------------------------------------------------
// Building blocks. Templated on the identifier type so the engine can work
// on dense indices while callers and tests use whatever ids they like.
// ---------------------------------------------------------------------------

template <typename Id>
struct BatchPartition {
    std::vector<std::vector<Id>> batches;
    std::vector<Id> remainder;  // excluded this trial, owed a place next trial
};

/// Cuts a shuffled list into floor(n/S) batches of exactly S. The n mod S
/// excluded items are the last non-priority items in shuffled order, so
/// every priority item lands in a batch. A list shorter than S becomes a
/// single undersized batch.
template <typename Id, typename IsPriority>
    requires std::predicate<IsPriority&, const Id&>
BatchPartition<Id> partition_into_batches(std::span<const Id> shuffled, std::size_t batch_size,
                                          IsPriority&& is_priority) {
    if (batch_size < 2) throw ConfigError("batch size must be at least 2");
    BatchPartition<Id> out;
    const std::size_t n = shuffled.size();
    if (n == 0) return out;
    if (n <= batch_size) {
        out.batches.emplace_back(shuffled.begin(), shuffled.end());
        return out;
    }

    const std::size_t excluded = n % batch_size;
    std::vector<bool> drop(n, false);
    std::size_t dropped = 0;
    for (std::size_t i = n; i > 0 && dropped < excluded; --i) {
        if (!is_priority(shuffled[i - 1])) {
            drop[i - 1] = true;
            ++dropped;
        }
    }
    if (dropped < excluded) {
        throw ConfigError("priority set larger than the batched capacity of the trial");
    }

    std::vector<Id> kept;
    kept.reserve(n - excluded);
    for (std::size_t i = 0; i < n; ++i) {
        if (drop[i]) {
            out.remainder.push_back(shuffled[i]);
        } else {
            kept.push_back(shuffled[i]);
        }
    }
    for (std::size_t start = 0; start < kept.size(); start += batch_size) {
        out.batches.emplace_back(kept.begin() + static_cast<std::ptrdiff_t>(start),
                                 kept.begin() + static_cast<std::ptrdiff_t>(start + batch_size));
    }
    return out;
}

template <typename Id>
BatchPartition<Id> partition_into_batches(std::span<const Id> shuffled, std::size_t batch_size,
                                          const std::unordered_set<Id>& priority) {
    return partition_into_batches(shuffled, batch_size,
                                  [&](const Id& id) { return priority.contains(id); });
}

template <typename Id>
struct RefinedSplit {
    std::vector<Id> advance;
    std::vector<Id> frozen;
};

/// Splits a ranking after its first `inflection` items. An index at or past
/// the end yields an empty frozen part; the engine never lets that happen.
template <typename Id>
RefinedSplit<Id> refine_partition(std::span<const Id> ranking, std::size_t inflection) {
    const std::size_t cut = std::min(inflection, ranking.size());
    return {{ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(cut)},
            {ranking.begin() + static_cast<std::ptrdiff_t>(cut), ranking.end()}};
}

/// Final ranking followed by the frozen tails, newest first.
/// `frozen_by_iteration[k-1]` holds the tail frozen in iteration k.
template <typename Id>
std::vector<Id> reassemble(std::span<const Id> final_ranking,
                           std::span<const std::vector<Id>> frozen_by_iteration) {
    std::vector<Id> out(final_ranking.begin(), final_ranking.end());
    for (auto it = frozen_by_iteration.rbegin(); it != frozen_by_iteration.rend(); ++it) {
        out.insert(out.end(), it->begin(), it->end());
    }
    std::unordered_set<Id> seen;
    for (const auto& id : out) {
        if (!seen.insert(id).second) throw std::logic_error("reassembled ranking repeats an id");
    }
    return out;
}

/// Where one document landed in one trial.
struct Placement {
    std::size_t item = 0;
    std::size_t position = 0;      // 1 = most relevant
    std::size_t batch_length = 0;
};

struct TrialRecord {
    std::size_t trial = 0;
    std::vector<Placement> placements;  // participants only
};

/// Per-iteration positions for items 0..size-1. Scores are aggregated over
/// the trials an item actually took part in.
class ScoreBoard {
public:
    explicit ScoreBoard(std::size_t size);

    /// Adds every placement of the trial. Throws on out-of-range positions.
    void update(const TrialRecord& record);

    /// nullopt for an item that has not been placed yet.
    std::optional<double> score(std::size_t item, Statistic statistic) const;
    std::size_t exposure(std::size_t item) const { return positions_.at(item).size(); }
    std::size_t size() const { return positions_.size(); }

private:
    std::vector<std::vector<std::uint32_t>> positions_;
    std::vector<std::uint64_t> sums_;
};

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

enum class ConvergenceReason { ordering_stable, inflection_stable, max_trials };

std::string_view to_string(ConvergenceReason r);

struct IterationResult {
    std::size_t iteration = 0;
    std::size_t corpus_size = 0;
    std::vector<std::string> ranking;  // R_k
    std::vector<double> scores;        // parallel to ranking
    std::size_t inflection = 0;        // items kept from the top of R_k
    std::size_t convergence_trial = 0;
    ConvergenceReason reason = ConvergenceReason::max_trials;
    std::vector<std::string> frozen;   // suffix of R_k after `inflection`
    std::uint64_t ranker_calls = 0;
};

struct RankedDocument {
    std::string id;
    std::size_t final_rank = 0;
    double last_score = 0.0;
    std::size_t iterations_survived = 0;
    std::size_t exposures = 0;
};

struct BatchExplanation {
    std::size_t iteration = 0;
    std::size_t trial = 0;
    std::vector<std::string> ordered_ids;
    std::string reasoning;
};

struct RankingOutcome {
    std::vector<RankedDocument> ranking;
    std::vector<IterationResult> iterations;
    UsageTotals usage;
    std::vector<BatchExplanation> explanations;
};

/// Snapshot handed to an observer after each trial's partition is drawn.
struct TrialEvent {
    std::size_t iteration = 0;
    std::size_t trial = 0;
    const std::vector<std::vector<std::string>>& batches;
    const std::vector<std::string>& remainder;
};

using TrialObserver = std::function<void(const TrialEvent&)>;

/// Run stopped early. `completed` holds the iterations that finished.
class RankingAborted : public std::runtime_error {
public:
    RankingAborted(const std::string& what, std::vector<IterationResult> completed,
                   UsageTotals usage, bool budget_exhausted)
        : std::runtime_error(what),
          completed_(std::move(completed)),
          usage_(usage),
          budget_exhausted_(budget_exhausted) {}

    const std::vector<IterationResult>& completed() const { return completed_; }
    const UsageTotals& usage() const { return usage_; }
    bool budget_exhausted() const { return budget_exhausted_; }

private:
    std::vector<IterationResult> completed_;
    UsageTotals usage_;
    bool budget_exhausted_;
};

/// Orders a corpus against a query with a batch ranker: repeated shuffled
/// trials per iteration until the ordering or the inflection index holds
/// steady over the stability window, then the part below the inflection is
/// frozen and the rest goes round again.
///
/// Batches of one trial are ranked concurrently (up to concurrency_cap);
/// trials run one after another so convergence can skip the remainder.
class RankingEngine {
public:
    RankingEngine(RankConfig config, BatchRanker& ranker);

    void set_trial_observer(TrialObserver observer) { observer_ = std::move(observer); }

    /// Throws InputError for an empty corpus, duplicate ids or empty texts,
    /// ConfigError for invalid parameters, RankingAborted when the ranker
    /// keeps failing or the request budget runs out.
    RankingOutcome run(std::span<const Document> corpus, const std::string& query);

    const RankConfig& config() const { return config_; }

private:
    RankConfig config_;
    BatchRanker& ranker_;
    TrialObserver observer_;
};

inline RankingOutcome run_ranking(std::span<const Document> corpus, const std::string& query,
                                  const RankConfig& config, BatchRanker& ranker) {
    return RankingEngine(config, ranker).run(corpus, query);
}

/// Inflection used by the engine: the configured detector, gap detection
/// for curves shorter than three points, and a forced split keeping
/// n - max(1, n/10) items when the detector finds no interior knee.
std::size_t resolve_inflection(std::span<const double> sorted_scores, InflectionMethod method);

/// Throws InputError unless the corpus is non-empty with unique ids and
/// non-empty texts.
void validate_corpus(std::span<const Document> corpus);

}  // namespace siftrank
