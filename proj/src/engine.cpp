#include "siftrank/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "parallel.hpp"
#include "siftrank/chat_client.hpp"
#include "siftrank/llm_ranker.hpp"
#include "siftrank/random.hpp"

namespace siftrank {

ScoreBoard::ScoreBoard(std::size_t size) : positions_(size), sums_(size, 0) {}

void ScoreBoard::update(const TrialRecord& record) {
    for (const auto& p : record.placements) {
        if (p.item >= positions_.size()) throw std::out_of_range("placement for unknown item");
        if (p.position < 1 || p.position > p.batch_length) {
            throw std::out_of_range("batch position outside [1, batch length]");
        }
        positions_[p.item].push_back(static_cast<std::uint32_t>(p.position));
        sums_[p.item] += p.position;
    }
}

std::optional<double> ScoreBoard::score(std::size_t item, Statistic statistic) const {
    const auto& seen = positions_.at(item);
    if (seen.empty()) return std::nullopt;
    if (statistic == Statistic::mean) {
        return static_cast<double>(sums_[item]) / static_cast<double>(seen.size());
    }
    std::vector<std::uint32_t> sorted(seen);
    const std::size_t mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
    const double upper = sorted[mid];
    if (sorted.size() % 2 == 1) return upper;
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
    return (lower + upper) / 2.0;
}

std::string_view to_string(ConvergenceReason r) {
    switch (r) {
        case ConvergenceReason::ordering_stable: return "ordering_stable";
        case ConvergenceReason::inflection_stable: return "inflection_stable";
        case ConvergenceReason::max_trials: break;
    }
    return "max_trials";
}

std::size_t resolve_inflection(std::span<const double> sorted_scores, InflectionMethod method) {
    const std::size_t n = sorted_scores.size();
    if (n < 2) return n;
    std::optional<std::size_t> knee;
    if (method == InflectionMethod::elbow && n >= 3) {
        knee = find_inflection_elbow(sorted_scores);
    } else {
        knee = find_inflection_gap(sorted_scores);
    }
    if (!knee || *knee >= n) knee = n - std::max<std::size_t>(1, n / 10);
    return *knee;
}

void validate_corpus(std::span<const Document> corpus) {
    if (corpus.empty()) throw InputError("corpus is empty");
    std::unordered_set<std::string_view> ids;
    for (const auto& d : corpus) {
        if (d.id.empty()) throw InputError("document with empty id");
        if (!ids.insert(d.id).second) throw InputError("duplicate document id: " + d.id);
        if (d.ranking_text().empty()) throw InputError("document '" + d.id + "' has empty text");
    }
}

namespace {

class BudgetExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Budget and traffic accounting shared by the batch workers of a run.
struct CallCounter {
    std::size_t max_requests = 0;
    std::atomic<std::uint64_t> calls{0};

    void reserve() {
        auto current = calls.load();
        do {
            if (max_requests != 0 && current >= max_requests) {
                throw BudgetExhausted("request budget of " + std::to_string(max_requests) +
                                      " ranker calls exhausted");
            }
        } while (!calls.compare_exchange_weak(current, current + 1));
    }

    void precheck(std::size_t upcoming) const {
        if (max_requests != 0 && calls.load() + upcoming > max_requests) {
            throw BudgetExhausted("next trial needs " + std::to_string(upcoming) +
                                  " ranker calls; budget of " + std::to_string(max_requests) +
                                  " would be exceeded");
        }
    }
};

bool is_permutation_of(const std::vector<std::string>& ordered, const std::vector<BatchEntry>& entries) {
    if (ordered.size() != entries.size()) return false;
    std::unordered_set<std::string_view> expected;
    for (const auto& e : entries) expected.insert(e.key);
    for (const auto& k : ordered) {
        if (expected.erase(k) != 1) return false;
    }
    return expected.empty();
}

class RunState {
public:
    RunState(const RankConfig& config, BatchRanker& ranker, std::span<const Document> corpus,
             const std::string& query, const TrialObserver& observer)
        : config_(config),
          ranker_(ranker),
          corpus_(corpus),
          query_(query),
          observer_(observer),
          shuffle_rng_(config.rng_seed) {
        calls_.max_requests = config.max_requests;
    }

    RankingOutcome run();

private:
    struct TrialOutcome {
        TrialRecord record;
        std::vector<BatchExplanation> explanations;
    };

    TrialOutcome run_trial(std::span<const std::size_t> members, std::size_t iteration,
                           std::size_t trial, std::vector<bool>& owed);
    BatchOrdering rank_with_retry(const BatchRequest& request);
    [[noreturn]] void abort(const std::string& cause, std::size_t iteration, std::size_t trial,
                            bool budget);

    const RankConfig& config_;
    BatchRanker& ranker_;
    std::span<const Document> corpus_;
    const std::string& query_;
    const TrialObserver& observer_;
    Rng shuffle_rng_;
    CallCounter calls_;
    UsageLedger ledger_;
    std::vector<IterationResult> iterations_;
};

BatchOrdering RunState::rank_with_retry(const BatchRequest& base) {
    BatchRequest request = base;
    std::string last_error;
    std::string last_raw;
    for (std::size_t attempt = 0; attempt <= config_.retry_limit; ++attempt) {
        request.attempt = attempt;
        calls_.reserve();
        try {
            BatchOrdering ordering = ranker_.rank_batch(request);
            if (is_permutation_of(ordering.ordered_keys, request.entries)) {
                ledger_.record(ordering.usage);
                return ordering;
            }
            ledger_.record(ordering.usage);
            last_error = "ranker returned an ordering that is not a permutation of the batch";
            last_raw.clear();
        } catch (const AuthError&) {
            ledger_.record_failed_request();
            throw;
        } catch (const RankerError& e) {
            ledger_.record_failed_request();
            last_error = e.what();
            last_raw = e.raw_response();
        }
        if (attempt < config_.retry_limit && config_.retry_backoff_ms > 0) {
            const auto delay = std::chrono::milliseconds(
                static_cast<std::uint64_t>(config_.retry_backoff_ms) << std::min<std::size_t>(attempt, 16));
            std::this_thread::sleep_for(delay);
        }
    }
    std::string message = "batch failed after " + std::to_string(config_.retry_limit + 1) +
                          " attempts: " + last_error;
    throw RankerError(message, last_raw);
}

RunState::TrialOutcome RunState::run_trial(std::span<const std::size_t> members,
                                           std::size_t iteration, std::size_t trial,
                                           std::vector<bool>& owed) {
    const std::size_t m = members.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    fisher_yates(std::span(order), shuffle_rng_);

    auto partition = partition_into_batches<std::size_t>(
        order, config_.batch_size, [&](std::size_t local) { return owed[local]; });
    std::fill(owed.begin(), owed.end(), false);
    for (auto local : partition.remainder) owed[local] = true;

    if (observer_) {
        std::vector<std::vector<std::string>> batch_ids;
        for (const auto& b : partition.batches) {
            auto& ids = batch_ids.emplace_back();
            for (auto local : b) ids.push_back(corpus_[members[local]].id);
        }
        std::vector<std::string> remainder_ids;
        for (auto local : partition.remainder) remainder_ids.push_back(corpus_[members[local]].id);
        observer_(TrialEvent{iteration, trial, batch_ids, remainder_ids});
    }

    calls_.precheck(partition.batches.size());

    std::vector<BatchRequest> requests(partition.batches.size());
    for (std::size_t b = 0; b < partition.batches.size(); ++b) {
        const auto& batch = partition.batches[b];
        std::vector<std::string> texts;
        texts.reserve(batch.size());
        for (auto local : batch) texts.push_back(corpus_[members[local]].ranking_text());
        Rng key_rng(mix_seed(config_.rng_seed, iteration, trial, b));
        auto keys = make_batch_keys(batch.size(), key_rng, texts);

        auto& request = requests[b];
        request.query = query_;
        request.entries.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            request.entries.push_back(
                BatchEntry{std::move(keys[i]), corpus_[members[batch[i]]].id, std::move(texts[i])});
        }
    }

    std::vector<BatchOrdering> orderings(requests.size());
    detail::parallel_for(requests.size(), config_.concurrency_cap,
                         [&](std::size_t b) { orderings[b] = rank_with_retry(requests[b]); });

    TrialOutcome out;
    out.record.trial = trial;
    out.record.placements.reserve(m);
    for (std::size_t b = 0; b < requests.size(); ++b) {
        const auto& batch = partition.batches[b];
        std::unordered_map<std::string_view, std::size_t> local_of_key;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            local_of_key.emplace(requests[b].entries[i].key, batch[i]);
        }
        const auto& keys = orderings[b].ordered_keys;
        for (std::size_t pos = 0; pos < keys.size(); ++pos) {
            out.record.placements.push_back(Placement{local_of_key.at(keys[pos]), pos + 1, batch.size()});
        }
        if (orderings[b].reasoning && !orderings[b].reasoning->empty()) {
            BatchExplanation explanation{iteration, trial, {}, *orderings[b].reasoning};
            for (const auto& k : keys) explanation.ordered_ids.push_back(corpus_[members[local_of_key.at(k)]].id);
            out.explanations.push_back(std::move(explanation));
        }
    }
    return out;
}

void RunState::abort(const std::string& cause, std::size_t iteration, std::size_t trial, bool budget) {
    std::ostringstream msg;
    msg << "ranking aborted in iteration " << iteration << ", trial " << trial << " after "
        << calls_.calls.load() << " ranker calls (" << iterations_.size()
        << " iterations complete): " << cause;
    throw RankingAborted(msg.str(), iterations_, ledger_.totals(), budget);
}

RankingOutcome RunState::run() {
    const std::size_t n = corpus_.size();
    RankingOutcome outcome;

    if (n == 1) {
        outcome.ranking.push_back(RankedDocument{corpus_[0].id, 1, 1.0, 1, 0});
        return outcome;
    }

    std::vector<double> last_score(n, 0.0);
    std::vector<std::size_t> survived(n, 0);
    std::vector<std::size_t> exposures(n, 0);
    std::vector<std::vector<std::size_t>> frozen_stack;
    std::vector<std::size_t> members(n);
    std::iota(members.begin(), members.end(), std::size_t{0});
    std::vector<std::size_t> final_ranking;

    // Unplaced items (trial-1 remainders) sit at the middle of the scale.
    const double provisional = (static_cast<double>(config_.batch_size) + 1.0) / 2.0;

    for (std::size_t k = 1;; ++k) {
        const std::size_t m = members.size();
        const auto calls_before = calls_.calls.load();
        ScoreBoard board(m);
        StabilityHistory history(config_.stability_window);
        std::vector<bool> owed(m, false);

        std::vector<std::size_t> ranking(m);
        std::vector<double> scores(m);
        std::vector<double> curve(m);
        std::size_t inflection = 0;
        std::size_t trial = 0;
        ConvergenceReason reason = ConvergenceReason::max_trials;

        for (trial = 1; trial <= config_.max_trials; ++trial) {
            try {
                auto result = run_trial(members, k, trial, owed);
                board.update(result.record);
                for (auto& e : result.explanations) outcome.explanations.push_back(std::move(e));
            } catch (const BudgetExhausted& e) {
                abort(e.what(), k, trial, true);
            } catch (const std::exception& e) {
                abort(e.what(), k, trial, false);
            }

            for (std::size_t l = 0; l < m; ++l) {
                scores[l] = board.score(l, config_.statistic).value_or(provisional);
            }
            std::iota(ranking.begin(), ranking.end(), std::size_t{0});
            std::sort(ranking.begin(), ranking.end(), [&](std::size_t a, std::size_t b) {
                if (scores[a] != scores[b]) return scores[a] < scores[b];
                return corpus_[members[a]].origin_index < corpus_[members[b]].origin_index;
            });
            for (std::size_t i = 0; i < m; ++i) curve[i] = scores[ranking[i]];
            inflection = resolve_inflection(curve, config_.inflection_method);

            std::vector<std::size_t> global(m);
            for (std::size_t i = 0; i < m; ++i) global[i] = members[ranking[i]];
            history.push(std::move(global), inflection);

            const auto verdict = check_stability(history, config_.inflection_tolerance);
            if (verdict == Stability::ordering_stable) {
                reason = ConvergenceReason::ordering_stable;
                break;
            }
            if (verdict == Stability::inflection_stable) {
                reason = ConvergenceReason::inflection_stable;
                break;
            }
        }
        trial = std::min(trial, config_.max_trials);

        std::vector<std::size_t> ranked_global(m);
        IterationResult result;
        result.iteration = k;
        result.corpus_size = m;
        result.inflection = inflection;
        result.convergence_trial = trial;
        result.reason = reason;
        result.ranker_calls = calls_.calls.load() - calls_before;
        result.ranking.reserve(m);
        result.scores.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t local = ranking[i];
            const std::size_t doc = members[local];
            ranked_global[i] = doc;
            result.ranking.push_back(corpus_[doc].id);
            result.scores.push_back(scores[local]);
            last_score[doc] = scores[local];
            survived[doc] = k;
            exposures[doc] += board.exposure(local);
        }
        auto split = refine_partition<std::size_t>(ranked_global, inflection);
        for (auto doc : split.frozen) result.frozen.push_back(corpus_[doc].id);
        iterations_.push_back(std::move(result));

        if (reason == ConvergenceReason::ordering_stable || split.advance.size() <= 1) {
            final_ranking = std::move(ranked_global);
            break;
        }
        frozen_stack.push_back(std::move(split.frozen));
        members = std::move(split.advance);
    }

    const auto order = reassemble<std::size_t>(final_ranking, frozen_stack);
    if (order.size() != n) throw std::logic_error("reassembled ranking lost documents");

    outcome.ranking.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t doc = order[i];
        outcome.ranking.push_back(
            RankedDocument{corpus_[doc].id, i + 1, last_score[doc], survived[doc], exposures[doc]});
    }
    outcome.iterations = std::move(iterations_);
    outcome.usage = ledger_.totals();
    return outcome;
}

}  // namespace

RankingEngine::RankingEngine(RankConfig config, BatchRanker& ranker)
    : config_(config), ranker_(ranker) {
    config_.validate();
}

RankingOutcome RankingEngine::run(std::span<const Document> corpus, const std::string& query) {
    config_.validate();
    validate_corpus(corpus);
    RunState state(config_, ranker_, corpus, query, observer_);
    return state.run();
}

}  // namespace siftrank
