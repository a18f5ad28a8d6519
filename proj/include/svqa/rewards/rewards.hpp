#pragma once

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "svqa/core/parse.hpp"
#include "svqa/core/types.hpp"

namespace svqa::rewards {

// Mixed reward pipeline: binary format reward, embedding-cosine semantic
// reward, their weighted combination, and the cross-view consistency
// correction driven by the group semantic difference.

class SimilarityProvider {
  public:
    virtual ~SimilarityProvider() = default;
    // Unit-norm embedding, deterministic per text.
    virtual std::vector<double> embed(const std::string& text) = 0;
    virtual std::string provider_id() const = 0;
};

// Memoizes embeddings by exact text; safe to share across threads scoring
// rollouts concurrently.
class CachingProvider final : public SimilarityProvider {
  public:
    explicit CachingProvider(SimilarityProvider& inner) : inner_(inner) {}

    std::vector<double> embed(const std::string& text) override {
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = cache_.find(text);
            if (it != cache_.end()) return it->second;
        }
        std::vector<double> v = inner_.embed(text);
        std::lock_guard<std::mutex> lock(mu_);
        return cache_.emplace(text, std::move(v)).first->second;
    }

    std::string provider_id() const override { return inner_.provider_id() + "+cache"; }

  private:
    SimilarityProvider& inner_;
    std::mutex mu_;
    std::unordered_map<std::string, std::vector<double>> cache_;
};

// 1 iff the rollout text parses as the strict think/answer structure.
inline double format_reward(const Rollout& rollout) {
    return parse_structured_output(rollout.text).has_value() ? 1.0 : 0.0;
}

// Cosine of unit embeddings, clamped to [0, 1] so negative cosines cannot
// reward below zero and the correction threshold keeps one scale across
// providers.
inline double semantic_reward(const std::string& pred_answer, const std::string& ref_answer,
                              SimilarityProvider& provider) {
    const std::vector<double> a = provider.embed(pred_answer);
    const std::vector<double> b = provider.embed(ref_answer);
    if (a.size() != b.size())
        throw std::invalid_argument("semantic_reward: provider returned mismatched dimensions");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return std::clamp(dot, 0.0, 1.0);
}

// The answer field is what gets compared; an unparsable rollout is compared
// by its raw text (and already forfeits the format reward).
inline double semantic_reward_for_rollout(const Rollout& rollout, const std::string& ref_answer,
                                          SimilarityProvider& provider) {
    const std::string& pred = rollout.parsed ? rollout.parsed->answer : rollout.text;
    return semantic_reward(pred, ref_answer, provider);
}

inline double combine_reward(double r_format, double r_semantic, const TrainConfig& config) {
    return config.lambda1 * r_format + config.lambda2 * r_semantic;
}

struct GroupRewardSummary {
    double avg_semantic_original = 0.0;
    double avg_semantic_flipped = 0.0;
    double delta = 0.0;  // avg_semantic_original - avg_semantic_flipped
};

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty list");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline GroupRewardSummary semantic_delta(const std::vector<double>& original,
                                         const std::vector<double>& flipped) {
    if (original.size() != flipped.size())
        throw std::invalid_argument("semantic_delta: group sizes differ");
    GroupRewardSummary s;
    s.avg_semantic_original = mean(original);
    s.avg_semantic_flipped = mean(flipped);
    s.delta = s.avg_semantic_original - s.avg_semantic_flipped;
    return s;
}

// The view whose group average is higher gets penalized: every reward in it
// strictly above delta loses eta * |delta|. Conditions use the raw values
// throughout (simultaneous update), values at or below the threshold never
// change, and the result is not clamped; the downstream standardization is
// shift-tolerant and clamping would flatten advantages at large eta.
// The boundary asymmetry (delta >= 0 penalizes the original side, rewards
// must exceed the threshold strictly) is deliberate.
inline std::pair<std::vector<double>, std::vector<double>> apply_consistency_correction(
    const std::vector<double>& original, const std::vector<double>& flipped,
    const GroupRewardSummary& summary, const TrainConfig& config) {
    std::vector<double> corrected_original = original;
    std::vector<double> corrected_flipped = flipped;
    const double penalty = config.eta * std::abs(summary.delta);
    std::vector<double>& target = summary.delta >= 0.0 ? corrected_original : corrected_flipped;
    for (double& r : target)
        if (r > config.delta) r -= penalty;
    return {std::move(corrected_original), std::move(corrected_flipped)};
}

}  // namespace svqa::rewards
