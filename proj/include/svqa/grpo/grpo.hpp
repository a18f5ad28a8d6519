#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "svqa/core/rng.hpp"
#include "svqa/core/types.hpp"
#include "svqa/grpo/toy_policies.hpp"
#include "svqa/mirror/mirror.hpp"
#include "svqa/rewards/rewards.hpp"

namespace svqa::grpo {

// Clipped group-relative policy optimization over paired original/flipped
// views. Rewards enter as constants; the gradient flows through the
// per-token importance ratios only.

inline RolloutGroup sample_group(const Policy& policy_old, const Query& query,
                                 const TrainConfig& config, Rng& rng) {
    if (config.group_size < 2)
        throw std::invalid_argument("sample_group: group size must be at least 2");
    RolloutGroup group;
    group.query = query.qa;
    group.rollouts.reserve(static_cast<std::size_t>(config.group_size));
    for (int i = 0; i < config.group_size; ++i) group.rollouts.push_back(policy_old.sample(query, rng));
    return group;
}

// Group-standardized advantages with population std and a floor for
// degenerate groups. Exactly equal rewards short-circuit to zero so the
// floor path cannot manufacture advantages out of rounding noise.
inline std::vector<double> compute_advantages(const std::vector<double>& rewards,
                                              const TrainConfig& config) {
    if (rewards.empty()) throw std::invalid_argument("compute_advantages: empty group");
    const bool all_equal =
        std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); });
    if (all_equal) return std::vector<double>(rewards.size(), 0.0);

    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n;
    const double denom = std::max(std::sqrt(var), config.advantage_std_floor);

    std::vector<double> adv(rewards.size());
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
    return adv;
}

inline std::vector<double> importance_ratio(const Policy& policy_new, const Query& query,
                                            const Rollout& rollout) {
    const std::vector<double> lp_new = policy_new.token_logprobs(query, rollout.tokens);
    std::vector<double> ratios(lp_new.size());
    for (std::size_t t = 0; t < ratios.size(); ++t)
        ratios[t] = std::exp(lp_new[t] - rollout.logprobs_old[t]);
    return ratios;
}

// Token-mean of min(alpha * A, clip(alpha, 1-eps, 1+eps) * A).
inline double clipped_surrogate(const Rollout& rollout, double advantage,
                                const std::vector<double>& ratios, const TrainConfig& config) {
    if (ratios.size() != rollout.tokens.size())
        throw std::invalid_argument("clipped_surrogate: ratio count mismatch");
    if (ratios.empty()) return 0.0;
    double sum = 0.0;
    for (double a : ratios) {
        const double clipped = std::clamp(a, 1.0 - config.epsilon_clip, 1.0 + config.epsilon_clip);
        sum += std::min(a * advantage, clipped * advantage);
    }
    return sum / static_cast<double>(ratios.size());
}

// Per-token k3 terms of D_KL(pi_theta || pi_ref): r - log r - 1 with
// r = pi_ref / pi_theta at the sampled token. Each term is >= 0 and the sum
// over a sampled sequence is an unbiased estimate of the sequence KL.
inline std::vector<double> kl_k3_terms(const Policy& policy_new, const Policy& policy_ref,
                                       const Query& query, const std::vector<int>& tokens) {
    const std::vector<double> lp_new = policy_new.token_logprobs(query, tokens);
    const std::vector<double> lp_ref = policy_ref.token_logprobs(query, tokens);
    std::vector<double> terms(tokens.size());
    for (std::size_t t = 0; t < terms.size(); ++t) {
        const double log_r = lp_ref[t] - lp_new[t];
        terms[t] = std::exp(log_r) - log_r - 1.0;
    }
    return terms;
}

// Mean k3 over every sampled token of every rollout passed in.
inline double kl_penalty(const Policy& policy_new, const Policy& policy_ref,
                         const std::vector<std::pair<const Query*, const Rollout*>>& samples) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& [query, rollout] : samples) {
        for (double k3 : kl_k3_terms(policy_new, policy_ref, *query, rollout->tokens)) {
            sum += k3;
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

// Exact KL between the sequence distributions of two policies on one query;
// tiny-vocabulary test oracle for the sampled estimator.
inline double exact_sequence_kl(const Policy& policy_a, const Policy& policy_b, const Query& query) {
    const std::vector<double> pa = policy_a.sequence_probs(query);
    const std::vector<double> pb = policy_b.sequence_probs(query);
    double kl = 0.0;
    for (std::size_t s = 0; s < pa.size(); ++s)
        if (pa[s] > 0.0) kl += pa[s] * (std::log(pa[s]) - std::log(pb[s]));
    return kl;
}

struct PairedQuery {
    Query original;
    Query mirrored;
};

struct ScoredGroup {
    Query query;
    RolloutGroup group;
    std::vector<RewardVector> rewards;
    std::vector<double> advantages;
};

struct ScoredPair {
    ScoredGroup original;
    ScoredGroup flipped;
    rewards::GroupRewardSummary summary;
};

// Samples both views from the old policy and runs the full reward pipeline:
// format + raw semantic, cross-view correction, combination, advantages.
inline ScoredPair score_pair(const Policy& policy_old, const PairedQuery& pair,
                             const TrainConfig& config, Rng& rng,
                             rewards::SimilarityProvider& provider) {
    ScoredPair sp;
    sp.original.query = pair.original;
    sp.flipped.query = pair.mirrored;
    sp.original.group = sample_group(policy_old, pair.original, config, rng);
    sp.flipped.group = sample_group(policy_old, pair.mirrored, config, rng);

    auto raw_semantic = [&provider](const ScoredGroup& sg) {
        std::vector<double> rs;
        rs.reserve(sg.group.rollouts.size());
        for (const auto& r : sg.group.rollouts)
            rs.push_back(
                rewards::semantic_reward_for_rollout(r, sg.query.qa.reference_answer, provider));
        return rs;
    };
    const std::vector<double> raw_orig = raw_semantic(sp.original);
    const std::vector<double> raw_flip = raw_semantic(sp.flipped);
    sp.summary = rewards::semantic_delta(raw_orig, raw_flip);
    const auto [corr_orig, corr_flip] =
        rewards::apply_consistency_correction(raw_orig, raw_flip, sp.summary, config);

    auto finish = [&config](ScoredGroup& sg, const std::vector<double>& raw,
                            const std::vector<double>& corrected) {
        std::vector<double> totals;
        totals.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            RewardVector rv;
            rv.r_format = rewards::format_reward(sg.group.rollouts[i]);
            rv.r_semantic_raw = raw[i];
            rv.r_semantic = corrected[i];
            rv.r_total = rewards::combine_reward(rv.r_format, rv.r_semantic, config);
            sg.rewards.push_back(rv);
            totals.push_back(rv.r_total);
        }
        sg.advantages = compute_advantages(totals, config);
    };
    finish(sp.original, raw_orig, corr_orig);
    finish(sp.flipped, raw_flip, corr_flip);
    return sp;
}

struct PairObjective {
    double surrogate = 0.0;  // (1/2G) sum of R_i over both groups
    double kl = 0.0;         // token-mean k3 within the pair
    double objective = 0.0;  // surrogate - beta * kl
};

// Objective for one scored pair at the current policy. When grad is non-null
// it receives += dJ/dparams; rewards and advantages are constants, the
// min/clip subgradient takes the unclipped branch on ties.
inline PairObjective spatial_grpo_objective(const ScoredPair& pair, const Policy& policy_new,
                                            const Policy& policy_ref, const TrainConfig& config,
                                            std::vector<double>* grad = nullptr,
                                            double grad_scale = 1.0) {
    const auto g2 = static_cast<double>(pair.original.group.rollouts.size() +
                                        pair.flipped.group.rollouts.size());
    std::size_t pair_tokens = 0;
    for (const auto* sg : {&pair.original, &pair.flipped})
        for (const auto& r : sg->group.rollouts) pair_tokens += r.tokens.size();

    PairObjective out;
    double k3_sum = 0.0;
    for (const auto* sg : {&pair.original, &pair.flipped}) {
        for (std::size_t i = 0; i < sg->group.rollouts.size(); ++i) {
            const Rollout& rollout = sg->group.rollouts[i];
            const double adv = sg->advantages[i];
            const std::vector<double> lp_new = policy_new.token_logprobs(sg->query, rollout.tokens);
            const std::vector<double> lp_ref = policy_ref.token_logprobs(sg->query, rollout.tokens);
            const auto n_tok = static_cast<double>(rollout.tokens.size());

            double surr_sum = 0.0;
            std::vector<double> coeffs(rollout.tokens.size(), 0.0);
            for (std::size_t t = 0; t < rollout.tokens.size(); ++t) {
                const double alpha = std::exp(lp_new[t] - rollout.logprobs_old[t]);
                const double clipped =
                    std::clamp(alpha, 1.0 - config.epsilon_clip, 1.0 + config.epsilon_clip);
                const double unclipped_term = alpha * adv;
                const double clipped_term = clipped * adv;
                surr_sum += std::min(unclipped_term, clipped_term);
                if (unclipped_term <= clipped_term)
                    coeffs[t] += adv * alpha / (n_tok * g2);

                const double log_r = lp_ref[t] - lp_new[t];
                const double r = std::exp(log_r);
                k3_sum += r - log_r - 1.0;
                if (config.beta != 0.0)
                    coeffs[t] -= config.beta * (1.0 - r) / static_cast<double>(pair_tokens);
            }
            out.surrogate += surr_sum / n_tok / g2;
            if (grad) {
                for (double& c : coeffs) c *= grad_scale;
                policy_new.accumulate_token_grad(sg->query, rollout.tokens, coeffs, *grad);
            }
        }
    }
    out.kl = pair_tokens ? k3_sum / static_cast<double>(pair_tokens) : 0.0;
    out.objective = out.surrogate - config.beta * out.kl;
    return out;
}

struct StepReport {
    int step = 0;
    double mean_reward_original = 0.0;
    double mean_reward_flipped = 0.0;
    double delta = 0.0;  // mean over pairs of the per-pair semantic difference
    double mean_advantage = 0.0;
    double surrogate = 0.0;
    double kl = 0.0;
    double objective = 0.0;
    std::string checkpoint_ref;
};

inline nlohmann::json to_json(const StepReport& r) {
    nlohmann::json j;
    j["step"] = r.step;
    j["mean_reward_original"] = r.mean_reward_original;
    j["mean_reward_flipped"] = r.mean_reward_flipped;
    j["delta"] = r.delta;
    j["mean_advantage"] = r.mean_advantage;
    j["surrogate"] = r.surrogate;
    j["kl"] = r.kl;
    j["objective"] = r.objective;
    j["checkpoint_ref"] = r.checkpoint_ref;
    return j;
}

class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(int step, const std::string& what)
        : std::runtime_error("divergence at step " + std::to_string(step) + ": " + what),
          step_(step) {}
    int step() const { return step_; }

  private:
    int step_;
};

// One gradient-ascent update over a batch of scored pairs. The batch
// objective is the mean of the per-pair objectives.
inline StepReport train_step(const std::vector<ScoredPair>& batch, Policy& policy_theta,
                             const Policy& policy_ref, const TrainConfig& config, int step_index) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const double inv_p = 1.0 / static_cast<double>(batch.size());

    StepReport report;
    report.step = step_index;
    std::vector<double> grad(policy_theta.param_count(), 0.0);

    double adv_sum = 0.0;
    std::size_t adv_count = 0;
    for (const ScoredPair& pair : batch) {
        const PairObjective po =
            spatial_grpo_objective(pair, policy_theta, policy_ref, config, &grad, inv_p);
        report.surrogate += po.surrogate * inv_p;
        report.kl += po.kl * inv_p;
        report.objective += po.objective * inv_p;
        report.delta += pair.summary.delta * inv_p;

        auto mean_total = [](const ScoredGroup& sg) {
            double s = 0.0;
            for (const auto& rv : sg.rewards) s += rv.r_total;
            return s / static_cast<double>(sg.rewards.size());
        };
        report.mean_reward_original += mean_total(pair.original) * inv_p;
        report.mean_reward_flipped += mean_total(pair.flipped) * inv_p;
        for (const auto* sg : {&pair.original, &pair.flipped})
            for (double a : sg->advantages) {
                adv_sum += a;
                ++adv_count;
            }
    }
    report.mean_advantage = adv_count ? adv_sum / static_cast<double>(adv_count) : 0.0;

    for (double g : grad)
        if (!std::isfinite(g)) throw DivergenceError(step_index, "non-finite gradient");
    if (!std::isfinite(report.objective)) throw DivergenceError(step_index, "non-finite objective");

    std::vector<double> params = policy_theta.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += config.learning_rate * grad[i];
    for (double p : params)
        if (!std::isfinite(p)) throw DivergenceError(step_index, "non-finite parameters");
    policy_theta.set_params(params);
    return report;
}

// Owns the three policies and the step counter. Each step derives its own
// RNG stream from (seed, step), so a run resumed from a checkpoint replays
// bit-identically to an uninterrupted one.
struct Trainer {
    TrainConfig config;
    std::string policy_kind;
    std::uint64_t config_hash = 0;
    int step = 0;
    std::unique_ptr<Policy> theta;
    std::unique_ptr<Policy> old_policy;
    std::unique_ptr<Policy> ref_policy;

    static Trainer create(const std::string& policy_kind, const TrainConfig& config,
                          std::uint64_t config_hash = 0) {
        validate_train_config(config);
        Trainer t;
        t.config = config;
        t.policy_kind = policy_kind;
        t.config_hash = config_hash;
        t.theta = make_policy(policy_kind, config.max_tokens);
        t.old_policy = t.theta->clone();
        t.ref_policy = t.theta->clone();
        return t;
    }

    // Biased or warm-started initialization; only meaningful before the
    // first step, so the frozen reference matches.
    void set_initial_params(const std::vector<double>& p) {
        if (step != 0) throw std::logic_error("set_initial_params after training started");
        theta->set_params(p);
        old_policy->set_params(p);
        ref_policy->set_params(p);
    }

    StepReport run_step(const std::vector<PairedQuery>& pool,
                        rewards::SimilarityProvider& provider) {
        if (pool.empty()) throw std::invalid_argument("run_step: empty query pool");
        if (step % config.refresh_interval == 0) old_policy->set_params(theta->params());
        Rng rng(config.seed, {0x57E9, static_cast<std::uint64_t>(step)});

        std::vector<ScoredPair> batch;
        batch.reserve(static_cast<std::size_t>(config.batch_size));
        for (int b = 0; b < config.batch_size; ++b) {
            const auto idx = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
            batch.push_back(score_pair(*old_policy, pool[idx], config, rng, provider));
        }
        StepReport report = train_step(batch, *theta, *ref_policy, config, step);
        ++step;
        return report;
    }
};

// Fraction of queries whose greedy decode parses and whose answer text,
// trimmed, equals the reference answer. Every synthetic query has exactly
// one candidate that achieves this.
inline double greedy_accuracy(const Policy& policy, const std::vector<Query>& queries) {
    if (queries.empty()) throw std::invalid_argument("greedy_accuracy: no queries");
    std::size_t correct = 0;
    for (const Query& q : queries) {
        const Rollout r = policy.greedy(q);
        if (r.parsed && std::string(svqa::detail::trim(r.parsed->answer)) == q.qa.reference_answer)
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(queries.size());
}

// Checkpoint format: magic, version, config hash, step, policy kind,
// max_tokens, then the three parameter vectors as raw doubles. Binary-exact
// round trip.

inline constexpr char kCheckpointMagic[8] = {'S', 'V', 'Q', 'A', 'C', 'K', 'P', '1'};

inline void save_checkpoint(const std::string& path, const Trainer& trainer) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    auto put_u32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_u64 = [&out](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    out.write(kCheckpointMagic, 8);
    put_u32(1);
    put_u64(trainer.config_hash);
    put_u64(static_cast<std::uint64_t>(trainer.step));
    put_u32(static_cast<std::uint32_t>(trainer.policy_kind.size()));
    out.write(trainer.policy_kind.data(), static_cast<std::streamsize>(trainer.policy_kind.size()));
    put_u32(static_cast<std::uint32_t>(trainer.config.max_tokens));
    const std::vector<std::vector<double>> vecs = {trainer.theta->params(),
                                                   trainer.old_policy->params(),
                                                   trainer.ref_policy->params()};
    put_u64(vecs[0].size());
    for (const auto& v : vecs)
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

// Restores a trainer; the caller supplies the TrainConfig (the checkpoint
// pins its hash and max_tokens, not the whole config).
inline Trainer load_checkpoint(const std::string& path, const TrainConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    auto get_u32 = [&in]() {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_u64 = [&in]() {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    if (get_u32() != 1) throw std::runtime_error("unsupported checkpoint version in " + path);

    Trainer t;
    t.config = config;
    t.config_hash = get_u64();
    t.step = static_cast<int>(get_u64());
    std::string kind(get_u32(), '\0');
    in.read(kind.data(), static_cast<std::streamsize>(kind.size()));
    t.policy_kind = kind;
    const auto max_tokens = static_cast<int>(get_u32());
    if (max_tokens != config.max_tokens)
        throw std::runtime_error("checkpoint max_tokens disagrees with config");
    const std::uint64_t n = get_u64();

    t.theta = make_policy(kind, max_tokens);
    t.old_policy = make_policy(kind, max_tokens);
    t.ref_policy = make_policy(kind, max_tokens);
    if (t.theta->param_count() != n) throw std::runtime_error("checkpoint parameter count mismatch");
    for (Policy* p : {t.theta.get(), t.old_policy.get(), t.ref_policy.get()}) {
        std::vector<double> v(n);
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        p->set_params(v);
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return t;
}

// Pairs original items with their mirrored partners and builds policy
// queries against the correct view of each scene.
inline std::vector<PairedQuery> build_paired_queries(const std::vector<SpatialScene>& scenes,
                                                     const std::vector<QAItem>& originals,
                                                     const std::vector<QAItem>& mirrored) {
    std::unordered_map<std::string, const SpatialScene*> by_id;
    for (const auto& s : scenes) by_id[s.scene_id] = &s;
    std::unordered_map<std::string, const QAItem*> mirrored_by_pair;
    for (const auto& m : mirrored) {
        if (!m.paired_qa_id)
            throw std::invalid_argument("mirrored item " + m.qa_id + " has no paired_qa_id");
        mirrored_by_pair[*m.paired_qa_id] = &m;
    }

    std::vector<PairedQuery> out;
    out.reserve(originals.size());
    for (const auto& o : originals) {
        const auto mit = mirrored_by_pair.find(o.qa_id);
        if (mit == mirrored_by_pair.end())
            throw std::invalid_argument("no mirrored partner for " + o.qa_id);
        const auto sit = by_id.find(o.scene_id);
        if (sit == by_id.end())
            throw std::invalid_argument("no scene " + o.scene_id + " for " + o.qa_id);
        PairedQuery pq;
        pq.original = build_query(o, *sit->second);
        pq.mirrored = build_query(*mit->second, mirror::flip_scene(*sit->second));
        out.push_back(std::move(pq));
    }
    return out;
}

}  // namespace svqa::grpo
