#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "svqa/core/parse.hpp"
#include "svqa/core/rng.hpp"
#include "svqa/core/types.hpp"
#include "svqa/synthenv/synthenv.hpp"

namespace svqa::grpo {

// Toy answer policies: a softmax over a finite set of templated token
// sequences per answer type, exposed through the induced autoregressive
// factorization so per-token ratios and gradients are well defined. The
// action space deliberately includes malformed outputs so the format reward
// has something to learn.

struct Query {
    QAItem qa;
    env::ParsedQuestion parsed;
    // Scene geometry for the view the item belongs to (already flipped for
    // mirrored items). dx, dy are center offsets of A relative to B.
    double dx = 0.0;
    double dy = 0.0;
    double canvas_width = 0.0;
    double canvas_height = 0.0;
};

inline Query build_query(const QAItem& qa, const SpatialScene& scene) {
    const auto parsed = env::parse_question(qa.question);
    if (!parsed) throw std::invalid_argument("build_query: unrecognized question in " + qa.qa_id);
    Query q;
    q.qa = qa;
    q.parsed = *parsed;
    q.canvas_width = scene.canvas_width;
    q.canvas_height = scene.canvas_height;
    const SceneObject* a = scene.find_object_by_label(parsed->label_a);
    if (!a) throw std::invalid_argument("build_query: unknown label " + parsed->label_a);
    if (!parsed->label_b.empty()) {
        const SceneObject* b = scene.find_object_by_label(parsed->label_b);
        if (!b) throw std::invalid_argument("build_query: unknown label " + parsed->label_b);
        q.dx = a->box.center_x() - b->box.center_x();
        q.dy = a->box.center_y() - b->box.center_y();
    }
    return q;
}

// Candidate answer sequences. Words are tokens; {A}, {B}, {D}, {BOX} are
// slots filled from the query at render time, so the correct readout is one
// available action and learning means assigning it probability.

struct SeqTemplate {
    std::vector<std::string> words;
    bool malformed_by_design = false;
};

class AnswerSpace {
  public:
    AnswerSpace() {
        add(AnswerType::YesNo,
            {{{"<think>", "likely", "</think>", "<answer>", "Yes,", "the", "{A}", "is", "to", "the",
               "left", "of", "the", "{B}.", "</answer>"},
              false},
             {{"<think>", "therefore", "</think>", "<answer>", "No,", "the", "{A}", "is", "not", "to",
               "the", "left", "of", "the", "{B}.", "</answer>"},
              false},
             {{"<think>", "probably", "</think>", "<answer>", "Yes,", "the", "{A}", "is", "to", "the",
               "right", "of", "the", "{B}.", "</answer>"},
              false},
             {{"<think>", "thus", "</think>", "<answer>", "No,", "the", "{A}", "is", "not", "to",
               "the", "right", "of", "the", "{B}.", "</answer>"},
              false},
             {{"<think>", "maybe", "</think>", "<answer>", "Neither;", "they", "are", "horizontally",
               "aligned.", "</answer>"},
              false},
             {{"Yes."}, true},
             {{"<answer>", "Yes.", "</answer>"}, true},
             {{"<think>", "so", "</think>", "Yes."}, true}});
        add(AnswerType::Distance,
            {{{"<think>", "therefore", "</think>", "<answer>", "The", "distance", "between", "the",
               "{A}", "and", "the", "{B}", "is", "{D}", "meters.", "</answer>"},
              false},
             {{"<think>", "so", "</think>", "<answer>", "It", "is", "{D}", "meters.", "</answer>"},
              false},
             {{"<think>", "maybe", "</think>", "<answer>", "They", "are", "very", "far", "apart.",
               "</answer>"},
              false},
             {{"<think>", "probably", "</think>", "<answer>", "quite", "close", "</answer>"}, false},
             {{"far"}, true},
             {{"<answer>", "{D}", "meters.", "</answer>"}, true}});
        add(AnswerType::Bbox,
            {{{"<think>", "clearly", "</think>", "<answer>", "{BOX}", "</answer>"}, false},
             {{"<think>", "first", "</think>", "<answer>", "The", "{A}", "is", "in", "the", "image.",
               "</answer>"},
              false},
             {{"<think>", "next", "</think>", "<answer>", "top", "left", "</answer>"}, false},
             {{"{BOX}"}, true},
             {{"<answer>", "{BOX}", "</answer>"}, true}});
        add(AnswerType::FreeForm,
            {{{"<think>", "I", "think", "</think>", "<answer>", "The", "{A}", "is", "to", "the",
               "left", "of", "the", "{B}.", "</answer>"},
              false},
             {{"<think>", "obviously", "</think>", "<answer>", "The", "{A}", "is", "to", "the",
               "right", "of", "the", "{B}.", "</answer>"},
              false},
             {{"<think>", "hence", "</think>", "<answer>", "The", "{A}", "is", "horizontally",
               "aligned", "with", "the", "{B}.", "</answer>"},
              false},
             {{"<think>", "since", "</think>", "<answer>", "The", "{A}", "is", "next", "to", "the",
               "{B}.", "</answer>"},
              false},
             {{"nearby"}, true},
             {{"<think>", "then", "</think>", "<answer>", "somewhere"}, true}});
    }

    int token_id(const std::string& word) const {
        const auto it = vocab_.find(word);
        if (it == vocab_.end()) throw std::invalid_argument("unknown token: " + word);
        return it->second;
    }
    const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
    std::size_t vocab_size() const { return words_.size(); }

    const std::vector<SeqTemplate>& templates(AnswerType t) const {
        return templates_[static_cast<std::size_t>(t)];
    }
    const std::vector<std::vector<int>>& token_seqs(AnswerType t) const {
        return token_seqs_[static_cast<std::size_t>(t)];
    }

  private:
    void add(AnswerType t, std::vector<SeqTemplate> seqs) {
        auto& toks = token_seqs_[static_cast<std::size_t>(t)];
        for (const auto& s : seqs) {
            std::vector<int> ids;
            for (const auto& w : s.words) {
                auto [it, fresh] = vocab_.emplace(w, static_cast<int>(words_.size()));
                if (fresh) words_.push_back(w);
                ids.push_back(it->second);
            }
            toks.push_back(std::move(ids));
        }
        // The factorization needs every complete sequence to be maximal:
        // no candidate may be a strict prefix of another in the same set.
        for (std::size_t i = 0; i < toks.size(); ++i)
            for (std::size_t j = 0; j < toks.size(); ++j) {
                if (i == j || toks[i].size() >= toks[j].size()) continue;
                if (std::equal(toks[i].begin(), toks[i].end(), toks[j].begin()))
                    throw std::logic_error("answer space: sequence is a strict prefix of another");
            }
        templates_[static_cast<std::size_t>(t)] = std::move(seqs);
    }

    std::unordered_map<std::string, int> vocab_;
    std::vector<std::string> words_;
    std::array<std::vector<SeqTemplate>, 4> templates_;
    std::array<std::vector<std::vector<int>>, 4> token_seqs_;
};

inline const AnswerSpace& answer_space() {
    static const AnswerSpace space;
    return space;
}

namespace detail {

inline std::string format_fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string render_word(const std::string& word, const Query& q) {
    auto substitute = [&](const std::string& slot, const std::string& value) {
        std::string out = word;
        const auto pos = out.find(slot);
        out.replace(pos, slot.size(), value);
        return out;
    };
    if (word.find("{A}") != std::string::npos) return substitute("{A}", q.parsed.label_a);
    if (word.find("{B}") != std::string::npos) return substitute("{B}", q.parsed.label_b);
    if (word.find("{D}") != std::string::npos)
        return substitute("{D}", q.qa.gt_number ? format_fixed2(q.qa.gt_number->value) : "0.00");
    if (word.find("{BOX}") != std::string::npos)
        return substitute("{BOX}", q.qa.gt_box ? env::realize_bbox_answer(*q.qa.gt_box) : "[]");
    return word;
}

inline std::string render_sequence(const std::vector<std::string>& words, const Query& q) {
    std::string text;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) text += ' ';
        text += render_word(words[i], q);
    }
    return text;
}

inline double log_sum_exp(const std::vector<double>& logits, const std::vector<std::size_t>& subset) {
    double mx = -std::numeric_limits<double>::infinity();
    for (auto i : subset) mx = std::max(mx, logits[i]);
    double s = 0.0;
    for (auto i : subset) s += std::exp(logits[i] - mx);
    return mx + std::log(s);
}

inline int sign_of(double v) { return v < 0.0 ? -1 : (v > 0.0 ? 1 : 0); }

}  // namespace detail

// A policy assigns logits to the candidate sequences of the query's answer
// type; everything else (sampling, per-token log-probabilities, the chain
// rule back to logits) is shared. Per-token conditionals are ratios of
// prefix-restricted softmax masses, so they multiply back to the sequence
// probability exactly.
class Policy {
  public:
    virtual ~Policy() = default;

    virtual std::vector<double> params() const = 0;
    virtual void set_params(const std::vector<double>& p) = 0;
    virtual std::size_t param_count() const = 0;
    virtual std::string policy_id() const = 0;
    virtual std::unique_ptr<Policy> clone() const = 0;

    // Logits over the candidate sequences of q's answer type (filtered to
    // max_tokens at construction).
    virtual std::vector<double> sequence_logits(const Query& q) const = 0;
    // grad += d(sum over candidates of weight[s] * logit_s)/d params.
    virtual void accumulate_logit_grad(const Query& q, const std::vector<double>& weights,
                                       std::vector<double>& grad) const = 0;

    const std::vector<std::vector<int>>& candidates(AnswerType t) const {
        return candidates_[static_cast<std::size_t>(t)];
    }
    const std::vector<SeqTemplate>& candidate_templates(AnswerType t) const {
        return candidate_templates_[static_cast<std::size_t>(t)];
    }
    int max_tokens() const { return max_tokens_; }

    Rollout make_rollout(const Query& q, std::size_t candidate_index) const {
        const auto type = static_cast<std::size_t>(q.qa.answer_type);
        Rollout r;
        r.tokens = candidates_[type][candidate_index];
        r.text = detail::render_sequence(candidate_templates_[type][candidate_index].words, q);
        r.logprobs_old = token_logprobs(q, r.tokens);
        r.parsed = parse_structured_output(r.text);
        return r;
    }

    Rollout sample(const Query& q, Rng& rng) const {
        const std::vector<double> probs = sequence_probs(q);
        return make_rollout(q, rng.categorical(probs));
    }

    // Argmax decode; ties break toward the lowest candidate index.
    Rollout greedy(const Query& q) const {
        const std::vector<double> logits = sequence_logits(q);
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.size(); ++i)
            if (logits[i] > logits[best]) best = i;
        return make_rollout(q, best);
    }

    std::vector<double> sequence_probs(const Query& q) const {
        std::vector<double> logits = sequence_logits(q);
        std::vector<std::size_t> all(logits.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const double lz = detail::log_sum_exp(logits, all);
        std::vector<double> probs(logits.size());
        for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(logits[i] - lz);
        return probs;
    }

    // Log-probability of each token given its prefix. The tokens must be one
    // of the candidate sequences (policies never emit anything else).
    std::vector<double> token_logprobs(const Query& q, const std::vector<int>& tokens) const {
        const std::vector<double> logits = sequence_logits(q);
        const auto& cands = candidates(q.qa.answer_type);
        std::vector<std::size_t> prefix_set(cands.size());
        for (std::size_t i = 0; i < prefix_set.size(); ++i) prefix_set[i] = i;

        std::vector<double> lps;
        lps.reserve(tokens.size());
        double denom = detail::log_sum_exp(logits, prefix_set);
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            std::vector<std::size_t> next;
            for (auto s : prefix_set)
                if (cands[s].size() > t && cands[s][t] == tokens[t]) next.push_back(s);
            if (next.empty())
                throw std::invalid_argument("token_logprobs: tokens are not a candidate sequence");
            const double num = detail::log_sum_exp(logits, next);
            lps.push_back(num - denom);
            prefix_set = std::move(next);
            denom = num;
        }
        if (prefix_set.size() != 1 || cands[prefix_set[0]].size() != tokens.size())
            throw std::invalid_argument("token_logprobs: tokens are not a complete candidate");
        return lps;
    }

    // grad += sum_t coeffs[t] * d log P(token_t | prefix_t) / d params.
    // d log P / d logits telescopes through restricted softmaxes.
    void accumulate_token_grad(const Query& q, const std::vector<int>& tokens,
                               const std::vector<double>& coeffs, std::vector<double>& grad) const {
        if (coeffs.size() != tokens.size())
            throw std::invalid_argument("accumulate_token_grad: coefficient count mismatch");
        const std::vector<double> logits = sequence_logits(q);
        const auto& cands = candidates(q.qa.answer_type);
        std::vector<double> weights(logits.size(), 0.0);

        auto add_restricted_softmax = [&](const std::vector<std::size_t>& subset, double scale) {
            if (scale == 0.0) return;
            const double lz = detail::log_sum_exp(logits, subset);
            for (auto s : subset) weights[s] += scale * std::exp(logits[s] - lz);
        };

        std::vector<std::size_t> prefix_set(cands.size());
        for (std::size_t i = 0; i < prefix_set.size(); ++i) prefix_set[i] = i;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            std::vector<std::size_t> next;
            for (auto s : prefix_set)
                if (cands[s].size() > t && cands[s][t] == tokens[t]) next.push_back(s);
            if (next.empty())
                throw std::invalid_argument("accumulate_token_grad: tokens are not a candidate");
            add_restricted_softmax(next, coeffs[t]);
            add_restricted_softmax(prefix_set, -coeffs[t]);
            prefix_set = std::move(next);
        }
        accumulate_logit_grad(q, weights, grad);
    }

    // grad += scale * d log P(sequence) / d params.
    void accumulate_sequence_grad(const Query& q, const std::vector<int>& tokens, double scale,
                                  std::vector<double>& grad) const {
        accumulate_token_grad(q, tokens, std::vector<double>(tokens.size(), scale), grad);
    }

  protected:
    explicit Policy(int max_tokens) : max_tokens_(max_tokens) {
        if (max_tokens < 1) throw std::invalid_argument("max_tokens must be positive");
        const AnswerSpace& space = answer_space();
        for (int t = 0; t < 4; ++t) {
            const auto& seqs = space.token_seqs(static_cast<AnswerType>(t));
            const auto& tpls = space.templates(static_cast<AnswerType>(t));
            for (std::size_t i = 0; i < seqs.size(); ++i) {
                if (seqs[i].size() > static_cast<std::size_t>(max_tokens)) continue;
                candidates_[static_cast<std::size_t>(t)].push_back(seqs[i]);
                candidate_templates_[static_cast<std::size_t>(t)].push_back(tpls[i]);
            }
            if (candidates_[static_cast<std::size_t>(t)].empty())
                throw std::invalid_argument("max_tokens leaves no candidate sequences for a type");
        }
    }

    std::array<std::vector<std::vector<int>>, 4> candidates_;
    std::array<std::vector<SeqTemplate>, 4> candidate_templates_;
    int max_tokens_;
};

// Tabular policy: an independent logit row per discrete context. Contexts
// factor over (answer type, asked direction, sign of the A-B x offset), the
// coarsest partition on which the synthetic tasks are realizable.
class TabularPolicy final : public Policy {
  public:
    explicit TabularPolicy(int max_tokens = 16) : Policy(max_tokens) {
        std::size_t offset = 0;
        for (int t = 0; t < 4; ++t) {
            const auto n = candidates_[static_cast<std::size_t>(t)].size();
            const std::size_t rows = t == static_cast<int>(AnswerType::YesNo) ? 6
                                     : t == static_cast<int>(AnswerType::FreeForm) ? 3
                                                                                   : 1;
            type_offset_[static_cast<std::size_t>(t)] = offset;
            offset += rows * n;
        }
        params_.assign(offset, 0.0);
    }

    std::vector<double> params() const override { return params_; }
    void set_params(const std::vector<double>& p) override {
        if (p.size() != params_.size()) throw std::invalid_argument("TabularPolicy: bad param size");
        params_ = p;
    }
    std::size_t param_count() const override { return params_.size(); }
    std::string policy_id() const override { return "tabular-v1"; }
    std::unique_ptr<Policy> clone() const override { return std::make_unique<TabularPolicy>(*this); }

    std::vector<double> sequence_logits(const Query& q) const override {
        const auto n = candidates(q.qa.answer_type).size();
        const std::size_t base = block_offset(q, n);
        return {params_.begin() + static_cast<std::ptrdiff_t>(base),
                params_.begin() + static_cast<std::ptrdiff_t>(base + n)};
    }

    void accumulate_logit_grad(const Query& q, const std::vector<double>& weights,
                               std::vector<double>& grad) const override {
        const auto n = candidates(q.qa.answer_type).size();
        if (weights.size() != n) throw std::invalid_argument("accumulate_logit_grad: size mismatch");
        if (grad.size() != params_.size()) throw std::invalid_argument("grad buffer size mismatch");
        const std::size_t base = block_offset(q, n);
        for (std::size_t s = 0; s < n; ++s) grad[base + s] += weights[s];
    }

    // Context row index, exposed for constructing biased initializations.
    std::size_t context_row(const Query& q) const {
        switch (q.qa.answer_type) {
            case AnswerType::YesNo: {
                const std::size_t asked = q.parsed.asked == env::Direction::RightOf ? 1 : 0;
                return asked * 3 + static_cast<std::size_t>(detail::sign_of(q.dx) + 1);
            }
            case AnswerType::FreeForm:
                return static_cast<std::size_t>(detail::sign_of(q.dx) + 1);
            default:
                return 0;
        }
    }

    std::size_t block_start(AnswerType t, std::size_t row) const {
        const auto n = candidates(t).size();
        return type_offset_[static_cast<std::size_t>(t)] + row * n;
    }

  private:
    std::size_t block_offset(const Query& q, std::size_t n) const {
        return type_offset_[static_cast<std::size_t>(q.qa.answer_type)] + context_row(q) * n;
    }

    std::array<std::size_t, 4> type_offset_{};
    std::vector<double> params_;
};

// Linear-feature policy: logits = W * phi(query), one weight row per
// candidate sequence across all types. Feature hashes keep labels in play
// without a learned embedding.
class LinearFeaturePolicy final : public Policy {
  public:
    static constexpr std::size_t kFeatureCount = 9;

    explicit LinearFeaturePolicy(int max_tokens = 16) : Policy(max_tokens) {
        std::size_t rows = 0;
        for (int t = 0; t < 4; ++t) {
            row_offset_[static_cast<std::size_t>(t)] = rows;
            rows += candidates_[static_cast<std::size_t>(t)].size();
        }
        params_.assign(rows * kFeatureCount, 0.0);
    }

    std::vector<double> params() const override { return params_; }
    void set_params(const std::vector<double>& p) override {
        if (p.size() != params_.size())
            throw std::invalid_argument("LinearFeaturePolicy: bad param size");
        params_ = p;
    }
    std::size_t param_count() const override { return params_.size(); }
    std::string policy_id() const override { return "linear-feature-v1"; }
    std::unique_ptr<Policy> clone() const override {
        return std::make_unique<LinearFeaturePolicy>(*this);
    }

    std::array<double, kFeatureCount> features(const Query& q) const {
        const double dir = q.parsed.asked == env::Direction::LeftOf    ? 1.0
                           : q.parsed.asked == env::Direction::RightOf ? -1.0
                                                                       : 0.0;
        const double sdx = static_cast<double>(detail::sign_of(q.dx));
        const double nx = q.canvas_width > 0.0 ? std::abs(q.dx) / q.canvas_width : 0.0;
        const double ny = q.canvas_height > 0.0 ? std::abs(q.dy) / q.canvas_height : 0.0;
        auto label_feature = [](const std::string& label) {
            return static_cast<double>(fnv1a64(label) % 7) / 7.0;
        };
        return {1.0,
                sdx,
                nx,
                ny,
                dir,
                sdx * dir,
                std::sqrt(nx * nx + ny * ny),
                label_feature(q.parsed.label_a),
                label_feature(q.parsed.label_b)};
    }

    std::vector<double> sequence_logits(const Query& q) const override {
        const auto phi = features(q);
        const auto n = candidates(q.qa.answer_type).size();
        const std::size_t base = row_offset_[static_cast<std::size_t>(q.qa.answer_type)];
        std::vector<double> logits(n, 0.0);
        for (std::size_t s = 0; s < n; ++s) {
            double z = 0.0;
            const double* w = &params_[(base + s) * kFeatureCount];
            for (std::size_t f = 0; f < kFeatureCount; ++f) z += w[f] * phi[f];
            logits[s] = z;
        }
        return logits;
    }

    void accumulate_logit_grad(const Query& q, const std::vector<double>& weights,
                               std::vector<double>& grad) const override {
        const auto phi = features(q);
        const auto n = candidates(q.qa.answer_type).size();
        if (weights.size() != n) throw std::invalid_argument("accumulate_logit_grad: size mismatch");
        if (grad.size() != params_.size()) throw std::invalid_argument("grad buffer size mismatch");
        const std::size_t base = row_offset_[static_cast<std::size_t>(q.qa.answer_type)];
        for (std::size_t s = 0; s < n; ++s) {
            if (weights[s] == 0.0) continue;
            double* g = &grad[(base + s) * kFeatureCount];
            for (std::size_t f = 0; f < kFeatureCount; ++f) g[f] += weights[s] * phi[f];
        }
    }

  private:
    std::array<std::size_t, 4> row_offset_{};
    std::vector<double> params_;
};

inline std::unique_ptr<Policy> make_policy(const std::string& id, int max_tokens) {
    if (id == "tabular-v1" || id == "tabular") return std::make_unique<TabularPolicy>(max_tokens);
    if (id == "linear-feature-v1" || id == "linear")
        return std::make_unique<LinearFeaturePolicy>(max_tokens);
    throw std::invalid_argument("unknown policy id: " + id);
}

}  // namespace svqa::grpo
