#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "svqa/core/parse.hpp"
#include "svqa/core/types.hpp"
#include "svqa/metrics/keywords.hpp"
#include "svqa/rewards/rewards.hpp"

namespace svqa::metrics {

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline bool contains_any(const std::string& lowered_text, const std::vector<std::string>& phrases) {
    return std::any_of(phrases.begin(), phrases.end(), [&](const std::string& p) {
        return lowered_text.find(p) != std::string::npos;
    });
}

// Length of the longest phrase occurring as a substring, 0 if none.
inline std::size_t longest_match(const std::string& lowered_text,
                                 const std::vector<std::string>& phrases) {
    std::size_t best = 0;
    for (const auto& p : phrases)
        if (p.size() > best && lowered_text.find(p) != std::string::npos) best = p.size();
    return best;
}

inline bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

}  // namespace detail

// The text that gets graded: the answer payload when the output carries the
// structured tags, the whole raw output otherwise. Trimmed either way so
// tag-padding whitespace never reaches a metric.
inline std::string answer_region(const std::string& raw_output) {
    if (auto parsed = parse_structured_output(raw_output))
        return std::string(svqa::detail::trim(parsed->answer));
    return std::string(svqa::detail::trim(raw_output));
}

// First decimal number in the text with an optional adjacent unit token;
// unitless numbers default to meters, scientific notation is skipped.
inline std::optional<Quantity> extract_number(const std::string& text) {
    const std::string lowered = detail::lower(text);
    const auto n = lowered.size();
    std::size_t i = 0;
    while (i < n) {
        const bool starts_digit = std::isdigit(static_cast<unsigned char>(lowered[i])) != 0;
        const bool starts_signed =
            (lowered[i] == '-' || lowered[i] == '+') && i + 1 < n &&
            std::isdigit(static_cast<unsigned char>(lowered[i + 1])) != 0;
        if (!starts_digit && !starts_signed) {
            ++i;
            continue;
        }
        if (i > 0 && detail::is_word_char(static_cast<unsigned char>(lowered[i - 1]))) {
            ++i;
            continue;
        }
        std::size_t j = i + (starts_signed ? 1 : 0);
        while (j < n && std::isdigit(static_cast<unsigned char>(lowered[j])) != 0) ++j;
        if (j < n && lowered[j] == '.' && j + 1 < n &&
            std::isdigit(static_cast<unsigned char>(lowered[j + 1])) != 0) {
            ++j;
            while (j < n && std::isdigit(static_cast<unsigned char>(lowered[j])) != 0) ++j;
        }
        const bool scientific = j < n && (lowered[j] == 'e' || lowered[j] == 'E') &&
                                (j + 1 < n && (std::isdigit(static_cast<unsigned char>(lowered[j + 1])) != 0 ||
                                               ((lowered[j + 1] == '-' || lowered[j + 1] == '+') &&
                                                j + 2 < n &&
                                                std::isdigit(static_cast<unsigned char>(lowered[j + 2])) != 0)));
        if (scientific) {
            while (j < n && !std::isspace(static_cast<unsigned char>(lowered[j]))) ++j;
            i = j;
            continue;
        }

        const double value = std::stod(lowered.substr(i, j - i));
        std::size_t k = j;
        while (k < n && std::isspace(static_cast<unsigned char>(lowered[k]))) ++k;
        std::size_t w = k;
        while (w < n && detail::is_word_char(static_cast<unsigned char>(lowered[w]))) ++w;
        const std::string word = lowered.substr(k, w - k);

        LengthUnit unit = LengthUnit::Meter;
        if (word == "m" || word == "meter" || word == "meters")
            unit = LengthUnit::Meter;
        else if (word == "cm" || word == "centimeter" || word == "centimeters")
            unit = LengthUnit::Centimeter;
        else if (word == "in" || word == "inch" || word == "inches")
            unit = LengthUnit::Inch;
        else if (word == "ft" || word == "foot" || word == "feet")
            unit = LengthUnit::Foot;
        return Quantity{value, unit};
    }
    return std::nullopt;
}

// First four decimal numbers interpreted as (x1, y1, x2, y2); absent when
// fewer than four numbers occur or the box is degenerate.
inline std::optional<Box2D> extract_box(const std::string& text) {
    std::vector<double> nums;
    const auto n = text.size();
    std::size_t i = 0;
    while (i < n && nums.size() < 4) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        const bool starts_digit = std::isdigit(c) != 0;
        const bool starts_signed = (text[i] == '-' || text[i] == '+') && i + 1 < n &&
                                   std::isdigit(static_cast<unsigned char>(text[i + 1])) != 0;
        if ((!starts_digit && !starts_signed) ||
            (i > 0 && detail::is_word_char(static_cast<unsigned char>(text[i - 1])))) {
            ++i;
            continue;
        }
        std::size_t j = i + (starts_signed ? 1 : 0);
        while (j < n && (std::isdigit(static_cast<unsigned char>(text[j])) != 0 || text[j] == '.'))
            ++j;
        try {
            nums.push_back(std::stod(text.substr(i, j - i)));
        } catch (const std::exception&) {
        }
        i = j;
    }
    if (nums.size() < 4) return std::nullopt;
    Box2D box{nums[0], nums[1], nums[2], nums[3]};
    if (!box.valid()) return std::nullopt;
    return box;
}

// Yes/no verdict via the alias lists; the longer match wins, a tie or no
// match at all leaves the verdict open.
inline std::optional<bool> extract_bool(const std::string& text, const KeywordRuleSet& rules) {
    const std::string lowered = detail::lower(text);
    const std::size_t yes_len = detail::longest_match(lowered, rules.yes_aliases);
    const std::size_t no_len = detail::longest_match(lowered, rules.no_aliases);
    if (yes_len == 0 && no_len == 0) return std::nullopt;
    if (yes_len == no_len) return std::nullopt;
    return yes_len > no_len;
}

struct PredictionRecord {
    std::string qa_id;
    std::string raw_output;
    std::optional<std::string> parsed_answer;
    std::optional<Quantity> parsed_number;
    std::optional<Box2D> parsed_box;
    std::optional<bool> parsed_bool;
};

inline PredictionRecord make_prediction_record(const std::string& qa_id,
                                               const std::string& raw_output,
                                               const KeywordRuleSet& rules) {
    PredictionRecord rec;
    rec.qa_id = qa_id;
    rec.raw_output = raw_output;
    if (auto parsed = parse_structured_output(raw_output)) rec.parsed_answer = parsed->answer;
    const std::string region = answer_region(raw_output);
    rec.parsed_number = extract_number(region);
    rec.parsed_box = extract_box(region);
    rec.parsed_bool = extract_bool(region, rules);
    return rec;
}

// Bbox if a bbox keyword occurs in the question; else Distance on a distance
// keyword; else YesNo when the reference answer normalizes to a verdict;
// FreeForm otherwise.
inline AnswerType classify_task_type(const std::string& question, const std::string& reference_answer,
                                     const KeywordRuleSet& rules) {
    const std::string q = detail::lower(question);
    if (detail::contains_any(q, rules.bbox_keywords)) return AnswerType::Bbox;
    if (detail::contains_any(q, rules.distance_keywords)) return AnswerType::Distance;
    if (extract_bool(reference_answer, rules)) return AnswerType::YesNo;
    return AnswerType::FreeForm;
}

// Numeric-task metrics. Preds are optional (absent = unparsable); gts must
// be positive and unit-normalized.

inline double success_rate(const std::vector<std::optional<double>>& preds,
                           const std::vector<double>& gts) {
    if (preds.size() != gts.size()) throw std::invalid_argument("success_rate: size mismatch");
    if (preds.empty()) return 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!preds[i] || *preds[i] <= 0.0) continue;
        const double p = *preds[i];
        const double g = gts[i];
        if (std::max(g / p, p / g) < 2.0) ++ok;
    }
    return 100.0 * static_cast<double>(ok) / static_cast<double>(preds.size());
}

inline double samples_completed(const std::vector<std::optional<double>>& preds) {
    if (preds.empty()) return 0.0;
    const auto n = static_cast<double>(preds.size());
    const auto parsable =
        std::count_if(preds.begin(), preds.end(), [](const auto& p) { return p.has_value(); });
    return 100.0 * static_cast<double>(parsable) / n;
}

// Mean over parsable predictions only; absent when none is parsable.
inline std::optional<double> smape(const std::vector<std::optional<double>>& preds,
                                   const std::vector<double>& gts) {
    if (preds.size() != gts.size()) throw std::invalid_argument("smape: size mismatch");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!preds[i]) continue;
        const double num = std::abs(*preds[i] - gts[i]);
        const double den = (std::abs(*preds[i]) + std::abs(gts[i])) / 2.0;
        sum += den == 0.0 ? 0.0 : num / den;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return 100.0 * sum / static_cast<double>(n);
}

struct RangeBuckets {
    double pct_50_100 = 0.0;
    double pct_100_150 = 0.0;
    double pct_150_200 = 0.0;
};

// Half-open ratio buckets [50,100), [100,150), [150,200) as fractions of all
// cases; unparsable predictions land in no bucket.
inline RangeBuckets range_buckets(const std::vector<std::optional<double>>& preds,
                                  const std::vector<double>& gts) {
    if (preds.size() != gts.size()) throw std::invalid_argument("range_buckets: size mismatch");
    RangeBuckets out;
    if (preds.empty()) return out;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!preds[i]) continue;
        const double ratio = *preds[i] / gts[i] * 100.0;
        if (ratio >= 50.0 && ratio < 100.0)
            out.pct_50_100 += 1.0;
        else if (ratio >= 100.0 && ratio < 150.0)
            out.pct_100_150 += 1.0;
        else if (ratio >= 150.0 && ratio < 200.0)
            out.pct_150_200 += 1.0;
    }
    const auto n = static_cast<double>(preds.size());
    out.pct_50_100 *= 100.0 / n;
    out.pct_100_150 *= 100.0 / n;
    out.pct_150_200 *= 100.0 / n;
    return out;
}

inline double distance_accuracy(const std::vector<std::optional<double>>& preds,
                                const std::vector<double>& gts) {
    if (preds.size() != gts.size()) throw std::invalid_argument("distance_accuracy: size mismatch");
    if (preds.empty()) return 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] && *preds[i] >= 0.5 * gts[i] && *preds[i] <= 2.0 * gts[i]) ++ok;
    return 100.0 * static_cast<double>(ok) / static_cast<double>(preds.size());
}

inline std::vector<std::string> bleu_tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        if (detail::is_word_char(static_cast<unsigned char>(ch)))
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

// Single-order modified n-gram precision with reference-count clipping,
// times the brevity penalty exp(min(0, 1 - |ref|/|pred|)).
inline double bleu_n(const std::string& pred, const std::string& ref, int n) {
    if (n != 1 && n != 2) throw std::invalid_argument("bleu_n: order must be 1 or 2");
    const std::vector<std::string> pt = bleu_tokenize(pred);
    const std::vector<std::string> rt = bleu_tokenize(ref);
    if (pt.empty()) return 0.0;
    const auto un = static_cast<std::size_t>(n);
    if (pt.size() < un || rt.size() < un) return 0.0;

    auto ngrams = [un](const std::vector<std::string>& toks) {
        std::unordered_map<std::string, int> counts;
        for (std::size_t i = 0; i + un <= toks.size(); ++i) {
            std::string key = toks[i];
            for (std::size_t k = 1; k < un; ++k) key += " " + toks[i + k];
            ++counts[key];
        }
        return counts;
    };
    const auto pc = ngrams(pt);
    const auto rc = ngrams(rt);
    int matched = 0;
    int total = 0;
    for (const auto& [gram, count] : pc) {
        total += count;
        const auto it = rc.find(gram);
        if (it != rc.end()) matched += std::min(count, it->second);
    }
    if (total == 0 || matched == 0) return 0.0;
    const double precision = static_cast<double>(matched) / static_cast<double>(total);
    const double brevity =
        std::exp(std::min(0.0, 1.0 - static_cast<double>(rt.size()) / static_cast<double>(pt.size())));
    return precision * brevity;
}

inline double similarity_score(const std::string& pred, const std::string& ref,
                               rewards::SimilarityProvider& provider) {
    return rewards::semantic_reward(pred, ref, provider);
}

inline double iou(const Box2D& a, const Box2D& b) {
    const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

struct BboxMetrics {
    double miou = 0.0;
    double acc_075 = 0.0;
};

inline BboxMetrics bbox_metrics(const std::vector<std::optional<Box2D>>& preds,
                                const std::vector<Box2D>& gts) {
    if (preds.size() != gts.size()) throw std::invalid_argument("bbox_metrics: size mismatch");
    BboxMetrics out;
    if (preds.empty()) return out;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double v = preds[i] ? iou(*preds[i], gts[i]) : 0.0;
        sum += v;
        if (v >= 0.75) ++hits;
    }
    const auto n = static_cast<double>(preds.size());
    out.miou = 100.0 * sum / n;
    out.acc_075 = 100.0 * static_cast<double>(hits) / n;
    return out;
}

// Returns 0/1 on a verdict, nullopt on transport failure (item becomes
// "unjudged").
using JudgeFn = std::function<std::optional<int>(const std::string& pred, const std::string& gt)>;

struct YesNoMetrics {
    double accuracy = 0.0;
    std::size_t judged = 0;
    std::size_t unjudged = 0;
};

inline YesNoMetrics yesno_accuracy(const std::vector<std::string>& preds,
                                   const std::vector<std::string>& gts,
                                   const KeywordRuleSet& rules, const JudgeFn& judge = {}) {
    if (preds.size() != gts.size()) throw std::invalid_argument("yesno_accuracy: size mismatch");
    YesNoMetrics out;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto pv = extract_bool(preds[i], rules);
        const auto gv = extract_bool(gts[i], rules);
        if (pv && gv) {
            ++out.judged;
            if (*pv == *gv) ++correct;
        } else if (judge) {
            const auto verdict = judge(preds[i], gts[i]);
            if (!verdict) {
                ++out.unjudged;
                continue;
            }
            ++out.judged;
            if (*verdict == 1) ++correct;
        } else {
            ++out.judged;
        }
    }
    if (out.judged > 0)
        out.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(out.judged);
    return out;
}

// Counts reasoning phrases left to right with longest-match-consume; a match
// must sit on word boundaries so "so" never fires inside "also".
inline int cot_keyword_count(const std::string& text, const KeywordRuleSet& rules) {
    const std::string lowered = detail::lower(text);
    std::vector<const std::string*> sorted;
    sorted.reserve(rules.cot_keywords.size());
    for (const auto& k : rules.cot_keywords) sorted.push_back(&k);
    std::sort(sorted.begin(), sorted.end(),
              [](const std::string* a, const std::string* b) { return a->size() > b->size(); });

    int count = 0;
    std::size_t i = 0;
    while (i < lowered.size()) {
        bool matched = false;
        if (i == 0 || !detail::is_word_char(static_cast<unsigned char>(lowered[i - 1]))) {
            for (const std::string* k : sorted) {
                if (lowered.compare(i, k->size(), *k) != 0) continue;
                const std::size_t end = i + k->size();
                if (end < lowered.size() &&
                    detail::is_word_char(static_cast<unsigned char>(lowered[end])))
                    continue;
                ++count;
                i = end;
                matched = true;
                break;
            }
        }
        if (!matched) ++i;
    }
    return count;
}

struct CotStats {
    double mean_count = 0.0;
    std::map<int, int> histogram;
};

inline CotStats cot_keyword_stats(const std::vector<std::string>& outputs,
                                  const KeywordRuleSet& rules) {
    CotStats s;
    if (outputs.empty()) return s;
    long long total = 0;
    for (const auto& text : outputs) {
        const int c = cot_keyword_count(text, rules);
        total += c;
        ++s.histogram[c];
    }
    s.mean_count = static_cast<double>(total) / static_cast<double>(outputs.size());
    return s;
}

// Report assembly.

struct NumericBlock {
    std::size_t count = 0;
    double success = 0.0;
    double samples_completed = 0.0;
    std::optional<double> smape;
    RangeBuckets buckets;
    double accuracy_50_200 = 0.0;
};

struct YesNoBlock {
    std::size_t count = 0;
    YesNoMetrics metrics;
};

struct BboxBlock {
    std::size_t count = 0;
    BboxMetrics metrics;
};

struct FreeFormBlock {
    std::size_t count = 0;
    double bleu1 = 0.0;
    double bleu2 = 0.0;
    std::optional<double> similarity_pct;
};

struct Report {
    std::size_t total_records = 0;
    std::size_t matched_records = 0;
    std::vector<std::string> unknown_qa_ids;
    std::optional<NumericBlock> distance;
    std::optional<YesNoBlock> yesno;
    std::optional<BboxBlock> bbox;
    std::optional<FreeFormBlock> freeform;
    CotStats cot;
};

// Pairs records with ground truth by qa_id, classifies each pair with the
// rule set, and computes every per-type block. Records whose qa_id has no
// ground truth are listed and excluded.
inline Report build_report(const std::vector<PredictionRecord>& records,
                           const std::vector<QAItem>& gts, const KeywordRuleSet& rules,
                           rewards::SimilarityProvider* provider = nullptr,
                           const JudgeFn& judge = {}) {
    std::unordered_map<std::string, const QAItem*> by_id;
    for (const auto& g : gts) by_id[g.qa_id] = &g;

    Report rep;
    rep.total_records = records.size();

    std::vector<std::optional<double>> dist_preds;
    std::vector<double> dist_gts;
    std::vector<std::string> yn_preds, yn_gts;
    std::vector<std::optional<Box2D>> box_preds;
    std::vector<Box2D> box_gts;
    std::vector<const PredictionRecord*> ff_records;
    std::vector<const QAItem*> ff_gts;
    std::vector<std::string> all_outputs;

    for (const auto& rec : records) {
        const auto it = by_id.find(rec.qa_id);
        if (it == by_id.end()) {
            rep.unknown_qa_ids.push_back(rec.qa_id);
            continue;
        }
        ++rep.matched_records;
        const QAItem& gt = *it->second;
        all_outputs.push_back(rec.raw_output);
        switch (classify_task_type(gt.question, gt.reference_answer, rules)) {
            case AnswerType::Bbox:
                box_preds.push_back(rec.parsed_box);
                box_gts.push_back(gt.gt_box.value_or(Box2D{0, 0, 0, 0}));
                break;
            case AnswerType::Distance: {
                std::optional<double> v;
                if (rec.parsed_number) v = rec.parsed_number->in_meters();
                dist_preds.push_back(v);
                dist_gts.push_back(gt.gt_number ? gt.gt_number->in_meters() : 0.0);
                break;
            }
            case AnswerType::YesNo:
                yn_preds.push_back(answer_region(rec.raw_output));
                yn_gts.push_back(gt.reference_answer);
                break;
            case AnswerType::FreeForm:
                ff_records.push_back(&rec);
                ff_gts.push_back(&gt);
                break;
        }
    }

    if (!dist_preds.empty()) {
        NumericBlock b;
        b.count = dist_preds.size();
        b.success = success_rate(dist_preds, dist_gts);
        b.samples_completed = samples_completed(dist_preds);
        b.smape = smape(dist_preds, dist_gts);
        b.buckets = range_buckets(dist_preds, dist_gts);
        b.accuracy_50_200 = distance_accuracy(dist_preds, dist_gts);
        rep.distance = b;
    }
    if (!yn_preds.empty()) {
        YesNoBlock b;
        b.count = yn_preds.size();
        b.metrics = yesno_accuracy(yn_preds, yn_gts, rules, judge);
        rep.yesno = b;
    }
    if (!box_preds.empty()) {
        BboxBlock b;
        b.count = box_preds.size();
        b.metrics = bbox_metrics(box_preds, box_gts);
        rep.bbox = b;
    }
    if (!ff_records.empty()) {
        FreeFormBlock b;
        b.count = ff_records.size();
        double b1 = 0.0, b2 = 0.0, sim = 0.0;
        for (std::size_t i = 0; i < ff_records.size(); ++i) {
            const std::string region = answer_region(ff_records[i]->raw_output);
            b1 += bleu_n(region, ff_gts[i]->reference_answer, 1);
            b2 += bleu_n(region, ff_gts[i]->reference_answer, 2);
            if (provider) sim += similarity_score(region, ff_gts[i]->reference_answer, *provider);
        }
        const auto n = static_cast<double>(ff_records.size());
        b.bleu1 = b1 / n;
        b.bleu2 = b2 / n;
        if (provider) b.similarity_pct = 100.0 * sim / n;
        rep.freeform = b;
    }
    rep.cot = cot_keyword_stats(all_outputs, rules);
    return rep;
}

inline nlohmann::json to_json(const Report& r) {
    nlohmann::json j;
    j["total_records"] = r.total_records;
    j["matched_records"] = r.matched_records;
    j["unknown_qa_ids"] = r.unknown_qa_ids;
    if (r.distance) {
        nlohmann::json d;
        d["count"] = r.distance->count;
        d["success_pct"] = r.distance->success;
        d["samples_completed_pct"] = r.distance->samples_completed;
        if (r.distance->smape)
            d["smape_pct"] = *r.distance->smape;
        else
            d["smape_pct"] = nullptr;
        d["in_range_50_100_pct"] = r.distance->buckets.pct_50_100;
        d["in_range_100_150_pct"] = r.distance->buckets.pct_100_150;
        d["in_range_150_200_pct"] = r.distance->buckets.pct_150_200;
        d["accuracy_50_200_pct"] = r.distance->accuracy_50_200;
        j["distance"] = d;
    }
    if (r.yesno) {
        nlohmann::json y;
        y["count"] = r.yesno->count;
        y["accuracy_pct"] = r.yesno->metrics.accuracy;
        y["judged"] = r.yesno->metrics.judged;
        y["unjudged"] = r.yesno->metrics.unjudged;
        j["yesno"] = y;
    }
    if (r.bbox) {
        nlohmann::json b;
        b["count"] = r.bbox->count;
        b["miou_pct"] = r.bbox->metrics.miou;
        b["acc_at_075_pct"] = r.bbox->metrics.acc_075;
        j["bbox"] = b;
    }
    if (r.freeform) {
        nlohmann::json f;
        f["count"] = r.freeform->count;
        f["bleu1"] = r.freeform->bleu1;
        f["bleu2"] = r.freeform->bleu2;
        if (r.freeform->similarity_pct)
            f["similarity_pct"] = *r.freeform->similarity_pct;
        else
            f["similarity_pct"] = nullptr;
        j["freeform"] = f;
    }
    nlohmann::json cot;
    cot["mean_count"] = r.cot.mean_count;
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [k, v] : r.cot.histogram) hist[std::to_string(k)] = v;
    cot["histogram"] = hist;
    j["cot"] = cot;
    return j;
}

namespace detail {

inline std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt2(*v) : "n/a"; }

}  // namespace detail

inline std::string report_to_csv(const Report& r) {
    std::ostringstream out;
    out << "task,metric,value\n";
    auto row = [&out](const char* task, const char* metric, const std::string& value) {
        out << task << "," << metric << "," << value << "\n";
    };
    if (r.distance) {
        const auto& d = *r.distance;
        row("distance", "count", std::to_string(d.count));
        row("distance", "success_pct", detail::fmt2(d.success));
        row("distance", "samples_completed_pct", detail::fmt2(d.samples_completed));
        row("distance", "smape_pct", detail::fmt_opt(d.smape));
        row("distance", "in_range_50_100_pct", detail::fmt2(d.buckets.pct_50_100));
        row("distance", "in_range_100_150_pct", detail::fmt2(d.buckets.pct_100_150));
        row("distance", "in_range_150_200_pct", detail::fmt2(d.buckets.pct_150_200));
        row("distance", "accuracy_50_200_pct", detail::fmt2(d.accuracy_50_200));
    }
    if (r.yesno) {
        row("yesno", "count", std::to_string(r.yesno->count));
        row("yesno", "accuracy_pct", detail::fmt2(r.yesno->metrics.accuracy));
        row("yesno", "judged", std::to_string(r.yesno->metrics.judged));
        row("yesno", "unjudged", std::to_string(r.yesno->metrics.unjudged));
    }
    if (r.bbox) {
        row("bbox", "count", std::to_string(r.bbox->count));
        row("bbox", "miou_pct", detail::fmt2(r.bbox->metrics.miou));
        row("bbox", "acc_at_075_pct", detail::fmt2(r.bbox->metrics.acc_075));
    }
    if (r.freeform) {
        row("freeform", "count", std::to_string(r.freeform->count));
        row("freeform", "bleu1", detail::fmt2(r.freeform->bleu1));
        row("freeform", "bleu2", detail::fmt2(r.freeform->bleu2));
        row("freeform", "similarity_pct", detail::fmt_opt(r.freeform->similarity_pct));
    }
    row("all", "cot_mean_count", detail::fmt2(r.cot.mean_count));
    return out.str();
}

inline std::string report_to_markdown(const Report& r) {
    std::ostringstream out;
    out << "# Evaluation Report\n\n";
    out << "Records: " << r.matched_records << " matched of " << r.total_records;
    if (!r.unknown_qa_ids.empty()) out << " (" << r.unknown_qa_ids.size() << " unknown qa_id)";
    out << "\n\n";
    if (r.distance) {
        const auto& d = *r.distance;
        out << "## Distance\n\n";
        out << "| Count | Success (%) | Samples Completed (%) | sMAPE (%) | 50-100 (%) | "
               "100-150 (%) | 150-200 (%) | Acc 50-200 (%) |\n";
        out << "|---|---|---|---|---|---|---|---|\n";
        out << "| " << d.count << " | " << detail::fmt2(d.success) << " | "
            << detail::fmt2(d.samples_completed) << " | " << detail::fmt_opt(d.smape) << " | "
            << detail::fmt2(d.buckets.pct_50_100) << " | " << detail::fmt2(d.buckets.pct_100_150)
            << " | " << detail::fmt2(d.buckets.pct_150_200) << " | "
            << detail::fmt2(d.accuracy_50_200) << " |\n\n";
    }
    if (r.yesno) {
        out << "## Yes/No\n\n";
        out << "| Count | Accuracy (%) | Judged | Unjudged |\n|---|---|---|---|\n";
        out << "| " << r.yesno->count << " | " << detail::fmt2(r.yesno->metrics.accuracy) << " | "
            << r.yesno->metrics.judged << " | " << r.yesno->metrics.unjudged << " |\n\n";
    }
    if (r.bbox) {
        out << "## Bounding Box\n\n";
        out << "| Count | mIoU (%) | Acc@0.75 (%) |\n|---|---|---|\n";
        out << "| " << r.bbox->count << " | " << detail::fmt2(r.bbox->metrics.miou) << " | "
            << detail::fmt2(r.bbox->metrics.acc_075) << " |\n\n";
    }
    if (r.freeform) {
        out << "## Free-Form\n\n";
        out << "| Count | BLEU-1 | BLEU-2 | Similarity (%) |\n|---|---|---|---|\n";
        out << "| " << r.freeform->count << " | " << detail::fmt2(r.freeform->bleu1) << " | "
            << detail::fmt2(r.freeform->bleu2) << " | "
            << detail::fmt_opt(r.freeform->similarity_pct) << " |\n\n";
    }
    out << "## Reasoning Keywords\n\n";
    out << "Mean per response: " << detail::fmt2(r.cot.mean_count) << "\n";
    if (!r.cot.histogram.empty()) {
        out << "\n| Count | Responses |\n|---|---|\n";
        for (const auto& [k, v] : r.cot.histogram) out << "| " << k << " | " << v << " |\n";
    }
    return out.str();
}

}  // namespace svqa::metrics
