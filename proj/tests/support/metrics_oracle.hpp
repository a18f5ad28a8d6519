#pragma once

// Independent reimplementation of the evaluation metrics, written directly
// from their definitions with no shared helpers, used as the oracle the
// production metrics are checked against.

#include <optional>
#include <string>
#include <vector>

#include "svqa/core/types.hpp"

namespace oracle {

double success_rate(const std::vector<std::optional<double>>& preds,
                    const std::vector<double>& gts);
double samples_completed(const std::vector<std::optional<double>>& preds);
std::optional<double> smape(const std::vector<std::optional<double>>& preds,
                            const std::vector<double>& gts);

struct Buckets {
    double b50_100 = 0.0;
    double b100_150 = 0.0;
    double b150_200 = 0.0;
};
Buckets range_buckets(const std::vector<std::optional<double>>& preds,
                      const std::vector<double>& gts);

double distance_accuracy(const std::vector<std::optional<double>>& preds,
                         const std::vector<double>& gts);

double bleu(const std::string& pred, const std::string& ref, int order);

double iou(const svqa::Box2D& a, const svqa::Box2D& b);

struct BoxScores {
    double miou = 0.0;
    double acc075 = 0.0;
};
BoxScores bbox_scores(const std::vector<std::optional<svqa::Box2D>>& preds,
                      const std::vector<svqa::Box2D>& gts);

std::optional<bool> verdict(const std::string& text, const std::vector<std::string>& yes_words,
                            const std::vector<std::string>& no_words);

struct YesNoScores {
    double accuracy = 0.0;
    std::size_t judged = 0;
    std::size_t unjudged = 0;
};
// judge_verdicts[i] applies when alias extraction fails on either side:
// outer nullopt = no judge available, inner nullopt = judge failed.
YesNoScores yesno_scores(const std::vector<std::string>& preds,
                         const std::vector<std::string>& gts,
                         const std::vector<std::string>& yes_words,
                         const std::vector<std::string>& no_words,
                         const std::vector<std::optional<std::optional<int>>>& judge_verdicts);

int cot_count(const std::string& text, const std::vector<std::string>& keywords);

}  // namespace oracle
