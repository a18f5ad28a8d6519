#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace svqa::metrics {

// Phrase lists used for task-type classification, yes/no normalization,
// and reasoning-word counting. All entries lowercase; matching is
// case-insensitive substring over the normalized text.
struct KeywordRuleSet {
    std::vector<std::string> bbox_keywords;
    std::vector<std::string> yes_aliases;
    std::vector<std::string> no_aliases;
    std::vector<std::string> distance_keywords;
    std::vector<std::string> cot_keywords;

    static KeywordRuleSet standard() {
        KeywordRuleSet r;
        r.bbox_keywords = {"bounding box", "box coordinates", "coordinates", "bbox",
                           "where is",     "x coordinate",    "y coordinate", "draw a box",
                           "top left",     "bottom right",    "region of"};
        r.yes_aliases = {"yes",        "it is",      "appears to be", "looks like",
                         "seems like", "definitely", "likely",        "indeed"};
        r.no_aliases = {"no",       "not",           "doesn't", "isn't",
                        "unlikely", "i don't think", "probably not"};
        r.distance_keywords = {"how far",          "distance between",
                               "distance from",    "which is closer",
                               "which is farther", "closer",
                               "further",          "nearer",
                               "farthest",         "measure the distance",
                               "what is the distance", "spacing between",
                               "gap between"};
        r.cot_keywords = {"likely",
                          "probably",
                          "possibly",
                          "maybe",
                          "might be",
                          "could be",
                          "seems",
                          "appears to",
                          "i think",
                          "i guess",
                          "i'm not sure",
                          "because",
                          "since",
                          "therefore",
                          "thus",
                          "so",
                          "hence",
                          "as a result",
                          "that means",
                          "which implies",
                          "accordingly",
                          "first",
                          "next",
                          "then",
                          "finally",
                          "in the first step",
                          "in the second step",
                          "after that",
                          "subsequently",
                          "clearly",
                          "obviously",
                          "evidently",
                          "definitely",
                          "in fact",
                          "it is important to note",
                          "if",
                          "suppose",
                          "assuming that",
                          "in case",
                          "let's say",
                          "consider that"};
        return r;
    }
};

inline nlohmann::json to_json(const KeywordRuleSet& r) {
    nlohmann::json j;
    j["bbox_keywords"] = r.bbox_keywords;
    j["yes_aliases"] = r.yes_aliases;
    j["no_aliases"] = r.no_aliases;
    j["distance_keywords"] = r.distance_keywords;
    j["cot_keywords"] = r.cot_keywords;
    return j;
}

inline KeywordRuleSet rule_set_from_json(const nlohmann::json& j) {
    KeywordRuleSet r = KeywordRuleSet::standard();
    auto load = [&j](const char* key, std::vector<std::string>& into) {
        if (j.contains(key)) into = j.at(key).get<std::vector<std::string>>();
    };
    load("bbox_keywords", r.bbox_keywords);
    load("yes_aliases", r.yes_aliases);
    load("no_aliases", r.no_aliases);
    load("distance_keywords", r.distance_keywords);
    load("cot_keywords", r.cot_keywords);
    return r;
}

// The exact prompt sent to an external grader for yes/no equivalence.
inline std::string render_judge_prompt(const std::string& pred, const std::string& gt) {
    std::string prompt =
        "You are an evaluator. Given a Yes/No question, a ground-truth answer, and a predicted "
        "answer, determine whether the predicted answer means the same as the ground-truth "
        "answer.\nPredicted answer: ";
    prompt += pred;
    prompt += ", ground-truth answer: ";
    prompt += gt;
    prompt += ".\nOutput only 0 or 1, where 0 indicates incorrect and 1 indicates correct.";
    return prompt;
}

}  // namespace svqa::metrics
