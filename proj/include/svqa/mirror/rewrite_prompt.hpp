#pragma once

#include <string>
#include <string_view>

namespace svqa::mirror {

// Rewrite-instruction template sent to the LLM rewriter. Versioned: any edit
// must bump kRewritePromptVersion so archived raw responses stay attributable
// to the prompt that produced them.

inline constexpr int kRewritePromptVersion = 1;

inline constexpr std::string_view kRewritePromptTemplate =
    "You are a spatial reasoning assistant. You are given a question and its corresponding answer "
    "based on an image. Now assume that the image has been horizontally flipped. Your task is to "
    "rewrite the question and answer so that they remain logically correct for the flipped image. "
    "Write them as if the flipped image was the original, and do not mention the flip in your "
    "output. Also, verify the correctness of the left/right spatial relationship in the original "
    "answer. If the rewritten answer is inconsistent with the horizontal flip (i.e., the object "
    "that was on the left is still on the left), you must fix it. If you find an error, correct "
    "the object-direction mapping accordingly. Original question: {question}. Original answer: "
    "{answer}. Return your output as a valid JSON object, and nothing else.";

inline std::string render_rewrite_prompt(const std::string& question, const std::string& answer) {
    std::string out(kRewritePromptTemplate);
    const auto sub = [&out](std::string_view key, const std::string& value) {
        const auto pos = out.find(key);
        out.replace(pos, key.size(), value);
    };
    sub("{question}", question);
    sub("{answer}", answer);
    return out;
}

}  // namespace svqa::mirror
