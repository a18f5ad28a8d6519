#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "svqa/core/types.hpp"

namespace svqa {

namespace detail {

inline std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    std::size_t pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string_view::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

}  // namespace detail

// Strict parse of the think/answer tag format: exactly one <think>...</think>
// block followed by exactly one <answer>...</answer> block, only whitespace
// around and between them. Each of the four tags must appear exactly once in
// the whole input, so payloads cannot smuggle tags. Inner text is kept
// verbatim. Total on arbitrary byte input; absence encodes malformation.
inline std::optional<StructuredOutput> parse_structured_output(std::string_view text) {
    constexpr std::string_view kThinkOpen = "<think>";
    constexpr std::string_view kThinkClose = "</think>";
    constexpr std::string_view kAnswerOpen = "<answer>";
    constexpr std::string_view kAnswerClose = "</answer>";

    const std::string_view s = detail::trim(text);
    if (s.size() < kThinkOpen.size() + kThinkClose.size() + kAnswerOpen.size() + kAnswerClose.size())
        return std::nullopt;

    // "</think>" contains no "<think>" and "</answer>" no "<answer>", so the
    // occurrence counts below really count block delimiters.
    if (detail::count_occurrences(s, kThinkClose) != 1) return std::nullopt;
    if (detail::count_occurrences(s, kThinkOpen) != 1) return std::nullopt;
    if (detail::count_occurrences(s, kAnswerClose) != 1) return std::nullopt;
    if (detail::count_occurrences(s, kAnswerOpen) != 1) return std::nullopt;

    if (s.substr(0, kThinkOpen.size()) != kThinkOpen) return std::nullopt;
    const auto think_close = s.find(kThinkClose);
    const auto answer_open = s.find(kAnswerOpen);
    const auto answer_close = s.find(kAnswerClose);
    if (think_close == std::string_view::npos || answer_open == std::string_view::npos ||
        answer_close == std::string_view::npos)
        return std::nullopt;
    if (!(kThinkOpen.size() <= think_close && think_close < answer_open && answer_open < answer_close))
        return std::nullopt;

    const std::string_view between =
        s.substr(think_close + kThinkClose.size(), answer_open - (think_close + kThinkClose.size()));
    if (!detail::trim(between).empty()) return std::nullopt;
    if (!detail::trim(s.substr(answer_close + kAnswerClose.size())).empty()) return std::nullopt;

    StructuredOutput out;
    out.think = std::string(s.substr(kThinkOpen.size(), think_close - kThinkOpen.size()));
    out.answer = std::string(
        s.substr(answer_open + kAnswerOpen.size(), answer_close - (answer_open + kAnswerOpen.size())));
    return out;
}

// Canonical rendering; parse(render(x)) == x whenever the payloads are tag-free.
inline std::string render_structured_output(const StructuredOutput& out) {
    return "<think>" + out.think + "</think> <answer>" + out.answer + "</answer>";
}

}  // namespace svqa
