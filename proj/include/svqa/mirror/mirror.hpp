#pragma once

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "svqa/core/types.hpp"
#include "svqa/synthenv/synthenv.hpp"

namespace svqa::mirror {

// Horizontal-flip transform and mirror-consistent QA rewriting. Directional
// terms swap under a flip; distances and front/behind relations do not.

struct DirectionalLexicon {
    // Both directions of each pair are swapped; matching is longest-first.
    std::vector<std::pair<std::string, std::string>> swap_pairs;
    // Terms that must survive a rewrite untouched.
    std::vector<std::string> invariant_terms;

    static DirectionalLexicon standard() {
        DirectionalLexicon lx;
        lx.swap_pairs = {{"left", "right"},
                         {"leftmost", "rightmost"},
                         {"to the left of", "to the right of"}};
        lx.invariant_terms = {"above",   "below",  "in front of", "behind",
                              "next to", "closer", "farther"};
        return lx;
    }
};

namespace detail {

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

inline char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

inline bool iequals_at(std::string_view text, std::size_t pos, std::string_view needle) {
    if (pos + needle.size() > text.size()) return false;
    for (std::size_t i = 0; i < needle.size(); ++i)
        if (lower(text[pos + i]) != lower(needle[i])) return false;
    return true;
}

// Copies the case pattern of `matched` onto lowercase `replacement`, word by
// word. All lexicon pairs have equal word counts, so words align 1:1.
inline std::string transfer_case(std::string_view matched, std::string_view replacement) {
    auto split = [](std::string_view s) {
        std::vector<std::string_view> words;
        std::size_t start = 0;
        while (start <= s.size()) {
            const auto sp = s.find(' ', start);
            if (sp == std::string_view::npos) {
                words.push_back(s.substr(start));
                break;
            }
            words.push_back(s.substr(start, sp - start));
            start = sp + 1;
        }
        return words;
    };
    const auto src = split(matched);
    const auto dst = split(replacement);

    std::string out;
    for (std::size_t w = 0; w < dst.size(); ++w) {
        std::string word(dst[w]);
        if (w < src.size()) {
            bool any_alpha = false;
            bool all_upper = true;
            for (char c : src[w]) {
                if (std::isalpha(static_cast<unsigned char>(c))) {
                    any_alpha = true;
                    if (std::islower(static_cast<unsigned char>(c))) all_upper = false;
                }
            }
            if (any_alpha && all_upper) {
                for (char& c : word) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            } else if (!src[w].empty() && std::isupper(static_cast<unsigned char>(src[w][0])) &&
                       !word.empty()) {
                word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
            }
        }
        if (w) out += ' ';
        out += word;
    }
    return out;
}

struct LexEntry {
    std::string source;       // lowercase
    std::string replacement;  // lowercase
    bool is_left;             // direction family of the source term
};

inline std::vector<LexEntry> matcher_entries(const DirectionalLexicon& lexicon) {
    std::vector<LexEntry> entries;
    for (const auto& [a, b] : lexicon.swap_pairs) {
        entries.push_back({a, b, a.find("left") != std::string::npos});
        entries.push_back({b, a, b.find("left") != std::string::npos});
    }
    // Longest source first, so "to the left of" wins over "left" and
    // "leftmost" over "left"; stable to keep the declared pair order.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const LexEntry& x, const LexEntry& y) { return x.source.size() > y.source.size(); });
    return entries;
}

// Scans for token-boundary lexicon matches; on_match returns the text to
// emit in place of the matched span.
template <typename OnMatch>
std::string scan_directional(std::string_view text, const std::vector<LexEntry>& entries,
                             OnMatch&& on_match) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const bool at_boundary = i == 0 || !is_word_char(text[i - 1]);
        if (at_boundary) {
            const LexEntry* hit = nullptr;
            for (const auto& e : entries) {
                if (!iequals_at(text, i, e.source)) continue;
                const std::size_t end = i + e.source.size();
                if (end < text.size() && is_word_char(text[end])) continue;
                hit = &e;
                break;
            }
            if (hit) {
                out += on_match(*hit, text.substr(i, hit->source.size()));
                i += hit->source.size();
                continue;
            }
        }
        out += text[i];
        ++i;
    }
    return out;
}

inline std::string toggle_flip_suffix(const std::string& id) {
    constexpr std::string_view suffix = "#flip";
    if (id.size() >= suffix.size() &&
        std::string_view(id).substr(id.size() - suffix.size()) == suffix)
        return id.substr(0, id.size() - suffix.size());
    return id + std::string(suffix);
}

}  // namespace detail

// Case-preserving swap of directional terms at token boundaries, longest
// match first. Words merely containing a direction ("upright", "leftover
// parts" aside: "leftover" has no boundary after "left") are untouched.
inline std::string swap_directional_terms(const std::string& text, const DirectionalLexicon& lexicon) {
    const auto entries = detail::matcher_entries(lexicon);
    return detail::scan_directional(text, entries,
                                    [](const detail::LexEntry& e, std::string_view matched) {
                                        return detail::transfer_case(matched, e.replacement);
                                    });
}

// Counts of (left-family, right-family) directional terms, for structural
// comparison of answers that may be phrased freely.
inline std::pair<int, int> direction_fingerprint(const std::string& text,
                                                 const DirectionalLexicon& lexicon) {
    const auto entries = detail::matcher_entries(lexicon);
    int left = 0;
    int right = 0;
    detail::scan_directional(text, entries, [&](const detail::LexEntry& e, std::string_view matched) {
        (e.is_left ? left : right) += 1;
        return std::string(matched);
    });
    return {left, right};
}

inline Box2D flip_box(const Box2D& box, double canvas_width) {
    return Box2D{canvas_width - box.x2, box.y1, canvas_width - box.x1, box.y2};
}

// The metric frame is centered on the canvas midpoint, so reflecting about
// the x mid-plane is exactly x -> -x on positions. Flipping twice restores
// the input bit for bit, id included.
inline SpatialScene flip_scene(const SpatialScene& scene) {
    SpatialScene out = scene;
    out.scene_id = detail::toggle_flip_suffix(scene.scene_id);
    for (auto& obj : out.objects) {
        obj.box = flip_box(obj.box, scene.canvas_width);
        if (obj.position3d) obj.position3d->x = -obj.position3d->x;
    }
    return out;
}

namespace detail {

inline QAItem mirrored_shell(const QAItem& qa, double canvas_width) {
    QAItem out = qa;
    out.qa_id = toggle_flip_suffix(qa.qa_id);
    out.scene_id = toggle_flip_suffix(qa.scene_id);
    out.view = qa.view == View::Original ? View::Mirrored : View::Original;
    out.paired_qa_id = qa.qa_id;
    if (qa.gt_box) {
        if (!(canvas_width > 0.0))
            throw std::invalid_argument("rewrite of " + qa.qa_id + " needs the canvas width");
        out.gt_box = flip_box(*qa.gt_box, canvas_width);
    }
    // gt_number is flip-invariant; gt_bool stays because the question text is
    // rewritten along with the world.
    return out;
}

}  // namespace detail

// Deterministic rewrite: directional swap on question and answer text,
// structured ground truth transformed geometrically. Applying it to the
// result undoes it (ids toggle their "#flip" suffix), which is the tested
// involution.
inline QAItem rewrite_qa_rule_based(const QAItem& qa, const DirectionalLexicon& lexicon,
                                    double canvas_width = 0.0) {
    QAItem out = detail::mirrored_shell(qa, canvas_width);
    out.question = swap_directional_terms(qa.question, lexicon);
    out.reference_answer = swap_directional_terms(qa.reference_answer, lexicon);
    validate_qa(out);
    return out;
}

// Implemented by the services module: HTTP rewriter and its offline mock.
class RewriteClientBase {
  public:
    virtual ~RewriteClientBase() = default;
    // Returns the rewritten (question, answer) for the flipped image.
    virtual std::pair<std::string, std::string> rewrite(const std::string& question,
                                                        const std::string& answer) = 0;
};

// LLM-assisted rewrite. Only the text comes from the client; box/number
// ground truth is still transformed locally, because rewriters have produced
// inconsistent pairs before and the geometry is not theirs to decide.
inline QAItem rewrite_qa_llm(const QAItem& qa, RewriteClientBase& client, double canvas_width = 0.0) {
    if (qa.view != View::Original)
        throw std::invalid_argument("rewrite_qa_llm expects an original-view item: " + qa.qa_id);
    QAItem out = detail::mirrored_shell(qa, canvas_width);
    auto [question, answer] = client.rewrite(qa.question, qa.reference_answer);
    out.question = std::move(question);
    out.reference_answer = std::move(answer);
    validate_qa(out);
    return out;
}

struct VerificationReport {
    std::string qa_id;
    bool pass = false;
    std::string expected_answer;  // oracle text on the flipped scene
    std::string actual_answer;
    std::string note;  // empty when pass
};

// Checks a mirrored item against the exact oracle re-evaluated on the
// flipped scene. Structured fields compare exactly; answer text compares by
// polarity and directional fingerprint so freely phrased rewrites still
// verify.
inline VerificationReport verify_consistency(const QAItem& original, const QAItem& mirrored,
                                             const SpatialScene& scene, double meters_per_pixel = 1.0,
                                             const DirectionalLexicon& lexicon = DirectionalLexicon::standard()) {
    const bool linked = (mirrored.paired_qa_id && *mirrored.paired_qa_id == original.qa_id) ||
                        (original.paired_qa_id && *original.paired_qa_id == mirrored.qa_id);
    if (!linked)
        throw std::invalid_argument("verify_consistency: items " + original.qa_id + " and " +
                                    mirrored.qa_id + " are not paired");
    if (original.answer_type != mirrored.answer_type)
        throw std::invalid_argument("verify_consistency: answer_type mismatch for " + mirrored.qa_id);

    const SpatialScene flipped = flip_scene(scene);
    QAItem probe = mirrored;
    probe.scene_id = flipped.scene_id;
    const env::OracleAnswer oracle = env::oracle_answer(flipped, probe, meters_per_pixel);

    VerificationReport report;
    report.qa_id = mirrored.qa_id;
    report.expected_answer = oracle.text;
    report.actual_answer = mirrored.reference_answer;
    report.pass = true;

    auto fail = [&report](std::string note) {
        report.pass = false;
        if (report.note.empty()) report.note = std::move(note);
    };

    switch (mirrored.answer_type) {
        case AnswerType::Bbox:
            if (!oracle.gt_box || !mirrored.gt_box || !(*oracle.gt_box == *mirrored.gt_box))
                fail("gt_box does not match the flipped-scene oracle");
            break;
        case AnswerType::Distance:
            if (!oracle.gt_number || !mirrored.gt_number ||
                oracle.gt_number->value != mirrored.gt_number->value ||
                oracle.gt_number->unit != mirrored.gt_number->unit)
                fail("gt_number changed under flip");
            break;
        case AnswerType::YesNo: {
            if (!oracle.gt_bool || !mirrored.gt_bool || *oracle.gt_bool != *mirrored.gt_bool)
                fail("gt_bool does not match the flipped-scene oracle");
            auto polarity = [](const std::string& text) {
                std::string head;
                for (char c : text) {
                    if (!std::isalpha(static_cast<unsigned char>(c))) break;
                    head += detail::lower(c);
                }
                if (head == "yes" || head == "no" || head == "neither") return head;
                return std::string();
            };
            const std::string have = polarity(mirrored.reference_answer);
            const std::string want = polarity(oracle.text);
            if (!have.empty() && have != want) fail("answer polarity contradicts the oracle");
            if (direction_fingerprint(mirrored.reference_answer, lexicon) !=
                direction_fingerprint(oracle.text, lexicon))
                fail("directional terms in the answer contradict the flipped scene");
            break;
        }
        case AnswerType::FreeForm:
            if (direction_fingerprint(mirrored.reference_answer, lexicon) !=
                direction_fingerprint(oracle.text, lexicon))
                fail("directional terms in the answer contradict the flipped scene");
            break;
    }
    return report;
}

}  // namespace svqa::mirror
