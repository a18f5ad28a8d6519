#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "svqa/core/rng.hpp"
#include "svqa/core/types.hpp"

namespace svqa::env {

// Synthetic spatial scenes with exact ground truth. Object boxes are snapped
// to integer pixels and distance ground truths rounded to centimeters, so the
// canonical answer text parses back to the stored value bit-exactly.

struct EnvConfig {
    std::pair<int, int> n_objects_range{2, 4};  // min >= 2: relational questions need two objects
    std::vector<std::string> label_vocabulary{"cup",  "laptop",  "plant",   "lamp",     "book",
                                              "chair", "mug",    "monitor", "keyboard", "bottle"};
    std::pair<double, double> canvas{640.0, 480.0};
    double meters_per_pixel = 0.005;
    // Probability per answer type, order {Bbox, YesNo, Distance, FreeForm}.
    std::array<double, 4> type_mix{0.2, 0.4, 0.2, 0.2};
    std::uint64_t seed = 0;
};

inline void validate_env_config(const EnvConfig& c) {
    if (c.n_objects_range.first < 2 || c.n_objects_range.second < c.n_objects_range.first)
        throw std::invalid_argument("n_objects_range must satisfy 2 <= min <= max");
    if (c.label_vocabulary.size() < static_cast<std::size_t>(c.n_objects_range.second))
        throw std::invalid_argument("label vocabulary smaller than requested object count");
    if (!(c.canvas.first > 0.0 && c.canvas.second > 0.0))
        throw std::invalid_argument("canvas dimensions must be positive");
    if (!(c.meters_per_pixel > 0.0)) throw std::invalid_argument("meters_per_pixel must be positive");
    double sum = 0.0;
    for (double p : c.type_mix) {
        if (p < 0.0) throw std::invalid_argument("type_mix probabilities must be nonnegative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("type_mix must sum to 1");
}

namespace detail {

inline double pair_iou(const Box2D& a, const Box2D& b) {
    const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

inline std::string format_number(double v, const char* fmt) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

}  // namespace detail

// Metric frame is centered on the canvas midpoint: a horizontal flip of the
// scene is exactly x -> -x on positions.
inline Vec3 metric_position(const Box2D& box, const EnvConfig& cfg, double z) {
    return Vec3{(box.center_x() - cfg.canvas.first / 2.0) * cfg.meters_per_pixel,
                (box.center_y() - cfg.canvas.second / 2.0) * cfg.meters_per_pixel, z};
}

// Reproducible from (config.seed, index): same inputs, byte-identical scene.
inline SpatialScene generate_scene(const EnvConfig& config, std::uint64_t index) {
    validate_env_config(config);
    Rng rng(config.seed, {0x5C3E, index});

    SpatialScene scene;
    scene.scene_id = "scene-" + std::to_string(index);
    scene.canvas_width = config.canvas.first;
    scene.canvas_height = config.canvas.second;

    const int n = static_cast<int>(
        rng.uniform_int(config.n_objects_range.first, config.n_objects_range.second));
    const auto label_idx =
        rng.sample_without_replacement(config.label_vocabulary.size(), static_cast<std::size_t>(n));

    const auto w_px = static_cast<std::int64_t>(config.canvas.first);
    const auto h_px = static_cast<std::int64_t>(config.canvas.second);
    for (int i = 0; i < n; ++i) {
        SceneObject obj;
        obj.id = scene.scene_id + "-obj" + std::to_string(i);
        obj.label = config.label_vocabulary[label_idx[static_cast<std::size_t>(i)]];

        Box2D box;
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            const std::int64_t w = rng.uniform_int(w_px * 8 / 100, w_px * 22 / 100);
            const std::int64_t h = rng.uniform_int(h_px * 8 / 100, h_px * 22 / 100);
            const std::int64_t x1 = rng.uniform_int(0, w_px - w);
            const std::int64_t y1 = rng.uniform_int(0, h_px - h);
            box = Box2D{static_cast<double>(x1), static_cast<double>(y1),
                        static_cast<double>(x1 + w), static_cast<double>(y1 + h)};
            placed = true;
            for (const auto& other : scene.objects)
                if (detail::pair_iou(box, other.box) >= 0.05) {
                    placed = false;
                    break;
                }
        }
        if (!placed)
            throw std::runtime_error("generate_scene: could not place non-overlapping object in " +
                                     scene.scene_id);
        obj.box = box;
        obj.position3d = metric_position(box, config, rng.uniform(0.5, 3.0));
        scene.objects.push_back(std::move(obj));
    }
    validate_scene(scene);
    return scene;
}

// Fixed question templates, one per answer type. The mirrored variant of the
// yes/no template (produced by the directional rewrite) is also recognized.

enum class Direction { None, LeftOf, RightOf };

struct ParsedQuestion {
    AnswerType kind = AnswerType::FreeForm;
    std::string label_a;
    std::string label_b;             // empty for Bbox
    Direction asked = Direction::None;  // YesNo only
};

inline std::string bbox_question(const std::string& label) {
    return "Where is the " + label + "? Provide the bounding box.";
}
inline std::string yesno_question(const std::string& a, const std::string& b, Direction d) {
    const char* dir = d == Direction::RightOf ? "right" : "left";
    return "Is the " + a + " to the " + dir + " of the " + b + "?";
}
inline std::string distance_question(const std::string& a, const std::string& b) {
    return "How far is the " + a + " from the " + b + "?";
}
inline std::string freeform_question(const std::string& a, const std::string& b) {
    return "Describe the position of the " + a + " relative to the " + b + ".";
}

inline std::optional<ParsedQuestion> parse_question(const std::string& q) {
    auto between = [&](const std::string& prefix, const std::string& sep, const std::string& suffix,
                       ParsedQuestion& out) {
        if (q.rfind(prefix, 0) != 0 || q.size() < prefix.size() + suffix.size()) return false;
        if (q.compare(q.size() - suffix.size(), suffix.size(), suffix) != 0) return false;
        const std::string middle = q.substr(prefix.size(), q.size() - prefix.size() - suffix.size());
        const auto pos = middle.find(sep);
        if (pos == std::string::npos) return false;
        out.label_a = middle.substr(0, pos);
        out.label_b = middle.substr(pos + sep.size());
        return !out.label_a.empty() && !out.label_b.empty();
    };

    ParsedQuestion p;
    if (q.rfind("Where is the ", 0) == 0) {
        const std::string suffix = "? Provide the bounding box.";
        if (q.size() > 13 + suffix.size() && q.compare(q.size() - suffix.size(), suffix.size(), suffix) == 0) {
            p.kind = AnswerType::Bbox;
            p.label_a = q.substr(13, q.size() - 13 - suffix.size());
            return p;
        }
        return std::nullopt;
    }
    if (between("Is the ", " to the left of the ", "?", p)) {
        p.kind = AnswerType::YesNo;
        p.asked = Direction::LeftOf;
        return p;
    }
    if (between("Is the ", " to the right of the ", "?", p)) {
        p.kind = AnswerType::YesNo;
        p.asked = Direction::RightOf;
        return p;
    }
    if (between("How far is the ", " from the ", "?", p)) {
        p.kind = AnswerType::Distance;
        return p;
    }
    if (between("Describe the position of the ", " relative to the ", ".", p)) {
        p.kind = AnswerType::FreeForm;
        return p;
    }
    return std::nullopt;
}

// Canonical answer realizations shared by the oracle and the mirror rewrite.

inline std::string realize_bbox_answer(const Box2D& b) {
    return "[" + detail::format_number(b.x1, "%g") + ", " + detail::format_number(b.y1, "%g") + ", " +
           detail::format_number(b.x2, "%g") + ", " + detail::format_number(b.y2, "%g") + "]";
}

inline std::string realize_distance_answer(const std::string& a, const std::string& b, double meters) {
    return "The distance between the " + a + " and the " + b + " is " +
           detail::format_number(meters, "%.2f") + " meters.";
}

inline std::string realize_yesno_answer(const std::string& a, const std::string& b, Direction asked,
                                        bool yes) {
    const char* dir = asked == Direction::RightOf ? "right" : "left";
    if (yes) return "Yes, the " + a + " is to the " + std::string(dir) + " of the " + b + ".";
    return "No, the " + a + " is not to the " + std::string(dir) + " of the " + b + ".";
}

struct OracleAnswer {
    std::string text;
    std::optional<Quantity> gt_number;
    std::optional<Box2D> gt_box;
    std::optional<bool> gt_bool;
};

// Exact answer oracle. Left/right is decided by box-center x; equal centers
// report horizontal alignment. Distances use metric positions when every
// referenced object has one, else pixel center distance scaled by
// meters_per_pixel, and are rounded to centimeters.
inline OracleAnswer oracle_answer(const SpatialScene& scene, const QAItem& qa,
                                  double meters_per_pixel = 1.0) {
    if (qa.scene_id != scene.scene_id)
        throw std::invalid_argument("oracle_answer: scene mismatch for " + qa.qa_id);
    const auto parsed = parse_question(qa.question);
    if (!parsed)
        throw std::invalid_argument("oracle_answer: unrecognized question template in " + qa.qa_id);

    auto require_object = [&](const std::string& label) -> const SceneObject& {
        const SceneObject* obj = scene.find_object_by_label(label);
        if (!obj) throw std::invalid_argument("oracle_answer: unknown or ambiguous label " + label);
        return *obj;
    };

    OracleAnswer out;
    switch (parsed->kind) {
        case AnswerType::Bbox: {
            const auto& obj = require_object(parsed->label_a);
            out.gt_box = obj.box;
            out.text = realize_bbox_answer(obj.box);
            break;
        }
        case AnswerType::YesNo: {
            const auto& a = require_object(parsed->label_a);
            const auto& b = require_object(parsed->label_b);
            const double ax = a.box.center_x();
            const double bx = b.box.center_x();
            if (ax == bx) {
                out.gt_bool = false;
                out.text = "Neither; they are horizontally aligned.";
            } else {
                const bool yes = parsed->asked == Direction::LeftOf ? ax < bx : ax > bx;
                out.gt_bool = yes;
                out.text = realize_yesno_answer(parsed->label_a, parsed->label_b, parsed->asked, yes);
            }
            break;
        }
        case AnswerType::Distance: {
            const auto& a = require_object(parsed->label_a);
            const auto& b = require_object(parsed->label_b);
            double d;
            if (a.position3d && b.position3d) {
                d = distance(*a.position3d, *b.position3d);
            } else {
                const double dx = a.box.center_x() - b.box.center_x();
                const double dy = a.box.center_y() - b.box.center_y();
                d = std::sqrt(dx * dx + dy * dy) * meters_per_pixel;
            }
            const double rounded = std::round(d * 100.0) / 100.0;
            out.gt_number = Quantity{rounded, LengthUnit::Meter};
            out.text = realize_distance_answer(parsed->label_a, parsed->label_b, rounded);
            break;
        }
        case AnswerType::FreeForm: {
            const auto& a = require_object(parsed->label_a);
            const auto& b = require_object(parsed->label_b);
            const double ax = a.box.center_x();
            const double bx = b.box.center_x();
            if (ax == bx)
                out.text = "The " + parsed->label_a + " is horizontally aligned with the " +
                           parsed->label_b + ".";
            else if (ax < bx)
                out.text = "The " + parsed->label_a + " is to the left of the " + parsed->label_b + ".";
            else
                out.text = "The " + parsed->label_a + " is to the right of the " + parsed->label_b + ".";
            break;
        }
    }
    return out;
}

// One QA item for the scene. Yes/no questions are always generated in the
// left-of form; the mirrored right-of form comes from the directional rewrite.
inline QAItem generate_qa(const SpatialScene& scene, AnswerType answer_type, Rng& rng,
                          double meters_per_pixel = 1.0) {
    if (scene.objects.size() < 2)
        throw std::invalid_argument("generate_qa: scene needs at least 2 objects");

    const auto n = static_cast<std::int64_t>(scene.objects.size());
    const auto ia = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
    auto ib = static_cast<std::size_t>(rng.uniform_int(0, n - 2));
    if (ib >= ia) ++ib;
    const std::string& a = scene.objects[ia].label;
    const std::string& b = scene.objects[ib].label;
    if (a == b) throw std::invalid_argument("generate_qa: ambiguous duplicate label " + a);

    QAItem qa;
    qa.qa_id = scene.scene_id + "#qa";
    qa.scene_id = scene.scene_id;
    qa.answer_type = answer_type;
    qa.view = View::Original;
    switch (answer_type) {
        case AnswerType::Bbox: qa.question = bbox_question(a); break;
        case AnswerType::YesNo: qa.question = yesno_question(a, b, Direction::LeftOf); break;
        case AnswerType::Distance: qa.question = distance_question(a, b); break;
        case AnswerType::FreeForm: qa.question = freeform_question(a, b); break;
    }

    const OracleAnswer oracle = oracle_answer(scene, qa, meters_per_pixel);
    qa.reference_answer = oracle.text;
    qa.gt_number = oracle.gt_number;
    qa.gt_box = oracle.gt_box;
    qa.gt_bool = oracle.gt_bool;
    validate_qa(qa);
    return qa;
}

struct Dataset {
    std::vector<SpatialScene> scenes;
    std::vector<QAItem> items;
};

inline AnswerType draw_answer_type(const EnvConfig& config, Rng& rng) {
    const double u = rng.next_real();
    double acc = 0.0;
    for (int t = 0; t < 4; ++t) {
        acc += config.type_mix[static_cast<std::size_t>(t)];
        if (u < acc) return static_cast<AnswerType>(t);
    }
    return AnswerType::FreeForm;
}

// count scenes, one QA item each; deterministic from config.seed.
inline Dataset build_dataset(const EnvConfig& config, std::uint64_t count) {
    validate_env_config(config);
    Dataset ds;
    ds.scenes.reserve(count);
    ds.items.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        SpatialScene scene = generate_scene(config, i);
        Rng qa_rng(config.seed, {0x9A11, i});
        const AnswerType type = draw_answer_type(config, qa_rng);
        ds.items.push_back(generate_qa(scene, type, qa_rng, config.meters_per_pixel));
        ds.scenes.push_back(std::move(scene));
    }
    return ds;
}

}  // namespace svqa::env
