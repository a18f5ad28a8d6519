#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace svqa {

struct Box2D {
    // Pixels, origin top-left, x rightward, y downward.
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double center_x() const { return (x1 + x2) / 2.0; }
    double center_y() const { return (y1 + y2) / 2.0; }
    bool valid() const { return x1 < x2 && y1 < y2; }

    friend bool operator==(const Box2D&, const Box2D&) = default;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double distance(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

struct SceneObject {
    std::string id;
    std::string label;
    Box2D box;
    // Metric position, meters. The frame is centered on the canvas midpoint,
    // so a horizontal flip is exactly x -> -x.
    std::optional<Vec3> position3d;
};

struct SpatialScene {
    std::string scene_id;
    double canvas_width = 0.0;   // pixels
    double canvas_height = 0.0;  // pixels
    std::vector<SceneObject> objects;
    std::optional<std::string> image_ref;

    const SceneObject* find_object_by_label(const std::string& label) const {
        const SceneObject* found = nullptr;
        for (const auto& o : objects) {
            if (o.label == label) {
                if (found) return nullptr;  // ambiguous
                found = &o;
            }
        }
        return found;
    }
};

// Throws std::invalid_argument when a box leaves the canvas, an id repeats,
// or a box is degenerate.
inline void validate_scene(const SpatialScene& scene) {
    if (!(scene.canvas_width > 0.0) || !(scene.canvas_height > 0.0))
        throw std::invalid_argument("scene " + scene.scene_id + ": non-positive canvas");
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const auto& o = scene.objects[i];
        if (!o.box.valid())
            throw std::invalid_argument("scene " + scene.scene_id + ": degenerate box on " + o.id);
        if (o.box.x1 < 0.0 || o.box.y1 < 0.0 || o.box.x2 > scene.canvas_width ||
            o.box.y2 > scene.canvas_height)
            throw std::invalid_argument("scene " + scene.scene_id + ": box outside canvas on " + o.id);
        for (std::size_t j = i + 1; j < scene.objects.size(); ++j)
            if (scene.objects[j].id == o.id)
                throw std::invalid_argument("scene " + scene.scene_id + ": duplicate object id " + o.id);
    }
}

enum class AnswerType { Bbox, YesNo, Distance, FreeForm };

inline const char* to_string(AnswerType t) {
    switch (t) {
        case AnswerType::Bbox: return "bbox";
        case AnswerType::YesNo: return "yesno";
        case AnswerType::Distance: return "distance";
        case AnswerType::FreeForm: return "freeform";
    }
    throw std::logic_error("bad AnswerType");
}

inline AnswerType answer_type_from_string(const std::string& s) {
    if (s == "bbox") return AnswerType::Bbox;
    if (s == "yesno") return AnswerType::YesNo;
    if (s == "distance") return AnswerType::Distance;
    if (s == "freeform") return AnswerType::FreeForm;
    throw std::invalid_argument("unknown answer_type: " + s);
}

enum class LengthUnit { Meter, Centimeter, Inch, Foot };

inline double meters_per(LengthUnit u) {
    switch (u) {
        case LengthUnit::Meter: return 1.0;
        case LengthUnit::Centimeter: return 0.01;
        case LengthUnit::Inch: return 0.0254;
        case LengthUnit::Foot: return 0.3048;
    }
    throw std::logic_error("bad LengthUnit");
}

inline const char* to_string(LengthUnit u) {
    switch (u) {
        case LengthUnit::Meter: return "m";
        case LengthUnit::Centimeter: return "cm";
        case LengthUnit::Inch: return "in";
        case LengthUnit::Foot: return "ft";
    }
    throw std::logic_error("bad LengthUnit");
}

inline LengthUnit length_unit_from_string(const std::string& s) {
    if (s == "m" || s == "meter" || s == "meters") return LengthUnit::Meter;
    if (s == "cm" || s == "centimeter" || s == "centimeters") return LengthUnit::Centimeter;
    if (s == "in" || s == "inch" || s == "inches") return LengthUnit::Inch;
    if (s == "ft" || s == "foot" || s == "feet") return LengthUnit::Foot;
    throw std::invalid_argument("unknown length unit: " + s);
}

inline double convert_length(double value, LengthUnit from, LengthUnit to) {
    if (from == to) return value;
    return value * (meters_per(from) / meters_per(to));
}

struct Quantity {
    double value = 0.0;
    LengthUnit unit = LengthUnit::Meter;

    double in_meters() const { return convert_length(value, unit, LengthUnit::Meter); }

    friend bool operator==(const Quantity&, const Quantity&) = default;
};

enum class View { Original, Mirrored };

inline const char* to_string(View v) { return v == View::Original ? "original" : "mirrored"; }

inline View view_from_string(const std::string& s) {
    if (s == "original") return View::Original;
    if (s == "mirrored") return View::Mirrored;
    throw std::invalid_argument("unknown view: " + s);
}

struct QAItem {
    std::string qa_id;
    std::string scene_id;
    std::string question;
    std::string reference_answer;
    AnswerType answer_type = AnswerType::FreeForm;
    std::optional<Quantity> gt_number;  // present iff Distance
    std::optional<Box2D> gt_box;        // present iff Bbox
    std::optional<bool> gt_bool;        // present iff YesNo
    View view = View::Original;
    std::optional<std::string> paired_qa_id;
};

inline void validate_qa(const QAItem& qa) {
    const bool num = qa.gt_number.has_value();
    const bool box = qa.gt_box.has_value();
    const bool yn = qa.gt_bool.has_value();
    const bool ok = (qa.answer_type == AnswerType::Distance && num && !box && !yn) ||
                    (qa.answer_type == AnswerType::Bbox && box && !num && !yn) ||
                    (qa.answer_type == AnswerType::YesNo && yn && !num && !box) ||
                    (qa.answer_type == AnswerType::FreeForm && !num && !box && !yn);
    if (!ok)
        throw std::invalid_argument("qa " + qa.qa_id + ": ground truth fields do not match answer_type");
}

struct StructuredOutput {
    std::string think;
    std::string answer;

    friend bool operator==(const StructuredOutput&, const StructuredOutput&) = default;
};

struct Rollout {
    std::vector<int> tokens;
    std::string text;
    std::vector<double> logprobs_old;  // same length as tokens, each <= 0
    std::optional<StructuredOutput> parsed;

    double total_logprob_old() const {
        double s = 0.0;
        for (double lp : logprobs_old) s += lp;
        return s;
    }
};

struct RolloutGroup {
    QAItem query;
    std::vector<Rollout> rollouts;  // length = configured group size G
};

struct RewardVector {
    double r_format = 0.0;        // {0, 1}
    double r_semantic_raw = 0.0;  // [0, 1]
    double r_semantic = 0.0;      // post-correction, may drop below raw
    double r_total = 0.0;         // lambda1 * r_format + lambda2 * r_semantic
};

struct TrainConfig {
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    double delta = 0.5;    // correction threshold
    double eta = 1.0;      // correction scaling
    double beta = 0.0;     // KL coefficient; regularizer off unless requested
    double epsilon_clip = 0.2;
    int group_size = 8;
    double learning_rate = 0.3;
    int max_tokens = 16;
    std::uint64_t seed = 0;
    double advantage_std_floor = 1e-8;
    // Not part of the reward/objective math:
    int refresh_interval = 1;  // steps between syncing the sampling policy to the current one
    int batch_size = 4;        // paired queries per step
};

inline void validate_train_config(const TrainConfig& c) {
    if (c.lambda1 < 0.0 || c.lambda2 < 0.0) throw std::invalid_argument("lambda must be nonnegative");
    if (c.eta < 0.0) throw std::invalid_argument("eta must be nonnegative");
    if (c.beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
    if (!(c.epsilon_clip > 0.0 && c.epsilon_clip < 1.0))
        throw std::invalid_argument("epsilon_clip must be in (0,1)");
    if (c.group_size < 1) throw std::invalid_argument("group_size must be positive");
    if (!(c.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (c.max_tokens < 1) throw std::invalid_argument("max_tokens must be positive");
    if (!(c.advantage_std_floor > 0.0))
        throw std::invalid_argument("advantage_std_floor must be positive");
    if (c.refresh_interval < 1) throw std::invalid_argument("refresh_interval must be positive");
    if (c.batch_size < 1) throw std::invalid_argument("batch_size must be positive");
}

}  // namespace svqa
