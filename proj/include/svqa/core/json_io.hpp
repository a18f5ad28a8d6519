#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "svqa/core/types.hpp"

namespace svqa {

using json = nlohmann::json;

// Record schemas. One JSON object per line; absent optionals are null so the
// field set is identical on every line. nlohmann::json orders keys
// alphabetically, which keeps serialized bytes stable across runs.

inline json to_json(const Box2D& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

inline Box2D box_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x1,y1,x2,y2]");
    return Box2D{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline json to_json(const QAItem& qa) {
    json j;
    j["qa_id"] = qa.qa_id;
    j["scene_id"] = qa.scene_id;
    j["view"] = to_string(qa.view);
    j["question"] = qa.question;
    j["answer"] = qa.reference_answer;
    j["answer_type"] = to_string(qa.answer_type);
    j["gt_number"] = qa.gt_number ? json(qa.gt_number->value) : json(nullptr);
    j["gt_unit"] = qa.gt_number ? json(to_string(qa.gt_number->unit)) : json(nullptr);
    j["gt_box"] = qa.gt_box ? to_json(*qa.gt_box) : json(nullptr);
    j["gt_bool"] = qa.gt_bool ? json(*qa.gt_bool) : json(nullptr);
    j["paired_qa_id"] = qa.paired_qa_id ? json(*qa.paired_qa_id) : json(nullptr);
    return j;
}

inline QAItem qa_from_json(const json& j) {
    QAItem qa;
    qa.qa_id = j.at("qa_id").get<std::string>();
    qa.scene_id = j.at("scene_id").get<std::string>();
    qa.view = view_from_string(j.at("view").get<std::string>());
    qa.question = j.at("question").get<std::string>();
    qa.reference_answer = j.at("answer").get<std::string>();
    qa.answer_type = answer_type_from_string(j.at("answer_type").get<std::string>());
    if (j.contains("gt_number") && !j["gt_number"].is_null()) {
        Quantity q;
        q.value = j["gt_number"].get<double>();
        q.unit = j.contains("gt_unit") && !j["gt_unit"].is_null()
                     ? length_unit_from_string(j["gt_unit"].get<std::string>())
                     : LengthUnit::Meter;
        qa.gt_number = q;
    }
    if (j.contains("gt_box") && !j["gt_box"].is_null()) qa.gt_box = box_from_json(j["gt_box"]);
    if (j.contains("gt_bool") && !j["gt_bool"].is_null()) qa.gt_bool = j["gt_bool"].get<bool>();
    if (j.contains("paired_qa_id") && !j["paired_qa_id"].is_null())
        qa.paired_qa_id = j["paired_qa_id"].get<std::string>();
    validate_qa(qa);
    return qa;
}

inline json to_json(const SceneObject& o) {
    json j;
    j["id"] = o.id;
    j["label"] = o.label;
    j["box"] = to_json(o.box);
    j["position3d"] = o.position3d ? json::array({o.position3d->x, o.position3d->y, o.position3d->z})
                                   : json(nullptr);
    return j;
}

inline json to_json(const SpatialScene& s) {
    json j;
    j["scene_id"] = s.scene_id;
    j["canvas_width"] = s.canvas_width;
    j["canvas_height"] = s.canvas_height;
    json objs = json::array();
    for (const auto& o : s.objects) objs.push_back(to_json(o));
    j["objects"] = objs;
    j["image_ref"] = s.image_ref ? json(*s.image_ref) : json(nullptr);
    return j;
}

inline SpatialScene scene_from_json(const json& j) {
    SpatialScene s;
    s.scene_id = j.at("scene_id").get<std::string>();
    s.canvas_width = j.at("canvas_width").get<double>();
    s.canvas_height = j.at("canvas_height").get<double>();
    for (const auto& jo : j.at("objects")) {
        SceneObject o;
        o.id = jo.at("id").get<std::string>();
        o.label = jo.at("label").get<std::string>();
        o.box = box_from_json(jo.at("box"));
        if (jo.contains("position3d") && !jo["position3d"].is_null()) {
            const auto& p = jo["position3d"];
            o.position3d = Vec3{p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
        }
        s.objects.push_back(std::move(o));
    }
    if (j.contains("image_ref") && !j["image_ref"].is_null())
        s.image_ref = j["image_ref"].get<std::string>();
    validate_scene(s);
    return s;
}

// Line-oriented IO. Parse failures report the file and 1-based line number.

template <typename T, typename FromJson>
std::vector<T> read_jsonl(const std::string& path, FromJson&& from_json) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<QAItem> read_qa_jsonl(const std::string& path) {
    return read_jsonl<QAItem>(path, [](const json& j) { return qa_from_json(j); });
}

inline std::vector<SpatialScene> read_scenes_jsonl(const std::string& path) {
    return read_jsonl<SpatialScene>(path, [](const json& j) { return scene_from_json(j); });
}

template <typename T, typename ToJson>
void write_jsonl(const std::string& path, const std::vector<T>& items, ToJson&& to_json_fn) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& item : items) out << to_json_fn(item).dump() << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_qa_jsonl(const std::string& path, const std::vector<QAItem>& items) {
    write_jsonl(path, items, [](const QAItem& qa) { return to_json(qa); });
}

inline void write_scenes_jsonl(const std::string& path, const std::vector<SpatialScene>& scenes) {
    write_jsonl(path, scenes, [](const SpatialScene& s) { return to_json(s); });
}

}  // namespace svqa
