#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "svqa/synthenv/synthenv.hpp"

using namespace svqa;
using namespace svqa::env;

namespace {

SpatialScene two_object_scene(Box2D a, Box2D b, std::optional<Vec3> pa = std::nullopt,
                              std::optional<Vec3> pb = std::nullopt) {
    SpatialScene s;
    s.scene_id = "hand";
    s.canvas_width = 640;
    s.canvas_height = 480;
    s.objects.push_back({"o1", "cup", a, pa});
    s.objects.push_back({"o2", "mug", b, pb});
    validate_scene(s);
    return s;
}

QAItem question_only(const SpatialScene& s, const std::string& q) {
    QAItem qa;
    qa.qa_id = s.scene_id + "#qa";
    qa.scene_id = s.scene_id;
    qa.question = q;
    return qa;
}

bool same_scene(const SpatialScene& a, const SpatialScene& b) {
    if (a.scene_id != b.scene_id || a.canvas_width != b.canvas_width ||
        a.canvas_height != b.canvas_height || a.objects.size() != b.objects.size())
        return false;
    for (std::size_t i = 0; i < a.objects.size(); ++i) {
        const auto& x = a.objects[i];
        const auto& y = b.objects[i];
        if (x.id != y.id || x.label != y.label || !(x.box == y.box)) return false;
        if (x.position3d.has_value() != y.position3d.has_value()) return false;
        if (x.position3d &&
            (x.position3d->x != y.position3d->x || x.position3d->y != y.position3d->y ||
             x.position3d->z != y.position3d->z))
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("scene generation is deterministic per index") {
    const EnvConfig cfg;
    for (std::uint64_t i : {0ULL, 1ULL, 17ULL, 999ULL})
        CHECK(same_scene(generate_scene(cfg, i), generate_scene(cfg, i)));
}

TEST_CASE("generated scenes are valid with integer low-overlap boxes") {
    const EnvConfig cfg;
    for (std::uint64_t i = 0; i < 300; ++i) {
        const SpatialScene s = generate_scene(cfg, i);
        CHECK_NOTHROW(validate_scene(s));
        REQUIRE(s.objects.size() >= 2);
        std::set<std::string> labels;
        for (const auto& o : s.objects) {
            labels.insert(o.label);
            CHECK(o.box.x1 == std::floor(o.box.x1));
            CHECK(o.box.y1 == std::floor(o.box.y1));
            CHECK(o.box.x2 == std::floor(o.box.x2));
            CHECK(o.box.y2 == std::floor(o.box.y2));
            REQUIRE(o.position3d.has_value());
            CHECK(o.position3d->z >= 0.5);
            CHECK(o.position3d->z <= 3.0);
        }
        CHECK(labels.size() == s.objects.size());  // unambiguous references
        for (std::size_t a = 0; a < s.objects.size(); ++a)
            for (std::size_t b = a + 1; b < s.objects.size(); ++b)
                CHECK(detail::pair_iou(s.objects[a].box, s.objects[b].box) < 0.05);
    }
}

TEST_CASE("dataset ids are unique across 1000 items") {
    const EnvConfig cfg;
    const Dataset ds = build_dataset(cfg, 1000);
    REQUIRE(ds.items.size() == 1000);
    REQUIRE(ds.scenes.size() == 1000);
    std::set<std::string> qa_ids, scene_ids;
    for (const auto& it : ds.items) qa_ids.insert(it.qa_id);
    for (const auto& s : ds.scenes) scene_ids.insert(s.scene_id);
    CHECK(qa_ids.size() == 1000);
    CHECK(scene_ids.size() == 1000);
}

TEST_CASE("dataset generation is reproducible") {
    const EnvConfig cfg;
    const Dataset a = build_dataset(cfg, 50);
    const Dataset b = build_dataset(cfg, 50);
    REQUIRE(a.items.size() == b.items.size());
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        CHECK(a.items[i].qa_id == b.items[i].qa_id);
        CHECK(a.items[i].question == b.items[i].question);
        CHECK(a.items[i].reference_answer == b.items[i].reference_answer);
        CHECK(a.items[i].answer_type == b.items[i].answer_type);
    }
    for (std::size_t i = 0; i < a.scenes.size(); ++i) CHECK(same_scene(a.scenes[i], b.scenes[i]));
}

TEST_CASE("answer type mix roughly follows configuration") {
    const EnvConfig cfg;  // {0.2 bbox, 0.4 yesno, 0.2 distance, 0.2 freeform}
    const Dataset ds = build_dataset(cfg, 2000);
    std::array<int, 4> counts{};
    for (const auto& it : ds.items) ++counts[static_cast<std::size_t>(it.answer_type)];
    const auto frac = [&](AnswerType t) {
        return counts[static_cast<std::size_t>(t)] / 2000.0;
    };
    CHECK(std::abs(frac(AnswerType::Bbox) - 0.2) < 0.05);
    CHECK(std::abs(frac(AnswerType::YesNo) - 0.4) < 0.05);
    CHECK(std::abs(frac(AnswerType::Distance) - 0.2) < 0.05);
    CHECK(std::abs(frac(AnswerType::FreeForm) - 0.2) < 0.05);
}

TEST_CASE("question builders and parser are inverse") {
    const std::vector<std::string> labels = {"cup", "coffee mug", "desk lamp"};
    for (const auto& a : labels)
        for (const auto& b : labels) {
            if (a == b) continue;
            auto p = parse_question(bbox_question(a));
            REQUIRE(p.has_value());
            CHECK(p->kind == AnswerType::Bbox);
            CHECK(p->label_a == a);

            p = parse_question(yesno_question(a, b, Direction::LeftOf));
            REQUIRE(p.has_value());
            CHECK(p->kind == AnswerType::YesNo);
            CHECK(p->asked == Direction::LeftOf);
            CHECK(p->label_a == a);
            CHECK(p->label_b == b);

            p = parse_question(yesno_question(a, b, Direction::RightOf));
            REQUIRE(p.has_value());
            CHECK(p->asked == Direction::RightOf);

            p = parse_question(distance_question(a, b));
            REQUIRE(p.has_value());
            CHECK(p->kind == AnswerType::Distance);
            CHECK(p->label_a == a);
            CHECK(p->label_b == b);

            p = parse_question(freeform_question(a, b));
            REQUIRE(p.has_value());
            CHECK(p->kind == AnswerType::FreeForm);
        }
    CHECK_FALSE(parse_question("What color is the cup?").has_value());
    CHECK_FALSE(parse_question("").has_value());
}

TEST_CASE("metric positions are canvas-centered") {
    EnvConfig cfg;
    cfg.canvas = {640.0, 480.0};
    cfg.meters_per_pixel = 0.005;
    const Vec3 center = metric_position(Box2D{310, 230, 330, 250}, cfg, 1.0);
    CHECK(center.x == 0.0);
    CHECK(center.y == 0.0);
    const Vec3 right = metric_position(Box2D{630, 0, 640, 10}, cfg, 1.0);
    CHECK(right.x == Catch::Approx((635.0 - 320.0) * 0.005).epsilon(1e-12));
}

TEST_CASE("oracle answers a 3-4-5 distance exactly") {
    SpatialScene s = two_object_scene(Box2D{0, 0, 10, 10}, Box2D{600, 400, 610, 410},
                                      Vec3{0.0, 0.0, 1.0}, Vec3{3.0, 4.0, 1.0});
    const QAItem qa = question_only(s, distance_question("cup", "mug"));
    const OracleAnswer ans = oracle_answer(s, qa);
    REQUIRE(ans.gt_number.has_value());
    CHECK(ans.gt_number->value == 5.0);
    CHECK(ans.gt_number->unit == LengthUnit::Meter);
    CHECK(ans.text == "The distance between the cup and the mug is 5.00 meters.");
}

TEST_CASE("oracle distance falls back to scaled pixel distance") {
    SpatialScene s = two_object_scene(Box2D{0, 0, 10, 10}, Box2D{30, 40, 40, 50});
    // centers (5,5) and (35,45): pixel distance 50
    const QAItem qa = question_only(s, distance_question("cup", "mug"));
    const OracleAnswer ans = oracle_answer(s, qa, 0.01);
    REQUIRE(ans.gt_number.has_value());
    CHECK(ans.gt_number->value == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("oracle rounds distances to centimeters and text parses back") {
    const EnvConfig cfg;
    for (std::uint64_t i = 0; i < 200; ++i) {
        const SpatialScene s = generate_scene(cfg, i);
        Rng rng(cfg.seed, {0x9A11, i});
        const QAItem qa = generate_qa(s, AnswerType::Distance, rng, cfg.meters_per_pixel);
        REQUIRE(qa.gt_number.has_value());
        const double v = qa.gt_number->value;
        CHECK(v == std::round(v * 100.0) / 100.0);
        const auto pos = qa.reference_answer.find(" is ");
        REQUIRE(pos != std::string::npos);
        const double parsed = std::stod(qa.reference_answer.substr(pos + 4));
        CHECK(parsed == v);  // bitwise round trip through the rendered text
    }
}

TEST_CASE("oracle decides left/right by center x and reports ties") {
    SpatialScene s = two_object_scene(Box2D{0, 0, 10, 10}, Box2D{100, 0, 110, 10});
    const OracleAnswer left =
        oracle_answer(s, question_only(s, yesno_question("cup", "mug", Direction::LeftOf)));
    REQUIRE(left.gt_bool.has_value());
    CHECK(*left.gt_bool);
    CHECK(left.text == "Yes, the cup is to the left of the mug.");

    const OracleAnswer right =
        oracle_answer(s, question_only(s, yesno_question("cup", "mug", Direction::RightOf)));
    REQUIRE(right.gt_bool.has_value());
    CHECK_FALSE(*right.gt_bool);
    CHECK(right.text == "No, the cup is not to the right of the mug.");

    SpatialScene tie = two_object_scene(Box2D{0, 0, 10, 10}, Box2D{0, 100, 10, 110});
    const OracleAnswer t =
        oracle_answer(tie, question_only(tie, yesno_question("cup", "mug", Direction::LeftOf)));
    REQUIRE(t.gt_bool.has_value());
    CHECK_FALSE(*t.gt_bool);
    CHECK(t.text == "Neither; they are horizontally aligned.");
}

TEST_CASE("oracle bbox echoes the exact box") {
    SpatialScene s = two_object_scene(Box2D{12, 34, 56, 78}, Box2D{100, 100, 120, 120});
    const OracleAnswer ans = oracle_answer(s, question_only(s, bbox_question("cup")));
    REQUIRE(ans.gt_box.has_value());
    CHECK(*ans.gt_box == Box2D{12, 34, 56, 78});
    CHECK(ans.text == "[12, 34, 56, 78]");
}

TEST_CASE("oracle free-form text states the relation") {
    SpatialScene s = two_object_scene(Box2D{0, 0, 10, 10}, Box2D{100, 0, 110, 10});
    const OracleAnswer ab = oracle_answer(s, question_only(s, freeform_question("cup", "mug")));
    CHECK(ab.text == "The cup is to the left of the mug.");
    const OracleAnswer ba = oracle_answer(s, question_only(s, freeform_question("mug", "cup")));
    CHECK(ba.text == "The mug is to the right of the cup.");
}

TEST_CASE("oracle rejects mismatched scene and unknown labels") {
    SpatialScene s = two_object_scene(Box2D{0, 0, 10, 10}, Box2D{100, 0, 110, 10});
    QAItem qa = question_only(s, distance_question("cup", "mug"));
    qa.scene_id = "other";
    CHECK_THROWS_AS(oracle_answer(s, qa), std::invalid_argument);
    const QAItem ghost = question_only(s, distance_question("cup", "ghost"));
    CHECK_THROWS_AS(oracle_answer(s, ghost), std::invalid_argument);
}

TEST_CASE("generated qa items match their own oracle") {
    const EnvConfig cfg;
    const Dataset ds = build_dataset(cfg, 200);
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        const OracleAnswer ans = oracle_answer(ds.scenes[i], ds.items[i], cfg.meters_per_pixel);
        CHECK(ans.text == ds.items[i].reference_answer);
        CHECK(ans.gt_number == ds.items[i].gt_number);
        CHECK(ans.gt_box == ds.items[i].gt_box);
        CHECK(ans.gt_bool == ds.items[i].gt_bool);
        CHECK_NOTHROW(validate_qa(ds.items[i]));
    }
}

TEST_CASE("environment configuration is validated") {
    EnvConfig c;
    CHECK_NOTHROW(validate_env_config(c));
    c.n_objects_range = {1, 3};
    CHECK_THROWS_AS(validate_env_config(c), std::invalid_argument);
    c = EnvConfig{};
    c.type_mix = {0.5, 0.5, 0.5, 0.5};
    CHECK_THROWS_AS(validate_env_config(c), std::invalid_argument);
    c = EnvConfig{};
    c.label_vocabulary = {"cup"};
    CHECK_THROWS_AS(validate_env_config(c), std::invalid_argument);
    c = EnvConfig{};
    c.meters_per_pixel = 0.0;
    CHECK_THROWS_AS(validate_env_config(c), std::invalid_argument);
}
