#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "svqa/mirror/mirror.hpp"
#include "svqa/mirror/rewrite_prompt.hpp"

using namespace svqa;
using namespace svqa::env;
using namespace svqa::mirror;

namespace {

const DirectionalLexicon kLex = DirectionalLexicon::standard();

bool same_qa(const QAItem& a, const QAItem& b) {
    return a.qa_id == b.qa_id && a.scene_id == b.scene_id && a.question == b.question &&
           a.reference_answer == b.reference_answer && a.answer_type == b.answer_type &&
           a.gt_number == b.gt_number && a.gt_box == b.gt_box && a.gt_bool == b.gt_bool &&
           a.view == b.view && a.paired_qa_id == b.paired_qa_id;
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

TEST_CASE("flip_box reflects about the vertical canvas axis") {
    const Box2D b{10, 20, 30, 40};
    const Box2D f = flip_box(b, 640.0);
    CHECK(f == Box2D{610, 20, 630, 40});
    CHECK(flip_box(f, 640.0) == b);
    CHECK(f.width() == b.width());
    CHECK(f.center_y() == b.center_y());
    CHECK(f.center_x() == 640.0 - b.center_x());
}

TEST_CASE("flip_scene is a bitwise involution") {
    const env::EnvConfig cfg;
    for (std::uint64_t i = 0; i < 50; ++i) {
        const SpatialScene s = generate_scene(cfg, i);
        const SpatialScene f = flip_scene(s);
        CHECK(f.scene_id == s.scene_id + "#flip");
        REQUIRE(f.objects.size() == s.objects.size());
        for (std::size_t k = 0; k < s.objects.size(); ++k) {
            CHECK(f.objects[k].box == flip_box(s.objects[k].box, s.canvas_width));
            REQUIRE(f.objects[k].position3d.has_value());
            CHECK(f.objects[k].position3d->x == -s.objects[k].position3d->x);
            CHECK(f.objects[k].position3d->y == s.objects[k].position3d->y);
        }
        CHECK(same_scene(flip_scene(f), s));
    }
}

TEST_CASE("directional swap renames terms at word boundaries only") {
    CHECK(swap_directional_terms("Is the cup to the left of the mug?", kLex) ==
          "Is the cup to the right of the mug?");
    CHECK(swap_directional_terms("the leftmost chair", kLex) == "the rightmost chair");
    CHECK(swap_directional_terms("right", kLex) == "left");
    // Substrings inside larger words stay put.
    CHECK(swap_directional_terms("lefty copyleft upright brighten", kLex) ==
          "lefty copyleft upright brighten");
    // Hyphens are boundaries.
    CHECK(swap_directional_terms("left-hand side", kLex) == "right-hand side");
}

TEST_CASE("directional swap preserves case patterns") {
    CHECK(swap_directional_terms("Left", kLex) == "Right");
    CHECK(swap_directional_terms("LEFT", kLex) == "RIGHT");
    CHECK(swap_directional_terms("To The Left Of", kLex) == "To The Right Of");
    CHECK(swap_directional_terms("TO THE LEFT OF", kLex) == "TO THE RIGHT OF");
}

TEST_CASE("directional swap leaves invariant relations untouched") {
    const std::string text =
        "The lamp is above the desk, behind the plant, in front of the wall, "
        "next to the mug, closer than the chair and farther than the door.";
    CHECK(swap_directional_terms(text, kLex) == text);
}

TEST_CASE("directional swap is an involution") {
    const std::vector<std::string> samples = {
        "Is the cup to the left of the mug?",
        "No, the cup is not to the right of the mug.",
        "the LEFTMOST Left-hand edge, right?",
        "left left right leftmost rightmost",
        "nothing directional here",
        "",
    };
    for (const auto& s : samples) {
        CHECK(swap_directional_terms(swap_directional_terms(s, kLex), kLex) == s);
    }
    const env::EnvConfig cfg;
    const env::Dataset ds = build_dataset(cfg, 100);
    for (const auto& qa : ds.items) {
        CHECK(swap_directional_terms(swap_directional_terms(qa.question, kLex), kLex) ==
              qa.question);
        CHECK(swap_directional_terms(swap_directional_terms(qa.reference_answer, kLex), kLex) ==
              qa.reference_answer);
    }
}

TEST_CASE("direction fingerprints count term families") {
    CHECK(direction_fingerprint("to the left of", kLex) == std::pair<int, int>{1, 0});
    CHECK(direction_fingerprint("to the right of", kLex) == std::pair<int, int>{0, 1});
    CHECK(direction_fingerprint("left of the rightmost one, on the left", kLex) ==
          std::pair<int, int>{2, 1});
    CHECK(direction_fingerprint("they are aligned", kLex) == std::pair<int, int>{0, 0});
    const std::string q = "Is the cup to the left of the mug?";
    const auto [l, r] = direction_fingerprint(q, kLex);
    CHECK(direction_fingerprint(swap_directional_terms(q, kLex), kLex) ==
          std::pair<int, int>{r, l});
}

TEST_CASE("rule-based rewrite toggles ids and view and is an involution") {
    const env::EnvConfig cfg;
    const env::Dataset ds = build_dataset(cfg, 120);
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        const QAItem& qa = ds.items[i];
        const double w = ds.scenes[i].canvas_width;
        const QAItem m = rewrite_qa_rule_based(qa, kLex, w);
        CHECK(m.qa_id == qa.qa_id + "#flip");
        CHECK(m.scene_id == qa.scene_id + "#flip");
        CHECK(m.view == View::Mirrored);
        REQUIRE(m.paired_qa_id.has_value());
        CHECK(*m.paired_qa_id == qa.qa_id);
        CHECK(m.gt_number == qa.gt_number);  // distances are flip-invariant
        if (qa.gt_box) {
            REQUIRE(m.gt_box.has_value());
            CHECK(*m.gt_box == flip_box(*qa.gt_box, w));
        }
        if (qa.gt_bool) CHECK(m.gt_bool == qa.gt_bool);

        QAItem back = rewrite_qa_rule_based(m, kLex, w);
        // The round trip restores everything except the pairing pointer,
        // which now records the chain it came from.
        CHECK(back.paired_qa_id == std::optional<std::string>(m.qa_id));
        back.paired_qa_id = qa.paired_qa_id;
        CHECK(same_qa(back, qa));
    }
}

TEST_CASE("rewrite of a box item without canvas width is rejected") {
    const env::EnvConfig cfg;
    const SpatialScene s = generate_scene(cfg, 3);
    Rng rng(7, {0x9A11, 3});
    const QAItem qa = generate_qa(s, AnswerType::Bbox, rng, cfg.meters_per_pixel);
    CHECK_THROWS_AS(rewrite_qa_rule_based(qa, kLex), std::invalid_argument);
    CHECK_NOTHROW(rewrite_qa_rule_based(qa, kLex, s.canvas_width));
}

namespace {

struct EchoClient final : RewriteClientBase {
    std::pair<std::string, std::string> rewrite(const std::string& question,
                                                const std::string& answer) override {
        return {question, answer};
    }
};

struct SwapClient final : RewriteClientBase {
    std::pair<std::string, std::string> rewrite(const std::string& question,
                                                const std::string& answer) override {
        return {swap_directional_terms(question, kLex), swap_directional_terms(answer, kLex)};
    }
};

}  // namespace

TEST_CASE("llm rewrite keeps geometry local and requires original view") {
    const env::EnvConfig cfg;
    const SpatialScene s = generate_scene(cfg, 5);
    Rng rng(11, {0x9A11, 5});
    const QAItem qa = generate_qa(s, AnswerType::Bbox, rng, cfg.meters_per_pixel);

    EchoClient echo;
    const QAItem m = rewrite_qa_llm(qa, echo, s.canvas_width);
    REQUIRE(m.gt_box.has_value());
    CHECK(*m.gt_box == flip_box(*qa.gt_box, s.canvas_width));  // not the client's call
    CHECK(m.question == qa.question);                          // client text taken verbatim

    CHECK_THROWS_AS(rewrite_qa_llm(m, echo, s.canvas_width), std::invalid_argument);
}

TEST_CASE("verification passes on faithful rewrites across the corpus") {
    const env::EnvConfig cfg;
    const env::Dataset ds = build_dataset(cfg, 200);
    SwapClient client;
    int passes = 0;
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        const QAItem m = rewrite_qa_llm(ds.items[i], client, ds.scenes[i].canvas_width);
        const VerificationReport rep =
            verify_consistency(ds.items[i], m, ds.scenes[i], cfg.meters_per_pixel);
        if (!rep.pass) {
            INFO(rep.qa_id << ": " << rep.note << " (expected \"" << rep.expected_answer
                           << "\", actual \"" << rep.actual_answer << "\")");
        }
        CHECK(rep.pass);
        passes += rep.pass;
    }
    CHECK(passes == static_cast<int>(ds.items.size()));
}

TEST_CASE("verification flags unswapped directional answers") {
    const env::EnvConfig cfg;
    // Hunt for a yes/no item whose pair is not horizontally aligned.
    for (std::uint64_t i = 0;; ++i) {
        REQUIRE(i < 50);
        const SpatialScene s = generate_scene(cfg, i);
        Rng rng(0, {0x9A11, i});
        const QAItem qa = generate_qa(s, AnswerType::YesNo, rng, cfg.meters_per_pixel);
        if (qa.reference_answer.rfind("Neither", 0) == 0) continue;
        QAItem m = rewrite_qa_rule_based(qa, kLex, s.canvas_width);
        m.reference_answer = qa.reference_answer;  // forgot to mirror the text
        const VerificationReport rep = verify_consistency(qa, m, s, cfg.meters_per_pixel);
        CHECK_FALSE(rep.pass);
        CHECK_FALSE(rep.note.empty());
        break;
    }
}

TEST_CASE("verification flags corrupted structured ground truth") {
    const env::EnvConfig cfg;
    const SpatialScene s = generate_scene(cfg, 9);

    Rng rng_box(1, {0x9A11, 9});
    const QAItem box = generate_qa(s, AnswerType::Bbox, rng_box, cfg.meters_per_pixel);
    QAItem bad_box = rewrite_qa_rule_based(box, kLex, s.canvas_width);
    bad_box.gt_box->x1 += 1.0;
    bad_box.gt_box->x2 += 1.0;
    CHECK_FALSE(verify_consistency(box, bad_box, s, cfg.meters_per_pixel).pass);

    Rng rng_dist(2, {0x9A11, 9});
    const QAItem dist = generate_qa(s, AnswerType::Distance, rng_dist, cfg.meters_per_pixel);
    QAItem bad_dist = rewrite_qa_rule_based(dist, kLex, s.canvas_width);
    bad_dist.gt_number->value += 0.01;
    CHECK_FALSE(verify_consistency(dist, bad_dist, s, cfg.meters_per_pixel).pass);

    Rng rng_yn(3, {0x9A11, 9});
    const QAItem yn = generate_qa(s, AnswerType::YesNo, rng_yn, cfg.meters_per_pixel);
    QAItem bad_yn = rewrite_qa_rule_based(yn, kLex, s.canvas_width);
    bad_yn.gt_bool = !*bad_yn.gt_bool;
    CHECK_FALSE(verify_consistency(yn, bad_yn, s, cfg.meters_per_pixel).pass);
}

TEST_CASE("verification accepts paraphrased free-form answers") {
    SpatialScene s;
    s.scene_id = "hand";
    s.canvas_width = 640;
    s.canvas_height = 480;
    s.objects.push_back({"o1", "cup", Box2D{0, 0, 10, 10}, std::nullopt});
    s.objects.push_back({"o2", "mug", Box2D{100, 0, 110, 10}, std::nullopt});

    QAItem qa;
    qa.qa_id = "hand#qa";
    qa.scene_id = "hand";
    qa.question = env::freeform_question("cup", "mug");
    qa.reference_answer = "The cup is to the left of the mug.";
    qa.answer_type = AnswerType::FreeForm;
    qa.view = View::Original;

    QAItem m = rewrite_qa_rule_based(qa, kLex, s.canvas_width);
    m.reference_answer = "You will find the CUP slightly to the right of the mug here.";
    CHECK(verify_consistency(qa, m, s).pass);

    m.reference_answer = "The cup sits left of the mug.";
    const VerificationReport rep = verify_consistency(qa, m, s);
    CHECK_FALSE(rep.pass);
    CHECK(rep.note == "directional terms in the answer contradict the flipped scene");
}

TEST_CASE("verification refuses unpaired or mismatched items") {
    const env::EnvConfig cfg;
    const SpatialScene s = generate_scene(cfg, 2);
    Rng rng(4, {0x9A11, 2});
    const QAItem qa = generate_qa(s, AnswerType::YesNo, rng, cfg.meters_per_pixel);
    QAItem m = rewrite_qa_rule_based(qa, kLex, s.canvas_width);

    QAItem stranger = m;
    stranger.paired_qa_id = "someone-else";
    CHECK_THROWS_AS(verify_consistency(qa, stranger, s, cfg.meters_per_pixel),
                    std::invalid_argument);

    QAItem retyped = m;
    retyped.answer_type = AnswerType::FreeForm;
    retyped.gt_bool.reset();
    CHECK_THROWS_AS(verify_consistency(qa, retyped, s, cfg.meters_per_pixel),
                    std::invalid_argument);
}

TEST_CASE("flipped-scene oracle agrees with mirror expectations") {
    const env::EnvConfig cfg;
    for (std::uint64_t i = 0; i < 60; ++i) {
        const SpatialScene s = generate_scene(cfg, i);
        const SpatialScene f = flip_scene(s);
        Rng rng(5, {0x9A11, i});
        const QAItem d = generate_qa(s, AnswerType::Distance, rng, cfg.meters_per_pixel);
        QAItem probe = d;
        probe.scene_id = f.scene_id;
        const env::OracleAnswer flipped = env::oracle_answer(f, probe, cfg.meters_per_pixel);
        REQUIRE(flipped.gt_number.has_value());
        // x -> -x leaves squared displacements identical bit for bit.
        CHECK(flipped.gt_number->value == d.gt_number->value);
        CHECK(flipped.text == d.reference_answer);
    }
}

TEST_CASE("rewrite prompt embeds the question and answer verbatim") {
    const std::string p = render_rewrite_prompt("QQ?", "AA.");
    CHECK(p.find("QQ?") != std::string::npos);
    CHECK(p.find("AA.") != std::string::npos);
    CHECK(p.find("{question}") == std::string::npos);
    CHECK(p.find("{answer}") == std::string::npos);
    CHECK(kRewritePromptVersion == 1);
}
