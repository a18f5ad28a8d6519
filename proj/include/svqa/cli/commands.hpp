#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "svqa/core/json_io.hpp"
#include "svqa/core/rng.hpp"
#include "svqa/core/types.hpp"
#include "svqa/grpo/grpo.hpp"
#include "svqa/metrics/metrics.hpp"
#include "svqa/mirror/mirror.hpp"
#include "svqa/services/services.hpp"
#include "svqa/synthenv/synthenv.hpp"

namespace svqa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitService = 3;
inline constexpr int kExitDivergence = 4;

class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    env::EnvConfig env;
    TrainConfig train;
    services::ServiceConfig embed_service;
    services::ServiceConfig judge_service;
    services::ServiceConfig rewrite_service;
    bool use_mocks = true;
    std::string policy = "tabular";
    std::string data_dir = "data";
    std::string out_dir = "out";
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    nlohmann::json e;
    e["n_objects_min"] = c.env.n_objects_range.first;
    e["n_objects_max"] = c.env.n_objects_range.second;
    e["label_vocabulary"] = c.env.label_vocabulary;
    e["canvas_width"] = c.env.canvas.first;
    e["canvas_height"] = c.env.canvas.second;
    e["meters_per_pixel"] = c.env.meters_per_pixel;
    e["type_mix"] = c.env.type_mix;
    e["seed"] = c.env.seed;
    j["env"] = e;

    nlohmann::json t;
    t["lambda1"] = c.train.lambda1;
    t["lambda2"] = c.train.lambda2;
    t["delta"] = c.train.delta;
    t["eta"] = c.train.eta;
    t["beta"] = c.train.beta;
    t["epsilon_clip"] = c.train.epsilon_clip;
    t["group_size"] = c.train.group_size;
    t["learning_rate"] = c.train.learning_rate;
    t["max_tokens"] = c.train.max_tokens;
    t["seed"] = c.train.seed;
    t["advantage_std_floor"] = c.train.advantage_std_floor;
    t["refresh_interval"] = c.train.refresh_interval;
    t["batch_size"] = c.train.batch_size;
    j["train"] = t;

    auto svc = [](const services::ServiceConfig& s) {
        nlohmann::json v;
        v["base_url"] = s.base_url;
        v["timeout_ms"] = s.timeout_ms;
        v["max_retries"] = s.max_retries;
        v["backoff_ms"] = s.backoff_ms;
        return v;
    };
    nlohmann::json s;
    s["mock"] = c.use_mocks;
    s["embed"] = svc(c.embed_service);
    s["judge"] = svc(c.judge_service);
    s["rewrite"] = svc(c.rewrite_service);
    j["services"] = s;

    nlohmann::json p;
    p["data_dir"] = c.data_dir;
    p["out_dir"] = c.out_dir;
    j["paths"] = p;
    j["policy"] = c.policy;
    return j;
}

// Partial override: absent keys keep the base value, so a config file only
// needs the fields it changes.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {}) {
    RunConfig c = std::move(base);
    if (j.contains("env")) {
        const auto& e = j.at("env");
        if (e.contains("n_objects_min")) c.env.n_objects_range.first = e.at("n_objects_min");
        if (e.contains("n_objects_max")) c.env.n_objects_range.second = e.at("n_objects_max");
        if (e.contains("label_vocabulary"))
            c.env.label_vocabulary = e.at("label_vocabulary").get<std::vector<std::string>>();
        if (e.contains("canvas_width")) c.env.canvas.first = e.at("canvas_width");
        if (e.contains("canvas_height")) c.env.canvas.second = e.at("canvas_height");
        if (e.contains("meters_per_pixel")) c.env.meters_per_pixel = e.at("meters_per_pixel");
        if (e.contains("type_mix")) c.env.type_mix = e.at("type_mix").get<std::array<double, 4>>();
        if (e.contains("seed")) c.env.seed = e.at("seed");
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (t.contains("lambda1")) c.train.lambda1 = t.at("lambda1");
        if (t.contains("lambda2")) c.train.lambda2 = t.at("lambda2");
        if (t.contains("delta")) c.train.delta = t.at("delta");
        if (t.contains("eta")) c.train.eta = t.at("eta");
        if (t.contains("beta")) c.train.beta = t.at("beta");
        if (t.contains("epsilon_clip")) c.train.epsilon_clip = t.at("epsilon_clip");
        if (t.contains("group_size")) c.train.group_size = t.at("group_size");
        if (t.contains("learning_rate")) c.train.learning_rate = t.at("learning_rate");
        if (t.contains("max_tokens")) c.train.max_tokens = t.at("max_tokens");
        if (t.contains("seed")) c.train.seed = t.at("seed");
        if (t.contains("advantage_std_floor"))
            c.train.advantage_std_floor = t.at("advantage_std_floor");
        if (t.contains("refresh_interval")) c.train.refresh_interval = t.at("refresh_interval");
        if (t.contains("batch_size")) c.train.batch_size = t.at("batch_size");
    }
    if (j.contains("services")) {
        const auto& s = j.at("services");
        if (s.contains("mock")) c.use_mocks = s.at("mock");
        auto svc = [&s](const char* key, services::ServiceConfig& into) {
            if (!s.contains(key)) return;
            const auto& v = s.at(key);
            if (v.contains("base_url")) into.base_url = v.at("base_url");
            if (v.contains("timeout_ms")) into.timeout_ms = v.at("timeout_ms");
            if (v.contains("max_retries")) into.max_retries = v.at("max_retries");
            if (v.contains("backoff_ms")) into.backoff_ms = v.at("backoff_ms");
        };
        svc("embed", c.embed_service);
        svc("judge", c.judge_service);
        svc("rewrite", c.rewrite_service);
    }
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        if (p.contains("data_dir")) c.data_dir = p.at("data_dir");
        if (p.contains("out_dir")) c.out_dir = p.at("out_dir");
    }
    if (j.contains("policy")) c.policy = j.at("policy");
    return c;
}

// Hash of the canonical (alphabetically keyed) config dump; stamped into
// every artifact for provenance.
inline std::uint64_t config_hash(const RunConfig& c) { return fnv1a64(to_json(c).dump()); }

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config file " + path + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
    if (!out) throw DataError("write failed for " + path.string());
}

// Wall-clock lands only here; primary outputs stay byte-comparable.
inline void append_run_sidecar(const std::filesystem::path& out_dir, const std::string& command,
                               std::uint64_t hash) {
    std::ofstream out(out_dir / "runs.log", std::ios::app);
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    out << ms << " " << command << " config=" << hash_hex(hash) << "\n";
}

inline std::vector<QAItem> read_qa_or_die(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("missing input " + path.string());
    try {
        return read_qa_jsonl(path.string());
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

inline std::vector<SpatialScene> read_scenes_or_die(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("missing input " + path.string());
    try {
        return read_scenes_jsonl(path.string());
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

}  // namespace detail

inline int cmd_gen_data(const RunConfig& config, int count) {
    if (count < 0) throw DataError("count must be nonnegative");
    const std::filesystem::path dir(config.data_dir);
    std::filesystem::create_directories(dir);
    const env::Dataset ds = env::build_dataset(config.env, count);
    write_scenes_jsonl((dir / "scenes.jsonl").string(), ds.scenes);
    write_qa_jsonl((dir / "qa.jsonl").string(), ds.items);

    const std::uint64_t hash = config_hash(config);
    nlohmann::json meta;
    meta["config_hash"] = detail::hash_hex(hash);
    meta["count"] = count;
    meta["scenes_file"] = "scenes.jsonl";
    meta["qa_file"] = "qa.jsonl";
    detail::write_text_file(dir / "gen_meta.json", meta.dump(2) + "\n");
    detail::append_run_sidecar(dir, "gen-data", hash);
    return kExitOk;
}

// Produces the mirrored dataset plus a verification report; any failed
// verification is a data error.
inline int cmd_flip(const RunConfig& config) {
    const std::filesystem::path dir(config.data_dir);
    const std::vector<QAItem> items = detail::read_qa_or_die(dir / "qa.jsonl");
    const std::vector<SpatialScene> scenes = detail::read_scenes_or_die(dir / "scenes.jsonl");
    std::unordered_map<std::string, const SpatialScene*> by_id;
    for (const auto& s : scenes) by_id[s.scene_id] = &s;

    const auto lexicon = mirror::DirectionalLexicon::standard();
    std::unique_ptr<mirror::RewriteClientBase> client;
    services::ResponseArchive archive((std::filesystem::path(config.out_dir) /
                                       "rewrite_responses.jsonl")
                                          .string());
    if (config.use_mocks) {
        client = std::make_unique<services::MockRewriter>(lexicon);
    } else {
        std::filesystem::create_directories(config.out_dir);
        client = std::make_unique<services::RewriteHttpClient>(config.rewrite_service, &archive);
    }

    std::vector<QAItem> flipped;
    flipped.reserve(items.size());
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& item : items) {
        const auto sit = by_id.find(item.scene_id);
        if (sit == by_id.end())
            throw DataError("qa item " + item.qa_id + " references unknown scene " + item.scene_id);
        const double canvas_w = sit->second->canvas_width;
        const QAItem mirrored = mirror::rewrite_qa_llm(item, *client, canvas_w);
        const mirror::VerificationReport vr = mirror::verify_consistency(
            item, mirrored, *sit->second, config.env.meters_per_pixel, lexicon);
        if (!vr.pass) {
            nlohmann::json f;
            f["qa_id"] = vr.qa_id;
            f["note"] = vr.note;
            f["expected_answer"] = vr.expected_answer;
            f["actual_answer"] = vr.actual_answer;
            failures.push_back(f);
        }
        flipped.push_back(mirrored);
    }
    write_qa_jsonl((dir / "qa_flipped.jsonl").string(), flipped);

    const std::uint64_t hash = config_hash(config);
    nlohmann::json report;
    report["config_hash"] = detail::hash_hex(hash);
    report["total"] = items.size();
    report["passed"] = items.size() - failures.size();
    report["failed"] = failures.size();
    report["failures"] = failures;
    detail::write_text_file(dir / "verification_report.json", report.dump(2) + "\n");
    detail::append_run_sidecar(dir, "flip", hash);
    if (!failures.empty()) return kExitData;
    return kExitOk;
}

struct TrainOutcome {
    int exit_code = kExitOk;
    double acc_original = 0.0;
    double acc_flipped = 0.0;
    int steps_completed = 0;
};

inline TrainOutcome cmd_train(const RunConfig& config, int steps,
                              const std::string& resume_from = "") {
    const std::filesystem::path dir(config.data_dir);
    const std::filesystem::path out(config.out_dir);
    std::filesystem::create_directories(out);
    const std::vector<QAItem> originals = detail::read_qa_or_die(dir / "qa.jsonl");
    const std::vector<QAItem> mirrored = detail::read_qa_or_die(dir / "qa_flipped.jsonl");
    const std::vector<SpatialScene> scenes = detail::read_scenes_or_die(dir / "scenes.jsonl");

    std::vector<grpo::PairedQuery> pairs;
    try {
        pairs = grpo::build_paired_queries(scenes, originals, mirrored);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    if (pairs.empty()) throw DataError("no paired queries to train on");

    const std::uint64_t hash = config_hash(config);
    grpo::Trainer trainer = resume_from.empty()
                                ? grpo::Trainer::create(config.policy, config.train, hash)
                                : grpo::load_checkpoint(resume_from, config.train);
    if (!resume_from.empty() && trainer.config_hash != hash)
        throw DataError("checkpoint was produced under a different config");

    std::unique_ptr<rewards::SimilarityProvider> provider;
    if (config.use_mocks)
        provider = std::make_unique<services::MockEmbeddingProvider>();
    else
        provider = std::make_unique<services::EmbeddingHttpClient>(config.embed_service);
    rewards::CachingProvider cached(*provider);

    const std::string log_name = resume_from.empty() ? "train_log.jsonl" : "train_log_resumed.jsonl";
    std::ofstream log(out / log_name, std::ios::binary | std::ios::trunc);
    if (!log) throw DataError("cannot write training log");

    TrainOutcome outcome;
    const std::string checkpoint_name = "checkpoint.bin";
    for (int s = 0; s < steps; ++s) {
        grpo::StepReport rep = trainer.run_step(pairs, cached);
        if (trainer.step % 50 == 0 || s + 1 == steps) rep.checkpoint_ref = checkpoint_name;
        nlohmann::json j = grpo::to_json(rep);
        j["config_hash"] = detail::hash_hex(hash);
        log << j.dump() << "\n";
        ++outcome.steps_completed;
    }
    log.close();
    grpo::save_checkpoint((out / checkpoint_name).string(), trainer);

    std::vector<grpo::Query> oq, fq;
    for (const auto& p : pairs) {
        oq.push_back(p.original);
        fq.push_back(p.mirrored);
    }
    outcome.acc_original = grpo::greedy_accuracy(*trainer.theta, oq);
    outcome.acc_flipped = grpo::greedy_accuracy(*trainer.theta, fq);

    nlohmann::json meta;
    meta["config_hash"] = detail::hash_hex(hash);
    meta["steps"] = trainer.step;
    meta["policy"] = config.policy;
    meta["acc_original"] = outcome.acc_original;
    meta["acc_flipped"] = outcome.acc_flipped;
    meta["checkpoint"] = checkpoint_name;
    detail::write_text_file(out / "train_meta.json", meta.dump(2) + "\n");
    detail::append_run_sidecar(out, "train", hash);
    return outcome;
}

struct PredLine {
    std::string qa_id;
    std::string output;
};

inline std::vector<PredLine> read_predictions(const std::string& path) {
    if (!std::filesystem::exists(path)) throw DataError("missing predictions file " + path);
    std::vector<PredLine> out;
    try {
        out = read_jsonl<PredLine>(path, [](const nlohmann::json& j) {
            PredLine p;
            p.qa_id = j.at("qa_id").get<std::string>();
            p.output = j.at("output").get<std::string>();
            return p;
        });
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    return out;
}

inline int cmd_eval(const RunConfig& config, const std::string& preds_path,
                    const std::string& qa_path_override = "",
                    const std::string& rules_path = "") {
    const std::filesystem::path dir(config.data_dir);
    const std::filesystem::path out(config.out_dir);
    std::filesystem::create_directories(out);
    const std::string qa_path =
        qa_path_override.empty() ? (dir / "qa.jsonl").string() : qa_path_override;
    const std::vector<QAItem> gts = detail::read_qa_or_die(qa_path);
    const std::vector<PredLine> preds = read_predictions(preds_path);

    metrics::KeywordRuleSet rules = metrics::KeywordRuleSet::standard();
    if (!rules_path.empty()) {
        std::ifstream in(rules_path);
        if (!in) throw DataError("cannot open rules file " + rules_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError("rules file is not valid JSON: " + std::string(e.what()));
        }
        rules = metrics::rule_set_from_json(j);
    }

    std::vector<metrics::PredictionRecord> records;
    records.reserve(preds.size());
    for (const auto& p : preds)
        records.push_back(metrics::make_prediction_record(p.qa_id, p.output, rules));

    std::unique_ptr<rewards::SimilarityProvider> provider;
    if (config.use_mocks)
        provider = std::make_unique<services::MockEmbeddingProvider>();
    else
        provider = std::make_unique<services::EmbeddingHttpClient>(config.embed_service);
    rewards::CachingProvider cached(*provider);

    metrics::JudgeFn judge_fn;
    std::unique_ptr<services::JudgeHttpClient> judge_client;
    if (config.use_mocks) {
        judge_fn = [judge = services::MockJudge(rules)](
                       const std::string& pred, const std::string& gt) -> std::optional<int> {
            return judge.judge(pred, gt);
        };
    } else {
        judge_client = std::make_unique<services::JudgeHttpClient>(config.judge_service);
        judge_fn = [&jc = *judge_client](const std::string& pred,
                                         const std::string& gt) -> std::optional<int> {
            try {
                return jc.judge(pred, gt);
            } catch (const services::ServiceUnavailable&) {
                return std::nullopt;
            }
        };
    }

    const metrics::Report report = metrics::build_report(records, gts, rules, &cached, judge_fn);
    const std::uint64_t hash = config_hash(config);
    nlohmann::json j = metrics::to_json(report);
    j["config_hash"] = detail::hash_hex(hash);
    detail::write_text_file(out / "report.json", j.dump(2) + "\n");
    detail::write_text_file(out / "report.csv", metrics::report_to_csv(report));
    detail::write_text_file(out / "report.md", metrics::report_to_markdown(report));
    detail::append_run_sidecar(out, "eval", hash);
    return kExitOk;
}

// Trains and evaluates per (eta, seed) cell in memory; per-cell failures are
// recorded and the sweep continues.
struct AblationCell {
    double eta = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double acc_original = 0.0;
    double acc_flipped = 0.0;
    double gap = 0.0;
};

struct AblationRow {
    double eta = 0.0;
    double mean_accuracy = 0.0;
    double median_gap = 0.0;
    std::vector<AblationCell> cells;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<AblationRow> run_eta_sweep(const RunConfig& config,
                                              const std::vector<grpo::PairedQuery>& pairs,
                                              const std::vector<double>& eta_list,
                                              const std::vector<std::uint64_t>& seeds, int steps,
                                              rewards::SimilarityProvider& provider) {
    std::vector<grpo::Query> oq, fq;
    for (const auto& p : pairs) {
        oq.push_back(p.original);
        fq.push_back(p.mirrored);
    }
    std::vector<AblationRow> rows;
    for (double eta : eta_list) {
        AblationRow row;
        row.eta = eta;
        std::vector<double> gaps;
        std::vector<double> accs;
        for (std::uint64_t seed : seeds) {
            AblationCell cell;
            cell.eta = eta;
            cell.seed = seed;
            RunConfig cc = config;
            cc.train.eta = eta;
            cc.train.seed = seed;
            try {
                grpo::Trainer trainer =
                    grpo::Trainer::create(cc.policy, cc.train, config_hash(cc));
                for (int s = 0; s < steps; ++s) trainer.run_step(pairs, provider);
                cell.acc_original = grpo::greedy_accuracy(*trainer.theta, oq);
                cell.acc_flipped = grpo::greedy_accuracy(*trainer.theta, fq);
                cell.gap = std::abs(cell.acc_original - cell.acc_flipped);
                cell.ok = true;
                gaps.push_back(cell.gap);
                accs.push_back(0.5 * (cell.acc_original + cell.acc_flipped));
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            row.cells.push_back(cell);
        }
        row.median_gap = median_of(gaps);
        row.mean_accuracy =
            accs.empty() ? 0.0
                         : std::accumulate(accs.begin(), accs.end(), 0.0) /
                               static_cast<double>(accs.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

inline int cmd_ablate_eta(const RunConfig& config, const std::vector<double>& eta_list,
                          const std::vector<std::uint64_t>& seeds, int steps) {
    if (eta_list.empty() || seeds.empty()) throw DataError("eta list and seeds must be nonempty");
    const std::filesystem::path dir(config.data_dir);
    const std::filesystem::path out(config.out_dir);
    std::filesystem::create_directories(out);
    const std::vector<QAItem> originals = detail::read_qa_or_die(dir / "qa.jsonl");
    const std::vector<QAItem> mirrored = detail::read_qa_or_die(dir / "qa_flipped.jsonl");
    const std::vector<SpatialScene> scenes = detail::read_scenes_or_die(dir / "scenes.jsonl");
    std::vector<grpo::PairedQuery> pairs;
    try {
        pairs = grpo::build_paired_queries(scenes, originals, mirrored);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    if (pairs.empty()) throw DataError("no paired queries to train on");

    std::unique_ptr<rewards::SimilarityProvider> provider;
    if (config.use_mocks)
        provider = std::make_unique<services::MockEmbeddingProvider>();
    else
        provider = std::make_unique<services::EmbeddingHttpClient>(config.embed_service);
    rewards::CachingProvider cached(*provider);

    const std::vector<AblationRow> rows =
        run_eta_sweep(config, pairs, eta_list, seeds, steps, cached);

    const std::uint64_t hash = config_hash(config);
    nlohmann::json j;
    j["config_hash"] = detail::hash_hex(hash);
    j["steps"] = steps;
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json r;
        r["eta"] = row.eta;
        r["mean_accuracy"] = row.mean_accuracy;
        r["median_gap"] = row.median_gap;
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& cell : row.cells) {
            nlohmann::json cj;
            cj["seed"] = cell.seed;
            cj["ok"] = cell.ok;
            if (!cell.ok) cj["error"] = cell.error;
            cj["acc_original"] = cell.acc_original;
            cj["acc_flipped"] = cell.acc_flipped;
            cj["gap"] = cell.gap;
            cells.push_back(cj);
        }
        r["cells"] = cells;
        jrows.push_back(r);
    }
    j["rows"] = jrows;
    detail::write_text_file(out / "ablation.json", j.dump(2) + "\n");

    std::ostringstream md;
    md << "# Eta Sweep\n\n";
    md << "| eta | Mean Accuracy | Median |acc_o - acc_f| | Seeds |\n|---|---|---|---|\n";
    for (const auto& row : rows) {
        std::size_t ok = 0;
        for (const auto& c : row.cells)
            if (c.ok) ++ok;
        md << "| " << row.eta << " | " << metrics::detail::fmt2(row.mean_accuracy) << " | "
           << metrics::detail::fmt2(row.median_gap) << " | " << ok << "/" << row.cells.size()
           << " |\n";
    }
    detail::write_text_file(out / "ablation.md", md.str());
    detail::append_run_sidecar(out, "ablate-eta", hash);
    return kExitOk;
}

// Re-renders report.md (and echoes it) from a previously written report.json.
inline int cmd_report(const RunConfig& config, std::ostream& echo) {
    const std::filesystem::path out(config.out_dir);
    const auto path = out / "report.json";
    if (!std::filesystem::exists(path)) throw DataError("missing " + path.string());
    std::ifstream in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("report.json is not valid JSON: " + std::string(e.what()));
    }

    metrics::Report r;
    r.total_records = j.value("total_records", 0);
    r.matched_records = j.value("matched_records", 0);
    if (j.contains("unknown_qa_ids"))
        r.unknown_qa_ids = j.at("unknown_qa_ids").get<std::vector<std::string>>();
    if (j.contains("distance")) {
        const auto& d = j.at("distance");
        metrics::NumericBlock b;
        b.count = d.value("count", 0);
        b.success = d.value("success_pct", 0.0);
        b.samples_completed = d.value("samples_completed_pct", 0.0);
        if (d.contains("smape_pct") && !d.at("smape_pct").is_null())
            b.smape = d.at("smape_pct").get<double>();
        b.buckets.pct_50_100 = d.value("in_range_50_100_pct", 0.0);
        b.buckets.pct_100_150 = d.value("in_range_100_150_pct", 0.0);
        b.buckets.pct_150_200 = d.value("in_range_150_200_pct", 0.0);
        b.accuracy_50_200 = d.value("accuracy_50_200_pct", 0.0);
        r.distance = b;
    }
    if (j.contains("yesno")) {
        const auto& y = j.at("yesno");
        metrics::YesNoBlock b;
        b.count = y.value("count", 0);
        b.metrics.accuracy = y.value("accuracy_pct", 0.0);
        b.metrics.judged = y.value("judged", 0);
        b.metrics.unjudged = y.value("unjudged", 0);
        r.yesno = b;
    }
    if (j.contains("bbox")) {
        const auto& b0 = j.at("bbox");
        metrics::BboxBlock b;
        b.count = b0.value("count", 0);
        b.metrics.miou = b0.value("miou_pct", 0.0);
        b.metrics.acc_075 = b0.value("acc_at_075_pct", 0.0);
        r.bbox = b;
    }
    if (j.contains("freeform")) {
        const auto& f = j.at("freeform");
        metrics::FreeFormBlock b;
        b.count = f.value("count", 0);
        b.bleu1 = f.value("bleu1", 0.0);
        b.bleu2 = f.value("bleu2", 0.0);
        if (f.contains("similarity_pct") && !f.at("similarity_pct").is_null())
            b.similarity_pct = f.at("similarity_pct").get<double>();
        r.freeform = b;
    }
    if (j.contains("cot")) {
        const auto& c = j.at("cot");
        r.cot.mean_count = c.value("mean_count", 0.0);
        if (c.contains("histogram"))
            for (const auto& [k, v] : c.at("histogram").items())
                r.cot.histogram[std::stoi(k)] = v.get<int>();
    }

    const std::string md = metrics::report_to_markdown(r);
    detail::write_text_file(out / "report.md", md);
    echo << md;
    return kExitOk;
}

}  // namespace svqa::cli
