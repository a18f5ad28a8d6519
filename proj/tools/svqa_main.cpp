#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "svqa/cli/commands.hpp"

namespace {

struct Overrides {
    std::optional<std::string> data_dir;
    std::optional<std::string> out_dir;
    std::optional<std::string> policy;
    std::optional<double> eta;
    std::optional<double> beta;
    std::optional<double> learning_rate;
    std::optional<double> delta;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> embed_url;
    std::optional<std::string> judge_url;
    std::optional<std::string> rewrite_url;
    int mock = 0;     // count of --mock
    int no_mock = 0;  // count of --no-mock
};

// Flags win over the config file.
svqa::cli::RunConfig resolve_config(const std::string& config_path, const Overrides& ov) {
    svqa::cli::RunConfig c;
    if (!config_path.empty()) c = svqa::cli::load_run_config(config_path);
    if (ov.data_dir) c.data_dir = *ov.data_dir;
    if (ov.out_dir) c.out_dir = *ov.out_dir;
    if (ov.policy) c.policy = *ov.policy;
    if (ov.eta) c.train.eta = *ov.eta;
    if (ov.beta) c.train.beta = *ov.beta;
    if (ov.learning_rate) c.train.learning_rate = *ov.learning_rate;
    if (ov.delta) c.train.delta = *ov.delta;
    if (ov.seed) {
        c.train.seed = *ov.seed;
        c.env.seed = *ov.seed;
    }
    if (ov.embed_url) c.embed_service.base_url = *ov.embed_url;
    if (ov.judge_url) c.judge_service.base_url = *ov.judge_url;
    if (ov.rewrite_url) c.rewrite_service.base_url = *ov.rewrite_url;
    if (ov.mock > 0) c.use_mocks = true;
    if (ov.no_mock > 0) c.use_mocks = false;
    svqa::validate_train_config(c.train);
    svqa::env::validate_env_config(c.env);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mirror-consistent spatial QA laboratory"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    Overrides ov;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--data-dir", ov.data_dir, "dataset directory");
    app.add_option("--out-dir", ov.out_dir, "artifact directory");
    app.add_option("--policy", ov.policy, "policy kind: tabular or linear-feature");
    app.add_option("--seed", ov.seed, "seed for generation and training");
    app.add_option("--eta", ov.eta, "consistency-correction weight");
    app.add_option("--beta", ov.beta, "KL penalty weight");
    app.add_option("--lr", ov.learning_rate, "learning rate");
    app.add_option("--delta", ov.delta, "consistency-correction threshold");
    app.add_option("--embed-url", ov.embed_url, "embedding service base URL");
    app.add_option("--judge-url", ov.judge_url, "judge service base URL");
    app.add_option("--rewrite-url", ov.rewrite_url, "rewrite service base URL");
    app.add_flag("--mock", ov.mock, "use offline mocks (default)");
    app.add_flag("--no-mock", ov.no_mock, "use remote services");

    auto* gen = app.add_subcommand("gen-data", "generate scenes.jsonl and qa.jsonl");
    int count = 200;
    gen->add_option("--count", count, "number of QA items");

    app.add_subcommand("flip", "mirror the dataset and verify consistency");

    auto* train = app.add_subcommand("train", "run the paired-view optimizer");
    int steps = 100;
    std::string resume;
    train->add_option("--steps", steps, "training steps");
    train->add_option("--resume", resume, "checkpoint to resume from")->check(CLI::ExistingFile);

    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    std::string preds_path, qa_path, scenes_path, rules_path;
    eval->add_option("--preds", preds_path, "JSONL of {qa_id, output}")->required();
    eval->add_option("--data", qa_path, "ground-truth QA JSONL (default data-dir/qa.jsonl)");
    eval->add_option("--scenes", scenes_path, "scene JSONL for reference validation");
    eval->add_option("--rules", rules_path, "keyword-list override JSON");

    auto* ablate = app.add_subcommand("ablate-eta", "train+eval per (eta, seed)");
    std::vector<double> eta_list{0.0, 1.0, 2.0, 10.0};
    std::vector<std::uint64_t> seed_list{0, 1, 2, 3, 4};
    int ablate_steps = 60;
    ablate->add_option("--etas", eta_list, "eta values");
    ablate->add_option("--seeds", seed_list, "seeds per eta");
    ablate->add_option("--steps", ablate_steps, "steps per cell");

    app.add_subcommand("report", "re-render report.md from report.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? svqa::cli::kExitOk : svqa::cli::kExitUsage;
    }

    try {
        const svqa::cli::RunConfig config = resolve_config(config_path, ov);
        if (app.got_subcommand("gen-data")) return svqa::cli::cmd_gen_data(config, count);
        if (app.got_subcommand("flip")) return svqa::cli::cmd_flip(config);
        if (app.got_subcommand("train")) {
            const auto outcome = svqa::cli::cmd_train(config, steps, resume);
            std::cout << "steps=" << outcome.steps_completed
                      << " acc_original=" << outcome.acc_original
                      << " acc_flipped=" << outcome.acc_flipped << "\n";
            return outcome.exit_code;
        }
        if (app.got_subcommand("eval")) {
            if (!scenes_path.empty()) {
                const auto scenes = svqa::cli::detail::read_scenes_or_die(scenes_path);
                std::unordered_set<std::string> ids;
                for (const auto& s : scenes) ids.insert(s.scene_id);
                const auto qa_file = qa_path.empty()
                                         ? (std::filesystem::path(config.data_dir) / "qa.jsonl")
                                               .string()
                                         : qa_path;
                for (const auto& item : svqa::cli::detail::read_qa_or_die(qa_file))
                    if (!ids.count(item.scene_id))
                        throw svqa::cli::DataError("qa item " + item.qa_id +
                                                   " references unknown scene " + item.scene_id);
            }
            return svqa::cli::cmd_eval(config, preds_path, qa_path, rules_path);
        }
        if (app.got_subcommand("ablate-eta"))
            return svqa::cli::cmd_ablate_eta(config, eta_list, seed_list, ablate_steps);
        if (app.got_subcommand("report")) return svqa::cli::cmd_report(config, std::cout);
        std::cerr << "no subcommand\n";
        return svqa::cli::kExitUsage;
    } catch (const svqa::grpo::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return svqa::cli::kExitDivergence;
    } catch (const svqa::services::ServiceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return svqa::cli::kExitService;
    } catch (const svqa::cli::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return svqa::cli::kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return svqa::cli::kExitData;
    }
}
