#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hcpo/checkpoint.hpp"
#include "hcpo/config.hpp"
#include "hcpo/eval.hpp"
#include "hcpo/reward.hpp"
#include "hcpo/trainer.hpp"

using namespace hcpo;
using nlohmann::json;

namespace {

RunConfig load_or_default(const std::string& path) {
    if (path.empty()) return config_from_json(json::object());
    return load_config(path);
}

ModelParams load_policy(const std::string& path) {
    try {
        return load_trainer_state(path).params;
    } catch (const std::exception&) {
        return load_model(path);
    }
}

std::map<std::string, int> parse_counts(const std::string& text) {
    std::map<std::string, int> counts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("bad counts entry (want KIND=N): " + item);
        counts[item.substr(0, eq)] = std::stoi(item.substr(eq + 1));
    }
    return counts;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::vector<std::string> parse_str_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << text;
}

json eval_report_json(const EvalReport& r) {
    return {{"type_acc", r.type_acc},
            {"grounding_acc", r.grounding_acc},
            {"step_sr", r.step_sr},
            {"n_steps", r.n_steps},
            {"n_point_steps", r.n_point_steps},
            {"flops_full", r.flops_full},
            {"flops_drop", r.flops_drop},
            {"flops_reduction",
             r.flops_full > 0 ? 1.0 - r.flops_drop / r.flops_full : 0.0}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HCPO toy GUI-agent trainer"};
    app.require_subcommand(1);

    std::string config_path, out_path, dataset_path, ckpt_path, resume_path, metrics_path;
    std::string counts_arg, ks_arg = "0,1,2,3,4", modes_arg = "actions,images,both";
    std::string drop_mode = "none", in_path;
    uint64_t seed_arg = 0;
    bool seed_given = false, force = false;
    int k_arg = 0, tau_arg = -1, rollouts_arg = 0;
    double temp_arg = 0.0;

    auto* gen = app.add_subcommand("gen-data", "Generate an episode dataset");
    gen->add_option("--config", config_path);
    gen->add_option("--out", out_path)->required();
    gen->add_option("--seed", seed_arg)->each([&](const std::string&) { seed_given = true; });
    gen->add_option("--counts", counts_arg, "e.g. LOCAL=800,RECALL_1=400");

    auto* train_cmd = app.add_subcommand("train", "Run HCPO/GRPO training");
    train_cmd->add_option("--config", config_path);
    train_cmd->add_option("--out", out_path)->required();
    train_cmd->add_option("--dataset", dataset_path);
    train_cmd->add_option("--resume", resume_path);
    train_cmd->add_flag("--force", force);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--ckpt", ckpt_path)->required();
    eval_cmd->add_option("--dataset", dataset_path)->required();
    eval_cmd->add_option("--drop", drop_mode, "none|actions|images|both");
    eval_cmd->add_option("--k", k_arg);
    eval_cmd->add_option("--tau", tau_arg);
    eval_cmd->add_option("--out", out_path);

    auto* probe_cmd = app.add_subcommand("probe", "Layer-wise token-drop sweep");
    probe_cmd->add_option("--ckpt", ckpt_path)->required();
    probe_cmd->add_option("--dataset", dataset_path)->required();
    probe_cmd->add_option("--ks", ks_arg);
    probe_cmd->add_option("--modes", modes_arg);
    probe_cmd->add_option("--out", out_path);

    auto* prefs_cmd = app.add_subcommand("prefs", "History-length preference analysis");
    prefs_cmd->add_option("--ckpt", ckpt_path)->required();
    prefs_cmd->add_option("--dataset", dataset_path)->required();
    prefs_cmd->add_option("--rollouts", rollouts_arg);
    prefs_cmd->add_option("--temperature", temp_arg);
    prefs_cmd->add_option("--seed", seed_arg);
    prefs_cmd->add_option("--out", out_path);
    prefs_cmd->add_option("--config", config_path);

    auto* score_cmd = app.add_subcommand("score", "Batch reward scoring");
    score_cmd->add_option("--in", in_path)->required();
    score_cmd->add_option("--out", out_path);

    auto* ratio_cmd = app.add_subcommand("ratio", "Short-vs-long reward ratio series");
    ratio_cmd->add_option("--metrics", metrics_path)->required();
    ratio_cmd->add_option("--out", out_path);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            RunConfig cfg = load_or_default(config_path);
            if (seed_given) cfg.seed = seed_arg;
            std::map<std::string, int> counts =
                counts_arg.empty() ? cfg.task_counts : parse_counts(counts_arg);
            if (counts.empty()) throw std::runtime_error("gen-data: no task counts given");
            generate_dataset(out_path, cfg.env, cfg.seed, counts);
        } else if (train_cmd->parsed()) {
            RunConfig cfg = load_or_default(config_path);
            if (!dataset_path.empty()) cfg.dataset_path = dataset_path;
            if (cfg.dataset_path.empty()) throw std::runtime_error("train: no dataset path");
            Dataset data = load_dataset(cfg.dataset_path);
            train(cfg, data, out_path, resume_path, force);
        } else if (eval_cmd->parsed()) {
            ModelParams params = load_policy(ckpt_path);
            Dataset data = load_dataset(dataset_path);
            Vocab vocab(data.manifest.env, 2);
            DropSpec drop;
            if (drop_mode == "actions") drop = DropSpec::ahis_at(k_arg);
            else if (drop_mode == "images") drop = DropSpec::vhis_at(k_arg);
            else if (drop_mode == "both") drop = DropSpec::both_at(k_arg);
            else if (drop_mode != "none") throw std::runtime_error("eval: bad --drop");
            EvalReport r = evaluate(params, data, vocab, drop, tau_arg);
            write_text(out_path, eval_report_json(r).dump(2) + "\n");
        } else if (probe_cmd->parsed()) {
            ModelParams params = load_policy(ckpt_path);
            Dataset data = load_dataset(dataset_path);
            Vocab vocab(data.manifest.env, 2);
            write_text(out_path, layer_drop_sweep(params, data, vocab, parse_int_list(ks_arg),
                                                  parse_str_list(modes_arg)));
        } else if (prefs_cmd->parsed()) {
            RunConfig cfg = load_or_default(config_path);
            ModelParams params = load_policy(ckpt_path);
            Dataset data = load_dataset(dataset_path);
            Vocab vocab(data.manifest.env, cfg.train.dcs.window);
            int rollouts = rollouts_arg > 0 ? rollouts_arg : cfg.eval.rollouts;
            double temp = temp_arg > 0 ? temp_arg : cfg.eval.temperature;
            PreferenceReport rep =
                history_preference_analysis(params, data, vocab, rollouts, temp, seed_arg);
            write_text(out_path, preference_report_csv(rep));
        } else if (score_cmd->parsed()) {
            std::ifstream is(in_path);
            if (!is) throw std::runtime_error("score: cannot open " + in_path);
            std::string text, line;
            while (std::getline(is, line)) {
                if (line.empty()) continue;
                json rec = json::parse(line);
                ActionParseResult gt = parse_action(rec.at("action").get<std::string>());
                if (!gt.ok)
                    throw std::runtime_error("score: unparseable gt action: " + gt.fragment);
                RewardBreakdown r =
                    total_reward(rec.at("response").get<std::string>(), gt.action);
                text += json{{"format", r.format},
                             {"type", r.type},
                             {"value", r.value},
                             {"total", r.total}}
                            .dump() +
                        "\n";
            }
            write_text(out_path, text);
        } else if (ratio_cmd->parsed()) {
            write_text(out_path, short_long_ratio_csv(short_long_ratio(metrics_path)));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
