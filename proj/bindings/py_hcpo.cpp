// Thin Python surface over the C++ core. Heavy lifting (training, evaluation)
// stays in C++; Python gets plain dict/str/list views of the same entry points
// the CLI exposes.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>
#include <stdexcept>

#include "hcpo/checkpoint.hpp"
#include "hcpo/config.hpp"
#include "hcpo/dcs.hpp"
#include "hcpo/env.hpp"
#include "hcpo/eval.hpp"
#include "hcpo/losses.hpp"
#include "hcpo/model.hpp"
#include "hcpo/reward.hpp"
#include "hcpo/rng.hpp"
#include "hcpo/trainer.hpp"

namespace py = pybind11;
using namespace hcpo;
using nlohmann::json;

namespace {

json parse_json(const std::string& text) {
    if (text.empty()) return json::object();
    return json::parse(text);
}

RunConfig config_of(const std::string& config_json) {
    return config_from_json(parse_json(config_json));
}

Action gt_of(const std::string& action_text) {
    ActionParseResult r = parse_action(action_text);
    if (!r.ok) throw std::invalid_argument("unparseable ground-truth action: " + action_text);
    return r.action;
}

DropSpec drop_of(const std::string& mode, int k) {
    if (mode == "none") return DropSpec::none();
    if (mode == "actions") return DropSpec::ahis_at(k);
    if (mode == "images") return DropSpec::vhis_at(k);
    if (mode == "both") return DropSpec::both_at(k);
    throw std::invalid_argument("drop mode must be none|actions|images|both");
}

ModelParams load_policy(const std::string& path) {
    try {
        return load_trainer_state(path).params;
    } catch (const std::exception&) {
        return load_model(path);
    }
}

py::dict eval_dict(const EvalReport& r) {
    py::dict d;
    d["type_acc"] = r.type_acc;
    d["grounding_acc"] = r.grounding_acc;
    d["step_sr"] = r.step_sr;
    d["n_steps"] = r.n_steps;
    d["n_point_steps"] = r.n_point_steps;
    d["flops_full"] = r.flops_full;
    d["flops_drop"] = r.flops_drop;
    d["flops_reduction"] = r.flops_full > 0 ? 1.0 - r.flops_drop / r.flops_full : 0.0;
    return d;
}

}  // namespace

PYBIND11_MODULE(_hcpo, m) {
    m.doc() = "History context-aware policy optimization on a synthetic GridGUI environment";

    // --- dynamic context sampling ---
    m.def("expbias_pmf", &expbias_pmf, py::arg("lam"), py::arg("window"),
          "P(tau) proportional to exp(lam * tau) over tau in {0..window}");
    m.def("uniform_pmf", &uniform_pmf, py::arg("window"));
    m.def(
        "lambda_at",
        [](long u, long total_steps, double lambda_max, double alpha) {
            DcsSchedule s;
            s.total_steps = total_steps;
            s.lambda_max = lambda_max;
            s.alpha = alpha;
            return lambda_at(u, s);
        },
        py::arg("u"), py::arg("total_steps"), py::arg("lambda_max") = 2.0,
        py::arg("alpha") = 1.0 / 3.0);

    // --- reward engine ---
    m.def(
        "score_response",
        [](const std::string& response, const std::string& gt_action) {
            RewardBreakdown r = total_reward(response, gt_of(gt_action));
            py::dict d;
            d["format"] = r.format;
            d["type"] = r.type;
            d["value"] = r.value;
            d["total"] = r.total;
            return d;
        },
        py::arg("response"), py::arg("gt_action"),
        "Score a raw response text against a ground-truth action string");
    m.def("token_f1", &token_f1, py::arg("pred"), py::arg("gt"));
    m.def(
        "parse_action",
        [](const std::string& text) -> py::object {
            ActionParseResult r = parse_action(text);
            if (!r.ok) return py::none();
            py::dict d;
            d["kind"] = std::string(kind_name(r.action.kind));
            if (r.action.has_point()) {
                d["x"] = r.action.x;
                d["y"] = r.action.y;
            }
            if (r.action.has_text()) d["text"] = r.action.text;
            if (r.action.has_direction())
                d["direction"] = std::string(direction_name(r.action.direction));
            return d;
        },
        py::arg("text"), "Parse an action-grammar string; None when malformed");

    // --- losses ---
    m.def("compute_advantages", &compute_advantages, py::arg("rewards"));

    // --- accounting ---
    m.def("flops_estimate", &flops_estimate, py::arg("d_model"), py::arg("d_ff"),
          py::arg("per_layer_counts"));

    // --- environment / datasets ---
    m.def(
        "generate_dataset",
        [](const std::string& path, uint64_t seed, const std::map<std::string, int>& counts,
           const std::string& config_json) {
            generate_dataset(path, config_of(config_json).env, seed, counts);
        },
        py::arg("path"), py::arg("seed"), py::arg("counts"), py::arg("config_json") = "",
        "Write a line-delimited episode dataset; counts keys are local|recall1|recall2|copy2");
    m.def(
        "dataset_info",
        [](const std::string& path) {
            Dataset d = load_dataset(path);
            py::dict out;
            out["episodes"] = d.episodes.size();
            out["seed"] = d.manifest.seed;
            out["counts"] = d.manifest.counts;
            long steps = 0;
            for (const Episode& ep : d.episodes) steps += ep.length();
            out["steps"] = steps;
            return out;
        },
        py::arg("path"));

    // --- checkpoints ---
    m.def(
        "init_policy",
        [](const std::string& path, uint64_t seed, const std::string& config_json) {
            RunConfig cfg = config_of(config_json);
            Rng rng = derive_rng(seed, {"init"});
            ModelParams p = ModelParams::init(cfg.dims, rng);
            save_model(path, p);
        },
        py::arg("path"), py::arg("seed"), py::arg("config_json") = "",
        "Write a freshly initialized (untrained) policy checkpoint");

    // --- training ---
    m.def(
        "train",
        [](const std::string& config_json, const std::string& dataset_path,
           const std::string& out_dir, const std::string& resume, bool force) {
            RunConfig cfg = config_of(config_json);
            if (!dataset_path.empty()) cfg.dataset_path = dataset_path;
            Dataset data = load_dataset(cfg.dataset_path);
            TrainResult r = train(cfg, data, out_dir, resume, force);
            py::dict d;
            d["run_dir"] = r.run_dir;
            d["steps_done"] = r.steps_done;
            return d;
        },
        py::arg("config_json"), py::arg("dataset_path"), py::arg("out_dir"),
        py::arg("resume") = "", py::arg("force") = false);

    // --- evaluation and probes ---
    m.def(
        "evaluate",
        [](const std::string& ckpt, const std::string& dataset_path, const std::string& drop,
           int k, int tau) {
            ModelParams p = load_policy(ckpt);
            Dataset data = load_dataset(dataset_path);
            Vocab vocab(data.manifest.env, 2);
            return eval_dict(evaluate(p, data, vocab, drop_of(drop, k), tau));
        },
        py::arg("ckpt"), py::arg("dataset_path"), py::arg("drop") = "none", py::arg("k") = 0,
        py::arg("tau") = -1);
    m.def(
        "layer_drop_sweep",
        [](const std::string& ckpt, const std::string& dataset_path, const std::vector<int>& ks,
           const std::vector<std::string>& modes) {
            ModelParams p = load_policy(ckpt);
            Dataset data = load_dataset(dataset_path);
            Vocab vocab(data.manifest.env, 2);
            return layer_drop_sweep(p, data, vocab, ks, modes);
        },
        py::arg("ckpt"), py::arg("dataset_path"), py::arg("ks"),
        py::arg("modes") = std::vector<std::string>{"actions", "images", "both"});
    m.def(
        "history_preference_csv",
        [](const std::string& ckpt, const std::string& dataset_path, int rollouts,
           double temperature, uint64_t seed) {
            ModelParams p = load_policy(ckpt);
            Dataset data = load_dataset(dataset_path);
            Vocab vocab(data.manifest.env, 2);
            return preference_report_csv(
                history_preference_analysis(p, data, vocab, rollouts, temperature, seed));
        },
        py::arg("ckpt"), py::arg("dataset_path"), py::arg("rollouts") = 8,
        py::arg("temperature") = 1.0, py::arg("seed") = 0);
    m.def(
        "short_long_ratio_csv",
        [](const std::string& metrics_path) {
            return short_long_ratio_csv(short_long_ratio(metrics_path));
        },
        py::arg("metrics_path"));

    // --- config ---
    m.def(
        "default_config",
        []() { return config_to_json(config_from_json(json::object())).dump(2); },
        "The fully resolved default configuration as a JSON string");
    m.def(
        "validate_config",
        [](const std::string& config_json) { (void)config_of(config_json); },
        py::arg("config_json"), "Raises on schema or constraint violations");
}
