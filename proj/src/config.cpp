#include "hcpo/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "hcpo/tokenize.hpp"

namespace hcpo {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw std::runtime_error("ParseError: " + where + " must be an object");
    for (auto& [k, v] : j.items())
        if (!allowed.count(k))
            throw std::runtime_error("ParseError: unknown key '" + k + "' in " + where);
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void fail(const std::string& constraint) {
    throw std::runtime_error("ValidationError: " + constraint);
}

}  // namespace

RunConfig config_from_json(const json& j) {
    RunConfig cfg;
    check_keys(j, {"seed", "model", "env", "task_counts", "train", "eval", "dataset_path",
                   "out_dir"},
               "config root");
    get_if(j, "seed", cfg.seed);
    get_if(j, "dataset_path", cfg.dataset_path);
    get_if(j, "out_dir", cfg.out_dir);

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, {"layers", "d_model", "heads", "d_ff", "vocab", "max_seq", "max_response"},
                   "model");
        get_if(m, "layers", cfg.dims.layers);
        get_if(m, "d_model", cfg.dims.d_model);
        get_if(m, "heads", cfg.dims.heads);
        get_if(m, "d_ff", cfg.dims.d_ff);
        get_if(m, "vocab", cfg.dims.vocab);
        get_if(m, "max_seq", cfg.dims.max_seq);
        get_if(m, "max_response", cfg.dims.max_response);
    }
    if (j.contains("env")) {
        const json& e = j.at("env");
        check_keys(e, {"grid_w", "grid_h", "widget_kinds", "colors", "glyphs", "min_len",
                       "max_len", "banner_len"},
                   "env");
        get_if(e, "grid_w", cfg.env.grid_w);
        get_if(e, "grid_h", cfg.env.grid_h);
        get_if(e, "widget_kinds", cfg.env.widget_kinds);
        get_if(e, "colors", cfg.env.colors);
        get_if(e, "glyphs", cfg.env.glyphs);
        get_if(e, "min_len", cfg.env.min_len);
        get_if(e, "max_len", cfg.env.max_len);
        get_if(e, "banner_len", cfg.env.banner_len);
    }
    if (j.contains("task_counts")) {
        for (auto& [k, v] : j.at("task_counts").items()) {
            task_kind_from_name(k);  // throws on unknown kinds
            cfg.task_counts[k] = v.get<int>();
        }
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, {"eps", "beta", "lambda_align", "drop_layer", "group_size", "temperature",
                       "lr", "optimizer", "total_steps", "warmup_steps", "warmup_lr",
                       "warmup_batch", "mode", "update_all_taus", "checkpoint_every", "dcs"},
                   "train");
        get_if(t, "eps", cfg.train.eps);
        get_if(t, "beta", cfg.train.beta);
        get_if(t, "lambda_align", cfg.train.lambda_align);
        get_if(t, "drop_layer", cfg.train.drop_layer);
        get_if(t, "group_size", cfg.train.group_size);
        get_if(t, "temperature", cfg.train.temperature);
        get_if(t, "lr", cfg.train.lr);
        get_if(t, "optimizer", cfg.train.optimizer);
        get_if(t, "total_steps", cfg.train.total_steps);
        get_if(t, "warmup_steps", cfg.train.warmup_steps);
        get_if(t, "warmup_lr", cfg.train.warmup_lr);
        get_if(t, "warmup_batch", cfg.train.warmup_batch);
        get_if(t, "update_all_taus", cfg.train.update_all_taus);
        get_if(t, "checkpoint_every", cfg.train.checkpoint_every);
        if (t.contains("mode"))
            cfg.train.mode = train_mode_from_name(t.at("mode").get<std::string>());
        if (t.contains("dcs")) {
            const json& d = t.at("dcs");
            check_keys(d, {"lambda_max", "alpha", "window"}, "train.dcs");
            get_if(d, "lambda_max", cfg.train.dcs.lambda_max);
            get_if(d, "alpha", cfg.train.dcs.alpha);
            get_if(d, "window", cfg.train.dcs.window);
        }
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        check_keys(e, {"rollouts", "temperature"}, "eval");
        get_if(e, "rollouts", cfg.eval.rollouts);
        get_if(e, "temperature", cfg.eval.temperature);
    }
    cfg.train.dcs.total_steps = cfg.train.total_steps;
    validate_config(cfg);
    return cfg;
}

json config_to_json(const RunConfig& cfg) {
    json tc = json::object();
    for (const auto& [k, v] : cfg.task_counts) tc[k] = v;
    return {
        {"seed", cfg.seed},
        {"model",
         {{"layers", cfg.dims.layers},
          {"d_model", cfg.dims.d_model},
          {"heads", cfg.dims.heads},
          {"d_ff", cfg.dims.d_ff},
          {"vocab", cfg.dims.vocab},
          {"max_seq", cfg.dims.max_seq},
          {"max_response", cfg.dims.max_response}}},
        {"env",
         {{"grid_w", cfg.env.grid_w},
          {"grid_h", cfg.env.grid_h},
          {"widget_kinds", cfg.env.widget_kinds},
          {"colors", cfg.env.colors},
          {"glyphs", cfg.env.glyphs},
          {"min_len", cfg.env.min_len},
          {"max_len", cfg.env.max_len},
          {"banner_len", cfg.env.banner_len}}},
        {"task_counts", tc},
        {"train",
         {{"eps", cfg.train.eps},
          {"beta", cfg.train.beta},
          {"lambda_align", cfg.train.lambda_align},
          {"drop_layer", cfg.train.drop_layer},
          {"group_size", cfg.train.group_size},
          {"temperature", cfg.train.temperature},
          {"lr", cfg.train.lr},
          {"optimizer", cfg.train.optimizer},
          {"total_steps", cfg.train.total_steps},
          {"warmup_steps", cfg.train.warmup_steps},
          {"warmup_lr", cfg.train.warmup_lr},
          {"warmup_batch", cfg.train.warmup_batch},
          {"mode", train_mode_name(cfg.train.mode)},
          {"update_all_taus", cfg.train.update_all_taus},
          {"checkpoint_every", cfg.train.checkpoint_every},
          {"dcs",
           {{"lambda_max", cfg.train.dcs.lambda_max},
            {"alpha", cfg.train.dcs.alpha},
            {"window", cfg.train.dcs.window}}}}},
        {"eval", {{"rollouts", cfg.eval.rollouts}, {"temperature", cfg.eval.temperature}}},
        {"dataset_path", cfg.dataset_path},
        {"out_dir", cfg.out_dir},
    };
}

void validate_config(const RunConfig& cfg) {
    const TrainConfig& t = cfg.train;
    if (!(t.eps > 0.0 && t.eps < 1.0)) fail("0 < eps < 1");
    if (t.beta < 0.0) fail("beta >= 0");
    if (t.lambda_align < 0.0) fail("lambda_align >= 0");
    if (t.group_size < 2) fail("group_size >= 2");
    if (t.drop_layer < 0 || t.drop_layer > cfg.dims.layers) fail("0 <= drop_layer <= layers");
    if (t.temperature <= 0.0) fail("temperature > 0");
    if (t.lr <= 0.0 || t.warmup_lr <= 0.0) fail("lr > 0");
    if (t.optimizer != "adam" && t.optimizer != "sgd") fail("optimizer in {adam, sgd}");
    if (t.total_steps < 1) fail("total_steps >= 1");
    if (t.warmup_steps < 0) fail("warmup_steps >= 0");
    if (t.warmup_batch < 1) fail("warmup_batch >= 1");
    if (t.dcs.lambda_max < 0.0) fail("dcs.lambda_max >= 0");
    if (!(t.dcs.alpha > 0.0 && t.dcs.alpha <= 1.0)) fail("0 < dcs.alpha <= 1");
    if (t.dcs.window < 0) fail("dcs.window >= 0");
    if (cfg.dims.layers < 1 || cfg.dims.d_model < 1 || cfg.dims.heads < 1 || cfg.dims.d_ff < 1)
        fail("model dims positive");
    if (cfg.dims.d_model % cfg.dims.heads != 0) fail("d_model divisible by heads");
    if (cfg.env.grid_w < 1 || cfg.env.grid_h < 1 || cfg.env.widget_kinds < 2 ||
        cfg.env.colors < 1 || cfg.env.glyphs < 13)  // two banners (6) + 3 fresh cue picks
        fail("env dims too small");
    if (cfg.env.min_len < 3 || cfg.env.max_len < cfg.env.min_len) fail("3 <= min_len <= max_len");
    if (cfg.eval.rollouts < 1) fail("eval.rollouts >= 1");
    if (cfg.eval.temperature <= 0.0) fail("eval.temperature > 0");
    for (const auto& [k, v] : cfg.task_counts)
        if (v < 0) fail("task_counts non-negative");

    Vocab vocab(cfg.env, cfg.train.dcs.window);
    if (vocab.size() > cfg.dims.vocab) fail("model.vocab >= tokenizer vocabulary size");
    if (vocab.max_position() > cfg.dims.max_seq) fail("model.max_seq >= context layout length");
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("ParseError: cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    json j = json::object();
    // an empty (or whitespace-only) file means all defaults
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw std::runtime_error(std::string("ParseError: ") + e.what());
        }
    }
    return config_from_json(j);
}

}  // namespace hcpo
