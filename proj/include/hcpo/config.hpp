#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <string>

#include "hcpo/env.hpp"
#include "hcpo/model.hpp"
#include "hcpo/trainer.hpp"

namespace hcpo {

struct EvalSettings {
    int rollouts = 8;            // preference-analysis rollouts per (sample, tau)
    double temperature = 1.0;    // preference-analysis sampling temperature
};

struct RunConfig {
    uint64_t seed = 0;
    ModelDims dims;
    EnvConfig env;
    std::map<std::string, int> task_counts;  // dataset generation mix
    TrainConfig train;
    EvalSettings eval;
    std::string dataset_path;
    std::string out_dir = "runs/default";
};

// Strict JSON loading: unknown keys are rejected, constraints validated,
// defaults fill anything omitted. An empty file yields all defaults.
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

void validate_config(const RunConfig& cfg);  // throws std::runtime_error

}  // namespace hcpo
