#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hcpo/env.hpp"
#include "hcpo/model.hpp"
#include "hcpo/tokenize.hpp"

namespace hcpo {

// Step success: kind matches and the value succeeds (clicks: inside the oracle
// target cell; text: token F1 > 0.5; scroll: exact direction; otherwise free).
bool step_success(const EnvConfig& env, const Action& pred, const Action& gt);

// Grounding: predicted point lands in the oracle target's cell.
bool grounding_hit(const EnvConfig& env, const Action& pred, const Action& gt);

struct EvalReport {
    double type_acc = 0.0;
    double grounding_acc = 0.0;  // over coordinate-oracle steps only
    double step_sr = 0.0;
    long n_steps = 0;
    long n_point_steps = 0;
    DropSpec drop;
    double flops_full = 0.0;   // summed over evaluated contexts, no drop
    double flops_drop = 0.0;   // same contexts under `drop`
};

// Greedy decoding over every step of every episode; tau = -1 means the full
// window N.
EvalReport evaluate(const ModelParams& params, const Dataset& data, const Vocab& vocab,
                    const DropSpec& drop = DropSpec::none(), int tau = -1);

// "k,mode,sr" CSV: a no-drop reference row first, then |ks| x |modes| rows.
// Mode names: actions (drop A_HIS), images (drop V_HIS), both.
std::string layer_drop_sweep(const ModelParams& params, const Dataset& data, const Vocab& vocab,
                             const std::vector<int>& ks, const std::vector<std::string>& modes);

struct PrefSample {
    uint64_t episode_id = 0;
    int step = 0;
    ActionKind oracle_kind = ActionKind::Wait;
    std::vector<double> mean_reward;  // per tau
    int best_tau = 0;
    double gap = 0.0;      // max - min mean reward
    bool kept = false;     // gap >= 0.05
    double improvement = 0.0;  // best mean - mean at tau = N, when best_tau < N
};

struct PreferenceReport {
    std::vector<PrefSample> samples;
    std::vector<long> best_tau_hist;  // over kept samples
    long discarded = 0;
};

PreferenceReport history_preference_analysis(const ModelParams& params, const Dataset& data,
                                             const Vocab& vocab, int rollouts,
                                             double temperature, uint64_t seed);

std::string preference_report_csv(const PreferenceReport& r);

// ratio_u = mean reward over members with tau < N / mean over tau = N, read
// from the metrics log; nullopt when a side is empty at that step.
std::vector<std::pair<long, std::optional<double>>> short_long_ratio(
    const std::string& metrics_path);

std::string short_long_ratio_csv(
    const std::vector<std::pair<long, std::optional<double>>>& series);

}  // namespace hcpo
