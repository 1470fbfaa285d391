#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hcpo/checkpoint.hpp"
#include "hcpo/dcs.hpp"
#include "hcpo/env.hpp"
#include "hcpo/losses.hpp"
#include "hcpo/model.hpp"
#include "hcpo/reward.hpp"
#include "hcpo/tokenize.hpp"

namespace hcpo {

enum class TrainMode { HCPO, GRPO, HCPO_NO_KL, HCPO_NO_DCS, UNIFORM_DCS };
const char* train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& name);

struct TrainConfig {
    double eps = 0.2;            // clip
    double beta = 0.04;          // KL-to-reference weight
    double lambda_align = 1.0;   // alignment KL weight
    int drop_layer = 2;          // k
    int group_size = 8;          // G
    double temperature = 1.0;
    double lr = 1e-3;
    std::string optimizer = "adam";  // "adam" | "sgd"
    long total_steps = 2000;     // T, RL phase
    long warmup_steps = 0;       // supervised warmup before RL
    double warmup_lr = 1e-3;
    long warmup_batch = 1;       // samples averaged per warmup update
    DcsSchedule dcs;             // total_steps mirrored from above at load time
    TrainMode mode = TrainMode::HCPO;
    bool update_all_taus = false;  // uncompressed branch averaged over all tau contexts
    long checkpoint_every = 500;
};

struct RolloutMember {
    int tau = 0;
    std::vector<int> response;   // loss tokens, kEnd included when emitted
    std::string text;            // detokenized response (without kEnd)
    RewardBreakdown reward;
    double advantage = 0.0;
};

struct RolloutGroup {
    const Episode* episode = nullptr;
    int step = 0;
    std::vector<RolloutMember> members;
};

// DCS pmf effective for the mode at RL step u.
std::vector<double> mode_pmf(const TrainConfig& cfg, long u);

// Samples G responses under the mode's tau distribution; rewards scored against
// the oracle action; advantages group-normalized. rng streams derive from
// (seed, "rollout", step_label, member).
RolloutGroup group_rollout(const ModelParams& params, const Vocab& vocab, const Episode& ep,
                           int step, const TrainConfig& cfg, long u, uint64_t seed,
                           long step_label);

struct StepMetrics {
    double lambda = 0.0;
    std::vector<long> tau_counts;
    std::vector<double> tau_mean_reward;
    double mean_reward = 0.0;
    double loss = 0.0;
    double loss_uncomp = 0.0;
    double loss_comp = 0.0;
    double align_kl = 0.0;
    double ref_kl = 0.0;
    double clip_fraction = 0.0;
    double batch_sr = 0.0;
    std::optional<double> short_long_ratio;
};

struct AdamState {
    ModelParams m, v;
    long t = 0;
};

struct TrainerState {
    ModelParams params;
    ModelParams ref;     // frozen snapshot taken when the RL phase starts
    AdamState adam;
    long global_step = 0;  // warmup steps first, then RL steps
};

// One full Algorithm-1 update on a single (episode, step) sample.
StepMetrics hcpo_step(TrainerState& st, const Vocab& vocab, const Episode& ep, int step,
                      const TrainConfig& cfg, long u, uint64_t seed);

// Cross-entropy step on the oracle response under a uniformly drawn tau.
double warmup_step(TrainerState& st, const Vocab& vocab, const Episode& ep, int step,
                   const TrainConfig& cfg, uint64_t seed);

// Same objective averaged over warmup_batch samples drawn from the dataset.
double warmup_batch_step(TrainerState& st, const Vocab& vocab, const Dataset& data,
                         const TrainConfig& cfg, uint64_t seed);

void apply_update(ModelParams& p, const ModelParams& g, const TrainConfig& cfg,
                  AdamState& adam);

struct TrainResult {
    std::string run_dir;
    long steps_done = 0;
};

// Runs warmup + T RL steps, writing metrics.jsonl, periodic checkpoints and
// final.bin into run_dir. Deterministic in (config, seed, dataset).
TrainResult train(const struct RunConfig& cfg, const Dataset& data, const std::string& run_dir,
                  const std::string& resume_ckpt = "", bool force = false);

void save_trainer_state(const std::string& path, TrainerState& st, const json& extra = {});
TrainerState load_trainer_state(const std::string& path, json* meta_out = nullptr);

}  // namespace hcpo
