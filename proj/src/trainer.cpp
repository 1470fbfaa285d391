#include "hcpo/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "hcpo/config.hpp"
#include "hcpo/eval.hpp"

namespace fs = std::filesystem;

namespace hcpo {

const char* train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::HCPO: return "HCPO";
        case TrainMode::GRPO: return "GRPO";
        case TrainMode::HCPO_NO_KL: return "HCPO_NO_KL";
        case TrainMode::HCPO_NO_DCS: return "HCPO_NO_DCS";
        case TrainMode::UNIFORM_DCS: return "UNIFORM_DCS";
    }
    throw std::invalid_argument("train_mode_name: bad mode");
}

TrainMode train_mode_from_name(const std::string& name) {
    for (int i = 0; i < 5; ++i) {
        TrainMode m = static_cast<TrainMode>(i);
        if (name == train_mode_name(m)) return m;
    }
    throw std::invalid_argument("unknown train mode: " + name);
}

std::vector<double> mode_pmf(const TrainConfig& cfg, long u) {
    const int n = cfg.dcs.window;
    switch (cfg.mode) {
        case TrainMode::HCPO:
        case TrainMode::HCPO_NO_KL:
            return expbias_pmf(lambda_at(u, cfg.dcs), n);
        case TrainMode::UNIFORM_DCS:
            return uniform_pmf(n);
        case TrainMode::GRPO:
        case TrainMode::HCPO_NO_DCS: {
            std::vector<double> p(n + 1, 0.0);
            p[n] = 1.0;
            return p;
        }
    }
    throw std::invalid_argument("mode_pmf: bad mode");
}

RolloutGroup group_rollout(const ModelParams& params, const Vocab& vocab, const Episode& ep,
                           int step, const TrainConfig& cfg, long u, uint64_t seed,
                           long step_label) {
    RolloutGroup grp;
    grp.episode = &ep;
    grp.step = step;
    std::vector<double> pmf = mode_pmf(cfg, u);
    const Action& gt = oracle_action(ep, step);
    std::vector<double> rewards;
    for (int i = 0; i < cfg.group_size; ++i) {
        Rng rng = derive_rng(seed, {"rollout", static_cast<uint64_t>(step_label), i});
        RolloutMember m;
        m.tau = sample_tau(pmf, rng);
        StepContext ctx = step_context(ep, step, m.tau);
        TokenSequence seq = vocab.encode_context(ctx);
        SampledResponse resp = sample_response(params, seq, cfg.temperature,
                                               params.dims.max_response, rng,
                                               vocab.response_pos());
        m.text = vocab.detokenize(resp.tokens);
        m.response = std::move(resp.tokens);
        if (resp.ended || m.response.empty()) m.response.push_back(Vocab::kEnd);
        m.reward = total_reward(m.text, gt);
        rewards.push_back(m.reward.total);
        grp.members.push_back(std::move(m));
    }
    std::vector<double> adv = compute_advantages(rewards);
    for (size_t i = 0; i < adv.size(); ++i) grp.members[i].advantage = adv[i];
    return grp;
}

void apply_update(ModelParams& p, const ModelParams& g, const TrainConfig& cfg,
                  AdamState& adam) {
    std::vector<TensorView> pv = tensor_views(p);
    std::vector<TensorView> gv = tensor_views(const_cast<ModelParams&>(g));
    if (cfg.optimizer == "sgd") {
        for (size_t i = 0; i < pv.size(); ++i)
            for (long j = 0; j < pv[i].size(); ++j) pv[i].data[j] -= cfg.lr * gv[i].data[j];
        return;
    }
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    adam.t += 1;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
    std::vector<TensorView> mv = tensor_views(adam.m);
    std::vector<TensorView> vv = tensor_views(adam.v);
    for (size_t i = 0; i < pv.size(); ++i) {
        for (long j = 0; j < pv[i].size(); ++j) {
            double grad = gv[i].data[j];
            double& m = mv[i].data[j];
            double& v = vv[i].data[j];
            m = b1 * m + (1.0 - b1) * grad;
            v = b2 * v + (1.0 - b2) * grad * grad;
            pv[i].data[j] -= cfg.lr * (m / c1) / (std::sqrt(v / c2) + eps);
        }
    }
}

namespace {

void check_finite(ModelParams& g) {
    for (const TensorView& t : tensor_views(g))
        for (long j = 0; j < t.size(); ++j)
            if (!std::isfinite(t.data[j]))
                throw std::runtime_error("NonFiniteGradient in tensor " + t.name);
}

double effective_lr(const TrainConfig& cfg, bool warmup) { return warmup ? cfg.warmup_lr : cfg.lr; }

}  // namespace

StepMetrics hcpo_step(TrainerState& st, const Vocab& vocab, const Episode& ep, int step,
                      const TrainConfig& cfg, long u, uint64_t seed) {
    const int N = vocab.history_window();
    const int G = cfg.group_size;
    const Action& gt = oracle_action(ep, step);

    RolloutGroup grp = group_rollout(st.params, vocab, ep, step, cfg, u, seed, st.global_step);

    StepMetrics m;
    m.lambda = lambda_at(u, cfg.dcs);
    m.tau_counts.assign(N + 1, 0);
    std::vector<double> tau_sum(N + 1, 0.0);
    long sr_hits = 0;
    for (const RolloutMember& mem : grp.members) {
        m.tau_counts[mem.tau] += 1;
        tau_sum[mem.tau] += mem.reward.total;
        m.mean_reward += mem.reward.total / G;
        auto parsed = parse_response(mem.text);
        if (parsed && step_success(vocab.env(), parsed->action, gt)) ++sr_hits;
    }
    m.batch_sr = static_cast<double>(sr_hits) / G;
    m.tau_mean_reward.assign(N + 1, 0.0);
    for (int t = 0; t <= N; ++t)
        if (m.tau_counts[t] > 0) m.tau_mean_reward[t] = tau_sum[t] / m.tau_counts[t];
    {
        double short_sum = 0.0, long_sum = 0.0;
        long short_n = 0, long_n = 0;
        for (int t = 0; t < N; ++t) { short_sum += tau_sum[t]; short_n += m.tau_counts[t]; }
        long_sum = tau_sum[N];
        long_n = m.tau_counts[N];
        if (short_n > 0 && long_n > 0 && long_sum != 0.0)
            m.short_long_ratio = (short_sum / short_n) / (long_sum / long_n);
    }

    // contexts with the response appended; the loss path always uses tau = N
    TokenSequence base = vocab.encode_context(step_context(ep, step, N));
    std::vector<TokenSequence> seqs(G);
    for (int i = 0; i < G; ++i) {
        seqs[i] = base;
        Vocab::append_response(seqs[i], grp.members[i].response, vocab.response_pos());
    }

    const bool compressed = cfg.mode != TrainMode::GRPO;
    const double lam = cfg.mode == TrainMode::HCPO_NO_KL ? 0.0 : cfg.lambda_align;
    const DropSpec drop = DropSpec::vhis_at(cfg.drop_layer);

    ModelParams grads = ModelParams::zeros(st.params.dims);
    const double scale = 1.0 / G;

    // uncompressed branch; optionally averaged over every tau context
    std::vector<LogprobResult> unc(G);
    std::vector<int> branch_taus = cfg.update_all_taus ? [&] {
        std::vector<int> ts(N + 1);
        for (int t = 0; t <= N; ++t) ts[t] = t;
        return ts;
    }() : std::vector<int>{N};
    const double tau_scale = 1.0 / static_cast<double>(branch_taus.size());
    for (int bt : branch_taus) {
        std::vector<TokenSequence> bseqs(G);
        std::vector<LogprobResult> lps(G);
        std::vector<MatrixXd> refs(G);
        std::vector<MemberBranchInput> inputs(G);
        for (int i = 0; i < G; ++i) {
            if (bt == N) {
                bseqs[i] = seqs[i];
            } else {
                bseqs[i] = vocab.encode_context(step_context(ep, step, bt));
                Vocab::append_response(bseqs[i], grp.members[i].response, vocab.response_pos());
            }
            lps[i] = logprob_of(st.params, bseqs[i], DropSpec::none());
            MemberBranchInput& in = inputs[i];
            in.new_log_probs = &lps[i].log_probs;
            in.old_logprob = Eigen::Map<const VectorXd>(lps[i].logprob.data(),
                                                        static_cast<long>(lps[i].logprob.size()));
            if (cfg.beta > 0.0) {
                refs[i] = logprob_of(st.ref, bseqs[i], DropSpec::none()).log_probs;
                in.ref_log_probs = &refs[i];
            }
            in.chosen = grp.members[i].response;
            in.advantage = grp.members[i].advantage;
        }
        BranchLossResult b = branch_policy_loss(inputs, cfg.eps, cfg.beta);
        m.loss_uncomp += tau_scale * scale * b.loss;
        m.ref_kl += tau_scale * scale * b.ref_kl;
        m.clip_fraction += tau_scale * b.clip_fraction;
        for (int i = 0; i < G; ++i)
            backward(st.params, bseqs[i], lps[i].cache,
                     (tau_scale * scale) * b.dlogits[i], grads);
        if (bt == N) unc = std::move(lps);
    }

    if (compressed) {
        std::vector<LogprobResult> comp(G);
        std::vector<MatrixXd> refs(G);
        std::vector<MemberBranchInput> inputs(G);
        for (int i = 0; i < G; ++i) {
            comp[i] = logprob_of(st.params, seqs[i], drop);
            MemberBranchInput& in = inputs[i];
            in.new_log_probs = &comp[i].log_probs;
            in.old_logprob = Eigen::Map<const VectorXd>(comp[i].logprob.data(),
                                                        static_cast<long>(comp[i].logprob.size()));
            if (cfg.beta > 0.0) {
                refs[i] = logprob_of(st.ref, seqs[i], drop).log_probs;
                in.ref_log_probs = &refs[i];
            }
            in.chosen = grp.members[i].response;
            in.advantage = grp.members[i].advantage;
        }
        BranchLossResult b = branch_policy_loss(inputs, cfg.eps, cfg.beta);
        m.loss_comp = scale * b.loss;
        m.ref_kl += scale * b.ref_kl;

        AlignmentResult al;
        if (lam > 0.0) {
            std::vector<const MatrixXd*> student(G), teacher(G);
            for (int i = 0; i < G; ++i) {
                student[i] = &comp[i].log_probs;
                teacher[i] = &unc[i].log_probs;
            }
            al = alignment_kl(student, teacher);
            m.align_kl = scale * al.loss;
        }
        for (int i = 0; i < G; ++i) {
            MatrixXd d = b.dlogits[i];
            if (lam > 0.0) d += lam * al.dlogits_student[i];
            backward(st.params, seqs[i], comp[i].cache, scale * d, grads);
        }
    }

    m.loss = m.loss_uncomp + m.loss_comp + lam * m.align_kl;
    check_finite(grads);
    apply_update(st.params, grads, cfg, st.adam);
    return m;
}

namespace {

// Cross-entropy on the oracle response of one (episode, step) sample under the
// given tau; accumulates scaled gradients into `grads`.
double warmup_accumulate(const ModelParams& params, const Vocab& vocab, const Episode& ep,
                         int step, int tau, double scale, ModelParams& grads) {
    TokenSequence seq = vocab.encode_context(step_context(ep, step, tau));
    std::vector<int> resp = vocab.oracle_response(oracle_action(ep, step));
    Vocab::append_response(seq, resp, vocab.response_pos());
    LogprobResult lp = logprob_of(params, seq, DropSpec::none());
    const long t = lp.log_probs.rows();
    double loss = 0.0;
    MatrixXd dlogits(t, lp.log_probs.cols());
    for (long j = 0; j < t; ++j) {
        loss -= lp.logprob[j] / t;
        dlogits.row(j) = scale * lp.log_probs.row(j).array().exp() / t;
        dlogits(j, resp[j]) -= scale / t;
    }
    backward(params, seq, lp.cache, dlogits, grads);
    return loss;
}

}  // namespace

double warmup_step(TrainerState& st, const Vocab& vocab, const Episode& ep, int step,
                   const TrainConfig& cfg, uint64_t seed) {
    const int N = vocab.history_window();
    Rng rng = derive_rng(seed, {"warmup", static_cast<uint64_t>(st.global_step)});
    int tau = static_cast<int>(rng.uniform_int(N + 1));
    ModelParams grads = ModelParams::zeros(st.params.dims);
    double loss = warmup_accumulate(st.params, vocab, ep, step, tau, 1.0, grads);
    check_finite(grads);
    TrainConfig wcfg = cfg;
    wcfg.lr = effective_lr(cfg, true);
    apply_update(st.params, grads, wcfg, st.adam);
    return loss;
}

double warmup_batch_step(TrainerState& st, const Vocab& vocab, const Dataset& data,
                         const TrainConfig& cfg, uint64_t seed) {
    const int N = vocab.history_window();
    const long B = cfg.warmup_batch;
    const long n_eps = static_cast<long>(data.episodes.size());
    ModelParams grads = ModelParams::zeros(st.params.dims);
    double loss = 0.0;
    for (long b = 0; b < B; ++b) {
        Rng rng = derive_rng(
            seed, {"warmup", static_cast<uint64_t>(st.global_step), static_cast<uint64_t>(b)});
        const Episode& ep = data.episodes[rng.uniform_int(n_eps)];
        int step = static_cast<int>(rng.uniform_int(ep.length()));
        int tau = static_cast<int>(rng.uniform_int(N + 1));
        loss += warmup_accumulate(st.params, vocab, ep, step, tau, 1.0 / B, grads) / B;
    }
    check_finite(grads);
    TrainConfig wcfg = cfg;
    wcfg.lr = effective_lr(cfg, true);
    apply_update(st.params, grads, wcfg, st.adam);
    return loss;
}

void save_trainer_state(const std::string& path, TrainerState& st, const json& extra) {
    std::vector<TensorView> views = tensor_views(st.params);
    auto add_prefixed = [&](ModelParams& p, const std::string& prefix) {
        for (TensorView v : tensor_views(p)) {
            v.name = prefix + v.name;
            views.push_back(v);
        }
    };
    add_prefixed(st.ref, "ref.");
    add_prefixed(st.adam.m, "adam_m.");
    add_prefixed(st.adam.v, "adam_v.");
    json meta = {{"dims", dims_to_json(st.params.dims)},
                 {"global_step", st.global_step},
                 {"adam_t", st.adam.t}};
    if (!extra.is_null())
        for (auto& [k, v] : extra.items()) meta[k] = v;
    save_tensors(path, meta, views);
}

TrainerState load_trainer_state(const std::string& path, json* meta_out) {
    json meta = peek_meta(path);
    ModelDims dims = dims_from_json(meta.at("dims"));
    TrainerState st;
    st.params = ModelParams::zeros(dims);
    st.ref = ModelParams::zeros(dims);
    st.adam.m = ModelParams::zeros(dims);
    st.adam.v = ModelParams::zeros(dims);
    std::vector<TensorView> views = tensor_views(st.params);
    auto add_prefixed = [&](ModelParams& p, const std::string& prefix) {
        for (TensorView v : tensor_views(p)) {
            v.name = prefix + v.name;
            views.push_back(v);
        }
    };
    add_prefixed(st.ref, "ref.");
    add_prefixed(st.adam.m, "adam_m.");
    add_prefixed(st.adam.v, "adam_v.");
    load_tensors(path, views);
    st.global_step = meta.at("global_step").get<long>();
    st.adam.t = meta.at("adam_t").get<long>();
    if (meta_out) *meta_out = meta;
    return st;
}

namespace {

json metrics_to_json(long g, const StepMetrics& m) {
    json rec = {{"step", g},
                {"phase", "rl"},
                {"lambda", m.lambda},
                {"tau_counts", m.tau_counts},
                {"tau_mean_reward", m.tau_mean_reward},
                {"mean_reward", m.mean_reward},
                {"loss", m.loss},
                {"loss_uncomp", m.loss_uncomp},
                {"loss_comp", m.loss_comp},
                {"align_kl", m.align_kl},
                {"ref_kl", m.ref_kl},
                {"clip_fraction", m.clip_fraction},
                {"batch_sr", m.batch_sr}};
    if (m.short_long_ratio)
        rec["short_long_ratio"] = *m.short_long_ratio;
    else
        rec["short_long_ratio"] = nullptr;
    return rec;
}

}  // namespace

TrainResult train(const RunConfig& rc, const Dataset& data, const std::string& run_dir,
                  const std::string& resume_ckpt, bool force) {
    if (data.episodes.empty()) throw std::runtime_error("train: empty dataset");
    TrainConfig cfg = rc.train;
    cfg.dcs.total_steps = cfg.total_steps;

    fs::create_directories(run_dir);
    const std::string metrics_path = run_dir + "/metrics.jsonl";
    if (fs::exists(metrics_path) && !force)
        throw std::runtime_error("train: " + metrics_path + " exists; pass force to overwrite");
    {
        std::ofstream cfg_out(run_dir + "/config.json", std::ios::trunc);
        cfg_out << config_to_json(rc).dump(2) << "\n";
    }

    Vocab vocab(rc.env, cfg.dcs.window);
    TrainerState st;
    if (!resume_ckpt.empty()) {
        st = load_trainer_state(resume_ckpt);
        if (!(st.params.dims == rc.dims))
            throw std::runtime_error("train: checkpoint dims differ from config");
    } else {
        Rng rng = derive_rng(rc.seed, {"init"});
        st.params = ModelParams::init(rc.dims, rng);
        st.ref = st.params;
        st.adam.m = ModelParams::zeros(rc.dims);
        st.adam.v = ModelParams::zeros(rc.dims);
    }

    const long total = cfg.warmup_steps + cfg.total_steps;
    std::ofstream metrics(metrics_path, std::ios::trunc);
    const long n_eps = static_cast<long>(data.episodes.size());
    for (long g = st.global_step; g < total; ++g) {
        Rng br = derive_rng(rc.seed, {"batch", static_cast<uint64_t>(g)});
        const Episode& ep = data.episodes[br.uniform_int(n_eps)];
        int t = static_cast<int>(br.uniform_int(ep.length()));
        json rec;
        if (g < cfg.warmup_steps) {
            double loss = cfg.warmup_batch > 1
                              ? warmup_batch_step(st, vocab, data, cfg, rc.seed)
                              : warmup_step(st, vocab, ep, t, cfg, rc.seed);
            rec = {{"step", g}, {"phase", "warmup"}, {"loss", loss}};
        } else {
            if (g == cfg.warmup_steps) st.ref = st.params;  // RL-phase reference snapshot
            StepMetrics sm = hcpo_step(st, vocab, ep, t, cfg, g - cfg.warmup_steps, rc.seed);
            rec = metrics_to_json(g, sm);
        }
        st.global_step = g + 1;
        metrics << rec.dump() << "\n";
        metrics.flush();
        if (cfg.checkpoint_every > 0 && st.global_step % cfg.checkpoint_every == 0 &&
            st.global_step != total)
            save_trainer_state(run_dir + "/ckpt_" + std::to_string(st.global_step) + ".bin", st);
    }
    save_trainer_state(run_dir + "/final.bin", st);
    return {run_dir, total};
}

}  // namespace hcpo
