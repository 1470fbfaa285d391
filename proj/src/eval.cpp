#include "hcpo/eval.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "hcpo/reward.hpp"
#include "hcpo/rng.hpp"

namespace hcpo {

bool grounding_hit(const EnvConfig& env, const Action& pred, const Action& gt) {
    if (!pred.has_point() || !gt.has_point()) return false;
    int target = cell_at_point(env, gt.x, gt.y);
    return target >= 0 && cell_at_point(env, pred.x, pred.y) == target;
}

bool step_success(const EnvConfig& env, const Action& pred, const Action& gt) {
    if (pred.kind != gt.kind) return false;
    if (gt.has_point()) return grounding_hit(env, pred, gt);
    if (gt.has_text()) return token_f1(pred.text, gt.text) > 0.5;
    if (gt.has_direction()) return pred.direction == gt.direction;
    return true;
}

EvalReport evaluate(const ModelParams& params, const Dataset& data, const Vocab& vocab,
                    const DropSpec& drop, int tau) {
    if (tau < 0) tau = vocab.history_window();
    EvalReport r;
    r.drop = drop;
    long type_hits = 0, ground_hits = 0, sr_hits = 0;
    for (const Episode& ep : data.episodes) {
        for (int t = 0; t < ep.length(); ++t) {
            TokenSequence seq = vocab.encode_context(step_context(ep, t, tau));
            std::vector<long> counts_full = token_counts(seq, DropSpec::none(), params.dims.layers);
            std::vector<long> counts_drop = token_counts(seq, drop, params.dims.layers);
            r.flops_full += flops_estimate(params.dims.d_model, params.dims.d_ff, counts_full);
            r.flops_drop += flops_estimate(params.dims.d_model, params.dims.d_ff, counts_drop);
            SampledResponse resp = greedy_response(params, seq, params.dims.max_response,
                                                   vocab.response_pos(), drop);
            std::string text = vocab.detokenize(resp.tokens);
            auto parsed = parse_response(text);
            const Action& gt = oracle_action(ep, t);
            r.n_steps += 1;
            if (gt.has_point()) {
                r.n_point_steps += 1;
                if (parsed && grounding_hit(vocab.env(), parsed->action, gt)) ++ground_hits;
            }
            if (parsed && parsed->action.kind == gt.kind) ++type_hits;
            if (parsed && step_success(vocab.env(), parsed->action, gt)) ++sr_hits;
        }
    }
    if (r.n_steps > 0) {
        r.type_acc = static_cast<double>(type_hits) / r.n_steps;
        r.step_sr = static_cast<double>(sr_hits) / r.n_steps;
    }
    if (r.n_point_steps > 0)
        r.grounding_acc = static_cast<double>(ground_hits) / r.n_point_steps;
    return r;
}

namespace {

DropSpec sweep_spec(const std::string& mode, int k) {
    if (mode == "actions") return DropSpec::ahis_at(k);
    if (mode == "images") return DropSpec::vhis_at(k);
    if (mode == "both") return DropSpec::both_at(k);
    throw std::invalid_argument("layer_drop_sweep: unknown mode " + mode);
}

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::string layer_drop_sweep(const ModelParams& params, const Dataset& data, const Vocab& vocab,
                             const std::vector<int>& ks, const std::vector<std::string>& modes) {
    std::string out = "k,mode,sr\n";
    EvalReport nodrop = evaluate(params, data, vocab);
    out += "nodrop,none," + fmt6(nodrop.step_sr) + "\n";
    for (int k : ks) {
        if (k < 0 || k > params.dims.layers)
            throw std::invalid_argument("layer_drop_sweep: k outside [0, L]");
        for (const std::string& mode : modes) {
            EvalReport r = evaluate(params, data, vocab, sweep_spec(mode, k));
            out += std::to_string(k) + "," + mode + "," + fmt6(r.step_sr) + "\n";
        }
    }
    return out;
}

PreferenceReport history_preference_analysis(const ModelParams& params, const Dataset& data,
                                             const Vocab& vocab, int rollouts,
                                             double temperature, uint64_t seed) {
    const int n = vocab.history_window();
    PreferenceReport rep;
    rep.best_tau_hist.assign(n + 1, 0);
    long sample_idx = 0;
    for (const Episode& ep : data.episodes) {
        for (int t = 0; t < ep.length(); ++t, ++sample_idx) {
            const Action& gt = oracle_action(ep, t);
            PrefSample s;
            s.episode_id = ep.id;
            s.step = t;
            s.oracle_kind = gt.kind;
            s.mean_reward.assign(n + 1, 0.0);
            for (int tau = 0; tau <= n; ++tau) {
                TokenSequence seq = vocab.encode_context(step_context(ep, t, tau));
                double sum = 0.0;
                for (int r = 0; r < rollouts; ++r) {
                    Rng rng = derive_rng(seed, {"prefs", static_cast<uint64_t>(sample_idx),
                                                tau, r});
                    SampledResponse resp =
                        sample_response(params, seq, temperature, params.dims.max_response, rng,
                                        vocab.response_pos());
                    sum += total_reward(vocab.detokenize(resp.tokens), gt).total;
                }
                s.mean_reward[tau] = sum / rollouts;
            }
            double mx = s.mean_reward[0], mn = s.mean_reward[0];
            s.best_tau = 0;
            for (int tau = 1; tau <= n; ++tau) {
                if (s.mean_reward[tau] > mx) { mx = s.mean_reward[tau]; s.best_tau = tau; }
                if (s.mean_reward[tau] < mn) mn = s.mean_reward[tau];
            }
            s.gap = mx - mn;
            s.kept = s.gap >= 0.05;
            s.improvement = s.mean_reward[s.best_tau] - s.mean_reward[n];
            if (s.kept)
                rep.best_tau_hist[s.best_tau] += 1;
            else
                rep.discarded += 1;
            rep.samples.push_back(std::move(s));
        }
    }
    return rep;
}

std::string preference_report_csv(const PreferenceReport& r) {
    int n = r.best_tau_hist.empty() ? 0 : static_cast<int>(r.best_tau_hist.size()) - 1;
    std::string out = "episode,step,kind,best_tau,gap,kept,improvement";
    for (int tau = 0; tau <= n; ++tau) out += ",mean_r" + std::to_string(tau);
    out += "\n";
    for (const PrefSample& s : r.samples) {
        out += std::to_string(s.episode_id) + "," + std::to_string(s.step) + "," +
               kind_name(s.oracle_kind) + "," + std::to_string(s.best_tau) + "," +
               fmt6(s.gap) + "," + (s.kept ? "1" : "0") + "," + fmt6(s.improvement);
        for (double mr : s.mean_reward) out += "," + fmt6(mr);
        out += "\n";
    }
    return out;
}

std::vector<std::pair<long, std::optional<double>>> short_long_ratio(
    const std::string& metrics_path) {
    std::ifstream is(metrics_path);
    if (!is) throw std::runtime_error("short_long_ratio: cannot open " + metrics_path);
    std::vector<std::pair<long, std::optional<double>>> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line);
        if (rec.value("phase", "") != "rl") continue;
        long step = rec.at("step").get<long>();
        std::vector<long> counts = rec.at("tau_counts").get<std::vector<long>>();
        std::vector<double> means = rec.at("tau_mean_reward").get<std::vector<double>>();
        int n = static_cast<int>(counts.size()) - 1;
        double short_sum = 0.0;
        long short_n = 0;
        for (int tau = 0; tau < n; ++tau) {
            short_sum += means[tau] * counts[tau];
            short_n += counts[tau];
        }
        std::optional<double> ratio;
        if (short_n > 0 && counts[n] > 0 && means[n] != 0.0)
            ratio = (short_sum / short_n) / means[n];
        out.emplace_back(step, ratio);
    }
    return out;
}

std::string short_long_ratio_csv(
    const std::vector<std::pair<long, std::optional<double>>>& series) {
    std::string out = "step,ratio\n";
    for (const auto& [step, ratio] : series) {
        out += std::to_string(step) + ",";
        if (ratio) out += fmt6(*ratio);
        out += "\n";
    }
    return out;
}

}  // namespace hcpo
