#include "hcpo/env.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>

#include "hcpo/rng.hpp"

namespace hcpo {

namespace {

constexpr const char* kTaskKindNames[kNumTaskKinds] = {"local", "recall1", "recall2", "copy2"};

// glyphs 0..3 double as scroll-direction codes, so cue/target glyphs are drawn
// from [kFirstCueGlyph, glyphs) to keep cue occurrences banner-unique
constexpr int kFirstCueGlyph = 4;

enum class StepPlan { ClickLocal, Scroll, PressBack, PressHome, PressEnter, Finish,
                      Recall1, Recall2, Copy2 };

std::string glyph_word(int g) { return "g" + std::to_string(g); }

int pick_cue_glyph(const EnvConfig& cfg, Rng& rng, const std::set<int>& avoid) {
    int free_count = cfg.glyphs - kFirstCueGlyph;
    for (int g : avoid)
        if (g >= kFirstCueGlyph && g < cfg.glyphs) --free_count;
    if (free_count <= 0)
        throw std::runtime_error("pick_cue_glyph: cue pool exhausted; need more glyphs");
    for (;;) {
        int g = kFirstCueGlyph +
                static_cast<int>(rng.uniform_int(cfg.glyphs - kFirstCueGlyph));
        if (!avoid.count(g)) return g;
    }
}

}  // namespace

const char* task_kind_name(TaskKind k) { return kTaskKindNames[static_cast<int>(k)]; }

TaskKind task_kind_from_name(const std::string& name) {
    std::string norm;
    for (char c : name)
        if (c != '_') norm += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (int i = 0; i < kNumTaskKinds; ++i)
        if (norm == kTaskKindNames[i]) return static_cast<TaskKind>(i);
    throw std::invalid_argument("unknown task kind: " + name);
}

int banner_marker_sym(const EnvConfig& cfg, Marker m) {
    return cfg.glyphs + static_cast<int>(m);
}

bool banner_is_marker(const EnvConfig& cfg, int sym, Marker m) {
    return sym == banner_marker_sym(cfg, m);
}

int cell_at_point(const EnvConfig& cfg, double x, double y) {
    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) return -1;
    int col = std::min(cfg.grid_w - 1, static_cast<int>(x * cfg.grid_w));
    int row = std::min(cfg.grid_h - 1, static_cast<int>(y * cfg.grid_h));
    return row * cfg.grid_w + col;
}

Episode generate_episode(const EnvConfig& cfg, uint64_t seed, TaskKind kind) {
    Rng rng = derive_rng(seed, {"episode", static_cast<int>(kind)});
    int span = cfg.max_len - cfg.min_len + 1;
    int n = cfg.min_len + static_cast<int>(rng.uniform_int(span));
    if ((kind == TaskKind::Recall2 || kind == TaskKind::Copy2) && n < 4) n = 4;

    std::vector<StepPlan> plan(n);
    plan[n - 1] = StepPlan::Finish;
    switch (kind) {
        case TaskKind::Local:
            for (int t = 0; t + 1 < n; ++t) {
                double u = rng.uniform();
                if (u < 0.6) plan[t] = StepPlan::ClickLocal;
                else if (u < 0.8) plan[t] = StepPlan::Scroll;
                else {
                    int p = static_cast<int>(rng.uniform_int(3));
                    plan[t] = p == 0 ? StepPlan::PressBack
                            : p == 1 ? StepPlan::PressHome
                                     : StepPlan::PressEnter;
                }
            }
            break;
        case TaskKind::Recall1:
            plan[0] = StepPlan::ClickLocal;
            for (int t = 1; t + 1 < n; ++t) plan[t] = StepPlan::Recall1;
            break;
        case TaskKind::Recall2:
            plan[0] = plan[1] = StepPlan::ClickLocal;
            for (int t = 2; t + 1 < n; ++t) plan[t] = StepPlan::Recall2;
            break;
        case TaskKind::Copy2:
            plan[0] = plan[1] = StepPlan::ClickLocal;
            for (int t = 2; t + 1 < n; ++t) plan[t] = StepPlan::Copy2;
            break;
    }

    Episode ep;
    ep.id = seed;
    ep.kind = kind;
    {
        int f1 = pick_cue_glyph(cfg, rng, {});
        int f2 = pick_cue_glyph(cfg, rng, {});
        ep.instruction = std::string(task_kind_name(kind)) + " " + glyph_word(f1) +
                         " " + glyph_word(f2);
    }

    const int pad = banner_marker_sym(cfg, Marker::Pad);
    const int ncells = cfg.grid_w * cfg.grid_h;

    for (int t = 0; t < n; ++t) {
        // glyphs used by the previous two banners must not reappear here, so a
        // recall cue is visible only in the banner that carries it
        std::set<int> avoid;
        for (int back = 1; back <= 2; ++back) {
            if (t - back < 0) break;
            for (int s = 1; s < cfg.banner_len; ++s) {
                int sym = ep.screens[t - back].banner[s];
                if (sym < cfg.glyphs) avoid.insert(sym);
            }
        }

        Screen scr;
        scr.banner.assign(cfg.banner_len, pad);
        Marker marker = Marker::Pad;
        switch (plan[t]) {
            case StepPlan::ClickLocal: marker = Marker::Click; break;
            case StepPlan::Scroll: marker = Marker::Scroll; break;
            case StepPlan::PressBack: marker = Marker::PressBack; break;
            case StepPlan::PressHome: marker = Marker::PressHome; break;
            case StepPlan::PressEnter: marker = Marker::PressEnter; break;
            case StepPlan::Finish: marker = Marker::Finish; break;
            case StepPlan::Recall1: marker = Marker::Recall1; break;
            case StepPlan::Recall2: marker = Marker::Recall2; break;
            case StepPlan::Copy2: marker = Marker::Copy2; break;
        }
        scr.banner[0] = banner_marker_sym(cfg, marker);

        if (plan[t] == StepPlan::ClickLocal) {
            int g = pick_cue_glyph(cfg, rng, avoid);
            scr.banner[1] = g;
            avoid.insert(g);
        } else if (plan[t] == StepPlan::Scroll) {
            scr.banner[1] = static_cast<int>(rng.uniform_int(4));  // direction code
        }
        int cue_a = pick_cue_glyph(cfg, rng, avoid);
        avoid.insert(cue_a);
        int cue_b = pick_cue_glyph(cfg, rng, avoid);
        scr.banner[2] = cue_a;
        scr.banner[3] = cue_b;

        // resolve this step's click target / decoy from the banner record
        int target = -1, decoy = -1;
        if (plan[t] == StepPlan::ClickLocal) {
            target = scr.banner[1];
            if (t >= 1) {
                int prev = ep.screens[t - 1].banner[1];
                decoy = (prev < cfg.glyphs && prev >= kFirstCueGlyph)
                            ? prev
                            : ep.screens[t - 1].banner[2];
            }
        } else if (plan[t] == StepPlan::Recall1) {
            target = ep.screens[t - 1].banner[2];
            decoy = t >= 2 ? ep.screens[t - 2].banner[2]
                           : pick_cue_glyph(cfg, rng, {target});
        } else if (plan[t] == StepPlan::Recall2) {
            target = ep.screens[t - 2].banner[2];
            decoy = ep.screens[t - 1].banner[2];
        }

        std::set<int> reserved;
        if (target >= 0) reserved.insert(target);
        if (decoy >= 0) reserved.insert(decoy);
        scr.cells.resize(ncells);
        for (Cell& c : scr.cells) {
            c.kind = static_cast<int>(rng.uniform_int(cfg.widget_kinds));
            if (c.kind == 1) c.kind = 0;  // kind 1 is reserved for candidates
            c.color = static_cast<int>(rng.uniform_int(cfg.colors));
            do {
                c.glyph = static_cast<int>(rng.uniform_int(cfg.glyphs));
            } while (reserved.count(c.glyph));
        }
        if (target >= 0) {
            int ti = static_cast<int>(rng.uniform_int(ncells));
            scr.cells[ti].glyph = target;
            scr.cells[ti].kind = 1;
            if (decoy >= 0) {
                int di;
                do {
                    di = static_cast<int>(rng.uniform_int(ncells));
                } while (di == ti);
                scr.cells[di].glyph = decoy;
                scr.cells[di].kind = 1;
            }
            int row = ti / cfg.grid_w, col = ti % cfg.grid_w;
            // cell centers quantized to the 4-decimal canonical serialization,
            // so oracle actions round-trip losslessly through response text
            double cx = std::round((col + 0.5) / cfg.grid_w * 1e4) / 1e4;
            double cy = std::round((row + 0.5) / cfg.grid_h * 1e4) / 1e4;
            ep.oracle_actions.push_back(Action::click(cx, cy));
        } else if (plan[t] == StepPlan::Scroll) {
            ep.oracle_actions.push_back(
                Action::scroll(static_cast<Direction>(scr.banner[1])));
        } else if (plan[t] == StepPlan::PressBack) {
            ep.oracle_actions.push_back(Action::simple(ActionKind::PressBack));
        } else if (plan[t] == StepPlan::PressHome) {
            ep.oracle_actions.push_back(Action::simple(ActionKind::PressHome));
        } else if (plan[t] == StepPlan::PressEnter) {
            ep.oracle_actions.push_back(Action::simple(ActionKind::PressEnter));
        } else if (plan[t] == StepPlan::Copy2) {
            const Screen& src = ep.screens[t - 2];
            ep.oracle_actions.push_back(Action::type(
                glyph_word(src.banner[2]) + " " + glyph_word(src.banner[3])));
        } else {
            ep.oracle_actions.push_back(Action::simple(ActionKind::Finished));
        }
        ep.screens.push_back(std::move(scr));
    }
    return ep;
}

const Action& oracle_action(const Episode& ep, int t) {
    if (t < 0 || t >= ep.length()) throw std::out_of_range("oracle_action: bad step index");
    return ep.oracle_actions[t];
}

StepContext step_context(const Episode& ep, int t, int tau) {
    if (t < 0 || t >= ep.length()) throw std::out_of_range("step_context: bad step index");
    if (tau < 0) throw std::out_of_range("step_context: negative window");
    StepContext ctx;
    ctx.instruction = ep.instruction;
    ctx.current = &ep.screens[t];
    ctx.window = tau;
    int h = std::min(t, tau);
    for (int i = t - h; i < t; ++i)
        ctx.history.emplace_back(&ep.screens[i], &ep.oracle_actions[i]);
    return ctx;
}

namespace {

using nlohmann::json;

json episode_to_json(const Episode& ep) {
    json j;
    j["id"] = ep.id;
    j["kind"] = task_kind_name(ep.kind);
    j["instruction"] = ep.instruction;
    j["length"] = ep.length();
    json screens = json::array();
    for (const Screen& s : ep.screens) {
        json cells = json::array();
        for (const Cell& c : s.cells) {
            cells.push_back(c.kind);
            cells.push_back(c.color);
            cells.push_back(c.glyph);
        }
        screens.push_back({{"banner", s.banner}, {"cells", cells}});
    }
    j["screens"] = std::move(screens);
    json actions = json::array();
    for (const Action& a : ep.oracle_actions) actions.push_back(serialize_action(a));
    j["actions"] = std::move(actions);
    return j;
}

Episode episode_from_json(const json& j) {
    Episode ep;
    ep.id = j.at("id").get<uint64_t>();
    ep.kind = task_kind_from_name(j.at("kind").get<std::string>());
    ep.instruction = j.at("instruction").get<std::string>();
    for (const json& js : j.at("screens")) {
        Screen s;
        s.banner = js.at("banner").get<std::vector<int>>();
        const json& cells = js.at("cells");
        for (size_t i = 0; i + 3 <= cells.size(); i += 3)
            s.cells.push_back({cells[i].get<int>(), cells[i + 1].get<int>(),
                               cells[i + 2].get<int>()});
        ep.screens.push_back(std::move(s));
    }
    for (const json& ja : j.at("actions")) {
        ActionParseResult r = parse_action(ja.get<std::string>());
        if (!r.ok) throw std::runtime_error("dataset: unparseable action record");
        ep.oracle_actions.push_back(r.action);
    }
    if (ep.oracle_actions.size() != ep.screens.size())
        throw std::runtime_error("dataset: screen/action length mismatch");
    return ep;
}

}  // namespace

void generate_dataset(const std::string& path, const EnvConfig& cfg, uint64_t seed,
                      const std::map<std::string, int>& counts) {
    std::vector<TaskKind> order;
    for (const auto& [name, count] : counts) {
        if (count < 0) throw std::invalid_argument("generate_dataset: negative count");
        TaskKind k = task_kind_from_name(name);
        for (int i = 0; i < count; ++i) order.push_back(k);
    }
    Rng shuffle_rng = derive_rng(seed, {"dataset-order"});
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("generate_dataset: cannot open " + path);
    json manifest = {
        {"schema", 1},
        {"seed", seed},
        {"counts", counts},
        {"grid_w", cfg.grid_w},
        {"grid_h", cfg.grid_h},
        {"widget_kinds", cfg.widget_kinds},
        {"colors", cfg.colors},
        {"glyphs", cfg.glyphs},
        {"min_len", cfg.min_len},
        {"max_len", cfg.max_len},
        {"banner_len", cfg.banner_len},
    };
    out << manifest.dump() << "\n";
    for (size_t i = 0; i < order.size(); ++i) {
        uint64_t ep_seed = derive_rng(seed, {"episode-seed", static_cast<uint64_t>(i)}).next_u64();
        Episode ep = generate_episode(cfg, ep_seed, order[i]);
        out << episode_to_json(ep).dump() << "\n";
    }
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    Dataset ds;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_dataset: empty file");
    json manifest = json::parse(line);
    ds.manifest.schema = manifest.at("schema").get<int>();
    ds.manifest.seed = manifest.at("seed").get<uint64_t>();
    ds.manifest.counts = manifest.at("counts").get<std::map<std::string, int>>();
    ds.manifest.env.grid_w = manifest.at("grid_w").get<int>();
    ds.manifest.env.grid_h = manifest.at("grid_h").get<int>();
    ds.manifest.env.widget_kinds = manifest.at("widget_kinds").get<int>();
    ds.manifest.env.colors = manifest.at("colors").get<int>();
    ds.manifest.env.glyphs = manifest.at("glyphs").get<int>();
    ds.manifest.env.min_len = manifest.at("min_len").get<int>();
    ds.manifest.env.max_len = manifest.at("max_len").get<int>();
    ds.manifest.env.banner_len = manifest.at("banner_len").get<int>();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ds.episodes.push_back(episode_from_json(json::parse(line)));
    }
    return ds;
}

}  // namespace hcpo
