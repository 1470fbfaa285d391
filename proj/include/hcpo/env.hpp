#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hcpo/action.hpp"

namespace hcpo {

struct EnvConfig {
    int grid_w = 6;
    int grid_h = 6;
    int widget_kinds = 4;
    int colors = 6;
    int glyphs = 16;
    int min_len = 3;
    int max_len = 6;
    int banner_len = 4;  // fixed layout: [marker, payload, cue_a, cue_b]
};

enum class TaskKind { Local, Recall1, Recall2, Copy2 };
constexpr int kNumTaskKinds = 4;
const char* task_kind_name(TaskKind k);
TaskKind task_kind_from_name(const std::string& name);

// Banner symbols: values in [0, glyphs) are glyphs; glyphs + Marker::X are
// step markers. The marker in slot 0 announces what the current step asks for.
enum class Marker {
    Click = 0,   // click the cell showing the slot-1 glyph
    Recall1,     // click the cell showing the cue glyph from one screen back
    Recall2,     // click the cell showing the cue glyph from two screens back
    Copy2,       // type the cue glyph pair from two screens back
    Scroll,      // scroll in the direction encoded by the slot-1 glyph (0..3)
    PressBack,
    PressHome,
    PressEnter,
    Finish,
    Pad,
};

struct Cell {
    int kind = 0;
    int color = 0;
    int glyph = 0;
};

struct Screen {
    std::vector<Cell> cells;    // row-major, grid_w * grid_h entries
    std::vector<int> banner;    // banner_len symbols
};

struct Episode {
    uint64_t id = 0;
    TaskKind kind = TaskKind::Local;
    std::string instruction;
    std::vector<Screen> screens;
    std::vector<Action> oracle_actions;
    int length() const { return static_cast<int>(screens.size()); }
};

struct StepContext {
    std::string instruction;
    const Screen* current = nullptr;
    std::vector<std::pair<const Screen*, const Action*>> history;  // chronological
    int window = 0;  // tau
};

int banner_marker_sym(const EnvConfig& cfg, Marker m);
bool banner_is_marker(const EnvConfig& cfg, int sym, Marker m);

// Deterministic in (seed, kind). Recall2/Copy2 cues live only in the banner of
// the screen two steps before the step that consumes them.
Episode generate_episode(const EnvConfig& cfg, uint64_t seed, TaskKind kind);

const Action& oracle_action(const Episode& ep, int t);

StepContext step_context(const Episode& ep, int t, int tau);

// Index of the grid cell containing the point, or -1 when out of range.
int cell_at_point(const EnvConfig& cfg, double x, double y);

struct DatasetManifest {
    int schema = 1;
    uint64_t seed = 0;
    std::map<std::string, int> counts;
    EnvConfig env;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<Episode> episodes;
};

// Line-delimited UTF-8 records; first line is the manifest. Byte-deterministic
// in (cfg, seed, counts).
void generate_dataset(const std::string& path, const EnvConfig& cfg, uint64_t seed,
                      const std::map<std::string, int>& counts);
Dataset load_dataset(const std::string& path);

}  // namespace hcpo
