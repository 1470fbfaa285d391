#pragma once

#include <span>
#include <string>
#include <vector>

#include "hcpo/action.hpp"
#include "hcpo/env.hpp"

namespace hcpo {

enum class Segment { Instr, HistVision, HistAction, CurVision, Response };

struct TokenSequence {
    std::vector<int> tokens;
    std::vector<Segment> segments;
    std::vector<int> positions;
    int size() const { return static_cast<int>(tokens.size()); }
};

// Word-level vocabulary over the toy GUI domain. Every token has a literal
// string form; detokenization is concatenation (with a space between adjacent
// glyph tokens), so the reward engine always scores real response text.
//
// Layout: specials, tags, action starters, punctuation, directions, one
// coordinate token per cell-center fraction on each axis, glyph words, banner
// markers, instruction words, then packed (kind, color, glyph) cell tokens.
class Vocab {
public:
    Vocab(const EnvConfig& env, int history_window);

    static constexpr int kPad = 0;
    static constexpr int kEnd = 1;
    static constexpr int kThinkOpen = 2;
    static constexpr int kThinkClose = 3;
    static constexpr int kActionOpen = 4;
    static constexpr int kActionClose = 5;
    static constexpr int kFiller = 6;
    static constexpr int kKindBase = 7;  // 12 entries, ActionKind order
    static constexpr int kComma = 19;
    static constexpr int kCloseBox = 20;   // ")')"
    static constexpr int kCloseText = 21;  // "')"
    static constexpr int kDirBase = 22;    // 4 entries, Direction order

    int coord_x_base() const { return coord_x_base_; }
    int coord_y_base() const { return coord_y_base_; }
    int glyph_base() const { return glyph_base_; }
    int marker_base() const { return marker_base_; }
    int instr_word_base() const { return instr_word_base_; }
    int cell_base() const { return cell_base_; }
    int size() const { return size_; }

    const EnvConfig& env() const { return env_; }
    int history_window() const { return window_; }

    // fixed position layout
    int instr_slot_len() const { return 4; }
    int screen_slot_len() const { return env_.banner_len + env_.grid_w * env_.grid_h; }
    int action_slot_len() const { return 8; }
    int cur_screen_pos() const;
    int response_pos() const;  // position of the first response token
    int max_position() const;

    const std::string& token_text(int id) const { return strings_[id]; }

    int cell_token(const Cell& c) const;
    int banner_token(int sym) const;

    // canonical token run for an action (unpadded); coordinates snap to the
    // nearest cell-center token
    std::vector<int> tokenize_action(const Action& a) const;

    // think/action-wrapped oracle response, ending with kEnd
    std::vector<int> oracle_response(const Action& a) const;

    std::string detokenize(std::span<const int> tokens) const;

    // Context encoding with reserved history slots: the most recent history
    // pair always sits in the slot adjacent to the current screen, so encodings
    // with different tau agree on every shared position.
    TokenSequence encode_context(const StepContext& ctx) const;

    static void append_response(TokenSequence& seq, std::span<const int> resp_tokens,
                                int resp_base);

private:
    EnvConfig env_;
    int window_;
    int coord_x_base_, coord_y_base_, glyph_base_, marker_base_, instr_word_base_,
        cell_base_, size_;
    std::vector<std::string> strings_;
};

}  // namespace hcpo
