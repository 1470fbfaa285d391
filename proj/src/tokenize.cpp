#include "hcpo/tokenize.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace hcpo {

namespace {

std::string fraction_text(int index, int extent) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.4f", (index + 0.5) / extent);
    return buf;
}

}  // namespace

Vocab::Vocab(const EnvConfig& env, int history_window)
    : env_(env), window_(history_window) {
    coord_x_base_ = kDirBase + 4;
    coord_y_base_ = coord_x_base_ + env.grid_w;
    glyph_base_ = coord_y_base_ + env.grid_h;
    marker_base_ = glyph_base_ + env.glyphs;
    instr_word_base_ = marker_base_ + 10;
    cell_base_ = instr_word_base_ + kNumTaskKinds;
    size_ = cell_base_ + env.widget_kinds * env.colors * env.glyphs;

    strings_.resize(size_);
    strings_[kPad] = "";
    strings_[kEnd] = "";
    strings_[kThinkOpen] = "<think>";
    strings_[kThinkClose] = "</think>";
    strings_[kActionOpen] = "<action>";
    strings_[kActionClose] = "</action>";
    strings_[kFiller] = "ok";
    for (int i = 0; i < kNumActionKinds; ++i) {
        ActionKind k = static_cast<ActionKind>(i);
        std::string name = kind_name(k);
        switch (k) {
            case ActionKind::Click:
            case ActionKind::LongPress: strings_[kKindBase + i] = name + "(start_box='("; break;
            case ActionKind::Type: strings_[kKindBase + i] = name + "(content='"; break;
            case ActionKind::OpenApp: strings_[kKindBase + i] = name + "(app_name='"; break;
            case ActionKind::Scroll: strings_[kKindBase + i] = name + "(direction='"; break;
            default: strings_[kKindBase + i] = name + "()"; break;
        }
    }
    strings_[kComma] = ",";
    strings_[kCloseBox] = ")')";
    strings_[kCloseText] = "')";
    for (int i = 0; i < 4; ++i)
        strings_[kDirBase + i] = direction_name(static_cast<Direction>(i));
    for (int i = 0; i < env.grid_w; ++i)
        strings_[coord_x_base_ + i] = fraction_text(i, env.grid_w);
    for (int i = 0; i < env.grid_h; ++i)
        strings_[coord_y_base_ + i] = fraction_text(i, env.grid_h);
    for (int g = 0; g < env.glyphs; ++g)
        strings_[glyph_base_ + g] = "g" + std::to_string(g);
    static const char* marker_names[10] = {"[click]", "[recall1]", "[recall2]", "[copy2]",
                                           "[scroll]", "[back]", "[home]", "[enter]",
                                           "[finish]", "[pad]"};
    for (int m = 0; m < 10; ++m) strings_[marker_base_ + m] = marker_names[m];
    for (int k = 0; k < kNumTaskKinds; ++k)
        strings_[instr_word_base_ + k] = task_kind_name(static_cast<TaskKind>(k));
    for (int c = cell_base_; c < size_; ++c) strings_[c] = "[cell]";
}

int Vocab::cur_screen_pos() const {
    return instr_slot_len() + window_ * (screen_slot_len() + action_slot_len());
}

int Vocab::response_pos() const { return cur_screen_pos() + screen_slot_len(); }

int Vocab::max_position() const { return response_pos() + 32; }

int Vocab::cell_token(const Cell& c) const {
    int packed = (c.kind * env_.colors + c.color) * env_.glyphs + c.glyph;
    int id = cell_base_ + packed;
    if (c.kind < 0 || c.kind >= env_.widget_kinds || c.color < 0 || c.color >= env_.colors ||
        c.glyph < 0 || c.glyph >= env_.glyphs || id >= size_)
        throw std::out_of_range("VocabularyOverflow: packed cell id out of range");
    return id;
}

int Vocab::banner_token(int sym) const {
    if (sym >= 0 && sym < env_.glyphs) return glyph_base_ + sym;
    int m = sym - env_.glyphs;
    if (m < 0 || m >= 10) throw std::out_of_range("VocabularyOverflow: bad banner symbol");
    return marker_base_ + m;
}

std::vector<int> Vocab::tokenize_action(const Action& a) const {
    std::vector<int> out;
    out.push_back(kKindBase + static_cast<int>(a.kind));
    if (a.has_point()) {
        int col = std::min(env_.grid_w - 1,
                           std::max(0, static_cast<int>(std::lround(a.x * env_.grid_w - 0.5))));
        int row = std::min(env_.grid_h - 1,
                           std::max(0, static_cast<int>(std::lround(a.y * env_.grid_h - 0.5))));
        out.push_back(coord_x_base_ + col);
        out.push_back(kComma);
        out.push_back(coord_y_base_ + row);
        out.push_back(kCloseBox);
    } else if (a.has_text()) {
        std::istringstream ss(a.text);
        std::string word;
        while (ss >> word) {
            if (word.size() < 2 || word[0] != 'g')
                throw std::invalid_argument("tokenize_action: unmapped content word " + word);
            int g = std::stoi(word.substr(1));
            if (g < 0 || g >= env_.glyphs)
                throw std::out_of_range("tokenize_action: glyph out of range");
            out.push_back(glyph_base_ + g);
        }
        out.push_back(kCloseText);
    } else if (a.has_direction()) {
        out.push_back(kDirBase + static_cast<int>(a.direction));
        out.push_back(kCloseText);
    }
    return out;
}

std::vector<int> Vocab::oracle_response(const Action& a) const {
    std::vector<int> out = {kThinkOpen, kFiller, kThinkClose, kActionOpen};
    std::vector<int> body = tokenize_action(a);
    out.insert(out.end(), body.begin(), body.end());
    out.push_back(kActionClose);
    out.push_back(kEnd);
    return out;
}

std::string Vocab::detokenize(std::span<const int> tokens) const {
    std::string out;
    bool prev_glyph = false;
    for (int t : tokens) {
        if (t == kEnd) break;
        if (t < 0 || t >= size_) {  // ids past the word list (model head may be wider)
            out += "?";
            prev_glyph = false;
            continue;
        }
        bool is_glyph = t >= glyph_base_ && t < glyph_base_ + env_.glyphs;
        if (is_glyph && prev_glyph) out += " ";
        out += strings_[t];
        prev_glyph = is_glyph;
    }
    return out;
}

TokenSequence Vocab::encode_context(const StepContext& ctx) const {
    TokenSequence seq;
    auto push = [&](int token, Segment seg, int pos) {
        seq.tokens.push_back(token);
        seq.segments.push_back(seg);
        seq.positions.push_back(pos);
    };

    // instruction: task word + flavor glyphs, padded to the slot length
    {
        std::istringstream ss(ctx.instruction);
        std::string word;
        std::vector<int> toks;
        bool first = true;
        while (ss >> word && static_cast<int>(toks.size()) < instr_slot_len()) {
            if (first) {
                toks.push_back(instr_word_base_ + static_cast<int>(task_kind_from_name(word)));
                first = false;
            } else {
                toks.push_back(glyph_base_ + std::stoi(word.substr(1)));
            }
        }
        while (static_cast<int>(toks.size()) < instr_slot_len()) toks.push_back(kPad);
        for (int i = 0; i < instr_slot_len(); ++i) push(toks[i], Segment::Instr, i);
    }

    int tau = static_cast<int>(ctx.history.size());
    if (tau > window_) throw std::out_of_range("encode_context: history longer than window");
    for (int i = 0; i < tau; ++i) {
        int slot = window_ - tau + i;  // most recent pair lands in the last slot
        int base = instr_slot_len() + slot * (screen_slot_len() + action_slot_len());
        const Screen& scr = *ctx.history[i].first;
        int p = base;
        for (int sym : scr.banner) push(banner_token(sym), Segment::HistVision, p++);
        for (const Cell& c : scr.cells) push(cell_token(c), Segment::HistVision, p++);
        std::vector<int> act = tokenize_action(*ctx.history[i].second);
        act.resize(action_slot_len(), kPad);
        for (int t : act) push(t, Segment::HistAction, p++);
    }
    {
        int p = cur_screen_pos();
        for (int sym : ctx.current->banner) push(banner_token(sym), Segment::CurVision, p++);
        for (const Cell& c : ctx.current->cells) push(cell_token(c), Segment::CurVision, p++);
    }
    return seq;
}

void Vocab::append_response(TokenSequence& seq, std::span<const int> resp_tokens,
                            int resp_base) {
    for (size_t j = 0; j < resp_tokens.size(); ++j) {
        seq.tokens.push_back(resp_tokens[j]);
        seq.segments.push_back(Segment::Response);
        seq.positions.push_back(resp_base + static_cast<int>(j));
    }
}

}  // namespace hcpo
