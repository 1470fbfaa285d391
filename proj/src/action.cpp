#include "hcpo/action.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace hcpo {

namespace {

constexpr std::array<const char*, kNumActionKinds> kKindNames = {
    "click",      "long_press", "type",        "scroll",
    "open_app",   "press_back", "press_home",  "press_enter",
    "press_recent", "wait",     "finished",    "impossible",
};

constexpr std::array<const char*, 4> kDirectionNames = {"up", "down", "left", "right"};

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool parse_fraction(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    std::string buf(s);
    char* end = nullptr;
    double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size()) return false;
    if (!std::isfinite(v)) return false;
    out = clamp01(v);
    return true;
}

ActionParseResult fail(ParseErrorCode code, std::string fragment) {
    ActionParseResult r;
    r.ok = false;
    r.code = code;
    r.fragment = std::move(fragment);
    return r;
}

ActionParseResult success(Action a) {
    ActionParseResult r;
    r.ok = true;
    r.action = std::move(a);
    return r;
}

// Extracts the payload of an argument shaped like  key='payload'  inside the
// parentheses; returns false when the wrapper does not match.
bool unwrap_arg(std::string_view arg, std::string_view key, std::string_view& payload) {
    std::string prefix = std::string(key) + "='";
    if (arg.size() < prefix.size() + 1) return false;
    if (arg.substr(0, prefix.size()) != prefix) return false;
    if (arg.back() != '\'') return false;
    payload = arg.substr(prefix.size(), arg.size() - prefix.size() - 1);
    return true;
}

}  // namespace

const char* kind_name(ActionKind k) { return kKindNames[static_cast<int>(k)]; }
const char* direction_name(Direction d) { return kDirectionNames[static_cast<int>(d)]; }

Action Action::click(double x, double y) {
    Action a;
    a.kind = ActionKind::Click;
    a.x = clamp01(x);
    a.y = clamp01(y);
    return a;
}

Action Action::long_press(double x, double y) {
    Action a = click(x, y);
    a.kind = ActionKind::LongPress;
    return a;
}

Action Action::type(std::string content) {
    Action a;
    a.kind = ActionKind::Type;
    a.text = std::move(content);
    return a;
}

Action Action::open_app(std::string name) {
    Action a;
    a.kind = ActionKind::OpenApp;
    a.text = std::move(name);
    return a;
}

Action Action::scroll(Direction d) {
    Action a;
    a.kind = ActionKind::Scroll;
    a.direction = d;
    return a;
}

Action Action::simple(ActionKind k) {
    Action a;
    a.kind = k;
    return a;
}

bool Action::operator==(const Action& other) const {
    if (kind != other.kind) return false;
    if (has_point()) return std::abs(x - other.x) < 1e-9 && std::abs(y - other.y) < 1e-9;
    if (has_text()) return text == other.text;
    if (has_direction()) return direction == other.direction;
    return true;
}

ActionParseResult parse_action(const std::string& text) {
    std::string_view s = trim(text);
    size_t open = s.find('(');
    if (open == std::string_view::npos || s.back() != ')')
        return fail(ParseErrorCode::UnknownKind, std::string(s));
    std::string_view name = s.substr(0, open);
    std::string_view arg = s.substr(open + 1, s.size() - open - 2);

    int kind_idx = -1;
    for (int i = 0; i < kNumActionKinds; ++i)
        if (name == kKindNames[i]) { kind_idx = i; break; }
    if (kind_idx < 0) return fail(ParseErrorCode::UnknownKind, std::string(name));
    ActionKind kind = static_cast<ActionKind>(kind_idx);

    switch (kind) {
        case ActionKind::Click:
        case ActionKind::LongPress: {
            std::string_view payload;
            if (arg.empty()) return fail(ParseErrorCode::MissingValue, std::string(name));
            if (!unwrap_arg(arg, "start_box", payload))
                return fail(ParseErrorCode::MalformedValue, std::string(arg));
            payload = trim(payload);
            if (payload.size() < 2 || payload.front() != '(' || payload.back() != ')')
                return fail(ParseErrorCode::MalformedValue, std::string(payload));
            std::string_view inner = payload.substr(1, payload.size() - 2);
            size_t comma = inner.find(',');
            if (comma == std::string_view::npos)
                return fail(ParseErrorCode::MalformedValue, std::string(inner));
            double x, y;
            if (!parse_fraction(inner.substr(0, comma), x) ||
                !parse_fraction(inner.substr(comma + 1), y))
                return fail(ParseErrorCode::MalformedValue, std::string(inner));
            Action a = Action::click(x, y);
            a.kind = kind;
            return success(a);
        }
        case ActionKind::Type:
        case ActionKind::OpenApp: {
            std::string_view payload;
            const char* key = kind == ActionKind::Type ? "content" : "app_name";
            if (arg.empty()) return fail(ParseErrorCode::MissingValue, std::string(name));
            if (!unwrap_arg(arg, key, payload))
                return fail(ParseErrorCode::MalformedValue, std::string(arg));
            Action a;
            a.kind = kind;
            a.text = std::string(payload);
            return success(a);
        }
        case ActionKind::Scroll: {
            std::string_view payload;
            if (arg.empty()) return fail(ParseErrorCode::MissingValue, std::string(name));
            if (!unwrap_arg(arg, "direction", payload))
                return fail(ParseErrorCode::MalformedValue, std::string(arg));
            payload = trim(payload);
            for (int i = 0; i < 4; ++i)
                if (payload == kDirectionNames[i])
                    return success(Action::scroll(static_cast<Direction>(i)));
            return fail(ParseErrorCode::MalformedValue, std::string(payload));
        }
        default: {
            if (!trim(arg).empty())
                return fail(ParseErrorCode::MalformedValue, std::string(arg));
            return success(Action::simple(kind));
        }
    }
}

std::string serialize_action(const Action& a) {
    char buf[96];
    switch (a.kind) {
        case ActionKind::Click:
        case ActionKind::LongPress:
            std::snprintf(buf, sizeof(buf), "%s(start_box='(%.4f,%.4f)')",
                          kind_name(a.kind), a.x, a.y);
            return buf;
        case ActionKind::Type:
            return "type(content='" + a.text + "')";
        case ActionKind::OpenApp:
            return "open_app(app_name='" + a.text + "')";
        case ActionKind::Scroll:
            return std::string("scroll(direction='") + direction_name(a.direction) + "')";
        default:
            return std::string(kind_name(a.kind)) + "()";
    }
}

namespace {

struct TagSplit {
    std::string think;
    std::string action;
    bool ok = false;
};

TagSplit split_blocks(const std::string& text, const TagConfig& tags) {
    TagSplit out;
    const std::string think_open = "<" + tags.think + ">";
    const std::string think_close = "</" + tags.think + ">";
    const std::string action_open = "<" + tags.action + ">";
    const std::string action_close = "</" + tags.action + ">";

    std::string_view s = trim(text);
    if (s.substr(0, think_open.size()) != think_open) return out;
    s.remove_prefix(think_open.size());
    size_t tc = s.find(think_close);
    if (tc == std::string_view::npos) return out;
    std::string_view think = s.substr(0, tc);
    s.remove_prefix(tc + think_close.size());
    std::string_view between = s;
    size_t ao = between.find(action_open);
    if (ao == std::string_view::npos) return out;
    if (!trim(between.substr(0, ao)).empty()) return out;
    s.remove_prefix(ao + action_open.size());
    size_t ac = s.find(action_close);
    if (ac == std::string_view::npos) return out;
    std::string_view action = s.substr(0, ac);
    std::string_view tail = s.substr(ac + action_close.size());
    if (!trim(tail).empty()) return out;

    // exactly one block of each: no tag may reappear inside any region
    for (std::string_view region : {think, action})
        for (const std::string* tag : {&think_open, &think_close, &action_open, &action_close})
            if (region.find(*tag) != std::string_view::npos) return out;

    out.think = std::string(think);
    out.action = std::string(action);
    out.ok = true;
    return out;
}

}  // namespace

bool validate_format(const std::string& text, const TagConfig& tags) {
    TagSplit split = split_blocks(text, tags);
    if (!split.ok) return false;
    return parse_action(split.action).ok;
}

std::optional<ParsedResponse> parse_response(const std::string& text, const TagConfig& tags) {
    TagSplit split = split_blocks(text, tags);
    if (!split.ok) return std::nullopt;
    ActionParseResult parsed = parse_action(split.action);
    if (!parsed.ok) return std::nullopt;
    return ParsedResponse{split.think, parsed.action};
}

}  // namespace hcpo
