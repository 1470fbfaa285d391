#pragma once

#include <optional>
#include <string>

namespace hcpo {

enum class ActionKind {
    Click,
    LongPress,
    Type,
    Scroll,
    OpenApp,
    PressBack,
    PressHome,
    PressEnter,
    PressRecent,
    Wait,
    Finished,
    Impossible,
};

enum class Direction { Up, Down, Left, Right };

constexpr int kNumActionKinds = 12;

const char* kind_name(ActionKind k);        // "click", "press_back", ...
const char* direction_name(Direction d);

// Discriminated GUI action. Click/LongPress carry a point (normalized screen
// fractions, clamped to [0,1]); Type/OpenApp carry text; Scroll carries a
// direction; everything else carries no value.
struct Action {
    ActionKind kind = ActionKind::Wait;
    double x = 0.0, y = 0.0;
    std::string text;
    Direction direction = Direction::Down;

    static Action click(double x, double y);
    static Action long_press(double x, double y);
    static Action type(std::string content);
    static Action open_app(std::string name);
    static Action scroll(Direction d);
    static Action simple(ActionKind k);  // no-value kinds only

    bool has_point() const { return kind == ActionKind::Click || kind == ActionKind::LongPress; }
    bool has_text() const { return kind == ActionKind::Type || kind == ActionKind::OpenApp; }
    bool has_direction() const { return kind == ActionKind::Scroll; }

    bool operator==(const Action& other) const;
};

enum class ParseErrorCode { UnknownKind, MalformedValue, MissingValue };

struct ActionParseResult {
    bool ok = false;
    Action action;
    ParseErrorCode code = ParseErrorCode::UnknownKind;
    std::string fragment;  // the offending piece of text
};

struct TagConfig {
    std::string think = "think";
    std::string action = "action";
};

struct ParsedResponse {
    std::string think;
    Action action;
};

// Parses the contents of an action block, e.g. "click(start_box='(0.5,0.5)')".
// Coordinates are parsed as decimal fractions and clamped to [0,1].
ActionParseResult parse_action(const std::string& text);

// Canonical serialization; parse_action(serialize_action(a)) == a with
// coordinates printed to 4 decimals.
std::string serialize_action(const Action& a);

// True iff text is exactly one <think>...</think> block followed by one
// <action>...</action> block, whitespace-only padding allowed outside, and the
// action block parses under the grammar.
bool validate_format(const std::string& text, const TagConfig& tags = {});

// Full parse of a well-formed response; nullopt when validate_format fails.
std::optional<ParsedResponse> parse_response(const std::string& text, const TagConfig& tags = {});

}  // namespace hcpo
