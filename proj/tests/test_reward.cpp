#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>
#include <vector>

#include "hcpo/action.hpp"
#include "hcpo/reward.hpp"
#include "hcpo/rng.hpp"

using namespace hcpo;

namespace {

// ---- independent brute-force scorer: a straight transcription of the reward
// rules, sharing no code with the engine ----

struct OracleAction {
    bool ok = false;
    std::string kind;
    double x = 0, y = 0;
    std::string text;
    std::string dir;
};

bool oracle_num(const std::string& s, double& out) {
    std::string t = s;
    size_t b = t.find_first_not_of(" \t\r\n");
    size_t e = t.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) return false;
    t = t.substr(b, e - b + 1);
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v)) return false;
    out = std::min(1.0, std::max(0.0, v));
    return true;
}

OracleAction oracle_parse(const std::string& raw) {
    OracleAction a;
    static const std::regex point_re(
        R"(^\s*(click|long_press)\(start_box='\s*\(([^,()]*),([^,()]*)\)\s*'\)\s*$)");
    static const std::regex text_re(R"(^\s*(type)\(content='([^']*)'\)\s*$)");
    static const std::regex app_re(R"(^\s*(open_app)\(app_name='([^']*)'\)\s*$)");
    static const std::regex scroll_re(R"(^\s*(scroll)\(direction='\s*(up|down|left|right)\s*'\)\s*$)");
    static const std::regex simple_re(
        R"(^\s*(press_back|press_home|press_enter|press_recent|wait|finished|impossible)\(\s*\)\s*$)");
    std::smatch m;
    if (std::regex_match(raw, m, point_re)) {
        if (!oracle_num(m[2], a.x) || !oracle_num(m[3], a.y)) return a;
        a.kind = m[1];
        a.ok = true;
    } else if (std::regex_match(raw, m, text_re) || std::regex_match(raw, m, app_re)) {
        a.kind = m[1];
        a.text = m[2];
        a.ok = true;
    } else if (std::regex_match(raw, m, scroll_re)) {
        a.kind = m[1];
        a.dir = m[2];
        a.ok = true;
    } else if (std::regex_match(raw, m, simple_re)) {
        a.kind = m[1];
        a.ok = true;
    }
    return a;
}

bool oracle_extract(const std::string& response, std::string& action_text) {
    static const std::regex shape_re(
        R"(^\s*<think>([\s\S]*?)</think>\s*<action>([\s\S]*?)</action>\s*$)");
    std::smatch m;
    if (!std::regex_match(response, m, shape_re)) return false;
    static const std::regex tag_re(R"(</?(?:think|action)>)");
    if (std::regex_search(m[1].first, m[1].second, tag_re)) return false;
    if (std::regex_search(m[2].first, m[2].second, tag_re)) return false;
    action_text = m[2];
    return true;
}

std::vector<std::string> oracle_words(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string w;
    while (ss >> w) {
        for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.push_back(w);
    }
    return out;
}

double oracle_f1(const std::string& p, const std::string& g) {
    std::vector<std::string> pw = oracle_words(p), gw = oracle_words(g);
    if (pw.empty() && gw.empty()) return 1.0;
    if (pw.empty() || gw.empty()) return 0.0;
    std::sort(pw.begin(), pw.end());
    std::sort(gw.begin(), gw.end());
    std::vector<std::string> both;
    std::set_intersection(pw.begin(), pw.end(), gw.begin(), gw.end(), std::back_inserter(both));
    if (both.empty()) return 0.0;
    double precision = static_cast<double>(both.size()) / pw.size();
    double recall = static_cast<double>(both.size()) / gw.size();
    return 2.0 * precision * recall / (precision + recall);
}

std::string gt_kind_name(const Action& a) { return kind_name(a.kind); }

RewardBreakdown oracle_score(const std::string& response, const Action& gt) {
    RewardBreakdown r;
    std::string action_text;
    bool shaped = oracle_extract(response, action_text);
    OracleAction pred;
    if (shaped) pred = oracle_parse(action_text);
    r.format = (shaped && pred.ok) ? 1 : 0;
    if (shaped && pred.ok) {
        r.type = pred.kind == gt_kind_name(gt) ? 1 : 0;
        if (r.type == 1) {
            if (gt.has_point()) {
                double d = std::hypot(pred.x - gt.x, pred.y - gt.y);
                r.value = std::max(0.0, 1.0 - d);
            } else if (gt.has_text()) {
                r.value = oracle_f1(pred.text, gt.text) > 0.5 ? 1.0 : 0.0;
            } else if (gt.has_direction()) {
                r.value = pred.dir == direction_name(gt.direction) ? 1.0 : 0.0;
            } else {
                r.value = 1.0;
            }
        }
    }
    r.total = r.format + r.type + r.value;
    return r;
}

Action random_gt(Rng& rng) {
    ActionKind k = static_cast<ActionKind>(rng.uniform_int(kNumActionKinds));
    switch (k) {
        case ActionKind::Click:
            return Action::click(rng.uniform_int(10001) / 1e4, rng.uniform_int(10001) / 1e4);
        case ActionKind::LongPress:
            return Action::long_press(rng.uniform_int(10001) / 1e4,
                                      rng.uniform_int(10001) / 1e4);
        case ActionKind::Type:
            return Action::type("g" + std::to_string(rng.uniform_int(16)) + " g" +
                                std::to_string(rng.uniform_int(16)));
        case ActionKind::OpenApp:
            return Action::open_app("app" + std::to_string(rng.uniform_int(4)));
        case ActionKind::Scroll:
            return Action::scroll(static_cast<Direction>(rng.uniform_int(4)));
        default:
            return Action::simple(k);
    }
}

std::string random_response(Rng& rng) {
    Action a = random_gt(rng);
    std::string body = serialize_action(a);
    switch (rng.uniform_int(10)) {
        case 0: return "";
        case 1: return body;  // bare action, no tags
        case 2: return "<action>" + body + "</action>";
        case 3: return "<action>" + body + "</action><think>x</think>";  // reversed
        case 4: return "<think>x</think> stray <action>" + body + "</action>";
        case 5: return "<think>x</think><action>" + body + "</action> stray";
        case 6: return "<think>x</think><action>not_an_action(1)</action>";
        case 7: return "<think>x</think><action>click(start_box='(oops,0.2)')</action>";
        case 8: return "<think>x</think><action>" + body + "</action>";
        default: return " <think>hmm</think>\n<action>" + body + "</action> ";
    }
}

}  // namespace

TEST_SUITE("reward") {

TEST_CASE("token_f1 worked examples") {
    CHECK(token_f1("hello world", "hello there world") == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(token_f1("same text", "same text") == 1.0);
    CHECK(token_f1("aa bb", "cc dd") == 0.0);
    CHECK(token_f1("", "") == 1.0);
    CHECK(token_f1("a", "") == 0.0);
    CHECK(token_f1("HeLLo", "hello") == 1.0);
}

TEST_CASE("value_reward decision table") {
    CHECK(value_reward(Action::click(0.6, 0.8), Action::click(0.3, 0.4)) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(value_reward(Action::click(0, 0), Action::click(1, 1)) == 0.0);  // clamped
    CHECK(value_reward(Action::simple(ActionKind::PressHome),
                       Action::simple(ActionKind::PressHome)) == 1.0);
    CHECK(value_reward(Action::scroll(Direction::Up), Action::scroll(Direction::Up)) == 1.0);
    CHECK(value_reward(Action::scroll(Direction::Up), Action::scroll(Direction::Down)) == 0.0);
    // kinds differ -> 0, even with matching points
    CHECK(value_reward(Action::long_press(0.5, 0.5), Action::click(0.5, 0.5)) == 0.0);
    // F1 exactly 0.5 fails the strict > 0.5 gate
    CHECK(token_f1("a b", "a c") == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(value_reward(Action::type("a b"), Action::type("a c")) == 0.0);
}

TEST_CASE("type_reward ignores values") {
    CHECK(type_reward(Action::type("a"), Action::type("b")) == 1);
    CHECK(type_reward(Action::scroll(Direction::Up), Action::click(0.5, 0.5)) == 0);
}

TEST_CASE("total_reward decision table") {
    Action gt = Action::click(0.25, 0.75);
    std::string good = "<think>t</think><action>" + serialize_action(gt) + "</action>";
    RewardBreakdown r = total_reward(good, gt);
    CHECK(r.total == 3.0);

    RewardBreakdown wrong_kind = total_reward("<think>t</think><action>wait()</action>", gt);
    CHECK(wrong_kind.format == 1.0);
    CHECK(wrong_kind.type == 0.0);
    CHECK(wrong_kind.value == 0.0);
    CHECK(wrong_kind.total == 1.0);

    CHECK(total_reward(serialize_action(gt), gt).total == 0.0);  // tags missing
    CHECK(total_reward("", gt).total == 0.0);
}

TEST_CASE("components stay in range and value implies type") {
    Rng rng = derive_rng(21, {"reward-range"});
    for (int i = 0; i < 300; ++i) {
        Action gt = random_gt(rng);
        RewardBreakdown r = total_reward(random_response(rng), gt);
        CHECK(r.format >= 0.0); CHECK(r.format <= 1.0);
        CHECK(r.type >= 0.0); CHECK(r.type <= 1.0);
        CHECK(r.value >= 0.0); CHECK(r.value <= 1.0);
        CHECK(r.total == r.format + r.type + r.value);
        CHECK(r.total <= 3.0);
        if (r.value > 0.0) CHECK(r.type == 1.0);
    }
}

TEST_CASE("monotonicity: moving a click radially away never raises the value") {
    Action gt = Action::click(0.4, 0.6);
    double prev = 1.0;
    for (int i = 0; i <= 20; ++i) {
        double t = i / 20.0;
        Action pred = Action::click(0.4 + t * 0.55, 0.6 - t * 0.55);
        double v = value_reward(pred, gt);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("brute-force oracle agrees exactly on 1000 randomized pairs") {
    Rng rng = derive_rng(22, {"reward-oracle"});
    for (int i = 0; i < 1000; ++i) {
        Action gt = random_gt(rng);
        std::string resp = random_response(rng);
        RewardBreakdown engine = total_reward(resp, gt);
        RewardBreakdown oracle = oracle_score(resp, gt);
        CHECK(engine.format == oracle.format);
        CHECK(engine.type == oracle.type);
        CHECK(engine.value == oracle.value);
        CHECK(engine.total == oracle.total);
    }
}

}  // TEST_SUITE
