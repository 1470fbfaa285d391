#include "hcpo/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

namespace hcpo {

int format_reward(const std::string& text, const TagConfig& tags) {
    return validate_format(text, tags) ? 1 : 0;
}

int type_reward(const Action& pred, const Action& gt) {
    return pred.kind == gt.kind ? 1 : 0;
}

namespace {

std::vector<std::string> tokenize_lower(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) {
        std::transform(tok.begin(), tok.end(), tok.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        out.push_back(tok);
    }
    return out;
}

}  // namespace

double token_f1(const std::string& pred, const std::string& gt) {
    std::vector<std::string> p = tokenize_lower(pred);
    std::vector<std::string> g = tokenize_lower(gt);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;

    std::map<std::string, int> counts;
    for (const auto& t : g) counts[t]++;
    int overlap = 0;
    for (const auto& t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            overlap++;
            it->second--;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / p.size();
    double recall = static_cast<double>(overlap) / g.size();
    return 2.0 * precision * recall / (precision + recall);
}

double value_reward(const Action& pred, const Action& gt) {
    if (pred.kind != gt.kind) return 0.0;
    if (gt.has_point()) {
        double d = std::hypot(pred.x - gt.x, pred.y - gt.y);
        return std::max(0.0, 1.0 - d);
    }
    if (gt.has_text()) return token_f1(pred.text, gt.text) > 0.5 ? 1.0 : 0.0;
    if (gt.has_direction()) return pred.direction == gt.direction ? 1.0 : 0.0;
    return 1.0;
}

RewardBreakdown total_reward(const std::string& response, const Action& gt,
                             const TagConfig& tags) {
    RewardBreakdown r;
    std::optional<ParsedResponse> parsed = parse_response(response, tags);
    r.format = format_reward(response, tags);
    if (parsed) {
        r.type = type_reward(parsed->action, gt);
        r.value = value_reward(parsed->action, gt);
    }
    r.total = r.format + r.type + r.value;
    return r;
}

}  // namespace hcpo
