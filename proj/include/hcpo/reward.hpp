#pragma once

#include "hcpo/action.hpp"

namespace hcpo {

// r = r^f + r^t + r^v with each component in its declared range.
struct RewardBreakdown {
    double format = 0.0;  // {0,1}
    double type = 0.0;    // {0,1}
    double value = 0.0;   // [0,1]
    double total = 0.0;   // format + type + value
};

int format_reward(const std::string& text, const TagConfig& tags = {});

int type_reward(const Action& pred, const Action& gt);

// Bag-of-tokens F1 after lowercasing and whitespace tokenization.
// Both empty -> 1; exactly one empty -> 0.
double token_f1(const std::string& pred, const std::string& gt);

// 0 when kinds differ. No-value kinds -> 1; textual kinds -> 1 iff F1 > 0.5;
// scroll -> 1 iff directions equal; point kinds -> max(0, 1 - d) with d the
// Euclidean distance between normalized points.
double value_reward(const Action& pred, const Action& gt);

// Scores a raw response text against the ground-truth action. An unparseable
// action block gives type = value = 0 (and format 0, since format requires a
// parseable block).
RewardBreakdown total_reward(const std::string& response, const Action& gt,
                             const TagConfig& tags = {});

}  // namespace hcpo
