#pragma once

#include "ibrprot/control/sequence_refs.hpp"

#include <string_view>
#include <utility>

namespace ibrprot::limiter {

using control::SequenceRefs;

enum class PriorityMode { PositiveSeq, NegativeSeq };

std::string_view to_string(PriorityMode m);

struct LimiterReport {
    bool engaged = false;
    double scale_pos = 1.0;
    double scale_neg = 1.0;
    double headroom = 0.0;  // pu left for the non-prioritized sequence
};

/// Caps M+ + M- (the worst-phase peak bound) at i_max. The prioritized sequence
/// keeps up to i_max, the other gets what is left; each keeps its angle.
/// Throws std::domain_error on non-finite refs or i_max <= 0.
std::pair<SequenceRefs, LimiterReport> limit_and_prioritize(const SequenceRefs& refs, double i_max,
                                                            PriorityMode mode);

}  // namespace ibrprot::limiter
