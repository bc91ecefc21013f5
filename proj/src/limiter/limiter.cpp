#include "ibrprot/limiter/limiter.hpp"

#include <algorithm>
#include <stdexcept>

namespace ibrprot::limiter {

std::string_view to_string(PriorityMode m) { return m == PriorityMode::PositiveSeq ? "positive" : "negative"; }

std::pair<SequenceRefs, LimiterReport> limit_and_prioritize(const SequenceRefs& refs, double i_max,
                                                            PriorityMode mode) {
    if (!refs.finite()) throw std::domain_error("limiter: non-finite current reference");
    if (!(i_max > 0.0)) throw std::domain_error("limiter: I_max must be positive");

    const double mp = refs.mag_pos();
    const double mn = refs.mag_neg();
    LimiterReport rep;
    // The tolerance keeps a second pass a bitwise no-op.
    if (mp + mn <= i_max + 1e-12) {
        rep.headroom = std::max(0.0, i_max - mp - mn);
        return {refs, rep};
    }

    const bool pos_first = mode == PriorityMode::PositiveSeq;
    const double m_first = pos_first ? mp : mn;
    const double m_other = pos_first ? mn : mp;
    const double kept = std::min(m_first, i_max);
    const double s_first = m_first > 0.0 ? kept / m_first : 1.0;
    rep.headroom = std::max(0.0, i_max - kept);
    const double s_other = m_other > 0.0 ? std::min(1.0, rep.headroom / m_other) : 1.0;

    rep.scale_pos = pos_first ? s_first : s_other;
    rep.scale_neg = pos_first ? s_other : s_first;
    rep.engaged = rep.scale_pos < 1.0 || rep.scale_neg < 1.0;
    SequenceRefs out{refs.iq_pos * rep.scale_pos, refs.id_pos * rep.scale_pos, refs.iq_neg * rep.scale_neg,
                     refs.id_neg * rep.scale_neg};
    return {out, rep};
}

}  // namespace ibrprot::limiter
