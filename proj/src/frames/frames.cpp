#include "ibrprot/frames/frames.hpp"

#include <cmath>
#include <numbers>

namespace ibrprot::frames {

namespace {

const cplx a_op = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
const cplx a2_op = a_op * a_op;

}  // namespace

cplx space_vector(const ThreePhaseSample& abc) { return (2.0 / 3.0) * (abc[0] + a_op * abc[1] + a2_op * abc[2]); }

QdFrame park(const ThreePhaseSample& abc, double theta) {
    const double zero = (abc[0] + abc[1] + abc[2]) / 3.0;
    return QdFrame::from_packed(to_frame(space_vector(abc), theta), theta, zero);
}

ThreePhaseSample phases_of(cplx s) { return {s.real(), (s * a2_op).real(), (s * a_op).real()}; }

ThreePhaseSample inverse_park(const QdFrame& qd) {
    auto x = phases_of(from_frame(qd.packed(), qd.theta));
    for (auto& v : x) v += qd.zero;
    return x;
}

DdsrfOutput ddsrf_step(DdsrfState& st, const ThreePhaseSample& abc, double theta, double h, double w_nom) {
    const double wc = st.cutoff > 0.0 ? st.cutoff : w_nom / std::numbers::sqrt2;
    const double alpha = -std::expm1(-wc * h);
    const cplx s = space_vector(abc);
    const cplx rot2 = std::polar(1.0, 2.0 * theta);
    const cplx pos = to_frame(s, theta) - st.neg_filtered * std::conj(rot2);
    const cplx neg = to_frame(s, -theta) - st.pos_filtered * rot2;
    st.pos_filtered += alpha * (pos - st.pos_filtered);
    st.neg_filtered += alpha * (neg - st.neg_filtered);
    return {QdFrame::from_packed(pos, theta), QdFrame::from_packed(neg, -theta)};
}

SequenceSet fortescue(cplx ia, cplx ib, cplx ic) {
    return {(ia + ib + ic) / 3.0, (ia + a_op * ib + a2_op * ic) / 3.0, (ia + a2_op * ib + a_op * ic) / 3.0};
}

std::array<cplx, 3> inverse_fortescue(const SequenceSet& s) {
    return {s.i0 + s.i1 + s.i2, s.i0 + a2_op * s.i1 + a_op * s.i2, s.i0 + a_op * s.i1 + a2_op * s.i2};
}

}  // namespace ibrprot::frames
