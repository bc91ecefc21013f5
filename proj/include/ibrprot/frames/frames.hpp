#pragma once

#include <array>
#include <complex>

namespace ibrprot::frames {

using cplx = std::complex<double>;
using ThreePhaseSample = std::array<double, 3>;

/// Amplitude-invariant rotating-frame components. The d axis sits at `theta`,
/// the q axis lags it by 90 degrees, so a lagging current has positive q.
struct QdFrame {
    double q = 0.0;
    double d = 0.0;
    double theta = 0.0;
    double zero = 0.0;

    /// Packed as d - jq. Products of packed vectors give P + jQ directly:
    /// v * conj(i) = (vd id + vq iq) + j (vd iq - vq id).
    cplx packed() const { return {d, -q}; }
    static QdFrame from_packed(cplx z, double theta, double zero = 0.0) { return {-z.imag(), z.real(), theta, zero}; }
    double magnitude() const { return std::hypot(d, q); }
};

/// (2/3)(xa + a xb + a^2 xc): a balanced set of amplitude A at angle wt maps to A e^{jwt}.
cplx space_vector(const ThreePhaseSample& abc);

QdFrame park(const ThreePhaseSample& abc, double theta);
ThreePhaseSample inverse_park(const QdFrame& qd);

/// Packed frame value of a space vector seen from angle theta, and back.
inline cplx to_frame(cplx s, double theta) { return s * std::polar(1.0, -theta); }
inline cplx from_frame(cplx z, double theta) { return z * std::polar(1.0, theta); }
/// Phase values of a space vector (no zero sequence).
ThreePhaseSample phases_of(cplx s);

/// Decoupled double synchronous reference frame. The positive frame rotates at
/// +theta, the negative one at -theta; each subtracts the filtered estimate of
/// the other sequence rotated by 2 theta.
struct DdsrfState {
    explicit DdsrfState(double cutoff_rad_s = 0.0) : cutoff(cutoff_rad_s) {}

    double cutoff;          // rad/s, first-order LPF
    cplx pos_filtered{};    // packed, positive frame
    cplx neg_filtered{};    // packed, negative frame
};

/// Re-expresses the filter states after the +frame angle jumps by `dtheta`.
inline void rotate(DdsrfState& st, double dtheta) {
    st.pos_filtered *= std::polar(1.0, -dtheta);
    st.neg_filtered *= std::polar(1.0, dtheta);
}

struct DdsrfOutput {
    QdFrame pos;
    QdFrame neg;
};

/// One step of length h. Defaults the cutoff to w_nom / sqrt(2) when the state
/// was built with zero cutoff.
DdsrfOutput ddsrf_step(DdsrfState& state, const ThreePhaseSample& abc, double theta_plus, double h,
                       double w_nom);

struct SequenceSet {
    cplx i0{};
    cplx i1{};
    cplx i2{};
};

SequenceSet fortescue(cplx ia, cplx ib, cplx ic);
std::array<cplx, 3> inverse_fortescue(const SequenceSet& s);

}  // namespace ibrprot::frames
