#include "ibrprot/control/converter_control.hpp"

#include <algorithm>
#include <cmath>

namespace ibrprot::control {

namespace {

constexpr cplx j1{0.0, 1.0};

// One trapezoidal step of z' = a z + b with b held over the step.
cplx trapezoid(cplx z, cplx a, cplx b, double h) { return ((1.0 + 0.5 * h * a) * z + h * b) / (1.0 - 0.5 * h * a); }

double wrap(double x) { return std::remainder(x, 2.0 * std::numbers::pi); }

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void LvrtParams::validate() const {
    require(v_exit > v_enter, "lvrt.v_exit must exceed lvrt.v_enter");
    require(v_enter > 0.0, "lvrt.v_enter must be positive");
    require(k_pos >= 0.0 && k_neg >= 0.0, "lvrt gains must be non-negative");
}

InnerLoopParams InnerLoopParams::tuned(double lf, double rf, double bandwidth_hz, double f_nom) {
    const double wb = 2.0 * std::numbers::pi * f_nom;
    InnerLoopParams p;
    p.lf = lf;
    p.rf = rf;
    p.kp = lf * 2.0 * std::numbers::pi * bandwidth_hz / wb;
    p.ki = p.kp * rf * wb / lf;
    return p;
}

void InnerLoopParams::validate() const {
    require(lf > 0.0 && rf >= 0.0, "filter impedance must be positive");
    require(kp > 0.0 && ki >= 0.0, "inner loop gains must be positive");
    require(v_max > 0.0, "modulation ceiling must be positive");
}

void GfmParams::validate() const {
    require(rv > 0.0 && lv > 0.0, "gfm: Rv and Lv must be positive");
    require(ta > 0.0, "gfm: Ta must be positive");
    require(kd >= 0.0 && kq >= 0.0, "gfm: kd and kq must be non-negative");
    require(i_max >= 1.0, "gfm: I_max must be at least 1 pu");
    require(q_clamp > 0.0, "gfm: droop clamp must be positive");
    require(s_rated > 0.0 && f_nom > 0.0, "gfm: rating and frequency must be positive");
    inner.validate();
}

std::pair<double, double> GflParams::pll_gains(double bandwidth_hz, double zeta) {
    const double wn = 2.0 * std::numbers::pi * bandwidth_hz;
    return {2.0 * zeta * wn, wn * wn};
}

void GflParams::validate() const {
    require(kp_pll > 0.0 && ki_pll > 0.0, "gfl: PLL gains must be positive");
    require(i_max >= 1.0, "gfl: I_max must be at least 1 pu");
    require(s_rated > 0.0 && f_nom > 0.0, "gfl: rating and frequency must be positive");
    lvrt.validate();
    inner.validate();
}

VsgResult vsg_step(GfmState& st, double p_meas, const GfmParams& p, double h, double t) {
    const double w0 = st.omega;
    const double c = 0.5 * h * p.kd;
    st.omega = (w0 * (1.0 - c) + h * (p.p_set - p_meas) / p.ta + 2.0 * c) / (1.0 + c);
    st.delta = wrap(st.delta + h * p.w_nom() * (0.5 * (w0 + st.omega) - 1.0));
    if (!(st.omega >= 0.5 && st.omega <= 1.5))
        throw InstabilityError("virtual rotor speed left [0.5, 1.5] pu", t);
    return {st.delta, st.omega};
}

double q_droop_step(GfmState& st, double q_meas, double v_meas_pos, const GfmParams& p, double h) {
    const double err = p.q_set + p.kq * (p.v_set - v_meas_pos) - q_meas;
    st.q_int = std::clamp(st.q_int + p.ki_q * err * h, -p.q_clamp, p.q_clamp);
    return p.v_set + std::clamp(p.kp_q * err + st.q_int, -p.q_clamp, p.q_clamp);
}

SequenceRefs virtual_admittance_step(GfmState& st, double v_ref, cplx v_pos, cplx v_neg, double omega,
                                     const GfmParams& p, double h) {
    const double k = p.w_nom() / p.lv;
    st.va_pos = trapezoid(st.va_pos, -k * (p.rv + j1 * omega * p.lv), k * (v_ref - v_pos), h);
    st.va_neg = trapezoid(st.va_neg, -k * (p.rv - j1 * omega * p.lv), -k * v_neg, h);
    return SequenceRefs::from_packed(st.va_pos, st.va_neg);
}

double pll_step(PllState& st, cplx v_pos, const GflParams& p, double h) {
    const double w0 = p.w_nom();
    // v_q = -Im(packed); the PI drives it to zero.
    const double err = v_pos.imag();
    const double lim = p.pll_clamp * w0;
    st.integ = std::clamp(st.integ + p.ki_pll * err * h, -lim, lim);
    st.omega = w0 + p.kp_pll * err + st.integ;
    st.theta = wrap(st.theta + st.omega * h);
    return st.theta;
}

SequenceRefs lvrt_shape(const SequenceRefs& refs, cplx v_pos, cplx v_neg, bool active, const LvrtParams& p,
                        ConverterKind kind) {
    if (!active || kind == ConverterKind::GFM) return refs;
    SequenceRefs out = refs;
    out.iq_pos += p.k_pos * std::max(0.0, p.v_enter - std::abs(v_pos));
    const cplx neg = -j1 * p.k_neg * v_neg;
    out.iq_neg = -neg.imag();
    out.id_neg = neg.real();
    return out;
}

InnerOutput inner_current_loop(InnerState& st, const SequenceRefs& refs, cplx i_pos, cplx i_neg, cplx v_pos,
                               cplx v_neg, double omega, const InnerLoopParams& p, double h) {
    const cplx e_pos = refs.pos() - i_pos;
    const cplx e_neg = refs.neg() - i_neg;
    InnerOutput out;
    out.vm_pos = v_pos + j1 * omega * p.lf * i_pos + p.kp * e_pos + st.int_pos;
    out.vm_neg = v_neg - j1 * omega * p.lf * i_neg + p.kp * e_neg + st.int_neg;
    const double m = std::abs(out.vm_pos) + std::abs(out.vm_neg);
    if (m > p.v_max) {
        out.vm_pos *= p.v_max / m;
        out.vm_neg *= p.v_max / m;
        out.clamped = true;
    } else {
        st.int_pos += p.ki * h * e_pos;
        st.int_neg += p.ki * h * e_neg;
    }
    return out;
}

ThreePhaseSample modulation_abc(const InnerOutput& out, double theta) {
    return frames::phases_of(frames::from_frame(out.vm_pos, theta) + frames::from_frame(out.vm_neg, -theta));
}

namespace {

double ramp(double t, const StartupParams& s) {
    if (s.t_ramp <= 0.0) return t >= s.t_sync ? 1.0 : 0.0;
    return std::clamp((t - s.t_sync) / s.t_ramp, 0.0, 1.0);
}

}  // namespace

GfmController::GfmController(GfmParams p, LvrtParams lvrt, limiter::PriorityMode mode, StartupParams startup)
    : p_(p), lvrt_(lvrt), mode_(mode), startup_(startup) {
    p_.validate();
    lvrt_.validate();
}

ThreePhaseSample GfmController::step(double t, const ThreePhaseSample& v, const ThreePhaseSample& i, double h) {
    const double w0 = p_.w_nom();
    double theta = w0 * t + st_.delta;
    const auto dv = frames::ddsrf_step(dv_, v, theta, h, w0);
    const auto di = frames::ddsrf_step(di_, i, theta, h, w0);
    const cplx vp = dv.pos.packed(), vn = dv.neg.packed();
    const cplx ip = di.pos.packed(), in = di.neg.packed();
    const cplx s = vp * std::conj(ip);

    tel_.v_pos = vp;
    tel_.v_neg = vn;
    tel_.i_pos = ip;
    tel_.i_neg = in;
    tel_.p = s.real();
    tel_.q = s.imag();

    if (t < startup_.t_sync) {
        // Snap the rotor onto the measured voltage and mirror it.
        const double d = std::abs(vp) > 0.1 ? std::arg(vp) : 0.0;
        st_.delta = wrap(st_.delta + d);
        theta += d;
        frames::rotate(dv_, d);
        frames::rotate(di_, d);
        st_.omega = 1.0;
        st_.q_int = std::clamp(std::abs(vp) - p_.v_set, -p_.q_clamp, p_.q_clamp);
        st_.va_pos = st_.va_neg = 0.0;
        st_.inner = {};
        tel_.theta = theta;
        tel_.synced = false;
        // Raw space vector: the DDSRF outputs are not decoupled yet.
        return frames::phases_of(frames::space_vector(v) * std::polar(1.0, w0 * h));
    }

    tel_.synced = true;
    GfmParams pp = p_;
    const double r = ramp(t, startup_);
    pp.p_set *= r;
    pp.q_set *= r;
    vsg_step(st_, tel_.p, pp, h, t);
    omega_min_ = std::min(omega_min_, st_.omega);
    omega_max_ = std::max(omega_max_, st_.omega);
    tel_.v_ref = q_droop_step(st_, tel_.q, std::abs(vp), pp, h);
    // References and feedforward use the filtered sequence voltages. Above the
    // DDSRF cutoff the decoupled pair carries a disturbance in both frames, and
    // feeding it through would double it and let the reactor resonances grow.
    const cplx vpf = dv_.pos_filtered, vnf = dv_.neg_filtered;
    tel_.unconstrained = virtual_admittance_step(st_, tel_.v_ref, vpf, vnf, st_.omega, pp, h);
    tel_.lvrt = latch_.update(std::abs(vp), lvrt_);
    const auto shaped = lvrt_shape(tel_.unconstrained, vp, vn, tel_.lvrt, lvrt_, ConverterKind::GFM);
    std::tie(tel_.limited, tel_.limiter) = limiter::limit_and_prioritize(shaped, p_.i_max, mode_);
    const auto out = inner_current_loop(st_.inner, tel_.limited, ip, in, vpf, vnf, st_.omega, p_.inner, h);
    tel_.clamped = out.clamped;
    clamp_events_ += out.clamped;
    tel_.omega = st_.omega;
    tel_.theta = theta;
    return modulation_abc(out, w0 * (t + h) + st_.delta);
}

GflController::GflController(GflParams p, limiter::PriorityMode mode, StartupParams startup)
    : p_(p), mode_(mode), startup_(startup) {
    p_.validate();
    pll_.omega = p_.w_nom();
}

ThreePhaseSample GflController::step(double t, const ThreePhaseSample& v, const ThreePhaseSample& i, double h) {
    const double w0 = p_.w_nom();
    const double theta = pll_.theta;
    const auto dv = frames::ddsrf_step(dv_, v, theta, h, w0);
    const auto di = frames::ddsrf_step(di_, i, theta, h, w0);
    const cplx vp = dv.pos.packed(), vn = dv.neg.packed();
    const cplx ip = di.pos.packed(), in = di.neg.packed();
    const cplx s = vp * std::conj(ip);
    tel_.v_pos = vp;
    tel_.v_neg = vn;
    tel_.i_pos = ip;
    tel_.i_neg = in;
    tel_.p = s.real();
    tel_.q = s.imag();
    tel_.theta = theta;

    const double theta_next = pll_step(pll_, vp, p_, h);
    tel_.omega = pll_.omega / w0;

    if (t < startup_.t_sync) {
        tel_.synced = false;
        return frames::phases_of(frames::space_vector(v) * std::polar(1.0, w0 * h));
    }
    tel_.synced = true;
    omega_min_ = std::min(omega_min_, tel_.omega);
    omega_max_ = std::max(omega_max_, tel_.omega);

    const double r = ramp(t, startup_);
    // Filtered voltages for the references, as in the GFM path.
    const cplx vpf = dv_.pos_filtered, vnf = dv_.neg_filtered;
    const double vd = std::max(vpf.real(), 0.05);
    const bool was = latch_.active();
    tel_.lvrt = latch_.update(std::abs(vp), p_.lvrt);
    const double id_live = p_.p_set * r / vd;
    // Active current is held at its pre-dip value while the latch is set.
    if (tel_.lvrt && !was) id_frozen_ = tel_.unconstrained.id_pos;
    SequenceRefs refs;
    refs.id_pos = tel_.lvrt ? id_frozen_ : id_live;
    refs.iq_pos = p_.q_set * r / vd;
    tel_.unconstrained = lvrt_shape(refs, vpf, vnf, tel_.lvrt, p_.lvrt, ConverterKind::GFL);
    std::tie(tel_.limited, tel_.limiter) = limiter::limit_and_prioritize(tel_.unconstrained, p_.i_max, mode_);
    const auto out = inner_current_loop(inner_, tel_.limited, ip, in, vpf, vnf, tel_.omega, p_.inner, h);
    tel_.clamped = out.clamped;
    clamp_events_ += out.clamped;
    return modulation_abc(out, theta_next);
}

}  // namespace ibrprot::control
