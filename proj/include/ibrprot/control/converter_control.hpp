#pragma once

#include "ibrprot/control/sequence_refs.hpp"
#include "ibrprot/frames/frames.hpp"
#include "ibrprot/limiter/limiter.hpp"

#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace ibrprot::control {

using frames::cplx;
using frames::ThreePhaseSample;

/// Raised when the virtual rotor leaves [0.5, 1.5] pu.
class InstabilityError : public std::runtime_error {
public:
    InstabilityError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

enum class ConverterKind { GFM, GFL };

struct LvrtParams {
    double v_enter = 0.9;
    double v_exit = 0.95;
    double k_pos = 2.0;
    double k_neg = 2.0;

    void validate() const;
};

/// Inner current PI in per unit. kp in pu volt per pu amp, ki in 1/s.
struct InnerLoopParams {
    double lf = 0.15;
    double rf = 0.005;
    double kp = 0.0;
    double ki = 0.0;
    double v_max = 1.2;  // modulation ceiling on |V+| + |V-|

    /// Pole-zero cancellation: closed loop is first order at `bandwidth_hz`.
    static InnerLoopParams tuned(double lf, double rf, double bandwidth_hz, double f_nom);
    void validate() const;
};

struct GfmParams {
    double rv = 0.05;
    double lv = 0.15;
    double ta = 2.0;   // s
    double kd = 50.0;  // 1/s
    double kq = 2.0;
    double kp_q = 0.05;
    double ki_q = 20.0;
    double q_clamp = 0.2;
    double v_set = 1.0;
    double p_set = 0.8;
    double q_set = 0.0;
    double i_max = 1.2;
    double s_rated = 500e6;
    double f_nom = 60.0;
    InnerLoopParams inner = InnerLoopParams::tuned(0.15, 0.005, 300.0, 60.0);

    double w_nom() const { return 2.0 * std::numbers::pi * f_nom; }
    void validate() const;
};

struct InnerState {
    cplx int_pos{};
    cplx int_neg{};
};

struct GfmState {
    double delta = 0.0;
    double omega = 1.0;
    cplx va_pos{};       // virtual admittance currents, packed
    cplx va_neg{};
    double q_int = 0.0;
    InnerState inner;
};

struct GflParams {
    // 20 Hz natural frequency, critically damped.
    double kp_pll = 2.0 * 2.0 * std::numbers::pi * 20.0;  // rad/s per pu
    double ki_pll = (2.0 * std::numbers::pi * 20.0) * (2.0 * std::numbers::pi * 20.0);  // rad/s^2 per pu
    double pll_clamp = 0.1;  // integrator limit, pu of w_nom
    double p_set = 0.8;
    double q_set = 0.0;
    double i_max = 1.2;
    double s_rated = 500e6;
    double f_nom = 60.0;
    LvrtParams lvrt;
    InnerLoopParams inner = InnerLoopParams::tuned(0.15, 0.005, 300.0, 60.0);

    double w_nom() const { return 2.0 * std::numbers::pi * f_nom; }
    /// Second-order PLL with natural frequency 2 pi bandwidth_hz and damping zeta at 1 pu.
    static std::pair<double, double> pll_gains(double bandwidth_hz, double zeta = 1.0);
    void validate() const;
};

struct PllState {
    double theta = 0.0;
    double integ = 0.0;  // rad/s
    double omega = 0.0;  // rad/s, last output
};

struct VsgResult {
    double delta;
    double omega;
};

/// Swing equation on the virtual rotor, trapezoidal in omega.
VsgResult vsg_step(GfmState& st, double p_meas, const GfmParams& p, double h, double t = 0.0);

/// Returns |v_ref| = V_set + clamp(PI(Q_set + kq (V_set - V) - Q)).
double q_droop_step(GfmState& st, double q_meas, double v_meas_pos, const GfmParams& p, double h);

/// (Lv / w_nom) dI/dt = E - V - Rv I -/+ j omega Lv I per sequence, E+ = v_ref on d, E- = 0.
SequenceRefs virtual_admittance_step(GfmState& st, double v_ref, cplx v_pos, cplx v_neg, double omega,
                                     const GfmParams& p, double h);

/// Advances the PLL angle; returns theta.
double pll_step(PllState& st, cplx v_pos, const GflParams& p, double h);

/// Hysteresis on |V+|: enters below v_enter, leaves above v_exit.
class LvrtLatch {
public:
    bool update(double v_pos_mag, const LvrtParams& p) {
        if (!active_ && v_pos_mag < p.v_enter) active_ = true;
        else if (active_ && v_pos_mag > p.v_exit) active_ = false;
        return active_;
    }
    bool active() const { return active_; }

private:
    bool active_ = false;
};

/// GFL, while latched: adds K_pos (V_enter - |V+|) to iq+ and replaces the
/// negative refs by K_neg |V-| of current that absorbs negative-sequence
/// reactive power, I- = -j K_neg V- (packed). GFM: refs pass unchanged since
/// the admittance already sinks negative sequence.
SequenceRefs lvrt_shape(const SequenceRefs& refs, cplx v_pos, cplx v_neg, bool active, const LvrtParams& p,
                        ConverterKind kind);

struct InnerOutput {
    cplx vm_pos{};
    cplx vm_neg{};
    bool clamped = false;
};

/// Per-sequence PI with cross-coupling and voltage feedforward, then the
/// modulation ceiling. Integrators hold while clamped. Feed the low-pass
/// filtered sequence voltages as `v_pos`/`v_neg`: above the DDSRF cutoff the
/// decoupled pair carries a disturbance in both frames and would double it.
InnerOutput inner_current_loop(InnerState& st, const SequenceRefs& refs, cplx i_pos, cplx i_neg, cplx v_pos,
                               cplx v_neg, double omega, const InnerLoopParams& p, double h);

/// Phase modulation voltages from the sequence outputs at +theta / -theta.
ThreePhaseSample modulation_abc(const InnerOutput& out, double theta);

struct ConverterTelemetry {
    double theta = 0.0;
    double omega = 1.0;  // pu
    double p = 0.0;
    double q = 0.0;
    double v_ref = 0.0;
    cplx v_pos{}, v_neg{}, i_pos{}, i_neg{};
    SequenceRefs unconstrained;
    SequenceRefs limited;
    limiter::LimiterReport limiter;
    bool lvrt = false;
    bool clamped = false;
    bool synced = false;
};

/// One converter: measures per-unit PCC voltage and injected current, returns
/// the per-unit modulation voltage for the next solver step.
class Converter {
public:
    virtual ~Converter() = default;
    virtual ThreePhaseSample step(double t, const ThreePhaseSample& v_pu, const ThreePhaseSample& i_pu, double h) = 0;
    virtual ConverterKind kind() const = 0;
    const ConverterTelemetry& telemetry() const { return tel_; }
    double omega_min() const { return omega_min_; }
    double omega_max() const { return omega_max_; }
    int clamp_events() const { return clamp_events_; }

protected:
    ConverterTelemetry tel_;
    double omega_min_ = 1.0;
    double omega_max_ = 1.0;
    int clamp_events_ = 0;
};

/// Start-up: until t_sync the converter mirrors the PCC voltage (no current)
/// while frames lock; then setpoints ramp linearly over t_ramp.
struct StartupParams {
    double t_sync = 0.05;
    double t_ramp = 0.05;
};

class GfmController final : public Converter {
public:
    GfmController(GfmParams p, LvrtParams lvrt, limiter::PriorityMode mode, StartupParams startup = {});
    ThreePhaseSample step(double t, const ThreePhaseSample& v_pu, const ThreePhaseSample& i_pu, double h) override;
    ConverterKind kind() const override { return ConverterKind::GFM; }
    const GfmState& state() const { return st_; }

private:
    GfmParams p_;
    LvrtParams lvrt_;
    limiter::PriorityMode mode_;
    StartupParams startup_;
    GfmState st_;
    frames::DdsrfState dv_, di_;
    LvrtLatch latch_;
};

class GflController final : public Converter {
public:
    GflController(GflParams p, limiter::PriorityMode mode, StartupParams startup = {});
    ThreePhaseSample step(double t, const ThreePhaseSample& v_pu, const ThreePhaseSample& i_pu, double h) override;
    ConverterKind kind() const override { return ConverterKind::GFL; }
    const PllState& pll() const { return pll_; }

private:
    GflParams p_;
    limiter::PriorityMode mode_;
    StartupParams startup_;
    PllState pll_;
    InnerState inner_;
    frames::DdsrfState dv_, di_;
    LvrtLatch latch_;
    double id_frozen_ = 0.0;
};

}  // namespace ibrprot::control
