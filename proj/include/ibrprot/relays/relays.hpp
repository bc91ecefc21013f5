#pragma once

#include "ibrprot/frames/frames.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ibrprot::relays {

using cplx = std::complex<double>;

struct Phasor {
    cplx value{};  // rms
    bool settled = false;
};

/// Full-cycle DFT over the last N samples, referenced to cos(w t) on the
/// absolute sample time so a stationary sinusoid gives a constant phasor.
class PhasorEstimator {
public:
    explicit PhasorEstimator(int n = 32, double f_nom = 60.0);

    Phasor update(double sample, double t);
    void reset();
    int n() const { return n_; }
    Phasor last() const { return last_; }

private:
    int n_;
    double w_;
    std::vector<double> x_;
    std::vector<double> t_;
    int head_ = 0;
    int filled_ = 0;
    Phasor last_;
};

/// Linear interpolation from the solver grid onto t_k = k / rate.
class Resampler {
public:
    Resampler(double rate_hz, std::size_t channels);

    /// Feeds one solver sample; calls emit(t_k, values) for every output
    /// instant in (t_prev, t]. The first push starts the grid at t (emitting
    /// only when t lies on it), so a stream may begin mid-run.
    template <class Emit>
    void push(double t, std::span<const double> x, Emit&& emit) {
        if (have_prev_) {
            while (next_time() <= t + 1e-12 / rate_) {
                const double tk = next_time();
                const double a = t > t_prev_ ? (tk - t_prev_) / (t - t_prev_) : 1.0;
                for (std::size_t c = 0; c < out_.size(); ++c) out_[c] = prev_[c] + a * (x[c] - prev_[c]);
                emit(tk, std::span<const double>(out_));
                ++k_;
            }
        } else {
            k_ = std::max(k_, static_cast<long long>(std::ceil(t * rate_ - 1e-9)));
            if (next_time() <= t + 1e-12 / rate_) {
                for (std::size_t c = 0; c < out_.size(); ++c) out_[c] = x[c];
                emit(next_time(), std::span<const double>(out_));
                ++k_;
            }
        }
        prev_.assign(x.begin(), x.end());
        t_prev_ = t;
        have_prev_ = true;
    }
    double next_time() const { return static_cast<double>(k_) / rate_; }

private:
    double rate_;
    long long k_ = 0;
    bool have_prev_ = false;
    double t_prev_ = 0.0;
    std::vector<double> prev_;
    std::vector<double> out_;
};

cplx k0_compute(cplx z1l, cplx z0l);

/// Per-unit on the line base. Build from ohms with from_line().
struct DistanceSettings {
    cplx z1l{};
    cplx k0{};
    double zone1_reach = 0.8;
    double char_angle = 0.0;

    static DistanceSettings from_line(cplx z1l_ohm, cplx z0l_ohm, double z_base, double reach = 0.8);
    cplx z_reach() const { return zone1_reach * z1l; }
    void validate() const;
};

enum class Loop { AG, BG, CG, AB, BC, CA };
std::string_view to_string(Loop l);

struct LoopImpedance {
    cplx z{};
    bool determinate = false;
};

LoopImpedance loop_impedance(const std::array<cplx, 3>& v, const std::array<cplx, 3>& i, Loop loop, cplx k0);

/// Self-polarized mho through the origin; the boundary operates.
bool mho_operate(cplx z, const DistanceSettings& s);

struct AlphaSettings {
    double r_outer = 6.0;
    double blinder_deg = 195.0;
    double pickup = 0.2;

    void validate() const;
};

struct AlphaPoint {
    enum class Kind { normal, far, idle };
    cplx alpha{};
    Kind kind = Kind::idle;
};

AlphaPoint alpha_map(cplx i_local, cplx i_remote);

/// Region flags shared by trajectories. `candidate` lies outside the restraint
/// but lacks pickup; `operate` has both.
enum class Region { restrain, candidate, operate, idle, indeterminate };
std::string_view to_string(Region r);
inline bool outside_restraint(Region r) { return r == Region::candidate || r == Region::operate; }

Region alpha_region(const AlphaPoint& a, const AlphaSettings& s, double i_diff_mag);

enum class Element { Z1_AG, Z1_BG, Z1_CG, Z1_AB, Z1_BC, Z1_CA, L87A, L87B, L87C, L87G, L87Q };
inline constexpr std::array<Element, 11> all_elements{Element::Z1_AG, Element::Z1_BG, Element::Z1_CG,
                                                     Element::Z1_AB, Element::Z1_BC, Element::Z1_CA,
                                                     Element::L87A,  Element::L87B,  Element::L87C,
                                                     Element::L87G,  Element::L87Q};
std::string_view to_string(Element e);
std::optional<Element> parse_element(std::string_view s);
bool is_distance(Element e);

struct ElementResult {
    Element element;
    cplx operand{};  // Z (pu) or alpha
    Region region = Region::idle;
};

/// 87AL/BL/CL on phase currents, 87GL on 3I0, 87QL on I2. Currents into the line at both ends.
std::array<ElementResult, 5> differential_elements(const std::array<cplx, 3>& i_local,
                                                   const std::array<cplx, 3>& i_remote, const AlphaSettings& s);

struct TrajectoryPoint {
    double t = 0.0;
    Element element = Element::Z1_AG;
    cplx operand{};
    Region region = Region::idle;
    bool settled = false;
};

struct RelayVerdict {
    Element element;
    double t;
    bool operate;
    cplx operand;
};

struct SchemeSettings {
    DistanceSettings distance;
    AlphaSettings alpha;
    int samples_per_cycle = 32;
    double f_nom = 60.0;
    double v_base = 230e3 / 1.7320508075688772;  // rms phase volts
    double i_base = 100e6 / (1.7320508075688772 * 230e3);  // rms amps
};

/// Distance relay at the local terminal plus the two-ended differential, with
/// ideal instrument transformers and channel.
class ProtectionScheme {
public:
    explicit ProtectionScheme(SchemeSettings s);

    /// One solver sample in SI: local v, local i, remote i (currents into the line).
    void push(double t, const std::array<double, 3>& v_local, const std::array<double, 3>& i_local,
              const std::array<double, 3>& i_remote);

    const std::vector<TrajectoryPoint>& trajectory() const { return traj_; }
    const std::vector<RelayVerdict>& verdicts() const { return verdicts_; }
    std::optional<double> first_operate(Element e, double after = -1e300) const;
    const SchemeSettings& settings() const { return s_; }
    int samples() const { return samples_; }

private:
    void evaluate(double t, std::span<const double> x);

    SchemeSettings s_;
    Resampler resampler_;
    std::array<PhasorEstimator, 9> est_;
    std::array<bool, 11> state_{};
    std::vector<TrajectoryPoint> traj_;
    std::vector<RelayVerdict> verdicts_;
    int samples_ = 0;
};

struct ExcursionStats {
    int samples_outside = 0;   // candidate or operate
    int longest_run = 0;       // consecutive outside-restraint samples
    int samples_operate = 0;
};

/// Excursions of one element over [t0, t1] of a trajectory.
ExcursionStats excursions(const std::vector<TrajectoryPoint>& traj, Element e, double t0, double t1);

}  // namespace ibrprot::relays
