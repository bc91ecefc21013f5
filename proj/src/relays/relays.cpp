#include "ibrprot/relays/relays.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ibrprot::relays {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double tiny = 1e-4;  // pu

}  // namespace

PhasorEstimator::PhasorEstimator(int n, double f_nom)
    : n_(n), w_(2.0 * pi * f_nom), x_(static_cast<std::size_t>(n)), t_(static_cast<std::size_t>(n)) {
    if (n < 4) throw std::invalid_argument("phasor estimator needs at least 4 samples per cycle");
}

void PhasorEstimator::reset() {
    head_ = 0;
    filled_ = 0;
    last_ = {};
}

Phasor PhasorEstimator::update(double sample, double t) {
    x_[head_] = sample;
    t_[head_] = t;
    head_ = (head_ + 1) % n_;
    filled_ = std::min(filled_ + 1, n_);
    // Direct summation keeps the result exact for any window position.
    cplx acc = 0.0;
    for (int k = 0; k < filled_; ++k) acc += x_[k] * std::polar(1.0, -w_ * t_[k]);
    last_ = {acc * (std::numbers::sqrt2 / n_), filled_ == n_};
    return last_;
}

Resampler::Resampler(double rate_hz, std::size_t channels) : rate_(rate_hz), prev_(channels), out_(channels) {
    if (!(rate_hz > 0.0)) throw std::invalid_argument("resampler rate must be positive");
}

cplx k0_compute(cplx z1l, cplx z0l) {
    if (!(std::abs(z1l) > 0.0)) throw std::invalid_argument("k0: |Z1L| must be positive");
    return (z0l - z1l) / (3.0 * z1l);
}

DistanceSettings DistanceSettings::from_line(cplx z1l_ohm, cplx z0l_ohm, double z_base, double reach) {
    DistanceSettings s;
    s.z1l = z1l_ohm / z_base;
    s.k0 = k0_compute(z1l_ohm, z0l_ohm);
    s.zone1_reach = reach;
    s.char_angle = std::arg(z1l_ohm);
    s.validate();
    return s;
}

void DistanceSettings::validate() const {
    if (!(zone1_reach > 0.0 && zone1_reach <= 1.0)) throw std::invalid_argument("distance.zone1_reach must lie in (0, 1]");
    if (!(std::abs(z1l) > 0.0)) throw std::invalid_argument("distance: Z1L must be non-zero");
}

std::string_view to_string(Loop l) {
    static constexpr std::string_view names[] = {"AG", "BG", "CG", "AB", "BC", "CA"};
    return names[static_cast<int>(l)];
}

LoopImpedance loop_impedance(const std::array<cplx, 3>& v, const std::array<cplx, 3>& i, Loop loop, cplx k0) {
    const int li = static_cast<int>(loop);
    cplx num, den;
    if (li < 3) {
        const cplx i0x3 = i[0] + i[1] + i[2];
        num = v[li];
        den = i[li] + k0 * i0x3;
    } else {
        const int x = li - 3, y = (li - 2) % 3;
        num = v[x] - v[y];
        den = i[x] - i[y];
    }
    if (std::abs(den) < tiny) return {};
    return {num / den, true};
}

bool mho_operate(cplx z, const DistanceSettings& s) { return ((s.z_reach() - z) * std::conj(z)).real() >= 0.0; }

void AlphaSettings::validate() const {
    if (!(r_outer > 1.0)) throw std::invalid_argument("alpha.r_outer must exceed 1");
    if (!(blinder_deg > 180.0 && blinder_deg < 360.0)) throw std::invalid_argument("alpha.blinder_deg must lie in (180, 360)");
    if (!(pickup >= 0.0)) throw std::invalid_argument("alpha.pickup must be non-negative");
}

AlphaPoint alpha_map(cplx i_local, cplx i_remote) {
    const bool l_small = std::abs(i_local) < tiny, r_small = std::abs(i_remote) < tiny;
    if (l_small && r_small) return {};
    if (r_small) return {std::polar(1e4, std::arg(i_local)), AlphaPoint::Kind::far};
    return {i_local / i_remote, AlphaPoint::Kind::normal};
}

std::string_view to_string(Region r) {
    static constexpr std::string_view names[] = {"restrain", "candidate", "operate", "idle", "indeterminate"};
    return names[static_cast<int>(r)];
}

Region alpha_region(const AlphaPoint& a, const AlphaSettings& s, double i_diff_mag) {
    if (a.kind == AlphaPoint::Kind::idle) return Region::idle;
    const double mag = std::abs(a.alpha);
    const double off = std::abs(std::remainder(std::arg(a.alpha) - pi, 2.0 * pi));
    const bool restrain = mag >= 1.0 / s.r_outer && mag <= s.r_outer && off <= s.blinder_deg * pi / 360.0;
    if (restrain) return Region::restrain;
    return i_diff_mag >= s.pickup ? Region::operate : Region::candidate;
}

std::string_view to_string(Element e) {
    static constexpr std::string_view names[] = {"Z1_AG", "Z1_BG", "Z1_CG", "Z1_AB", "Z1_BC", "Z1_CA",
                                                 "87AL",  "87BL",  "87CL",  "87GL",  "87QL"};
    return names[static_cast<int>(e)];
}

std::optional<Element> parse_element(std::string_view s) {
    for (auto e : all_elements)
        if (to_string(e) == s) return e;
    return std::nullopt;
}

bool is_distance(Element e) { return static_cast<int>(e) < 6; }

std::array<ElementResult, 5> differential_elements(const std::array<cplx, 3>& il, const std::array<cplx, 3>& ir,
                                                   const AlphaSettings& s) {
    const auto sl = frames::fortescue(il[0], il[1], il[2]);
    const auto sr = frames::fortescue(ir[0], ir[1], ir[2]);
    const std::array<std::pair<cplx, cplx>, 5> ops{{{il[0], ir[0]},
                                                    {il[1], ir[1]},
                                                    {il[2], ir[2]},
                                                    {3.0 * sl.i0, 3.0 * sr.i0},
                                                    {sl.i2, sr.i2}}};
    std::array<ElementResult, 5> out{};
    for (int k = 0; k < 5; ++k) {
        const auto a = alpha_map(ops[k].first, ops[k].second);
        out[k] = {static_cast<Element>(6 + k), a.alpha, alpha_region(a, s, std::abs(ops[k].first + ops[k].second))};
    }
    return out;
}

ProtectionScheme::ProtectionScheme(SchemeSettings s)
    : s_(s),
      resampler_(s.f_nom * s.samples_per_cycle, 9),
      est_{PhasorEstimator(s.samples_per_cycle, s.f_nom), PhasorEstimator(s.samples_per_cycle, s.f_nom),
           PhasorEstimator(s.samples_per_cycle, s.f_nom), PhasorEstimator(s.samples_per_cycle, s.f_nom),
           PhasorEstimator(s.samples_per_cycle, s.f_nom), PhasorEstimator(s.samples_per_cycle, s.f_nom),
           PhasorEstimator(s.samples_per_cycle, s.f_nom), PhasorEstimator(s.samples_per_cycle, s.f_nom),
           PhasorEstimator(s.samples_per_cycle, s.f_nom)} {
    s_.distance.validate();
    s_.alpha.validate();
}

void ProtectionScheme::push(double t, const std::array<double, 3>& v, const std::array<double, 3>& il,
                            const std::array<double, 3>& ir) {
    std::array<double, 9> x{};
    for (int k = 0; k < 3; ++k) {
        x[k] = v[k] / s_.v_base;
        x[3 + k] = il[k] / s_.i_base;
        x[6 + k] = ir[k] / s_.i_base;
    }
    resampler_.push(t, x, [this](double tk, std::span<const double> y) { evaluate(tk, y); });
}

void ProtectionScheme::evaluate(double t, std::span<const double> x) {
    ++samples_;
    std::array<cplx, 3> v, il, ir;
    bool settled = true;
    for (int k = 0; k < 3; ++k) {
        const auto pv = est_[k].update(x[k], t);
        const auto pl = est_[3 + k].update(x[3 + k], t);
        const auto pr = est_[6 + k].update(x[6 + k], t);
        v[k] = pv.value;
        il[k] = pl.value;
        ir[k] = pr.value;
        settled = settled && pv.settled && pl.settled && pr.settled;
    }

    auto record = [&](Element e, cplx operand, Region region) {
        traj_.push_back({t, e, operand, region, settled});
        const bool op = settled && region == Region::operate;
        auto& st = state_[static_cast<int>(e)];
        if (op != st) {
            verdicts_.push_back({e, t, op, operand});
            st = op;
        }
    };

    for (int l = 0; l < 6; ++l) {
        const auto z = loop_impedance(v, il, static_cast<Loop>(l), s_.distance.k0);
        Region r = Region::indeterminate;
        if (z.determinate) r = mho_operate(z.z, s_.distance) ? Region::operate : Region::restrain;
        record(static_cast<Element>(l), z.z, r);
    }
    for (const auto& d : differential_elements(il, ir, s_.alpha)) record(d.element, d.operand, d.region);
}

std::optional<double> ProtectionScheme::first_operate(Element e, double after) const {
    for (const auto& v : verdicts_)
        if (v.element == e && v.operate && v.t >= after) return v.t;
    return std::nullopt;
}

ExcursionStats excursions(const std::vector<TrajectoryPoint>& traj, Element e, double t0, double t1) {
    ExcursionStats s;
    int run = 0;
    for (const auto& p : traj) {
        if (p.element != e || p.t < t0 || p.t > t1) continue;
        if (outside_restraint(p.region)) {
            ++s.samples_outside;
            s.longest_run = std::max(s.longest_run, ++run);
        } else {
            run = 0;
        }
        if (p.region == Region::operate) ++s.samples_operate;
    }
    return s;
}

}  // namespace ibrprot::relays
