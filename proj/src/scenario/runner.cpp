#include "ibrprot/scenario/scenario.hpp"

#include "ibrprot/frames/frames.hpp"

#include <memory>
#include <numbers>

namespace ibrprot::scenario {

namespace {

constexpr double pi = std::numbers::pi;
const double sqrt2 = std::numbers::sqrt2, sqrt3 = std::numbers::sqrt3;

// line2324 template data.
constexpr double v_hv = 230e3;
constexpr double s_relay = 100e6;
constexpr double r_ref_load = 1e6;  // wye reference at each 230 kV bus
const cplx z1_grid(1.06, 10.6);
const cplx z0_grid(1.59, 15.9);
// Terminal-1 SG shares the step-up unit's zero-sequence path so ground
// returns match across infeed types.
const cplx z1_sg1(1.06, 10.6);
const cplx z0_sg1(0.529, 10.58);

network::SeqLineParams line_params(const Scenario& s) {
    network::SeqLineParams lp{.r1 = 0.032, .x1 = 0.32, .b1 = 3.5, .r0 = 0.30, .x0 = 1.10, .b0 = 2.2,
                              .length_km = 100.0, .f_nom = s.sim.f_nom};
    if (!s.network.line_charging) lp.b1 = lp.b0 = 0.0;
    return lp;
}

struct Terminal {
    int index = 1;
    Infeed kind = Infeed::none;
    network::Phases bus{};
    std::optional<network::TheveninHandle> sg;
    std::unique_ptr<control::Converter> conv;
    network::Phases lv{};
    emt::BranchId filter = 0;
    double v_peak = 0.0;
    double i_peak = 0.0;
};

void build_infeed(emt::Netlist& net, Terminal& term, const Scenario& s, double sg_phase) {
    const std::string tag = "t" + std::to_string(term.index);
    if (term.kind == Infeed::none) return;
    if (term.kind == Infeed::SG) {
        network::TheveninSource src{.e_pu = 1.0,
                                    .phase_rad = sg_phase,
                                    .z1 = term.index == 1 ? z1_sg1 : z1_grid,
                                    .z0 = term.index == 1 ? z0_sg1 : z0_grid,
                                    .f_nom = s.sim.f_nom,
                                    .v_ll = v_hv};
        term.sg = network::build_thevenin(net, src, term.bus, tag + ".sg");
        return;
    }
    network::TransformerSpec xs;
    xs.f_nom = s.sim.f_nom;
    xs.v_hv = v_hv;
    xs.s_rated = s.network.converter_mva * 1e6;
    for (int k = 0; k < 3; ++k) term.lv[k] = net.add_node(tag + ".lv." + std::string(1, static_cast<char>('a' + k)));
    network::build_transformer(net, xs, term.lv, term.bus, tag + ".xfmr");

    const auto& inner = term.kind == Infeed::GFM ? s.gfm.inner : s.gfl.inner;
    const double z_base = xs.v_lv * xs.v_lv / xs.s_rated;
    const double w = 2.0 * pi * s.sim.f_nom;
    const Eigen::MatrixXd r = Eigen::MatrixXd::Identity(3, 3) * (inner.rf * z_base);
    const Eigen::MatrixXd l = Eigen::MatrixXd::Identity(3, 3) * (inner.lf * z_base / w);
    term.filter = net.add(emt::source_behind_impedance(tag + ".conv", term.lv, r, l));
    term.v_peak = xs.v_lv * sqrt2 / sqrt3;
    term.i_peak = sqrt2 * xs.s_rated / (sqrt3 * xs.v_lv);

    if (term.kind == Infeed::GFM) {
        auto p = s.gfm;
        p.s_rated = xs.s_rated;
        term.conv = std::make_unique<control::GfmController>(p, s.lvrt, s.priority, s.startup);
    } else {
        auto p = s.gfl;
        p.s_rated = xs.s_rated;
        p.lvrt = s.lvrt;
        term.conv = std::make_unique<control::GflController>(p, s.priority, s.startup);
    }
}

template <class F>
std::array<double, 3> scaled(const F& x, double k) {
    return {x[0] * k, x[1] * k, x[2] * k};
}

double positive_magnitude(const std::array<relays::PhasorEstimator, 3>& est) {
    const auto seq = frames::fortescue(est[0].last().value, est[1].last().value, est[2].last().value);
    return std::abs(seq.i1);
}

}  // namespace

std::string_view to_string(RunStatus s) {
    static constexpr std::string_view names[] = {"ok", "unsettled", "unstable", "numerical", "invalid"};
    return names[static_cast<int>(s)];
}

Summary summarize(const std::vector<relays::TrajectoryPoint>& traj, const SummaryWindow& w) {
    using relays::Region;
    Summary out;
    out.window = w;
    out.min_z_first2.fill(std::numeric_limits<double>::quiet_NaN());
    out.final_region.fill(Region::idle);
    const double t2 = w.t_fault + 2.0 / w.f_nom;
    for (const auto& p : traj) {
        const int e = static_cast<int>(p.element);
        const bool determinate = p.region != Region::indeterminate;
        if (relays::is_distance(p.element) && determinate && p.t >= w.t_fault && p.t <= t2) {
            const double z = std::abs(p.operand);
            if (!(out.min_z_first2[e] <= z)) out.min_z_first2[e] = z;
        }
        if (p.t <= w.t_fault_end) {
            out.final_region[e] = p.region;
            if (relays::is_distance(p.element)) {
                out.steady_z[e] = p.operand;
                out.steady_determinate[e] = determinate;
            }
        }
        const bool op = p.settled && p.region == Region::operate;
        if (op && p.t >= w.t_fault && !out.trip[e]) out.trip[e] = p.t;
        if (op && p.t >= w.t_armed && p.t < w.t_fault) out.operate_before_fault = true;
    }
    for (auto e : relays::all_elements)
        out.excursion[static_cast<int>(e)] = relays::excursions(traj, e, w.t_fault, w.t_fault + 3.0 / w.f_nom);
    return out;
}

ScenarioResult run_scenario(const Scenario& s) {
    ScenarioResult res;
    res.scenario = s;
    try {
        s.validate();
    } catch (const std::exception& e) {
        res.status = RunStatus::invalid;
        res.message = e.what();
        res.stable = false;
        return res;
    }

    const double h = s.sim.h, f = s.sim.f_nom;
    const auto lp = line_params(s);
    const double v_base = v_hv / sqrt3, i_base = s_relay / (sqrt3 * v_hv), z_base = v_hv * v_hv / s_relay;
    res.z1l_pu = lp.z1_total() / z_base;

    emt::Netlist net;
    auto bus = [&](const std::string& tag) {
        network::Phases p{};
        for (int k = 0; k < 3; ++k) {
            p[k] = net.add_node(tag + "." + std::string(1, static_cast<char>('a' + k)));
            net.add(emt::resistor(tag + ".ref", p[k], emt::NodeId::ground(), r_ref_load));
        }
        return p;
    };
    std::array<Terminal, 2> term;
    term[0].index = 1;
    term[1].index = 2;
    term[0].kind = s.infeed1;
    term[1].kind = s.infeed2;
    term[0].bus = bus("t1");
    term[1].bus = bus("t2");

    const bool internal = s.fault && !s.fault->external();
    const auto line = network::build_line(net, lp, term[0].bus, term[1].bus,
                                          internal ? std::optional<double>(s.fault->location) : std::nullopt);
    network::FaultSwitches flt;
    if (s.fault) {
        const auto& at = internal ? *line.split : (s.fault->location <= 0.0 ? term[0].bus : term[1].bus);
        flt = network::build_fault(net, *s.fault, at);
    }
    const double sg1_phase = s.infeed2 == Infeed::SG ? s.network.sg_angle_deg * pi / 180.0 : 0.0;
    build_infeed(net, term[0], s, sg1_phase);
    build_infeed(net, term[1], s, 0.0);

    relays::SchemeSettings rs;
    rs.distance = relays::DistanceSettings::from_line(lp.z1_total(), lp.z0_total(), z_base, s.relay.zone1_reach);
    rs.alpha = s.relay.alpha;
    rs.samples_per_cycle = s.relay.samples_per_cycle;
    rs.f_nom = f;
    rs.v_base = v_base;
    rs.i_base = i_base;
    relays::ProtectionScheme scheme(rs);
    const double rate = f * s.relay.samples_per_cycle;
    // Relays arm two cycles before the settle instant so their windows are full there.
    const double t_armed = std::max(0.0, s.sim.t_settle - 2.0 / f);

    auto& wf = res.waveforms;
    for (const char* g : {"v1", "i1", "v2", "i2"})
        for (char ph : {'a', 'b', 'c'}) wf.names.push_back(std::string(g) + "_" + ph);
    for (const auto& tm : term)
        if (tm.conv)
            for (char ph : {'a', 'b', 'c'}) wf.names.push_back("conv" + std::to_string(tm.index) + "_i_" + ph);
    relays::Resampler wave_rs(rate, wf.names.size());
    std::array<relays::PhasorEstimator, 3> est_v1{relays::PhasorEstimator(s.relay.samples_per_cycle, f),
                                                  relays::PhasorEstimator(s.relay.samples_per_cycle, f),
                                                  relays::PhasorEstimator(s.relay.samples_per_cycle, f)};
    auto est_v2 = est_v1;

    double t_settle_seen = -1.0;
    auto record = [&](double t, const emt::SolverSystem& sys) {
        const auto v1 = network::phase_voltages(sys, term[0].bus);
        const auto v2 = network::phase_voltages(sys, term[1].bus);
        const auto i1 = network::line_terminal_current(sys, line.sections.front(), 0);
        const auto i2 = network::line_terminal_current(sys, line.sections.back(), 1);
        if (t >= t_armed - 1e-12) scheme.push(t, v1, i1, i2);
        std::vector<double> x;
        x.reserve(wf.names.size());
        for (const auto* a : {&v1, &i1, &v2, &i2}) x.insert(x.end(), a->begin(), a->end());
        for (const auto& tm : term)
            if (tm.conv) {
                const auto ic = sys.branch_current(tm.filter);
                x.insert(x.end(), ic.begin(), ic.end());
            }
        wave_rs.push(t, x, [&](double tk, std::span<const double> y) {
            wf.t.push_back(tk);
            wf.rows.emplace_back(y.begin(), y.end());
            for (int k = 0; k < 3; ++k) {
                est_v1[k].update(y[k] / v_base, tk);
                est_v2[k].update(y[6 + k] / v_base, tk);
            }
            if (tk <= s.sim.t_settle + 1e-12) {
                res.settle.t = tk;
                res.settle.v1_pos = positive_magnitude(est_v1);
                res.settle.v2_pos = positive_magnitude(est_v2);
                t_settle_seen = tk;
            }
            for (const auto& tm : term)
                if (tm.conv) {
                    const auto& tel = tm.conv->telemetry();
                    res.limiter.push_back({tk, tm.index, tel.limiter, tel.lvrt, tel.omega});
                }
        });
    };

    const long long steps = std::llround(s.sim.t_end / h);
    try {
        auto sys = net.build(h);
        for (auto& tm : term)
            if (tm.sg) tm.sg->drive(sys, 0.0);
        record(0.0, sys);
        for (long long k = 0; k < steps; ++k) {
            const double t = static_cast<double>(k) * h, tn = static_cast<double>(k + 1) * h;
            for (std::size_t n = 0; n < term.size(); ++n) {
                auto& tm = term[n];
                if (!tm.conv) continue;
                const auto v = scaled(network::phase_voltages(sys, tm.lv), 1.0 / tm.v_peak);
                const auto i = scaled(sys.branch_current(tm.filter), 1.0 / tm.i_peak);
                const auto e = scaled(tm.conv->step(t, v, i, h), tm.v_peak);
                sys.set_source(tm.filter, e);
                if (t <= s.sim.t_settle + 1e-12) {
                    const auto& tel = tm.conv->telemetry();
                    auto& cs = res.settle.converter[n];
                    cs.present = true;
                    cs.p = tel.p;
                    cs.q = tel.q;
                    if (tm.kind == Infeed::GFM) {
                        cs.p_target = s.gfm.p_set;
                        cs.q_target = s.gfm.q_set + s.gfm.kq * (s.gfm.v_set - std::abs(tel.v_pos));
                    } else {
                        cs.p_target = s.gfl.p_set;
                        cs.q_target = s.gfl.q_set;
                    }
                }
            }
            for (auto& tm : term)
                if (tm.sg) tm.sg->drive(sys, tn);
            if (s.fault) flt.apply(sys, tn);
            sys.step();
            record(tn, sys);
            res.t_reached = tn;
        }
    } catch (const control::InstabilityError& e) {
        res.status = RunStatus::unstable;
        res.stable = false;
        res.message = e.what();
    } catch (const emt::NumericalError& e) {
        res.status = RunStatus::numerical;
        res.stable = false;
        res.message = e.what();
    }

    // The band applies to the virtual rotor; the PLL integrator is clamped on its own.
    for (const auto& tm : term)
        if (tm.kind == Infeed::GFM && res.stable && (tm.conv->omega_min() < 0.9 || tm.conv->omega_max() > 1.1)) {
            res.status = RunStatus::unstable;
            res.stable = false;
            res.message = "terminal " + std::to_string(tm.index) + " rotor speed left [0.9, 1.1] pu";
        }

    auto& st = res.settle;
    st.passed = t_settle_seen >= 0.0;
    auto fail = [&](const std::string& why) {
        if (st.passed) st.reason = why;
        st.passed = false;
    };
    if (t_settle_seen < 0.0) st.reason = "run ended before t_settle";
    if (!(st.v1_pos >= 0.95 && st.v1_pos <= 1.05)) fail("terminal 1 |V+| outside [0.95, 1.05] pu");
    if (!(st.v2_pos >= 0.95 && st.v2_pos <= 1.05)) fail("terminal 2 |V+| outside [0.95, 1.05] pu");
    for (std::size_t n = 0; n < 2; ++n) {
        const auto& cs = st.converter[n];
        if (!cs.present) continue;
        const std::string tag = "terminal " + std::to_string(n + 1);
        if (!(std::abs(cs.p - cs.p_target) <= 0.01)) fail(tag + " P off its set point by more than 0.01 pu");
        if (!(std::abs(cs.q - cs.q_target) <= 0.01)) fail(tag + " Q off its target by more than 0.01 pu");
    }
    if (res.status == RunStatus::ok && !st.passed) {
        res.status = RunStatus::unsettled;
        res.message = st.reason;
    }

    res.trajectory = scheme.trajectory();
    res.verdicts = scheme.verdicts();
    SummaryWindow w;
    w.t_armed = t_armed;
    w.f_nom = f;
    w.t_fault = s.fault ? s.fault->t_on : s.sim.t_settle;
    w.t_fault_end = s.fault && s.fault->t_off ? std::min(*s.fault->t_off, s.sim.t_end) : s.sim.t_end;
    res.summary = summarize(res.trajectory, w);
    return res;
}

}  // namespace ibrprot::scenario
