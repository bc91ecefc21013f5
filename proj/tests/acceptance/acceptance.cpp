// One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

#include "ibrprot/emt/solver.hpp"
#include "ibrprot/frames/frames.hpp"
#include "ibrprot/limiter/limiter.hpp"
#include "ibrprot/relays/relays.hpp"
#include "ibrprot/scenario/scenario.hpp"
#include "oracles/phasor_network.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

using namespace ibrprot;
using scenario::Infeed;
using relays::Element;
using relays::Region;
using cplx = std::complex<double>;

namespace {

constexpr double pi = std::numbers::pi;

// Tolerances and limits pinned by the acceptance criteria.
constexpr double rl_error_max = 1e-3;
constexpr double order_ratio_lo = 3.5, order_ratio_hi = 4.5;
constexpr double transform_tol = 1e-12;
constexpr double ddsrf_tol = 0.01;
constexpr double limiter_tol = 1e-12;
constexpr double peak_tol = 1e-9;
constexpr double distance_tol = 0.02;
constexpr double mho_band = 1e-9;
constexpr double bias_min = 0.02;

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
    std::printf("%s criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += !pass;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_of(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int el(Element e) { return static_cast<int>(e); }

scenario::Scenario make(Infeed t1, Infeed t2, network::FaultType type, double m, double rf = 0.0,
                        limiter::PriorityMode prio = limiter::PriorityMode::PositiveSeq) {
    scenario::Scenario s;
    s.infeed1 = t1;
    s.infeed2 = t2;
    s.priority = prio;
    network::FaultSpec f;
    f.type = type;
    f.location = m;
    f.rf = rf;
    s.fault = f;
    s.name = "acc_" + s.label();
    return s;
}

// Series R-L energized by a 1 V step; max error over five time constants relative to V/R.
double rl_step_error(double h) {
    const double r = 1.0, l = 10e-3, tau = l / r;
    const Eigen::MatrixXd rm = Eigen::MatrixXd::Constant(1, 1, r), lm = Eigen::MatrixXd::Constant(1, 1, l);
    const std::array<emt::NodeId, 1> n{emt::NodeId{0}};
    auto sys = emt::build_system({emt::source_behind_impedance("src", n, rm, lm),
                                  emt::resistor("short", emt::NodeId{0}, emt::NodeId::ground(), 1e-9)},
                                 1, h);
    const double one = 1.0;
    sys.set_source(0, {&one, 1});
    double worst = 0.0;
    const long steps = std::lround(5.0 * tau / h);
    for (long k = 0; k < steps; ++k) {
        sys.step();
        const double exact = (1.0 - std::exp(-sys.time() / tau)) / r;
        worst = std::max(worst, std::abs(sys.branch_current(0)[0] - exact) * r);
    }
    return worst;
}

void criterion_1() {
    double e1 = 0, e2 = 0;
    const double secs = seconds_of([&] {
        e1 = rl_step_error(50e-6);
        e2 = rl_step_error(25e-6);
    });
    const double ratio = e1 / e2;
    report(1, e1 < rl_error_max && ratio >= order_ratio_lo && ratio <= order_ratio_hi && secs < 1.0,
           "RL step error below 0.1% at 50 us, second-order convergence",
           fmt("error %.3e, ratio h/(h/2) %.3f, %.3f s", e1, ratio, secs));
}

void criterion_2() {
    double park_err = 0, fort_err = 0, ddsrf_err = 0;
    const double secs = seconds_of([&] {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(-2.0, 2.0), ang(-pi, pi);
        for (int k = 0; k < 1000; ++k) {
            const frames::ThreePhaseSample x{u(rng), u(rng), u(rng)};
            const double th = 5.0 * ang(rng);
            const auto y = frames::inverse_park(frames::park(x, th));
            for (int p = 0; p < 3; ++p) park_err = std::max(park_err, std::abs(y[p] - x[p]));
        }
        const cplx a = std::polar(1.0, 2 * pi / 3);
        for (int k = 0; k < 100; ++k) {
            const cplx v = std::polar(std::abs(u(rng)) + 0.1, ang(rng));
            const auto bal = frames::fortescue(v, v * a * a, v * a);
            fort_err = std::max({fort_err, std::abs(bal.i1 - v), std::abs(bal.i0), std::abs(bal.i2)});
            const auto open = frames::fortescue(v, 0.0, 0.0);
            fort_err = std::max({fort_err, std::abs(open.i0 - v / 3.0), std::abs(open.i1 - v / 3.0),
                                 std::abs(open.i2 - v / 3.0)});
        }

        // 20 random positive/negative mixes, compared after three cycles.
        const double w = 2 * pi * 60.0, h = 1.0 / (60.0 * 400);
        std::uniform_real_distribution<double> m1(0.3, 1.2), m2(0.05, 0.5);
        for (int trial = 0; trial < 20; ++trial) {
            const cplx i1 = std::polar(m1(rng), ang(rng)), i2 = std::polar(m2(rng), ang(rng));
            const auto ph = frames::inverse_fortescue({0.0, i1, i2});
            frames::DdsrfState st;
            frames::DdsrfOutput out;
            std::array<std::vector<double>, 3> cyc;
            for (int k = 1; k <= 1200; ++k) {
                const double t = k * h;
                frames::ThreePhaseSample x{};
                for (int p = 0; p < 3; ++p) x[p] = std::sqrt(2.0) * (ph[p] * std::polar(1.0, w * t)).real();
                out = frames::ddsrf_step(st, x, w * t, h, w);
                if (k > 800)
                    for (int p = 0; p < 3; ++p) cyc[p].push_back(x[p]);
            }
            std::array<cplx, 3> dft;
            for (int p = 0; p < 3; ++p) dft[p] = oracle::dft_phasor(cyc[p], 801 * h, w, h);
            const auto seq = frames::fortescue(dft[0], dft[1], dft[2]);
            const cplx want_pos = std::sqrt(2.0) * seq.i1, want_neg = std::sqrt(2.0) * std::conj(seq.i2);
            ddsrf_err = std::max({ddsrf_err, std::abs(out.pos.packed() - want_pos) / std::abs(want_pos),
                                  std::abs(out.neg.packed() - want_neg) / std::abs(want_neg)});
        }
    });
    report(2, park_err <= transform_tol && fort_err <= transform_tol && ddsrf_err <= ddsrf_tol && secs < 5.0,
           "park round-trip, Fortescue identities, DDSRF against DFT on 20 mixes",
           fmt("park %.1e, fortescue %.1e, DDSRF rel %.2e, %.3f s", park_err, fort_err, ddsrf_err, secs));
}

void criterion_3() {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0), imax_d(0.2, 2.0);
    int bound = 0, angle = 0, dominance = 0, idem = 0, peak_fail = 0;
    double worst_peak = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const limiter::SequenceRefs in{u(rng), u(rng), u(rng), u(rng)};
        const double imax = imax_d(rng);
        const auto mode = k % 2 ? limiter::PriorityMode::PositiveSeq : limiter::PriorityMode::NegativeSeq;
        const auto [out, rep] = limiter::limit_and_prioritize(in, imax, mode);
        bound += out.mag_pos() + out.mag_neg() > imax + limiter_tol;
        if (out.mag_pos() > 0) angle += std::abs(std::arg(out.pos()) - std::arg(in.pos())) > limiter_tol;
        if (out.mag_neg() > 0) angle += std::abs(std::arg(out.neg()) - std::arg(in.neg())) > limiter_tol;
        const bool pos_first = mode == limiter::PriorityMode::PositiveSeq;
        const double want = std::min(pos_first ? in.mag_pos() : in.mag_neg(), imax);
        dominance += std::abs((pos_first ? out.mag_pos() : out.mag_neg()) - want) > limiter_tol;
        idem += !(limiter::limit_and_prioritize(out, imax, mode).first == out);

        if (k < 100) {
            double peak = 0.0;
            for (int n = 0; n < 2000; ++n) {
                const double th = 2 * pi * n / 2000;
                const auto s = frames::from_frame(out.pos(), th) + frames::from_frame(out.neg(), -th);
                for (double x : frames::phases_of(s)) peak = std::max(peak, std::abs(x));
            }
            worst_peak = std::max(worst_peak, peak - imax);
            peak_fail += peak > imax + peak_tol;
        }
    }
    report(3, bound + angle + dominance + idem + peak_fail == 0,
           "limiter bound, angle, dominance, idempotence on 10000 cases; phase peaks on 100 waveforms",
           fmt("violations %d/%d/%d/%d, peak fails %d, worst peak - I_max %.2e", bound, angle, dominance, idem,
               peak_fail, worst_peak));
}

void criterion_4() {
    double worst = 0.0;
    int bad_runs = 0;
    const double secs = seconds_of([&] {
        for (auto ty : {network::FaultType::AG, network::FaultType::AB, network::FaultType::ABG}) {
            for (double m : {0.2, 0.5, 0.8}) {
                auto s = make(Infeed::SG, Infeed::none, ty, m);
                s.network.line_charging = false;
                const auto r = scenario::run_scenario(s);
                if (!r.accepted()) {
                    ++bad_runs;
                    continue;
                }
                std::vector<Element> loops;
                if (ty == network::FaultType::AG) loops = {Element::Z1_AG};
                if (ty == network::FaultType::AB) loops = {Element::Z1_AB};
                if (ty == network::FaultType::ABG) loops = {Element::Z1_AG, Element::Z1_BG, Element::Z1_AB};
                const cplx want = m * r.z1l_pu;
                for (auto e : loops) {
                    if (!r.summary.steady_determinate[el(e)]) {
                        ++bad_runs;
                        continue;
                    }
                    worst = std::max(worst, std::abs(r.summary.steady_z[el(e)] - want) / std::abs(want));
                }
            }
        }
    });
    report(4, bad_runs == 0 && worst <= distance_tol && secs < 30.0,
           "radial SG bolted AG/AB/ABG at m 0.2/0.5/0.8, steady loop Z against m*Z1L",
           fmt("worst deviation %.3f%%, %d bad runs, %.2f s", 100 * worst, bad_runs, secs));
}

void criterion_5() {
    const auto s = relays::DistanceSettings::from_line({3.2, 32.0}, {30.0, 110.0}, 529.0);
    const cplx zr = s.z_reach();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.5 * std::abs(zr), 1.5 * std::abs(zr));
    int disagree = 0, in_band = 0;
    for (int k = 0; k < 10000; ++k) {
        const cplx z(u(rng), u(rng));
        const double margin = std::abs(zr) / 2 - std::abs(z - zr / 2.0);
        if (std::abs(margin) <= mho_band * std::abs(zr)) {
            ++in_band;
            continue;
        }
        disagree += relays::mho_operate(z, s) != (margin > 0);
    }
    report(5, disagree == 0, "mho comparator against the disk definition on 10000 points",
           fmt("%d disagreements, %d points inside the 1e-9 band", disagree, in_band));
}

void criterion_6() {
    relays::AlphaSettings a;
    const bool restrain = relays::alpha_region(relays::alpha_map(1.0, -1.0), a, 0.0) == Region::restrain;
    const bool operate = relays::alpha_region(relays::alpha_map(1.0, 1.0), a, 2.0) == Region::operate;
    const bool outer = relays::alpha_region({cplx(-1.5 * a.r_outer, 0.0), relays::AlphaPoint::Kind::normal}, a,
                                            2.0) == Region::operate;
    const auto far = relays::alpha_map(std::polar(1.0, 0.2), 0.0);
    const bool single = far.kind == relays::AlphaPoint::Kind::far &&
                        relays::alpha_region(far, a, 1.0) == Region::operate;

    int not_restrained = 0, bad_runs = 0;
    for (double m : {0.0, 1.0}) {
        const auto r = scenario::run_scenario(make(Infeed::SG, Infeed::SG, network::FaultType::ABG, m));
        if (!r.accepted()) {
            ++bad_runs;
            continue;
        }
        for (auto e : {Element::L87A, Element::L87B, Element::L87C, Element::L87G, Element::L87Q})
            not_restrained += r.summary.final_region[el(e)] != Region::restrain;
    }
    report(6, restrain && operate && outer && single && not_restrained == 0 && bad_runs == 0,
           "alpha-plane fundamentals; external bolted ABG with SG at both ends keeps all five 87 elements restrained",
           fmt("-1 %s, +1 %s, outer %s, far %s, %d unrestrained, %d bad runs", restrain ? "restrain" : "WRONG",
               operate ? "operate" : "WRONG", outer ? "operate" : "WRONG", single ? "operate" : "WRONG",
               not_restrained, bad_runs));
}

void criterion_7() {
    double z[3] = {NAN, NAN, NAN};
    const std::array<std::pair<Infeed, limiter::PriorityMode>, 3> cases{
        {{Infeed::SG, limiter::PriorityMode::PositiveSeq},
         {Infeed::GFL, limiter::PriorityMode::PositiveSeq},
         {Infeed::GFL, limiter::PriorityMode::NegativeSeq}}};
    for (int k = 0; k < 3; ++k) {
        const auto r = scenario::run_scenario(
            make(cases[k].first, Infeed::SG, network::FaultType::ABG, 0.8, 0.0, cases[k].second));
        if (r.accepted() && r.summary.steady_determinate[el(Element::Z1_AG)])
            z[k] = std::abs(r.summary.steady_z[el(Element::Z1_AG)]) / std::abs(r.z1l_pu);
    }
    const double bias = z[1] / z[0] - 1.0;
    report(7, bias >= bias_min && z[1] >= z[2],
           "AG-loop bias for bolted ABG at 0.8: GFL positive priority at least 2% above SG and not below negative",
           fmt("|Z_AG| %% of line: SG %.2f, GFL+ %.2f, GFL- %.2f; GFL+ over SG %+.2f%%", 100 * z[0], 100 * z[1],
               100 * z[2], 100 * bias));
}

void criterion_8() {
    const std::array<std::pair<Infeed, limiter::PriorityMode>, 2> cases{
        {{Infeed::GFM, limiter::PriorityMode::NegativeSeq}, {Infeed::GFL, limiter::PriorityMode::PositiveSeq}}};
    std::array<relays::ExcursionStats, 2> gl{}, ql{};
    bool generated = true, deterministic = true, secure = true;
    int negative_counts = 0;
    for (int k = 0; k < 2; ++k) {
        const auto s = make(cases[k].first, Infeed::SG, network::FaultType::ABG, 0.0, 0.0, cases[k].second);
        const auto a = scenario::run_scenario(s), b = scenario::run_scenario(s);
        if (!a.accepted()) {
            generated = false;
            continue;
        }
        const auto md = scenario::report_md(a);
        generated = generated && md.find("## Excursions in the first 3 cycles") != std::string::npos;
        deterministic = deterministic && md == scenario::report_md(b);
        for (auto e : relays::all_elements) {
            secure = secure && a.summary.final_region[el(e)] == Region::restrain;
            negative_counts += a.summary.excursion[el(e)].samples_outside < 0;
        }
        gl[k] = a.summary.excursion[el(Element::L87G)];
        ql[k] = a.summary.excursion[el(Element::L87Q)];
    }
    const bool ordered = gl[1].samples_outside >= gl[0].samples_outside ||
                         ql[1].samples_outside >= ql[0].samples_outside;
    report(8, generated && deterministic && secure && negative_counts == 0 && ordered,
           "external ABG at 0: excursion report, GFL counts at least GFM on 87GL or 87QL, all elements end restrained",
           fmt("87GL GFM %d / GFL %d, 87QL GFM %d / GFL %d, report %s, %s, final %s", gl[0].samples_outside,
               gl[1].samples_outside, ql[0].samples_outside, ql[1].samples_outside, generated ? "present" : "MISSING",
               deterministic ? "deterministic" : "NOT deterministic", secure ? "restrain" : "NOT restrain"));
}

scenario::SweepSpec internal_sweep() {
    scenario::SweepSpec sp;
    sp.base.name = "acc";
    sp.base.fault = network::FaultSpec{};
    sp.fault_types = {network::FaultType::AG, network::FaultType::ABG};
    sp.locations = {0.2, 0.8};
    sp.rf = {0.0, 5.0};
    sp.infeed1 = {Infeed::SG, Infeed::GFM, Infeed::GFL};
    return sp;
}

void criterion_9(const scenario::SweepResult& r, double secs) {
    int missed = 0, bad_runs = 0;
    std::string first_miss;
    for (const auto& res : r.results) {
        if (!res.accepted()) {
            ++bad_runs;
            continue;
        }
        std::vector<Element> want{Element::L87A};
        if (res.scenario.fault->type == network::FaultType::ABG) want.push_back(Element::L87B);
        for (auto e : want) {
            if (!res.summary.trip[el(e)]) {
                if (first_miss.empty()) first_miss = res.scenario.name + " " + std::string(relays::to_string(e));
                ++missed;
            }
        }
    }
    report(9, missed == 0 && bad_runs == 0 && r.results.size() == 24 && secs < 300.0,
           "internal AG/ABG at m 0.2/0.8, Rf 0/5 ohm under SG, GFM, GFL: faulted-phase 87 elements operate",
           fmt("%zu runs, %d missed trips%s%s, %d bad runs, %.2f s", r.results.size(), missed,
               first_miss.empty() ? "" : ", first ", first_miss.c_str(), bad_runs, secs));
}

void criterion_10(const scenario::SweepResult& serial) {
    const auto s = make(Infeed::GFL, Infeed::SG, network::FaultType::ABG, 0.0);
    const auto a = scenario::run_scenario(s), b = scenario::run_scenario(s);
    const bool runs = scenario::waveform_csv(a) == scenario::waveform_csv(b) &&
                      scenario::trajectory_csv(a) == scenario::trajectory_csv(b) &&
                      scenario::verdicts_jsonl(a) == scenario::verdicts_jsonl(b) &&
                      scenario::report_md(a) == scenario::report_md(b);
    const auto parallel = scenario::run_sweep(internal_sweep(), 8);
    const bool sweep = scenario::sweep_csv(serial) == scenario::sweep_csv(parallel) &&
                       scenario::sweep_report_md(serial) == scenario::sweep_report_md(parallel);
    report(10, runs && sweep, "repeated runs give identical exports; sweep output independent of worker count",
           fmt("run exports %s, sweep 1 vs 8 workers %s", runs ? "identical" : "DIFFER",
               sweep ? "identical" : "DIFFER"));
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    scenario::SweepResult serial;
    const double secs = seconds_of([&] { serial = scenario::run_sweep(internal_sweep(), 1); });
    criterion_9(serial, secs);
    criterion_10(serial);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
