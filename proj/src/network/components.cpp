#include "ibrprot/network/components.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ibrprot::network {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double omega(double f) { return two_pi * f; }

}  // namespace

void SeqLineParams::validate() const {
    if (!(x1 > 0.0)) throw std::invalid_argument("line: X1 must be positive");
    if (!(x0 > x1)) throw std::invalid_argument("line: X0 must exceed X1");
    if (!(length_km > 0.0)) throw std::invalid_argument("line: length_km must be positive");
    if (r1 < 0.0 || r0 < 0.0) throw std::invalid_argument("line: resistances must be non-negative");
    if (b1 < 0.0 || b0 < 0.0) throw std::invalid_argument("line: susceptances must be non-negative");
    if (!(f_nom > 0.0)) throw std::invalid_argument("line: f_nom must be positive");
}

Eigen::Matrix3cd PhaseImpedanceMatrix::matrix() const {
    Eigen::Matrix3cd m = Eigen::Matrix3cd::Constant(zm);
    m.diagonal().setConstant(zs);
    return m;
}

PhaseImpedanceMatrix seq_to_phase(cplx z0, cplx z1) { return {(z0 + 2.0 * z1) / 3.0, (z0 - z1) / 3.0}; }

Eigen::Matrix3d balanced_matrix(double self, double mutual) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Constant(mutual);
    m.diagonal().setConstant(self);
    return m;
}

LineModel build_line(emt::Netlist& net, const SeqLineParams& p, const Phases& from, const Phases& to,
                     std::optional<double> split_at, const std::string& name) {
    p.validate();
    const double w = omega(p.f_nom);
    LineModel model;

    auto add_section = [&](const Phases& a, const Phases& b, double len, const std::string& tag) {
        LineSection s;
        s.length_km = len;
        s.from = a;
        s.to = b;
        const auto zph = seq_to_phase(cplx(p.r0, p.x0) * len, cplx(p.r1, p.x1) * len);
        s.z_series = zph.matrix();
        const Eigen::Matrix3d r = s.z_series.real();
        const Eigen::Matrix3d l = s.z_series.imag() / w;
        s.series = net.add(emt::coupled_rl(name + tag + ".series", a, b, r, l));
        // Charging capacitance: C1 = B1/w, C0 = B0/w, realized in phase coordinates.
        const double c1 = p.b1 * 1e-6 * len / w;
        const double c0 = p.b0 * 1e-6 * len / w;
        s.c_shunt = balanced_matrix((c0 + 2.0 * c1) / 3.0, (c0 - c1) / 3.0);
        if (c1 > 0.0 || c0 > 0.0) {
            const Eigen::Matrix3d half = 0.5 * s.c_shunt;
            s.shunt_from = net.add(emt::shunt_capacitance(name + tag + ".shunt_from", a, half));
            s.shunt_to = net.add(emt::shunt_capacitance(name + tag + ".shunt_to", b, half));
        }
        model.sections.push_back(s);
    };

    if (!split_at) {
        add_section(from, to, p.length_km, "");
        return model;
    }
    const double m = *split_at;
    if (!(m > 0.0 && m < 1.0)) throw std::invalid_argument("line: split fraction must lie strictly inside (0, 1)");
    Phases mid{net.add_node(name + ".split.a"), net.add_node(name + ".split.b"), net.add_node(name + ".split.c")};
    add_section(from, mid, m * p.length_km, ".1");
    add_section(mid, to, (1.0 - m) * p.length_km, ".2");
    model.split = mid;
    return model;
}

std::string_view to_string(FaultType t) {
    switch (t) {
        case FaultType::AG: return "AG";
        case FaultType::BG: return "BG";
        case FaultType::CG: return "CG";
        case FaultType::AB: return "AB";
        case FaultType::BC: return "BC";
        case FaultType::CA: return "CA";
        case FaultType::ABG: return "ABG";
        case FaultType::BCG: return "BCG";
        case FaultType::CAG: return "CAG";
        case FaultType::ABC: return "ABC";
        case FaultType::ABCG: return "ABCG";
    }
    return "?";
}

std::optional<FaultType> parse_fault_type(std::string_view s) {
    for (auto t : {FaultType::AG, FaultType::BG, FaultType::CG, FaultType::AB, FaultType::BC, FaultType::CA,
                   FaultType::ABG, FaultType::BCG, FaultType::CAG, FaultType::ABC, FaultType::ABCG})
        if (to_string(t) == s) return t;
    return std::nullopt;
}

std::vector<int> faulted_phases(FaultType t) {
    switch (t) {
        case FaultType::AG: return {0};
        case FaultType::BG: return {1};
        case FaultType::CG: return {2};
        case FaultType::AB:
        case FaultType::ABG: return {0, 1};
        case FaultType::BC:
        case FaultType::BCG: return {1, 2};
        case FaultType::CA:
        case FaultType::CAG: return {0, 2};
        case FaultType::ABC:
        case FaultType::ABCG: return {0, 1, 2};
    }
    return {};
}

bool involves_ground(FaultType t) {
    switch (t) {
        case FaultType::AB:
        case FaultType::BC:
        case FaultType::CA:
        case FaultType::ABC: return false;
        default: return true;
    }
}

void FaultSpec::validate() const {
    if (!(location >= 0.0 && location <= 1.0)) throw std::invalid_argument("fault.location must lie in [0, 1]");
    if (!(rf >= 0.0)) throw std::invalid_argument("fault.resistance must be non-negative");
    if (t_off && !(*t_off > t_on)) throw std::invalid_argument("fault.t_off must exceed fault.t_on");
}

bool FaultSwitches::apply(emt::SolverSystem& sys, double t_next) {
    const bool want = t_next >= t_on_ && !(t_off_ && t_next >= *t_off_);
    if (want == closed_) return false;
    for (auto id : ids_) sys.set_switch(id, want);
    closed_ = want;
    return true;
}

FaultSwitches build_fault(emt::Netlist& net, const FaultSpec& spec, const Phases& at, double r_on,
                          double r_off) {
    spec.validate();
    const double r = std::max(spec.rf, r_on);
    const auto ph = faulted_phases(spec.type);
    static constexpr char names[] = {'a', 'b', 'c'};
    std::vector<emt::BranchId> ids;
    std::vector<std::array<int, 2>> touched;
    auto to_ground = [&](int k) {
        ids.push_back(net.add(emt::switch_element(std::string("fault.") + names[k] + "g", at[k],
                                                  emt::NodeId::ground(), r, r_off)));
        touched.push_back({k, -1});
    };
    auto between = [&](int j, int k) {
        ids.push_back(net.add(emt::switch_element(std::string("fault.") + names[j] + names[k], at[j], at[k], r, r_off)));
        touched.push_back({j, k});
    };
    if (involves_ground(spec.type)) {
        for (int k : ph) to_ground(k);
    } else if (ph.size() == 2) {
        between(ph[0], ph[1]);
    } else {
        between(0, 1);
        between(1, 2);
        between(2, 0);
    }
    return FaultSwitches(std::move(ids), std::move(touched), spec.t_on, spec.t_off);
}

void TheveninSource::validate() const {
    if (!(e_pu > 0.8 && e_pu <= 1.2)) throw std::invalid_argument("thevenin: |E| must lie in (0.8, 1.2] pu");
    if (z1.real() < 0.0 || z0.real() < 0.0) throw std::invalid_argument("thevenin: source resistance must be >= 0");
    if (!(z1.imag() > 0.0 && z0.imag() > 0.0)) throw std::invalid_argument("thevenin: source reactance must be > 0");
}

std::array<double, 3> TheveninHandle::emf(double t) const {
    const double peak = std::sqrt(2.0 / 3.0) * src_.v_ll * src_.e_pu;
    const double w = omega(src_.f_nom);
    std::array<double, 3> e{};
    for (int k = 0; k < 3; ++k) e[k] = peak * std::cos(w * t + src_.phase_rad - k * two_pi / 3.0);
    return e;
}

void TheveninHandle::drive(emt::SolverSystem& sys, double t) const {
    const auto e = emf(t);
    sys.set_source(branch_, e);
}

TheveninHandle build_thevenin(emt::Netlist& net, const TheveninSource& src, const Phases& bus,
                              const std::string& name) {
    src.validate();
    const auto z = seq_to_phase(src.z0, src.z1).matrix();
    const double w = omega(src.f_nom);
    const Eigen::MatrixXd r = z.real();
    const Eigen::MatrixXd l = z.imag() / w;
    const auto id = net.add(emt::source_behind_impedance(name, bus, r, l));
    return TheveninHandle(id, src);
}

std::array<emt::BranchId, 3> build_transformer(emt::Netlist& net, const TransformerSpec& spec, const Phases& lv,
                                               const Phases& hv, const std::string& name) {
    if (!(spec.s_rated > 0 && spec.v_lv > 0 && spec.v_hv > 0 && spec.x_pu > 0 && spec.r_pu >= 0))
        throw std::invalid_argument("transformer: ratings and leakage must be positive");
    const double ratio = spec.v_lv / (spec.v_hv / std::sqrt(3.0));
    const double z_base = spec.v_lv * spec.v_lv / (spec.s_rated / 3.0);
    const double r = spec.r_pu * z_base;
    const double l = spec.x_pu * z_base / omega(spec.f_nom);
    std::array<emt::BranchId, 3> ids{};
    static constexpr char names[] = {'a', 'b', 'c'};
    for (int k = 0; k < 3; ++k)
        ids[k] = net.add(emt::transformer_unit(name + "." + names[k], lv[k], lv[(k + 1) % 3], hv[k],
                                               emt::NodeId::ground(), ratio, r, l));
    return ids;
}

std::array<double, 3> phase_voltages(const emt::SolverSystem& sys, const Phases& bus) {
    return {sys.voltage(bus[0]), sys.voltage(bus[1]), sys.voltage(bus[2])};
}

std::array<double, 3> line_terminal_current(const emt::SolverSystem& sys, const LineSection& s, int end) {
    const auto series = sys.branch_current(s.series);
    const auto& shunt = end == 0 ? s.shunt_from : s.shunt_to;
    std::array<double, 3> out{};
    for (int k = 0; k < 3; ++k) {
        out[k] = end == 0 ? series[k] : -series[k];
        if (shunt) out[k] += sys.branch_current(*shunt)[k];
    }
    return out;
}

}  // namespace ibrprot::network
