#include "ibrprot/emt/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ibrprot::emt {

namespace {

Eigen::MatrixXd scalar(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

Branch two_terminal(std::string name, BranchKind kind, NodeId from, NodeId to) {
    Branch b;
    b.name = std::move(name);
    b.kind = kind;
    b.ports = 1;
    b.taps = {{from, 0, 1.0}, {to, 0, -1.0}};
    b.resistance = scalar(0.0);
    b.inductance = scalar(0.0);
    b.capacitance = scalar(0.0);
    return b;
}

bool all_zero(const Eigen::MatrixXd& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0; }

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

Branch resistor(std::string name, NodeId from, NodeId to, double ohms) {
    auto b = two_terminal(std::move(name), BranchKind::resistor, from, to);
    b.resistance = scalar(ohms);
    return b;
}

Branch inductor(std::string name, NodeId from, NodeId to, double henries) {
    auto b = two_terminal(std::move(name), BranchKind::inductor, from, to);
    b.inductance = scalar(henries);
    return b;
}

Branch series_rl(std::string name, NodeId from, NodeId to, double ohms, double henries) {
    auto b = two_terminal(std::move(name), BranchKind::inductor, from, to);
    b.resistance = scalar(ohms);
    b.inductance = scalar(henries);
    return b;
}

Branch capacitor(std::string name, NodeId from, NodeId to, double farads) {
    auto b = two_terminal(std::move(name), BranchKind::capacitor, from, to);
    b.capacitance = scalar(farads);
    return b;
}

Branch switch_element(std::string name, NodeId from, NodeId to, double r_on, double r_off,
                      bool closed) {
    auto b = two_terminal(std::move(name), BranchKind::switch_element, from, to);
    b.r_on = r_on;
    b.r_off = r_off;
    b.closed = closed;
    return b;
}

Branch current_source(std::string name, NodeId from, NodeId to) {
    return two_terminal(std::move(name), BranchKind::controlled_current_source, from, to);
}

Branch source_behind_impedance(std::string name, std::span<const NodeId> nodes,
                               const Eigen::MatrixXd& r, const Eigen::MatrixXd& l) {
    Branch b;
    b.name = std::move(name);
    b.kind = BranchKind::voltage_source_behind_impedance;
    b.ports = static_cast<int>(nodes.size());
    // Current flows from ground into the node: port voltage = -v(node) + e.
    for (int p = 0; p < b.ports; ++p) b.taps.push_back({nodes[p], p, -1.0});
    b.resistance = r;
    b.inductance = l;
    b.capacitance = Eigen::MatrixXd::Zero(b.ports, b.ports);
    return b;
}

Branch coupled_rl(std::string name, std::span<const NodeId> from, std::span<const NodeId> to,
                  const Eigen::MatrixXd& r, const Eigen::MatrixXd& l) {
    if (from.size() != to.size()) throw std::invalid_argument("coupled_rl: terminal count mismatch");
    Branch b;
    b.name = std::move(name);
    b.kind = BranchKind::coupled_rl;
    b.ports = static_cast<int>(from.size());
    for (int p = 0; p < b.ports; ++p) {
        b.taps.push_back({from[p], p, 1.0});
        b.taps.push_back({to[p], p, -1.0});
    }
    b.resistance = r;
    b.inductance = l;
    b.capacitance = Eigen::MatrixXd::Zero(b.ports, b.ports);
    return b;
}

Branch shunt_capacitance(std::string name, std::span<const NodeId> nodes,
                         const Eigen::MatrixXd& c) {
    Branch b;
    b.name = std::move(name);
    b.kind = BranchKind::coupled_shunt_capacitance;
    b.ports = static_cast<int>(nodes.size());
    for (int p = 0; p < b.ports; ++p) b.taps.push_back({nodes[p], p, 1.0});
    b.resistance = Eigen::MatrixXd::Zero(b.ports, b.ports);
    b.inductance = Eigen::MatrixXd::Zero(b.ports, b.ports);
    b.capacitance = c;
    return b;
}

Branch transformer_unit(std::string name, NodeId p1, NodeId p2, NodeId s1, NodeId s2, double ratio,
                        double ohms, double henries) {
    Branch b;
    b.name = std::move(name);
    b.kind = BranchKind::transformer_unit;
    b.ports = 1;
    // Ideal coupling N1 i1 + N2 i2 = 0 puts -ratio * i1 into the s1 terminal.
    b.taps = {{p1, 0, 1.0}, {p2, 0, -1.0}, {s1, 0, -ratio}, {s2, 0, ratio}};
    b.resistance = scalar(ohms);
    b.inductance = scalar(henries);
    b.capacitance = scalar(0.0);
    return b;
}

SolverSystem::SolverSystem(std::vector<Branch> branches, int node_count, double h,
                           std::vector<std::string> node_names)
    : node_names_(std::move(node_names)), node_count_(node_count), h_(h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("timestep must be positive");
    if (node_count < 0) throw std::invalid_argument("node_count must be non-negative");
    node_names_.resize(static_cast<std::size_t>(node_count));
    for (int n = 0; n < node_count; ++n)
        if (node_names_[n].empty()) node_names_[n] = "n" + std::to_string(n);

    branches_.reserve(branches.size());
    for (auto& b : branches) {
        for (const auto& tap : b.taps) {
            if (tap.node.index >= node_count)
                throw std::invalid_argument("branch '" + b.name + "' references node " +
                                            std::to_string(tap.node.index) + " but node_count is " +
                                            std::to_string(node_count));
            if (tap.port < 0 || tap.port >= b.ports)
                throw std::invalid_argument("branch '" + b.name + "' has a tap on a missing port");
        }
        State s;
        s.spec = std::move(b);
        compile(s);
        branches_.push_back(std::move(s));
    }
    v_ = Eigen::VectorXd::Zero(node_count);
    rhs_ = Eigen::VectorXd::Zero(node_count);
    restamp();
    factorize();
}

void SolverSystem::compile(State& s) const {
    const auto& b = s.spec;
    const int k = b.ports;
    s.emf = Eigen::VectorXd::Zero(k);
    s.emf_prev = Eigen::VectorXd::Zero(k);
    s.u = Eigen::VectorXd::Zero(k);
    s.i = Eigen::VectorXd::Zero(k);
    s.eta = Eigen::VectorXd::Zero(k);
    switch (b.kind) {
        case BranchKind::switch_element: {
            const double r = b.closed ? b.r_on : b.r_off;
            if (!(r > 0.0)) throw std::invalid_argument("switch '" + b.name + "' needs positive resistance");
            s.law = Law::resistive;
            s.g = scalar(1.0 / r);
            break;
        }
        case BranchKind::capacitor:
        case BranchKind::coupled_shunt_capacitance:
            s.law = Law::capacitive;
            s.g = (2.0 / h_) * b.capacitance;
            break;
        case BranchKind::controlled_current_source:
            s.law = Law::source;
            s.g = Eigen::MatrixXd::Zero(k, k);
            break;
        case BranchKind::resistor:
        case BranchKind::inductor:
        case BranchKind::coupled_rl:
        case BranchKind::transformer_unit:
        case BranchKind::voltage_source_behind_impedance: {
            if (all_zero(b.inductance)) {
                s.law = Law::resistive;
                s.g = b.resistance.inverse();
            } else {
                s.law = Law::inductive;
                s.two_l_h = (2.0 / h_) * b.inductance;
                s.g = (b.resistance + s.two_l_h).inverse();
                s.hist_gain = s.two_l_h - b.resistance;
            }
            if (!s.g.allFinite())
                throw std::invalid_argument("branch '" + b.name + "' has a singular impedance");
            break;
        }
    }
}

void SolverSystem::restamp() {
    g_ = Eigen::MatrixXd::Zero(node_count_, node_count_);
    for (const auto& s : branches_) {
        if (s.law == Law::source) continue;
        for (const auto& a : s.spec.taps) {
            if (a.node.is_ground()) continue;
            for (const auto& b : s.spec.taps) {
                if (b.node.is_ground()) continue;
                g_(a.node.index, b.node.index) += a.coeff * b.coeff * s.g(a.port, b.port);
            }
        }
    }
}

std::vector<int> SolverSystem::floating_nodes() const {
    const int gnd = node_count_;
    UnionFind uf(node_count_ + 1);
    auto idx = [&](NodeId n) { return n.is_ground() ? gnd : n.index; };
    for (const auto& s : branches_) {
        if (s.law == Law::source) continue;
        for (int p = 0; p < s.spec.ports; ++p) {
            std::vector<int> on_port;
            for (const auto& t : s.spec.taps)
                if (t.port == p) on_port.push_back(idx(t.node));
            if (on_port.size() == 1) {
                uf.unite(on_port[0], gnd);
            } else {
                // Consecutive tap pairs are the terminals of one winding.
                for (std::size_t j = 0; j + 1 < on_port.size(); j += 2) uf.unite(on_port[j], on_port[j + 1]);
            }
        }
    }
    std::vector<int> out;
    for (int n = 0; n < node_count_; ++n)
        if (uf.find(n) != uf.find(gnd)) out.push_back(n);
    return out;
}

void SolverSystem::factorize() {
    auto floating = floating_nodes();
    if (!floating.empty()) {
        std::ostringstream msg;
        msg << "singular nodal matrix: no path to ground from {";
        for (std::size_t j = 0; j < floating.size(); ++j)
            msg << (j ? ", " : "") << node_names_[floating[j]];
        msg << "}";
        throw SingularSystemError(msg.str(), std::move(floating));
    }
    llt_.compute(g_);
    if (llt_.info() != Eigen::Success)
        throw SingularSystemError("nodal matrix is not positive definite", {});
    dirty_ = false;
}

void SolverSystem::set_switch(BranchId id, bool closed) {
    auto& s = branches_.at(id);
    if (s.spec.kind != BranchKind::switch_element)
        throw std::invalid_argument("branch '" + s.spec.name + "' is not a switch");
    if (s.spec.closed == closed) return;
    s.spec.closed = closed;
    s.g = scalar(1.0 / (closed ? s.spec.r_on : s.spec.r_off));
    dirty_ = true;
    damp_next_ = true;
}

void SolverSystem::set_source(BranchId id, std::span<const double> emf) {
    auto& s = branches_.at(id);
    if (s.spec.kind != BranchKind::voltage_source_behind_impedance)
        throw std::invalid_argument("branch '" + s.spec.name + "' is not a voltage source");
    if (static_cast<int>(emf.size()) != s.spec.ports)
        throw std::invalid_argument("emf size mismatch for '" + s.spec.name + "'");
    for (int p = 0; p < s.spec.ports; ++p) s.emf(p) = emf[p];
    if (time_ == 0.0) {
        s.emf_prev = s.emf;
        // Sources set before the first step hold from t = 0+, so the initial
        // port voltage already includes them.
        s.u = s.emf;
        for (const auto& t : s.spec.taps) s.u(t.port) += t.coeff * voltage(t.node);
        update_history(s);
    }
}

void SolverSystem::set_current(BranchId id, double amperes) {
    auto& s = branches_.at(id);
    if (s.spec.kind != BranchKind::controlled_current_source)
        throw std::invalid_argument("branch '" + s.spec.name + "' is not a current source");
    s.source_current = amperes;
}

std::span<const double> SolverSystem::node_voltages() const {
    return {v_.data(), static_cast<std::size_t>(v_.size())};
}

std::span<const double> SolverSystem::branch_current(BranchId id) const {
    const auto& s = branches_.at(id);
    return {s.i.data(), static_cast<std::size_t>(s.i.size())};
}

std::span<const double> SolverSystem::branch_voltage(BranchId id) const {
    const auto& s = branches_.at(id);
    return {s.u.data(), static_cast<std::size_t>(s.u.size())};
}

// History currents, with i = G u + eta for the next step:
//   inductive  (R + 2L/h) i' = u' + u + (2L/h - R) i   ->  eta = G (u + (2L/h - R) i)
//              (pure L: eta = i + G u)
//   capacitive i' = (2C/h)(u' - u) - i                 ->  eta = -G u - i
void SolverSystem::update_history(State& s) const {
    switch (s.law) {
        case Law::inductive: s.eta = s.g * (s.u + s.hist_gain * s.i); break;
        case Law::capacitive: s.eta = -(s.g * s.u) - s.i; break;
        case Law::resistive:
        case Law::source: s.eta.setZero(); break;
    }
}

// Backward Euler over h/2 shares G with the trapezoid over h:
//   inductive  (R + 2L/h) i' = u' + (2L/h) i  ->  eta = G (2L/h) i
//   capacitive i' = (2C/h)(u' - u)            ->  eta = -G u
void SolverSystem::half_step_history(State& s) const {
    switch (s.law) {
        case Law::inductive: s.eta = s.g * (s.two_l_h * s.i); break;
        case Law::capacitive: s.eta = -(s.g * s.u); break;
        case Law::resistive:
        case Law::source: s.eta.setZero(); break;
    }
}

std::span<const double> SolverSystem::step(std::span<const Injection> injections) {
    for (const auto& inj : injections) {
        if (inj.node.index >= node_count_) throw std::invalid_argument("injection at unknown node");
        if (!std::isfinite(inj.amperes)) throw std::invalid_argument("non-finite injection");
    }
    if (dirty_) {
        restamp();
        factorize();
    }
    if (damp_next_) {
        for (auto& s : branches_) half_step_history(s);
        solve_and_update(injections, 0.5);
        for (auto& s : branches_) half_step_history(s);
        solve_and_update(injections, 1.0);
        damp_next_ = false;
    } else {
        solve_and_update(injections, 1.0);
    }
    for (auto& s : branches_) {
        update_history(s);
        s.emf_prev = s.emf;
    }
    time_ += h_;
    return node_voltages();
}

// One solve with the current eta; the source EMF is blended between the
// previous and the new value by `emf_weight`.
void SolverSystem::solve_and_update(std::span<const Injection> injections, double emf_weight) {
    rhs_.setZero();
    for (const auto& inj : injections)
        if (!inj.node.is_ground()) rhs_(inj.node.index) += inj.amperes;
    auto emf_of = [&](const State& s) -> Eigen::VectorXd {
        if (emf_weight == 1.0) return s.emf;
        return s.emf_prev + emf_weight * (s.emf - s.emf_prev);
    };
    for (const auto& s : branches_) {
        Eigen::VectorXd w;
        if (s.law == Law::source) {
            w = Eigen::VectorXd::Constant(1, s.source_current);
        } else {
            w = s.eta;
            if (s.spec.kind == BranchKind::voltage_source_behind_impedance) w += s.g * emf_of(s);
        }
        for (const auto& t : s.spec.taps)
            if (!t.node.is_ground()) rhs_(t.node.index) -= t.coeff * w(t.port);
    }
    v_ = llt_.solve(rhs_);

    if (!v_.allFinite()) {
        int worst = 0;
        for (int n = 0; n < node_count_; ++n)
            if (!std::isfinite(v_(n))) {
                worst = n;
                break;
            }
        throw NumericalError("non-finite node voltage at '" + node_names_[worst] + "' (t = " +
                                 std::to_string(time_ + h_) + " s)",
                             worst, time_ + h_);
    }

    for (auto& s : branches_) {
        if (s.law == Law::source) {
            s.i(0) = s.source_current;
            continue;
        }
        s.u = emf_of(s);
        for (const auto& t : s.spec.taps) s.u(t.port) += t.coeff * voltage(t.node);
        s.i = s.g * s.u + s.eta;
    }
}

SolverSystem build_system(std::vector<Branch> branches, int node_count, double h,
                          std::vector<std::string> node_names) {
    return SolverSystem(std::move(branches), node_count, h, std::move(node_names));
}

NodeId Netlist::add_node(std::string name) {
    names_.push_back(std::move(name));
    return NodeId{static_cast<int>(names_.size()) - 1};
}

BranchId Netlist::add(Branch b) {
    branches_.push_back(std::move(b));
    return branches_.size() - 1;
}

SolverSystem Netlist::build(double h) const { return build_system(branches_, node_count(), h, names_); }

}  // namespace ibrprot::emt
