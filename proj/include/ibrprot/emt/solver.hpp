#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ibrprot::emt {

/// Dense node index. Ground is the reserved sentinel -1 and never gets a row.
struct NodeId {
    int index = -1;

    static constexpr NodeId ground() { return NodeId{-1}; }
    constexpr bool is_ground() const { return index < 0; }
    friend constexpr bool operator==(NodeId, NodeId) = default;
};

using BranchId = std::size_t;

enum class BranchKind {
    resistor,
    inductor,
    capacitor,
    voltage_source_behind_impedance,
    controlled_current_source,
    switch_element,
    coupled_rl,
    coupled_shunt_capacitance,
    transformer_unit,
};

/// One coefficient of the branch incidence matrix: port `port` sees
/// `coeff * v(node)` in its port voltage and draws `coeff * i_port` out of `node`.
struct Tap {
    NodeId node;
    int port = 0;
    double coeff = 1.0;
};

/// A linear network element reduced to a trapezoidal companion model.
///
/// Every element is a k-port. Port voltages are u = A^T v + e, where A is given
/// by `taps` and e is the series source (only for sources behind impedance).
/// Port currents obey one of three laws:
///   resistive   u = R i
///   inductive   u = R i + L di/dt
///   capacitive  i = C du/dt
/// Each step the companion form is i = G u + eta, with eta the history current.
struct Branch {
    std::string name;
    BranchKind kind = BranchKind::resistor;
    int ports = 1;
    std::vector<Tap> taps;
    Eigen::MatrixXd resistance;   // ports x ports, ohm
    Eigen::MatrixXd inductance;   // ports x ports, henry
    Eigen::MatrixXd capacitance;  // ports x ports, farad
    double r_on = 1e-4;
    double r_off = 1e9;
    bool closed = false;
};

// Element factories. `from`/`to` orient positive current from -> to.
Branch resistor(std::string name, NodeId from, NodeId to, double ohms);
Branch inductor(std::string name, NodeId from, NodeId to, double henries);
Branch series_rl(std::string name, NodeId from, NodeId to, double ohms, double henries);
Branch capacitor(std::string name, NodeId from, NodeId to, double farads);
Branch switch_element(std::string name, NodeId from, NodeId to, double r_on = 1e-4,
                      double r_off = 1e9, bool closed = false);
Branch current_source(std::string name, NodeId from, NodeId to);

/// EMF per port behind a (possibly coupled) R-L impedance, from ground into `nodes`.
/// With e = 0 the terminal sits at the ground potential through the impedance.
Branch source_behind_impedance(std::string name, std::span<const NodeId> nodes,
                               const Eigen::MatrixXd& r, const Eigen::MatrixXd& l);
Branch coupled_rl(std::string name, std::span<const NodeId> from, std::span<const NodeId> to,
                  const Eigen::MatrixXd& r, const Eigen::MatrixXd& l);
Branch shunt_capacitance(std::string name, std::span<const NodeId> nodes,
                         const Eigen::MatrixXd& c);
/// Two-winding single-phase unit with series leakage referred to winding 1.
/// `ratio` is N1/N2. Winding 1 spans p1-p2, winding 2 spans s1-s2.
Branch transformer_unit(std::string name, NodeId p1, NodeId p2, NodeId s1, NodeId s2,
                        double ratio, double ohms, double henries);

/// Raised when the nodal matrix cannot be factorized.
class SingularSystemError : public std::runtime_error {
public:
    SingularSystemError(const std::string& what, std::vector<int> floating_nodes)
        : std::runtime_error(what), floating_nodes_(std::move(floating_nodes)) {}
    const std::vector<int>& floating_nodes() const { return floating_nodes_; }

private:
    std::vector<int> floating_nodes_;
};

/// Raised when a step produces NaN/Inf node voltages.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, int worst_node, double time)
        : std::runtime_error(what), worst_node_(worst_node), time_(time) {}
    int worst_node() const { return worst_node_; }
    double time() const { return time_; }

private:
    int worst_node_;
    double time_;
};

struct Injection {
    NodeId node;
    double amperes = 0.0;
};

/// Fixed-step nodal solver using Dommel trapezoidal companion models.
/// Single-threaded; one instance per simulation run.
class SolverSystem {
public:
    SolverSystem(std::vector<Branch> branches, int node_count, double h,
                 std::vector<std::string> node_names = {});

    /// Solves G v = i_inj - sum A (G e + eta), advances t by h and updates
    /// every branch's history current. The very first step and the first step
    /// after a switch toggle are taken as two backward-Euler half steps with the
    /// same companion conductances, which removes the undamped trapezoidal
    /// chatter at nodes bounded by inductors.
    std::span<const double> step(std::span<const Injection> injections = {});

    void set_switch(BranchId id, bool closed);
    void set_source(BranchId id, std::span<const double> emf);
    void set_current(BranchId id, double amperes);

    double time() const { return time_; }
    double timestep() const { return h_; }
    int node_count() const { return node_count_; }
    std::span<const double> node_voltages() const;
    double voltage(NodeId n) const { return n.is_ground() ? 0.0 : v_(n.index); }
    /// Port currents of a branch after the last step.
    std::span<const double> branch_current(BranchId id) const;
    /// Port voltages (A^T v + e) after the last step.
    std::span<const double> branch_voltage(BranchId id) const;
    const Branch& branch(BranchId id) const { return branches_.at(id).spec; }
    std::size_t branch_count() const { return branches_.size(); }
    const Eigen::MatrixXd& conductance_matrix() const { return g_; }

private:
    enum class Law { resistive, inductive, capacitive, source };

    struct State {
        Branch spec;
        Law law = Law::resistive;
        Eigen::MatrixXd g;        // companion conductance, ports x ports
        Eigen::MatrixXd hist_gain;  // inductive: 2L/h - R
        Eigen::MatrixXd two_l_h;    // inductive: 2L/h
        Eigen::VectorXd emf;
        Eigen::VectorXd emf_prev;
        Eigen::VectorXd u;
        Eigen::VectorXd i;
        Eigen::VectorXd eta;
        double source_current = 0.0;
    };

    void compile(State& s) const;
    void restamp();
    void factorize();
    std::vector<int> floating_nodes() const;
    void update_history(State& s) const;
    void half_step_history(State& s) const;
    void solve_and_update(std::span<const Injection> injections, double emf_weight);

    std::vector<State> branches_;
    std::vector<std::string> node_names_;
    int node_count_;
    double h_;
    double time_ = 0.0;
    bool dirty_ = true;
    bool damp_next_ = true;  // energization from rest is a discontinuity too
    Eigen::MatrixXd g_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd v_;
    Eigen::VectorXd rhs_;
};

/// Validates the branch list and returns a factorized system with t = 0.
SolverSystem build_system(std::vector<Branch> branches, int node_count, double h,
                          std::vector<std::string> node_names = {});

/// Node allocator and branch list used while assembling a network.
class Netlist {
public:
    NodeId add_node(std::string name);
    BranchId add(Branch b);
    int node_count() const { return static_cast<int>(names_.size()); }
    const std::vector<Branch>& branches() const { return branches_; }
    const std::vector<std::string>& node_names() const { return names_; }
    SolverSystem build(double h) const;

private:
    std::vector<std::string> names_;
    std::vector<Branch> branches_;
};

}  // namespace ibrprot::emt
