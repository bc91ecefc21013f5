#pragma once

#include "ibrprot/emt/solver.hpp"

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ibrprot::network {

using cplx = std::complex<double>;
using Phases = std::array<emt::NodeId, 3>;

/// Sequence line constants per km: ohm/km for R, X; microsiemens/km for B.
struct SeqLineParams {
    double r1 = 0.0, x1 = 0.0, b1 = 0.0;
    double r0 = 0.0, x0 = 0.0, b0 = 0.0;
    double length_km = 0.0;
    double f_nom = 60.0;

    void validate() const;
    cplx z1_total() const { return cplx(r1, x1) * length_km; }
    cplx z0_total() const { return cplx(r0, x0) * length_km; }
};

/// Balanced 3x3 phase impedance: Zs on the diagonal, Zm elsewhere.
struct PhaseImpedanceMatrix {
    cplx zs;
    cplx zm;

    cplx z0() const { return zs + 2.0 * zm; }
    cplx z1() const { return zs - zm; }
    Eigen::Matrix3cd matrix() const;
};

PhaseImpedanceMatrix seq_to_phase(cplx z0, cplx z1);

/// Real 3x3 matrix with `self` on the diagonal and `mutual` elsewhere.
Eigen::Matrix3d balanced_matrix(double self, double mutual);

struct LineSection {
    double length_km = 0.0;
    Phases from{};
    Phases to{};
    emt::BranchId series = 0;
    std::optional<emt::BranchId> shunt_from;
    std::optional<emt::BranchId> shunt_to;
    Eigen::Matrix3cd z_series;  // ohm
    Eigen::Matrix3d c_shunt;    // farad, total for the section (half at each end)
};

struct LineModel {
    std::vector<LineSection> sections;
    std::optional<Phases> split;  // internal node when split
};

/// Adds one pi-section, or two when `split_at` is given, between `from` and `to`.
LineModel build_line(emt::Netlist& net, const SeqLineParams& params, const Phases& from,
                     const Phases& to, std::optional<double> split_at = std::nullopt,
                     const std::string& name = "line");

enum class FaultType { AG, BG, CG, AB, BC, CA, ABG, BCG, CAG, ABC, ABCG };

std::string_view to_string(FaultType t);
std::optional<FaultType> parse_fault_type(std::string_view s);
/// Phases involved, in a-b-c order.
std::vector<int> faulted_phases(FaultType t);
bool involves_ground(FaultType t);

struct FaultSpec {
    FaultType type = FaultType::AG;
    double rf = 0.0;        // ohm
    double location = 0.8;  // fraction of the protected line from terminal 1
    double t_on = 0.55;
    std::optional<double> t_off;

    void validate() const;
    bool external() const { return location <= 0.0 || location >= 1.0; }
};

/// Fault switches plus their schedule.
class FaultSwitches {
public:
    FaultSwitches() = default;
    FaultSwitches(std::vector<emt::BranchId> ids, std::vector<std::array<int, 2>> phases, double t_on,
                  std::optional<double> t_off)
        : ids_(std::move(ids)), phases_(std::move(phases)), t_on_(t_on), t_off_(t_off) {}

    /// Opens/closes switches for the step ending at `t_next`. Returns true on a change.
    bool apply(emt::SolverSystem& sys, double t_next);
    const std::vector<emt::BranchId>& ids() const { return ids_; }
    /// Per switch: the two phase indices it touches (second is -1 for ground).
    const std::vector<std::array<int, 2>>& phases() const { return phases_; }
    bool closed() const { return closed_; }

private:
    std::vector<emt::BranchId> ids_;
    std::vector<std::array<int, 2>> phases_;
    double t_on_ = 0.0;
    std::optional<double> t_off_;
    bool closed_ = false;
};

/// LG: one phase-ground switch. LL: one phase-phase switch. LLG: two phase-ground
/// switches. ABC: three phase-phase switches in delta. ABCG: three phase-ground.
/// Every switch closes on max(Rf, r_on).
FaultSwitches build_fault(emt::Netlist& net, const FaultSpec& spec, const Phases& at,
                          double r_on = 1e-4, double r_off = 1e9);

struct TheveninSource {
    double e_pu = 1.0;
    double phase_rad = 0.0;
    cplx z1;  // ohm
    cplx z0;  // ohm
    double f_nom = 60.0;
    double v_ll = 230e3;  // base line-to-line rms volts

    void validate() const;
};

class TheveninHandle {
public:
    TheveninHandle() = default;
    TheveninHandle(emt::BranchId id, TheveninSource src) : branch_(id), src_(src) {}

    emt::BranchId branch() const { return branch_; }
    const TheveninSource& source() const { return src_; }
    std::array<double, 3> emf(double t) const;
    void drive(emt::SolverSystem& sys, double t) const;

private:
    emt::BranchId branch_ = 0;
    TheveninSource src_;
};

/// Balanced EMFs 120 degrees apart behind seq_to_phase(Z0, Z1).
TheveninHandle build_thevenin(emt::Netlist& net, const TheveninSource& src, const Phases& bus,
                              const std::string& name = "src");

/// Delta (converter side) / grounded-wye (network side) step-up transformer.
struct TransformerSpec {
    double s_rated = 500e6;  // VA
    double v_lv = 20e3;      // delta winding, line-to-line rms
    double v_hv = 230e3;     // wye side, line-to-line rms
    double x_pu = 0.10;
    double r_pu = 0.005;
    double f_nom = 60.0;
};

/// Three single-phase units. HV phase k pairs with the LV delta winding k-(k+1),
/// so the LV side lags the HV side by 30 degrees.
std::array<emt::BranchId, 3> build_transformer(emt::Netlist& net, const TransformerSpec& spec,
                                               const Phases& lv, const Phases& hv,
                                               const std::string& name = "xfmr");

/// Ideal instrument probes.
std::array<double, 3> phase_voltages(const emt::SolverSystem& sys, const Phases& bus);

/// Current leaving `end` (0 = from, 1 = to) of a line section into the section:
/// series current plus the charging current of the shunt at that end.
std::array<double, 3> line_terminal_current(const emt::SolverSystem& sys, const LineSection& s, int end);

}  // namespace ibrprot::network
