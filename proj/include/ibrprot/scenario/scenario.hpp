#pragma once

#include "ibrprot/control/converter_control.hpp"
#include "ibrprot/limiter/limiter.hpp"
#include "ibrprot/network/components.hpp"
#include "ibrprot/relays/relays.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ibrprot::scenario {

using cplx = std::complex<double>;

/// Schema violation; `key` is the dotted path of the offending entry.
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string key, const std::string& constraint)
        : std::runtime_error(key + ": " + constraint), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

class IoError : public std::runtime_error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : std::runtime_error(path.string() + ": " + what), path_(path) {}
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

enum class Infeed { SG, GFM, GFL, none };
std::string_view to_string(Infeed f);
std::optional<Infeed> parse_infeed(std::string_view s);
std::optional<limiter::PriorityMode> parse_priority(std::string_view s);

struct SimSettings {
    double h = 50e-6;
    double f_nom = 60.0;
    double t_settle = 0.5;
    double t_end = 0.75;
};

struct NetworkOptions {
    bool line_charging = true;
    double sg_angle_deg = 10.0;  // terminal-1 SG EMF lead over the terminal-2 grid
    double converter_mva = 200.0;  // aggregated converter and step-up transformer rating
};

struct RelayConfig {
    double zone1_reach = 0.8;
    int samples_per_cycle = 32;
    relays::AlphaSettings alpha;
};

struct Scenario {
    std::string name = "scenario";
    std::string template_id = "line2324";
    Infeed infeed1 = Infeed::SG;
    Infeed infeed2 = Infeed::SG;
    limiter::PriorityMode priority = limiter::PriorityMode::PositiveSeq;
    std::optional<network::FaultSpec> fault;
    SimSettings sim;
    NetworkOptions network;
    RelayConfig relay;
    control::GfmParams gfm;
    control::GflParams gfl;
    control::LvrtParams lvrt;
    control::StartupParams startup;
    double inner_bandwidth_hz = 300.0;

    /// Throws SchemaError naming the key whose constraint fails.
    void validate() const;
    /// Deterministic short label, e.g. "ABG_m0.8_rf0_GFL-SG_positive".
    std::string label() const;
};

struct TemplateInfo {
    std::string_view id;
    std::string_view description;
};
const std::vector<TemplateInfo>& templates();

Scenario parse_scenario(std::string_view toml_text, std::string_view source = "<string>");
Scenario load_scenario(const std::filesystem::path& path);

enum class RunStatus { ok, unsettled, unstable, numerical, invalid };
std::string_view to_string(RunStatus s);

struct ConverterSettle {
    bool present = false;
    double p = 0.0, q = 0.0;
    double p_target = 0.0, q_target = 0.0;
};

/// Pre-fault operating point read at t_settle.
struct SettleReport {
    double t = 0.0;
    double v1_pos = 0.0;  // pu, terminal buses
    double v2_pos = 0.0;
    std::array<ConverterSettle, 2> converter;
    bool passed = false;
    std::string reason;
};

struct LimiterSample {
    double t = 0.0;
    int terminal = 1;
    limiter::LimiterReport report;
    bool lvrt = false;
    double omega = 1.0;
};

/// Channel traces on the relay sample clock, SI units.
struct Waveforms {
    std::vector<std::string> names;
    std::vector<double> t;
    std::vector<std::vector<double>> rows;  // rows[k][channel]
};

constexpr int n_elements = 11;

struct SummaryWindow {
    double t_armed = 0.0;      // relays start evaluating
    double t_fault = 0.0;      // inception, or t_settle without a fault
    double t_fault_end = 0.0;  // clearing or end of run
    double f_nom = 60.0;
};

struct Summary {
    SummaryWindow window;
    std::array<double, 6> min_z_first2{};  // pu, NaN when no determinate sample
    std::array<cplx, 6> steady_z{};        // pu
    std::array<bool, 6> steady_determinate{};
    std::array<relays::ExcursionStats, n_elements> excursion{};  // first 3 cycles
    std::array<std::optional<double>, n_elements> trip{};
    std::array<relays::Region, n_elements> final_region{};
    bool operate_before_fault = false;
};

/// Everything in Summary follows from the trajectory and the window.
Summary summarize(const std::vector<relays::TrajectoryPoint>& traj, const SummaryWindow& w);

struct ScenarioResult {
    Scenario scenario;
    RunStatus status = RunStatus::ok;
    std::string message;
    double t_reached = 0.0;
    bool stable = true;
    SettleReport settle;
    std::vector<relays::RelayVerdict> verdicts;
    std::vector<relays::TrajectoryPoint> trajectory;
    Waveforms waveforms;
    std::vector<LimiterSample> limiter;
    Summary summary;
    cplx z1l_pu{};  // protected line positive-sequence impedance, pu

    bool accepted() const { return status == RunStatus::ok; }
};

/// Never throws for simulation trouble; the status carries it.
ScenarioResult run_scenario(const Scenario& s);

struct SweepSpec {
    Scenario base;
    std::vector<network::FaultType> fault_types;
    std::vector<double> locations;
    std::vector<double> rf;
    std::vector<Infeed> infeed1;
    std::vector<Infeed> infeed2;
    std::vector<limiter::PriorityMode> priorities;

    /// Cross product in lexicographic order of (type, location, rf, infeed1, infeed2, priority).
    std::vector<Scenario> expand() const;
};

SweepSpec parse_sweep(std::string_view toml_text, std::string_view source = "<string>");
SweepSpec load_sweep(const std::filesystem::path& path);

struct SweepResult {
    std::vector<ScenarioResult> results;  // expansion order
};

/// Runs every combination on `jobs` worker threads (<= 0: hardware concurrency).
/// Results do not depend on `jobs`.
SweepResult run_sweep(const SweepSpec& spec, int jobs,
                      const std::function<void(std::size_t, const ScenarioResult&)>& on_done = {});

enum class ExportFormat { waveform_csv, trajectory_csv, verdicts_jsonl, report_md };
std::string_view to_string(ExportFormat f);
std::optional<ExportFormat> parse_export_format(std::string_view s);
inline constexpr std::array<ExportFormat, 4> all_formats{ExportFormat::waveform_csv, ExportFormat::trajectory_csv,
                                                         ExportFormat::verdicts_jsonl, ExportFormat::report_md};

std::string waveform_csv(const ScenarioResult& r);
std::string trajectory_csv(const ScenarioResult& r);
std::string verdicts_jsonl(const ScenarioResult& r);
std::string report_md(const ScenarioResult& r);

/// Writes <dir>/<name>.<suffix> for each format; returns the paths written.
std::vector<std::filesystem::path> export_result(const ScenarioResult& r, const std::filesystem::path& dir,
                                                 const std::vector<ExportFormat>& formats);

std::string sweep_csv(const SweepResult& r);
std::string sweep_report_md(const SweepResult& r);
std::vector<std::filesystem::path> export_sweep(const SweepResult& r, const std::filesystem::path& dir);

}  // namespace ibrprot::scenario
