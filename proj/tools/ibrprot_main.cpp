#include "ibrprot/scenario/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace sc = ibrprot::scenario;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_schema = 2;
constexpr int exit_sim = 3;
constexpr int exit_io = 4;

// A file with a [sweep] table is a sweep; anything else is a single scenario.
bool is_sweep_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw sc::IoError(path, "cannot open");
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t");
        if (b != std::string::npos && line.compare(b, 7, "[sweep]") == 0) return true;
    }
    return false;
}

int status_exit(sc::RunStatus s) {
    switch (s) {
        case sc::RunStatus::ok: return exit_ok;
        case sc::RunStatus::invalid: return exit_schema;
        default: return exit_sim;
    }
}

std::vector<sc::ExportFormat> parse_formats(const std::vector<std::string>& names) {
    if (names.empty()) return {sc::all_formats.begin(), sc::all_formats.end()};
    std::vector<sc::ExportFormat> out;
    for (const auto& n : names) {
        const auto f = sc::parse_export_format(n);
        if (!f) throw sc::SchemaError("--export", "unknown format '" + n + "'");
        out.push_back(*f);
    }
    return out;
}

int cmd_run(const std::filesystem::path& file, const std::filesystem::path& out, std::optional<double> step,
            const std::vector<std::string>& formats) {
    const auto fmts = parse_formats(formats);
    auto s = sc::load_scenario(file);
    if (step) {
        s.sim.h = *step;
        s.validate();
    }
    std::cerr << "running " << s.name << " (" << s.label() << ")\n";
    const auto r = sc::run_scenario(s);
    std::cout << s.name << ": " << sc::to_string(r.status);
    if (!r.message.empty()) std::cout << " (" << r.message << ")";
    std::cout << '\n';
    if (r.status == sc::RunStatus::invalid) return exit_schema;
    for (const auto& p : sc::export_result(r, out, fmts)) std::cout << "wrote " << p.string() << '\n';
    return status_exit(r.status);
}

int cmd_sweep(const std::filesystem::path& file, const std::filesystem::path& out, int jobs) {
    const auto spec = sc::load_sweep(file);
    const std::size_t n = spec.expand().size();
    std::cerr << "sweep of " << n << " scenarios\n";
    const auto r = sc::run_sweep(spec, jobs, [n](std::size_t k, const sc::ScenarioResult& res) {
        std::cerr << "[" << k + 1 << "/" << n << "] " << res.scenario.name << ": " << sc::to_string(res.status)
                  << '\n';
    });
    for (const auto& p : sc::export_sweep(r, out)) std::cout << "wrote " << p.string() << '\n';
    int code = exit_ok;
    for (const auto& res : r.results) code = std::max(code, status_exit(res.status) == exit_ok ? exit_ok : exit_sim);
    return code;
}

int cmd_validate(const std::filesystem::path& file) {
    if (is_sweep_file(file)) {
        const auto spec = sc::load_sweep(file);
        std::cout << file.string() << ": valid sweep, " << spec.expand().size() << " scenarios\n";
    } else {
        const auto s = sc::load_scenario(file);
        s.validate();
        std::cout << file.string() << ": valid scenario " << s.name << " (" << s.label() << ")\n";
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EMT fault scenarios for converter-fed lines with distance and differential relays"};
    app.require_subcommand(1);

    std::filesystem::path run_file, run_out = "out";
    std::optional<double> step;
    std::vector<std::string> formats;
    auto* run = app.add_subcommand("run", "Simulate one scenario and export its results");
    run->add_option("file", run_file, "Scenario TOML")->required();
    run->add_option("--out", run_out, "Output directory")->capture_default_str();
    run->add_option("--step", step, "Override the solver time step in seconds");
    run->add_option("--export", formats, "Formats: waveform-csv, trajectory-csv, verdicts-jsonl, report-md (default all)")
        ->delimiter(',');

    std::filesystem::path sweep_file, sweep_out = "out";
    int jobs = 0;
    auto* sweep = app.add_subcommand("sweep", "Run every combination of a sweep file");
    sweep->add_option("file", sweep_file, "Sweep TOML")->required();
    sweep->add_option("--jobs,-j", jobs, "Worker threads (0: all cores)")->capture_default_str();
    sweep->add_option("--out", sweep_out, "Output directory")->capture_default_str();

    auto* tmpl = app.add_subcommand("templates", "Network templates");
    tmpl->require_subcommand(1);
    auto* tmpl_list = tmpl->add_subcommand("list", "List the bundled templates");

    std::filesystem::path validate_file;
    auto* val = app.add_subcommand("validate", "Check a scenario or sweep file without running it");
    val->add_option("file", validate_file, "Scenario or sweep TOML")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_schema;
    }

    try {
        if (*run) return cmd_run(run_file, run_out, step, formats);
        if (*sweep) return cmd_sweep(sweep_file, sweep_out, jobs);
        if (*tmpl_list) {
            for (const auto& t : sc::templates()) std::cout << t.id << "  " << t.description << '\n';
            return exit_ok;
        }
        if (*val) return cmd_validate(validate_file);
    } catch (const sc::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return exit_schema;
    } catch (const sc::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_sim;
    }
    return exit_ok;
}
