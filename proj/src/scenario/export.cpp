#include "ibrprot/scenario/scenario.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <system_error>

namespace ibrprot::scenario {

namespace {

using relays::Element;

// Shortest round-trip text, so CSV and JSON bytes are a pure function of the doubles.
void put(std::string& out, double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    out.append(buf, r.ptr);
}

std::string fixed(double x, int digits) {
    if (!std::isfinite(x)) return "n/a";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

std::string_view suffix(ExportFormat f) {
    switch (f) {
        case ExportFormat::waveform_csv: return ".waveforms.csv";
        case ExportFormat::trajectory_csv: return ".trajectory.csv";
        case ExportFormat::verdicts_jsonl: return ".verdicts.jsonl";
        case ExportFormat::report_md: return ".report.md";
    }
    return ".out";
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(path, "cannot open for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.close();
    if (!os) throw IoError(path, "write failed");
}

void make_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError(dir, "cannot create directory");
}

double pct_of_line(double z, cplx z1l) { return 100.0 * z / std::abs(z1l); }

std::string trip_ms(const Summary& s, int e) {
    return s.trip[e] ? fixed(1e3 * (*s.trip[e] - s.window.t_fault), 2) : "-";
}

std::string fault_text(const Scenario& s) {
    if (!s.fault) return "none";
    const auto& f = *s.fault;
    std::string out = std::string(network::to_string(f.type)) + " at m = " + fixed(f.location, 3) + ", Rf = " +
                      fixed(f.rf, 2) + " ohm, t_on = " + fixed(f.t_on, 4) + " s";
    if (f.external()) out += " (external, terminal-" + std::string(f.location <= 0.0 ? "1" : "2") + " bus)";
    return out;
}

}  // namespace

std::string_view to_string(ExportFormat f) {
    switch (f) {
        case ExportFormat::waveform_csv: return "waveform-csv";
        case ExportFormat::trajectory_csv: return "trajectory-csv";
        case ExportFormat::verdicts_jsonl: return "verdicts-jsonl";
        case ExportFormat::report_md: return "report-md";
    }
    return "?";
}

std::optional<ExportFormat> parse_export_format(std::string_view s) {
    for (auto f : all_formats)
        if (to_string(f) == s) return f;
    return std::nullopt;
}

std::string waveform_csv(const ScenarioResult& r) {
    const auto& w = r.waveforms;
    std::string out = "t";
    for (const auto& n : w.names) out += "," + n;
    out += '\n';
    for (std::size_t k = 0; k < w.t.size(); ++k) {
        put(out, w.t[k]);
        for (double x : w.rows[k]) {
            out += ',';
            put(out, x);
        }
        out += '\n';
    }
    return out;
}

std::string trajectory_csv(const ScenarioResult& r) {
    std::string out = "t,element,re,im,region,settled\n";
    for (const auto& p : r.trajectory) {
        put(out, p.t);
        out += ',';
        out += relays::to_string(p.element);
        out += ',';
        put(out, p.operand.real());
        out += ',';
        put(out, p.operand.imag());
        out += ',';
        out += relays::to_string(p.region);
        out += p.settled ? ",1\n" : ",0\n";
    }
    return out;
}

std::string verdicts_jsonl(const ScenarioResult& r) {
    std::string out;
    for (const auto& v : r.verdicts) {
        // nlohmann::json objects are std::map backed, so keys come out sorted.
        nlohmann::json j;
        j["element"] = std::string(relays::to_string(v.element));
        j["operand_im"] = v.operand.imag();
        j["operand_re"] = v.operand.real();
        j["operate"] = v.operate;
        j["scenario"] = r.scenario.name;
        j["t"] = v.t;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string report_md(const ScenarioResult& r) {
    const auto& s = r.summary;
    const auto& sc = r.scenario;
    std::string out = "# " + sc.name + "\n\n";
    out += "- label: " + sc.label() + "\n";
    out += "- status: " + std::string(to_string(r.status)) + (r.message.empty() ? "" : " (" + r.message + ")") + "\n";
    out += "- infeed: terminal 1 " + std::string(to_string(sc.infeed1)) + ", terminal 2 " +
           std::string(to_string(sc.infeed2)) + ", priority " + std::string(limiter::to_string(sc.priority)) + "\n";
    out += "- fault: " + fault_text(sc) + "\n";
    out += "- Z1L: " + fixed(std::abs(r.z1l_pu), 5) + " pu at " + fixed(std::arg(r.z1l_pu) * 180.0 / M_PI, 2) +
           " deg\n";
    out += "- settle at " + fixed(r.settle.t, 4) + " s: " + (r.settle.passed ? "passed" : "failed") +
           (r.settle.reason.empty() ? "" : " (" + r.settle.reason + ")") + "\n";
    if (!r.accepted()) return out;
    out += "- operate before fault: " + std::string(s.operate_before_fault ? "yes" : "no") + "\n\n";

    out += "## Distance loops\n\n";
    out += "| loop | steady Z (pu) | steady abs(Z) % of line | min abs(Z) first 2 cycles % of line | trip (ms) |\n";
    out += "|---|---|---|---|---|\n";
    for (int e = 0; e < 6; ++e) {
        const auto el = static_cast<Element>(e);
        const cplx z = s.steady_z[e];
        const bool det = s.steady_determinate[e];
        out += "| " + std::string(relays::to_string(el)) + " | " +
               (det ? fixed(z.real(), 5) + (z.imag() < 0 ? " - j" : " + j") + fixed(std::abs(z.imag()), 5) : "n/a") +
               " | " + (det ? fixed(pct_of_line(std::abs(z), r.z1l_pu), 2) : "n/a") + " | " +
               fixed(pct_of_line(s.min_z_first2[e], r.z1l_pu), 2) + " | " + trip_ms(s, e) + " |\n";
    }

    out += "\n## Excursions in the first 3 cycles\n\n";
    out += "| element | outside restraint | longest run | operate | final region | trip (ms) |\n";
    out += "|---|---|---|---|---|---|\n";
    for (auto el : relays::all_elements) {
        const int e = static_cast<int>(el);
        const auto& x = s.excursion[e];
        out += "| " + std::string(relays::to_string(el)) + " | " + std::to_string(x.samples_outside) + " | " +
               std::to_string(x.longest_run) + " | " + std::to_string(x.samples_operate) + " | " +
               std::string(relays::to_string(s.final_region[e])) + " | " + trip_ms(s, e) + " |\n";
    }
    return out;
}

std::vector<std::filesystem::path> export_result(const ScenarioResult& r, const std::filesystem::path& dir,
                                                 const std::vector<ExportFormat>& formats) {
    make_dir(dir);
    std::vector<std::filesystem::path> written;
    for (auto f : formats) {
        std::string bytes;
        switch (f) {
            case ExportFormat::waveform_csv: bytes = waveform_csv(r); break;
            case ExportFormat::trajectory_csv: bytes = trajectory_csv(r); break;
            case ExportFormat::verdicts_jsonl: bytes = verdicts_jsonl(r); break;
            case ExportFormat::report_md: bytes = report_md(r); break;
        }
        auto path = dir / (r.scenario.name + std::string(suffix(f)));
        write_file(path, bytes);
        written.push_back(std::move(path));
    }
    return written;
}

std::string sweep_csv(const SweepResult& r) {
    std::string out = "index,name,fault,location,rf,infeed1,infeed2,priority,status";
    for (int e = 0; e < 6; ++e) {
        const std::string n(relays::to_string(static_cast<Element>(e)));
        out += ",steady_pct_" + n + ",min_pct_" + n;
    }
    for (auto el : relays::all_elements) {
        const std::string n(relays::to_string(el));
        out += ",outside_" + n + ",operate_" + n + ",trip_" + n;
    }
    out += '\n';
    for (std::size_t k = 0; k < r.results.size(); ++k) {
        const auto& res = r.results[k];
        const auto& sc = res.scenario;
        const auto& s = res.summary;
        out += std::to_string(k) + "," + sc.name + ",";
        if (sc.fault) {
            out += std::string(network::to_string(sc.fault->type)) + ",";
            put(out, sc.fault->location);
            out += ',';
            put(out, sc.fault->rf);
        } else {
            out += "none,,";
        }
        out += "," + std::string(to_string(sc.infeed1)) + "," + std::string(to_string(sc.infeed2)) + "," +
               std::string(limiter::to_string(sc.priority)) + "," + std::string(to_string(res.status));
        const bool ok = res.accepted();
        for (int e = 0; e < 6; ++e) {
            out += ',';
            if (ok && s.steady_determinate[e]) put(out, pct_of_line(std::abs(s.steady_z[e]), res.z1l_pu));
            out += ',';
            if (ok && std::isfinite(s.min_z_first2[e])) put(out, pct_of_line(s.min_z_first2[e], res.z1l_pu));
        }
        for (auto el : relays::all_elements) {
            const int e = static_cast<int>(el);
            if (ok) {
                out += "," + std::to_string(s.excursion[e].samples_outside) + "," +
                       std::to_string(s.excursion[e].samples_operate) + "," + (s.trip[e] ? "1" : "0");
            } else {
                out += ",,,";
            }
        }
        out += '\n';
    }
    return out;
}

std::string sweep_report_md(const SweepResult& r) {
    std::size_t ok = 0;
    for (const auto& res : r.results) ok += res.accepted();
    std::string out = "# Sweep report\n\n";
    out += "- scenarios: " + std::to_string(r.results.size()) + "\n";
    out += "- accepted: " + std::to_string(ok) + "\n\n";

    out += "## Distance loops (% of line)\n\n";
    out += "| # | scenario | status |";
    for (int e = 0; e < 6; ++e) out += " " + std::string(relays::to_string(static_cast<Element>(e))) + " steady / min |";
    out += "\n|---|---|---|";
    for (int e = 0; e < 6; ++e) out += "---|";
    out += '\n';
    for (std::size_t k = 0; k < r.results.size(); ++k) {
        const auto& res = r.results[k];
        out += "| " + std::to_string(k) + " | " + res.scenario.name + " | " + std::string(to_string(res.status)) + " |";
        for (int e = 0; e < 6; ++e) {
            const auto& s = res.summary;
            if (!res.accepted()) {
                out += " - |";
                continue;
            }
            const double st = s.steady_determinate[e] ? pct_of_line(std::abs(s.steady_z[e]), res.z1l_pu) : NAN;
            out += " " + fixed(st, 1) + " / " + fixed(pct_of_line(s.min_z_first2[e], res.z1l_pu), 1) + " |";
        }
        out += '\n';
    }

    out += "\n## Excursions in the first 3 cycles and trips\n\n";
    out += "Cells read outside-restraint samples, then T when the element tripped.\n\n";
    out += "| # | scenario |";
    for (auto el : relays::all_elements) out += " " + std::string(relays::to_string(el)) + " |";
    out += "\n|---|---|";
    for (std::size_t e = 0; e < relays::all_elements.size(); ++e) out += "---|";
    out += '\n';
    for (std::size_t k = 0; k < r.results.size(); ++k) {
        const auto& res = r.results[k];
        out += "| " + std::to_string(k) + " | " + res.scenario.name + " |";
        for (auto el : relays::all_elements) {
            const int e = static_cast<int>(el);
            if (!res.accepted()) {
                out += " - |";
                continue;
            }
            out += " " + std::to_string(res.summary.excursion[e].samples_outside) +
                   (res.summary.trip[e] ? " T" : "") + " |";
        }
        out += '\n';
    }

    bool any_failed = false;
    for (const auto& res : r.results) any_failed = any_failed || !res.accepted();
    if (any_failed) {
        out += "\n## Rejected runs\n\n";
        for (std::size_t k = 0; k < r.results.size(); ++k) {
            const auto& res = r.results[k];
            if (res.accepted()) continue;
            out += "- " + std::to_string(k) + " " + res.scenario.name + ": " + std::string(to_string(res.status)) +
                   (res.message.empty() ? "" : ", " + res.message) + "\n";
        }
    }
    return out;
}

std::vector<std::filesystem::path> export_sweep(const SweepResult& r, const std::filesystem::path& dir) {
    make_dir(dir);
    const auto csv = dir / "sweep.csv";
    const auto md = dir / "sweep_report.md";
    write_file(csv, sweep_csv(r));
    write_file(md, sweep_report_md(r));
    return {csv, md};
}

}  // namespace ibrprot::scenario
