#include <catch_amalgamated.hpp>

#include "ibrprot/scenario/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace ibrprot;
using namespace ibrprot::scenario;
using relays::Element;
using relays::Region;
using Catch::Approx;

namespace {

Scenario base(Infeed t1, Infeed t2 = Infeed::SG) {
    Scenario s;
    s.name = "t";
    s.infeed1 = t1;
    s.infeed2 = t2;
    return s;
}

Scenario faulted(Infeed t1, network::FaultType type, double m, double rf = 0.0,
                 limiter::PriorityMode prio = limiter::PriorityMode::PositiveSeq) {
    auto s = base(t1);
    network::FaultSpec f;
    f.type = type;
    f.location = m;
    f.rf = rf;
    s.fault = f;
    s.priority = prio;
    return s;
}

int idx(Element e) { return static_cast<int>(e); }

std::string key_of(std::string_view toml) {
    try {
        parse_scenario(toml);
    } catch (const SchemaError& e) {
        return e.key();
    }
    return "";
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("minimal scenario takes the defaults", "[scenario][config]") {
    const auto s = parse_scenario("template = \"line2324\"\n");
    CHECK(s.infeed1 == Infeed::SG);
    CHECK(s.infeed2 == Infeed::SG);
    CHECK_FALSE(s.fault.has_value());
    CHECK(s.sim.h == 50e-6);
    CHECK(s.label() == "nofault_SG-SG_positive");
}

TEST_CASE("full scenario round-trips its fields", "[scenario][config]") {
    const auto s = parse_scenario(R"(
name = "x1"
template = "line2324"
[infeed]
terminal1 = "GFL"
terminal2 = "SG"
priority = "negative"
[fault]
type = "ABG"
location = 0.8
rf = 5.0
t_on = 0.6
t_off = 0.7
[sim]
t_end = 0.8
[network]
converter_mva = 300.0
)");
    CHECK(s.name == "x1");
    CHECK(s.infeed1 == Infeed::GFL);
    CHECK(s.priority == limiter::PriorityMode::NegativeSeq);
    REQUIRE(s.fault);
    CHECK(s.fault->type == network::FaultType::ABG);
    CHECK(s.fault->rf == 5.0);
    CHECK(s.fault->t_off == 0.7);
    CHECK(s.network.converter_mva == 300.0);
    CHECK(s.label() == "ABG_m0.8_rf5_GFL-SG_negative");
}

TEST_CASE("schema errors name the offending key", "[scenario][config]") {
    CHECK(key_of("") == "template");
    CHECK(key_of("template = \"nope\"") == "template");
    CHECK(key_of("template = \"line2324\"\ncolour = 1") == "colour");
    CHECK(key_of("template = \"line2324\"\n[infeed]\nterminal1 = \"PV\"") == "infeed.terminal1");
    CHECK(key_of("template = \"line2324\"\n[infeed]\nterminal1 = \"GFM\"\nterminal2 = \"GFL\"") == "infeed");
    CHECK(key_of("template = \"line2324\"\n[fault]\nlocation = 0.5") == "fault.type");
    CHECK(key_of("template = \"line2324\"\n[fault]\ntype = \"AG\"\nt_on = 0.4") == "fault.t_on");
    CHECK(key_of("template = \"line2324\"\n[fault]\ntype = \"AG\"\nlocation = 1.5") == "fault.location");
    CHECK(key_of("template = \"line2324\"\n[sim]\nh = \"fast\"") == "sim.h");
    CHECK(key_of("template = \"line2324\"\nname = \"../x\"") == "name");
    CHECK(key_of("template = \"line2324\"\n[network]\nconverter_mva = 1.0") == "network.converter_mva");
}

TEST_CASE("malformed TOML is a schema error", "[scenario][config]") {
    CHECK_THROWS_AS(parse_scenario("template = \n"), SchemaError);
}

TEST_CASE("missing file is an I/O error", "[scenario][config]") {
    CHECK_THROWS_AS(load_scenario("/nonexistent/dir/file.toml"), IoError);
}

TEST_CASE("sweep expands in lexicographic order with indexed names", "[scenario][sweep]") {
    const auto sp = parse_sweep(R"(
name = "s"
template = "line2324"
[sweep]
fault_type = ["AG", "ABG"]
location = [0.2, 0.8]
infeed_terminal1 = ["SG", "GFM", "GFL"]
)");
    const auto all = sp.expand();
    REQUIRE(all.size() == 12);
    CHECK(all[0].name == "0000_AG_m0.2_rf0_SG-SG_positive");
    CHECK(all[1].infeed1 == Infeed::GFM);
    CHECK(all[3].fault->location == 0.8);
    CHECK(all[6].fault->type == network::FaultType::ABG);
    CHECK(all[11].name == "0011_ABG_m0.8_rf0_GFL-SG_positive");
    CHECK(sp.expand()[7].name == all[7].name);
}

TEST_CASE("sweep cases are validated up front", "[scenario][sweep]") {
    CHECK_THROWS_AS(parse_sweep("template = \"line2324\"\n[sweep]\nlocation = [0.5, 2.0]"), SchemaError);
    CHECK_THROWS_AS(parse_sweep("template = \"line2324\"\n[sweep]\nrf = []"), SchemaError);
    CHECK_THROWS_AS(parse_sweep("template = \"line2324\"\n"), SchemaError);
}

TEST_CASE("export format names round-trip", "[scenario][export]") {
    for (auto f : all_formats) CHECK(parse_export_format(to_string(f)) == f);
    CHECK_FALSE(parse_export_format("comtrade"));
}

TEST_CASE("invalid scenario returns status invalid without throwing", "[scenario][run]") {
    auto s = base(Infeed::SG);
    s.sim.h = -1.0;
    const auto r = run_scenario(s);
    CHECK(r.status == RunStatus::invalid);
    CHECK(r.message.find("sim.h") != std::string::npos);
}

TEST_CASE("no-fault runs settle and never trip", "[scenario][run]") {
    for (auto inf : {Infeed::SG, Infeed::GFM, Infeed::GFL}) {
        const auto r = run_scenario(base(inf));
        INFO(to_string(inf) << ": " << r.message);
        REQUIRE(r.status == RunStatus::ok);
        CHECK(r.settle.passed);
        CHECK(r.settle.v1_pos == Approx(1.0).margin(0.1));
        CHECK_FALSE(r.summary.operate_before_fault);
        for (auto e : relays::all_elements) CHECK_FALSE(r.summary.trip[idx(e)]);
        if (inf != Infeed::SG) {
            const auto& c = r.settle.converter[0];
            CHECK(c.present);
            CHECK(std::abs(c.p - c.p_target) < 0.01);
        }
    }
}

TEST_CASE("mid-line AG with SG at both ends trips zone 1 and 87AL only", "[scenario][run]") {
    const auto r = run_scenario(faulted(Infeed::SG, network::FaultType::AG, 0.5));
    REQUIRE(r.status == RunStatus::ok);
    const auto& s = r.summary;
    CHECK(s.trip[idx(Element::Z1_AG)]);
    CHECK(s.trip[idx(Element::L87A)]);
    CHECK(s.trip[idx(Element::L87G)]);
    CHECK_FALSE(s.trip[idx(Element::L87B)]);
    CHECK_FALSE(s.trip[idx(Element::L87C)]);
    for (auto e : {Element::Z1_BC, Element::Z1_AB, Element::Z1_CA}) CHECK_FALSE(s.trip[idx(e)]);
    CHECK(*s.trip[idx(Element::L87A)] - s.window.t_fault < 1.5 / 60.0);
}

TEST_CASE("grid-forming negative priority keeps the differential secure for a bus fault", "[scenario][run]") {
    const auto r = run_scenario(
        faulted(Infeed::GFM, network::FaultType::ABG, 0.0, 0.0, limiter::PriorityMode::NegativeSeq));
    REQUIRE(r.status == RunStatus::ok);
    for (auto e : {Element::L87A, Element::L87B, Element::L87C, Element::L87G, Element::L87Q}) {
        CHECK(r.summary.final_region[idx(e)] == Region::restrain);
        CHECK_FALSE(r.summary.trip[idx(e)]);
    }
}

TEST_CASE("SG AG-loop reach grows with fault distance", "[scenario][run]") {
    double prev = 0.0;
    for (double m : {0.2, 0.5, 0.8}) {
        const auto r = run_scenario(faulted(Infeed::SG, network::FaultType::AG, m));
        REQUIRE(r.status == RunStatus::ok);
        REQUIRE(r.summary.steady_determinate[0]);
        const double z = std::abs(r.summary.steady_z[0]);
        CHECK(z > prev);
        prev = z;
    }
}

TEST_CASE("trajectory carries one point per element per sample", "[scenario][run]") {
    const auto r = run_scenario(faulted(Infeed::GFL, network::FaultType::AB, 0.3));
    REQUIRE(r.status == RunStatus::ok);
    REQUIRE(r.trajectory.size() % relays::all_elements.size() == 0);
    for (std::size_t k = 0; k < r.trajectory.size(); ++k) {
        CHECK(r.trajectory[k].element == relays::all_elements[k % relays::all_elements.size()]);
        if (k % relays::all_elements.size()) CHECK(r.trajectory[k].t == r.trajectory[k - 1].t);
    }
}

TEST_CASE("summary counts excursions inside the first three cycles only", "[scenario][summary]") {
    std::vector<relays::TrajectoryPoint> traj;
    const double dt = 1.0 / (60.0 * 32);
    for (int k = 0; k < 200; ++k) {
        const double t = 1.0 + k * dt;
        const Region reg = (k >= 10 && k < 15) || k >= 150 ? Region::candidate : Region::restrain;
        traj.push_back({t, Element::L87G, {0.5, 0.0}, reg, true});
    }
    SummaryWindow w{0.9, 1.0, 2.0, 60.0};
    const auto s = summarize(traj, w);
    const auto& x = s.excursion[idx(Element::L87G)];
    CHECK(x.samples_outside == 5);
    CHECK(x.longest_run == 5);
    CHECK(x.samples_operate == 0);
    CHECK_FALSE(s.trip[idx(Element::L87G)]);
    CHECK(s.final_region[idx(Element::L87G)] == Region::candidate);
}

TEST_CASE("identical runs give identical export bytes", "[scenario][determinism]") {
    const auto sc = faulted(Infeed::GFL, network::FaultType::ABG, 0.0);
    const auto a = run_scenario(sc);
    const auto b = run_scenario(sc);
    REQUIRE(a.status == RunStatus::ok);
    CHECK(waveform_csv(a) == waveform_csv(b));
    CHECK(trajectory_csv(a) == trajectory_csv(b));
    CHECK(verdicts_jsonl(a) == verdicts_jsonl(b));
    CHECK(report_md(a) == report_md(b));
}

TEST_CASE("export writes every format and re-export is byte identical", "[scenario][export]") {
    auto sc = faulted(Infeed::SG, network::FaultType::AG, 0.5);
    sc.name = "exp";
    const auto r = run_scenario(sc);
    const auto dir = std::filesystem::temp_directory_path() / "ibrprot_export_test";
    std::filesystem::remove_all(dir);
    const std::vector<ExportFormat> fmts(all_formats.begin(), all_formats.end());
    const auto first = export_result(r, dir, fmts);
    REQUIRE(first.size() == 4);
    std::vector<std::string> bytes;
    for (const auto& p : first) bytes.push_back(slurp(p));
    const auto second = export_result(r, dir, fmts);
    for (std::size_t k = 0; k < second.size(); ++k) CHECK(slurp(second[k]) == bytes[k]);

    CHECK(bytes[1].rfind("t,element,re,im,region,settled\n", 0) == 0);
    CHECK(bytes[0].rfind("t,v1_a,", 0) == 0);
    CHECK(bytes[3].find("## Excursions in the first 3 cycles") != std::string::npos);
    std::istringstream lines(bytes[2]);
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        CHECK(line.front() == '{');
        CHECK(line.find("\"element\"") < line.find("\"operand_im\""));
        CHECK(line.find("\"operate\"") < line.find("\"t\""));
        ++n;
    }
    CHECK(n == static_cast<int>(r.verdicts.size()));
    std::filesystem::remove_all(dir);
}

TEST_CASE("export into an unwritable location raises IoError", "[scenario][export]") {
    const auto file = std::filesystem::temp_directory_path() / "ibrprot_not_a_dir";
    std::ofstream(file) << "x";
    ScenarioResult r;
    CHECK_THROWS_AS(export_result(r, file / "sub", {ExportFormat::report_md}), IoError);
    std::filesystem::remove(file);
}

TEST_CASE("sweep results do not depend on the worker count", "[scenario][sweep][determinism]") {
    const auto sp = parse_sweep(R"(
name = "d"
template = "line2324"
[fault]
type = "AG"
[sweep]
location = [0.0, 0.5]
infeed_terminal1 = ["SG", "GFM", "GFL"]
)");
    std::vector<std::size_t> seen;
    const auto one = run_sweep(sp, 1, [&](std::size_t k, const ScenarioResult&) { seen.push_back(k); });
    const auto many = run_sweep(sp, 8);
    REQUIRE(one.results.size() == 6);
    CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
    CHECK(sweep_csv(one) == sweep_csv(many));
    CHECK(sweep_report_md(one) == sweep_report_md(many));
    for (std::size_t k = 0; k < 6; ++k) CHECK(trajectory_csv(one.results[k]) == trajectory_csv(many.results[k]));
}
