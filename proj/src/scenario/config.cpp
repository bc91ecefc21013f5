#include "ibrprot/scenario/scenario.hpp"

#include <toml.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ibrprot::scenario {

namespace {

void check(bool ok, const std::string& key, const std::string& constraint) {
    if (!ok) throw SchemaError(key, constraint);
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

// One TOML table read under a dotted path; every key must be consumed.
class Section {
public:
    Section(const toml::table* t, std::string path) : t_(t), path_(std::move(path)) {}

    bool present() const { return t_ != nullptr; }
    bool has(std::string_view k) const { return t_ && t_->contains(k); }

    void number(std::string_view k, double& out) {
        if (auto n = node(k)) {
            auto v = n->value<double>();
            check(v && (n->is_number()), key(k), "expected a number");
            check(std::isfinite(*v), key(k), "must be finite");
            out = *v;
        }
    }
    void integer(std::string_view k, int& out) {
        if (auto n = node(k)) {
            check(n->is_integer(), key(k), "expected an integer");
            const auto v = *n->value<std::int64_t>();
            check(v >= -1000000 && v <= 1000000, key(k), "out of range");
            out = static_cast<int>(v);
        }
    }
    void boolean(std::string_view k, bool& out) {
        if (auto n = node(k)) {
            check(n->is_boolean(), key(k), "expected true or false");
            out = *n->value<bool>();
        }
    }
    std::optional<std::string> text(std::string_view k) {
        if (auto n = node(k)) {
            check(n->is_string(), key(k), "expected a string");
            return *n->value<std::string>();
        }
        return std::nullopt;
    }
    const toml::array* array(std::string_view k) {
        if (auto n = node(k)) {
            check(n->is_array(), key(k), "expected an array");
            return n->as_array();
        }
        return nullptr;
    }
    Section child(std::string_view k) {
        if (auto n = node(k)) {
            check(n->is_table(), key(k), "expected a table");
            return {n->as_table(), key(k)};
        }
        return {nullptr, key(k)};
    }
    /// Rejects anything not read.
    void done() const {
        if (!t_) return;
        for (auto&& [k, v] : *t_)
            if (!seen_.count(std::string(k.str()))) throw SchemaError(key(k.str()), "unknown key");
    }
    std::string key(std::string_view k) const { return path_.empty() ? std::string(k) : path_ + "." + std::string(k); }

private:
    const toml::node* node(std::string_view k) {
        if (!t_) return nullptr;
        seen_.insert(std::string(k));
        return t_->get(k);
    }

    const toml::table* t_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class T, class Parse>
T parse_enum(const std::string& key, const std::string& value, Parse parse, const char* allowed) {
    auto v = parse(value);
    check(v.has_value(), key, std::string("must be one of ") + allowed);
    return *v;
}

network::FaultType parse_fault(const std::string& key, const std::string& v) {
    return parse_enum<network::FaultType>(key, v, network::parse_fault_type,
                                          "AG, BG, CG, AB, BC, CA, ABG, BCG, CAG, ABC, ABCG");
}
Infeed parse_inf(const std::string& key, const std::string& v) {
    return parse_enum<Infeed>(key, v, parse_infeed, "SG, GFM, GFL, none");
}
limiter::PriorityMode parse_prio(const std::string& key, const std::string& v) {
    return parse_enum<limiter::PriorityMode>(key, v, parse_priority, "positive, negative");
}

void read_fault(Section f, std::optional<network::FaultSpec>& out) {
    if (!f.present()) return;
    network::FaultSpec spec;
    const auto type = f.text("type");
    check(type.has_value(), f.key("type"), "required when [fault] is given");
    spec.type = parse_fault(f.key("type"), *type);
    f.number("location", spec.location);
    f.number("rf", spec.rf);
    f.number("t_on", spec.t_on);
    if (f.has("t_off")) {
        double t_off = 0.0;
        f.number("t_off", t_off);
        spec.t_off = t_off;
    }
    f.done();
    out = spec;
}

// Shared by scenario and sweep files; `extra` names top-level keys handled by the caller.
Scenario read_scenario(Section& root) {
    Scenario s;
    if (auto n = root.text("name")) s.name = *n;
    const auto tid = root.text("template");
    check(tid.has_value(), "template", "required");
    s.template_id = *tid;

    auto inf = root.child("infeed");
    if (auto v = inf.text("terminal1")) s.infeed1 = parse_inf(inf.key("terminal1"), *v);
    if (auto v = inf.text("terminal2")) s.infeed2 = parse_inf(inf.key("terminal2"), *v);
    if (auto v = inf.text("priority")) s.priority = parse_prio(inf.key("priority"), *v);
    inf.done();

    read_fault(root.child("fault"), s.fault);

    auto sim = root.child("sim");
    sim.number("h", s.sim.h);
    sim.number("f_nom", s.sim.f_nom);
    sim.number("t_settle", s.sim.t_settle);
    sim.number("t_end", s.sim.t_end);
    sim.done();

    auto net = root.child("network");
    net.boolean("line_charging", s.network.line_charging);
    net.number("sg_angle_deg", s.network.sg_angle_deg);
    net.number("converter_mva", s.network.converter_mva);
    net.done();

    auto rel = root.child("relay");
    rel.number("zone1_reach", s.relay.zone1_reach);
    rel.integer("samples_per_cycle", s.relay.samples_per_cycle);
    rel.number("alpha_r_outer", s.relay.alpha.r_outer);
    rel.number("alpha_blinder_deg", s.relay.alpha.blinder_deg);
    rel.number("alpha_pickup", s.relay.alpha.pickup);
    rel.done();

    auto gfm = root.child("gfm");
    for (auto [k, p] : {std::pair<const char*, double*>{"rv", &s.gfm.rv}, {"lv", &s.gfm.lv}, {"ta", &s.gfm.ta},
                        {"kd", &s.gfm.kd}, {"kq", &s.gfm.kq}, {"kp_q", &s.gfm.kp_q}, {"ki_q", &s.gfm.ki_q},
                        {"q_clamp", &s.gfm.q_clamp}, {"v_set", &s.gfm.v_set}, {"p_set", &s.gfm.p_set},
                        {"q_set", &s.gfm.q_set}, {"i_max", &s.gfm.i_max}})
        gfm.number(k, *p);
    gfm.done();

    auto gfl = root.child("gfl");
    for (auto [k, p] : {std::pair<const char*, double*>{"kp_pll", &s.gfl.kp_pll}, {"ki_pll", &s.gfl.ki_pll},
                        {"pll_clamp", &s.gfl.pll_clamp}, {"p_set", &s.gfl.p_set}, {"q_set", &s.gfl.q_set},
                        {"i_max", &s.gfl.i_max}})
        gfl.number(k, *p);
    gfl.done();

    auto lv = root.child("lvrt");
    lv.number("v_enter", s.lvrt.v_enter);
    lv.number("v_exit", s.lvrt.v_exit);
    lv.number("k_pos", s.lvrt.k_pos);
    lv.number("k_neg", s.lvrt.k_neg);
    lv.done();

    auto inner = root.child("inner");
    double lf = s.gfm.inner.lf, rf = s.gfm.inner.rf, v_max = s.gfm.inner.v_max;
    inner.number("lf", lf);
    inner.number("rf", rf);
    inner.number("bandwidth_hz", s.inner_bandwidth_hz);
    inner.number("v_max", v_max);
    inner.done();
    check(lf > 0.0, "inner.lf", "must be positive");
    check(rf > 0.0, "inner.rf", "must be positive");
    check(s.inner_bandwidth_hz > 0.0, "inner.bandwidth_hz", "must be positive");
    check(v_max > 0.0, "inner.v_max", "must be positive");
    check(s.sim.f_nom > 0.0, "sim.f_nom", "must be positive");
    auto tuned = control::InnerLoopParams::tuned(lf, rf, s.inner_bandwidth_hz, s.sim.f_nom);
    tuned.v_max = v_max;
    s.gfm.inner = s.gfl.inner = tuned;

    auto st = root.child("startup");
    st.number("t_sync", s.startup.t_sync);
    st.number("t_ramp", s.startup.t_ramp);
    st.done();

    s.gfm.f_nom = s.gfl.f_nom = s.sim.f_nom;
    s.gfl.lvrt = s.lvrt;
    return s;
}

toml::table parse_toml(std::string_view text, std::string_view source) {
    try {
        return toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "syntax error at line " << e.source().begin.line << ": " << e.description();
        throw SchemaError(std::string(source), os.str());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

std::string_view to_string(Infeed f) {
    static constexpr std::string_view names[] = {"SG", "GFM", "GFL", "none"};
    return names[static_cast<int>(f)];
}

std::optional<Infeed> parse_infeed(std::string_view s) {
    for (auto f : {Infeed::SG, Infeed::GFM, Infeed::GFL, Infeed::none})
        if (to_string(f) == s) return f;
    return std::nullopt;
}

std::optional<limiter::PriorityMode> parse_priority(std::string_view s) {
    for (auto m : {limiter::PriorityMode::PositiveSeq, limiter::PriorityMode::NegativeSeq})
        if (limiter::to_string(m) == s) return m;
    return std::nullopt;
}

const std::vector<TemplateInfo>& templates() {
    static const std::vector<TemplateInfo> list{
        {"line2324",
         "230 kV 60 Hz two-terminal corridor, 100 km line; terminal 1 SG/GFM/GFL (converters 200 MVA by default behind a "
         "20/230 kV delta-wye unit), terminal 2 SG grid or open"},
    };
    return list;
}

void Scenario::validate() const {
    bool known = false;
    for (const auto& t : templates()) known = known || t.id == template_id;
    check(known, "template", "unknown template '" + template_id + "'");
    // The name becomes a file stem on export.
    check(!name.empty() && name.size() <= 128 && name.front() != '.' &&
              std::all_of(name.begin(), name.end(),
                          [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; }),
          "name", "must be 1-128 characters from [A-Za-z0-9._-], not starting with '.'");
    check(infeed1 != Infeed::none, "infeed.terminal1", "must be SG, GFM or GFL");
    check(infeed1 == Infeed::SG || infeed2 == Infeed::SG, "infeed", "at least one terminal must be SG");

    check(sim.h > 0.0 && sim.h <= 1e-3, "sim.h", "must lie in (0, 1 ms]");
    check(sim.f_nom == 50.0 || sim.f_nom == 60.0, "sim.f_nom", "must be 50 or 60");
    check(sim.t_settle > 0.0, "sim.t_settle", "must be positive");
    check(sim.t_end > sim.t_settle, "sim.t_end", "must exceed sim.t_settle");
    check(startup.t_sync >= 0.0 && startup.t_ramp >= 0.0, "startup", "times must be non-negative");
    check(startup.t_sync + startup.t_ramp < sim.t_settle, "startup", "t_sync + t_ramp must end before sim.t_settle");

    if (fault) {
        check(fault->location >= 0.0 && fault->location <= 1.0, "fault.location", "must lie in [0, 1]");
        check(fault->rf >= 0.0, "fault.rf", "must be non-negative");
        check(fault->t_on > sim.t_settle, "fault.t_on", "must exceed sim.t_settle (" + num(sim.t_settle) + ")");
        check(sim.t_end > fault->t_on, "sim.t_end", "must exceed fault.t_on");
        if (fault->t_off) check(*fault->t_off > fault->t_on, "fault.t_off", "must exceed fault.t_on");
    }

    check(network.sg_angle_deg > -90.0 && network.sg_angle_deg < 90.0, "network.sg_angle_deg",
          "must lie in (-90, 90)");
    check(network.converter_mva >= 10.0 && network.converter_mva <= 5000.0, "network.converter_mva",
          "must lie in [10, 5000]");
    check(relay.zone1_reach > 0.0 && relay.zone1_reach <= 1.0, "relay.zone1_reach", "must lie in (0, 1]");
    check(relay.samples_per_cycle >= 8 && relay.samples_per_cycle <= 256, "relay.samples_per_cycle",
          "must lie in [8, 256]");
    check(relay.alpha.r_outer > 1.0, "relay.alpha_r_outer", "must exceed 1");
    check(relay.alpha.blinder_deg > 180.0 && relay.alpha.blinder_deg < 360.0, "relay.alpha_blinder_deg",
          "must lie in (180, 360)");
    check(relay.alpha.pickup >= 0.0, "relay.alpha_pickup", "must be non-negative");

    check(gfm.rv > 0.0, "gfm.rv", "must be positive");
    check(gfm.lv > 0.0, "gfm.lv", "must be positive");
    check(gfm.ta > 0.0, "gfm.ta", "must be positive");
    check(gfm.kd >= 0.0, "gfm.kd", "must be non-negative");
    check(gfm.kq >= 0.0, "gfm.kq", "must be non-negative");
    check(gfm.kp_q >= 0.0 && gfm.ki_q >= 0.0, "gfm.kp_q", "droop PI gains must be non-negative");
    check(gfm.q_clamp > 0.0, "gfm.q_clamp", "must be positive");
    check(gfm.v_set > 0.5 && gfm.v_set < 1.5, "gfm.v_set", "must lie in (0.5, 1.5)");
    check(gfm.i_max >= 1.0, "gfm.i_max", "must be at least 1");
    check(gfl.kp_pll > 0.0, "gfl.kp_pll", "must be positive");
    check(gfl.ki_pll > 0.0, "gfl.ki_pll", "must be positive");
    check(gfl.pll_clamp > 0.0, "gfl.pll_clamp", "must be positive");
    check(gfl.i_max >= 1.0, "gfl.i_max", "must be at least 1");
    check(std::hypot(gfm.p_set, gfm.q_set) <= gfm.i_max, "gfm.p_set", "setpoint exceeds i_max");
    check(std::hypot(gfl.p_set, gfl.q_set) <= gfl.i_max, "gfl.p_set", "setpoint exceeds i_max");
    check(lvrt.v_enter > 0.0 && lvrt.v_enter < 1.0, "lvrt.v_enter", "must lie in (0, 1)");
    check(lvrt.v_exit > lvrt.v_enter, "lvrt.v_exit", "must exceed lvrt.v_enter");
    check(lvrt.k_pos >= 0.0, "lvrt.k_pos", "must be non-negative");
    check(lvrt.k_neg >= 0.0, "lvrt.k_neg", "must be non-negative");
}

std::string Scenario::label() const {
    std::string s = fault ? std::string(network::to_string(fault->type)) + "_m" + num(fault->location) + "_rf" +
                                num(fault->rf)
                          : std::string("nofault");
    return s + "_" + std::string(to_string(infeed1)) + "-" + std::string(to_string(infeed2)) + "_" +
           std::string(limiter::to_string(priority));
}

Scenario parse_scenario(std::string_view text, std::string_view source) {
    const auto tbl = parse_toml(text, source);
    Section root(&tbl, "");
    Scenario s = read_scenario(root);
    root.done();
    s.validate();
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    return parse_scenario(read_file(path), path.string());
}

SweepSpec parse_sweep(std::string_view text, std::string_view source) {
    const auto tbl = parse_toml(text, source);
    Section root(&tbl, "");
    SweepSpec sp;
    sp.base = read_scenario(root);
    auto sw = root.child("sweep");
    check(sw.present(), "sweep", "required in a sweep file");

    auto strings = [&](std::string_view k, auto parse, auto& out) {
        if (const auto* a = sw.array(k)) {
            int idx = 0;
            for (const auto& e : *a) {
                const std::string key = sw.key(k) + "[" + std::to_string(idx++) + "]";
                check(e.is_string(), key, "expected a string");
                out.push_back(parse(key, *e.value<std::string>()));
            }
            check(!out.empty(), sw.key(k), "must not be empty");
        }
    };
    auto numbers = [&](std::string_view k, std::vector<double>& out) {
        if (const auto* a = sw.array(k)) {
            int idx = 0;
            for (const auto& e : *a) {
                const std::string key = sw.key(k) + "[" + std::to_string(idx++) + "]";
                check(e.is_number(), key, "expected a number");
                out.push_back(*e.value<double>());
                check(std::isfinite(out.back()), key, "must be finite");
            }
            check(!out.empty(), sw.key(k), "must not be empty");
        }
    };
    strings("fault_type", parse_fault, sp.fault_types);
    numbers("location", sp.locations);
    numbers("rf", sp.rf);
    strings("infeed_terminal1", parse_inf, sp.infeed1);
    strings("infeed_terminal2", parse_inf, sp.infeed2);
    strings("priority", parse_prio, sp.priorities);
    sw.done();
    root.done();

    const auto all = sp.expand();
    check(!all.empty(), "sweep", "expands to no scenarios");
    check(all.size() <= 100000, "sweep", "expands to more than 100000 scenarios");
    for (std::size_t k = 0; k < all.size(); ++k) {
        try {
            all[k].validate();
        } catch (const SchemaError& e) {
            throw SchemaError(e.key(), std::string(e.what()).substr(e.key().size() + 2) + " (sweep case " +
                                           std::to_string(k) + ", " + all[k].label() + ")");
        }
    }
    return sp;
}

SweepSpec load_sweep(const std::filesystem::path& path) { return parse_sweep(read_file(path), path.string()); }

std::vector<Scenario> SweepSpec::expand() const {
    const bool faulted = base.fault || !fault_types.empty() || !locations.empty() || !rf.empty();
    const network::FaultSpec f0 = base.fault.value_or(network::FaultSpec{});
    auto or_base = [](const auto& list, auto value) {
        using T = std::decay_t<decltype(value)>;
        return list.empty() ? std::vector<T>{value} : std::vector<T>(list.begin(), list.end());
    };
    const auto types = or_base(fault_types, f0.type);
    const auto locs = or_base(locations, f0.location);
    const auto rfs = or_base(rf, f0.rf);
    const auto in1 = or_base(infeed1, base.infeed1);
    const auto in2 = or_base(infeed2, base.infeed2);
    const auto prios = or_base(priorities, base.priority);

    std::vector<Scenario> out;
    for (auto ty : types)
        for (double m : locs)
            for (double r : rfs)
                for (auto a : in1)
                    for (auto b : in2)
                        for (auto p : prios) {
                            Scenario s = base;
                            if (faulted) {
                                network::FaultSpec f = f0;
                                f.type = ty;
                                f.location = m;
                                f.rf = r;
                                s.fault = f;
                            }
                            s.infeed1 = a;
                            s.infeed2 = b;
                            s.priority = p;
                            char idx[16];
                            std::snprintf(idx, sizeof idx, "%04zu", out.size());
                            s.name = std::string(idx) + "_" + s.label();
                            out.push_back(std::move(s));
                        }
    return out;
}

}  // namespace ibrprot::scenario
