#include "cotds/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cotds::io {

using nlohmann::json;

namespace {

// Object reader that rejects unknown keys and reports the offending path.
class Reader {
public:
    Reader(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SchemaError(path_ + ": expected an object");
        for (const auto& [k, v] : j_.items()) {
            (void)v;
            if (!allowed.count(k)) throw SchemaError(path_ + ": unknown key '" + k + "'");
        }
    }

    [[nodiscard]] bool has(const std::string& k) const { return j_.contains(k); }
    [[nodiscard]] std::string at(const std::string& k) const { return path_ + "." + k; }

    const json& raw(const std::string& k) const {
        if (!has(k)) throw SchemaError(path_ + ": missing key '" + k + "'");
        return j_.at(k);
    }

    double number(const std::string& k) const {
        const auto& v = raw(k);
        if (!v.is_number()) throw SchemaError(at(k) + ": expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw SchemaError(at(k) + ": must be finite");
        return d;
    }
    double number(const std::string& k, double dflt) const { return has(k) ? number(k) : dflt; }

    int integer(const std::string& k) const {
        const auto& v = raw(k);
        if (!v.is_number_integer()) throw SchemaError(at(k) + ": expected an integer");
        return v.get<int>();
    }
    int integer(const std::string& k, int dflt) const { return has(k) ? integer(k) : dflt; }

    std::string string(const std::string& k) const {
        const auto& v = raw(k);
        if (!v.is_string()) throw SchemaError(at(k) + ": expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& k, const std::string& dflt) const { return has(k) ? string(k) : dflt; }

    bool boolean(const std::string& k, bool dflt) const {
        if (!has(k)) return dflt;
        const auto& v = raw(k);
        if (!v.is_boolean()) throw SchemaError(at(k) + ": expected true or false");
        return v.get<bool>();
    }

    const json& array(const std::string& k) const {
        const auto& v = raw(k);
        if (!v.is_array()) throw SchemaError(at(k) + ": expected an array");
        return v;
    }

private:
    const json& j_;
    std::string path_;
};

power::BusType bus_type(const std::string& s, const std::string& path) {
    if (s == "slack") return power::BusType::Slack;
    if (s == "pv") return power::BusType::PV;
    if (s == "pq") return power::BusType::PQ;
    throw SchemaError(path + ": bus type must be slack, pv or pq");
}

std::string bus_type_name(power::BusType t) {
    switch (t) {
        case power::BusType::Slack: return "slack";
        case power::BusType::PV: return "pv";
        case power::BusType::PQ: return "pq";
    }
    return "pq";
}

power::GeneratorParams parse_generator_params(const json& j, const std::string& path) {
    const Reader r(j, path, {"h", "d", "xd", "xq", "xd_p", "xq_p", "td0_p", "tq0_p", "ke", "te", "droop", "tg",
                             "omega_base"});
    power::GeneratorParams p;
    p.h = r.number("h", p.h);
    p.d = r.number("d", p.d);
    p.xd = r.number("xd", p.xd);
    p.xq = r.number("xq", p.xq);
    p.xd_p = r.number("xd_p", p.xd_p);
    p.xq_p = r.number("xq_p", p.xq_p);
    p.td0_p = r.number("td0_p", p.td0_p);
    p.tq0_p = r.number("tq0_p", p.tq0_p);
    p.ke = r.number("ke", p.ke);
    p.te = r.number("te", p.te);
    p.droop = r.number("droop", p.droop);
    p.tg = r.number("tg", p.tg);
    p.omega_base = r.number("omega_base", p.omega_base);
    return p;
}

json serialize_generator_params(const power::GeneratorParams& p) {
    return {{"h", p.h},         {"d", p.d},         {"xd", p.xd},       {"xq", p.xq},   {"xd_p", p.xd_p},
            {"xq_p", p.xq_p},   {"td0_p", p.td0_p}, {"tq0_p", p.tq0_p}, {"ke", p.ke},   {"te", p.te},
            {"droop", p.droop}, {"tg", p.tg},       {"omega_base", p.omega_base}};
}

power::InductionMotorParams parse_motor_params(const json& j, const std::string& path) {
    const Reader r(j, path, {"rs", "xs", "xm", "rr", "xr", "h", "torque", "omega_base"});
    power::InductionMotorParams p;
    p.rs = r.number("rs", p.rs);
    p.xs = r.number("xs", p.xs);
    p.xm = r.number("xm", p.xm);
    p.rr = r.number("rr", p.rr);
    p.xr = r.number("xr", p.xr);
    p.h = r.number("h", p.h);
    p.omega_base = r.number("omega_base", p.omega_base);
    const auto torque = r.string("torque", "quadratic");
    if (torque == "quadratic") p.torque = power::TorqueModel::Quadratic;
    else if (torque == "constant") p.torque = power::TorqueModel::Constant;
    else throw SchemaError(r.at("torque") + ": must be constant or quadratic");
    return p;
}

json serialize_motor_params(const power::InductionMotorParams& p) {
    return {{"rs", p.rs}, {"xs", p.xs}, {"xm", p.xm}, {"rr", p.rr}, {"xr", p.xr}, {"h", p.h},
            {"torque", p.torque == power::TorqueModel::Quadratic ? "quadratic" : "constant"},
            {"omega_base", p.omega_base}};
}

power::ZipLoadParams parse_zip(const json& j, const std::string& path) {
    const Reader r(j, path, {"a_z", "a_i", "a_p", "b_z", "b_i", "b_p"});
    power::ZipLoadParams z;
    z.a_z = r.number("a_z", z.a_z);
    z.a_i = r.number("a_i", z.a_i);
    z.a_p = r.number("a_p", z.a_p);
    z.b_z = r.number("b_z", z.b_z);
    z.b_i = r.number("b_i", z.b_i);
    z.b_p = r.number("b_p", z.b_p);
    return z;
}

json serialize_zip(const power::ZipLoadParams& z) {
    return {{"a_z", z.a_z}, {"a_i", z.a_i}, {"a_p", z.a_p}, {"b_z", z.b_z}, {"b_i", z.b_i}, {"b_p", z.b_p}};
}

std::vector<std::string> string_list(const json& j, const std::string& path) {
    if (!j.is_array()) throw SchemaError(path + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) throw SchemaError(path + ": expected an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------- transmission

engine::TransmissionData parse_transmission(const json& doc) {
    const Reader r(doc, "transmission", {"base_mva", "buses", "branches", "generators"});
    engine::TransmissionData d;
    d.base_mva = r.number("base_mva", d.base_mva);
    std::size_t k = 0;
    for (const auto& b : r.array("buses")) {
        const Reader br(b, "transmission.buses[" + std::to_string(k++) + "]", {"id", "type"});
        d.buses.push_back({br.integer("id"), bus_type(br.string("type", "pq"), br.at("type"))});
    }
    k = 0;
    for (const auto& b : r.array("branches")) {
        const Reader br(b, "transmission.branches[" + std::to_string(k++) + "]", {"from", "to", "r", "x", "b"});
        d.branches.push_back({br.integer("from"), br.integer("to"), br.number("r", 0.0), br.number("x"),
                              br.number("b", 0.0)});
    }
    k = 0;
    for (const auto& g : r.array("generators")) {
        const std::string path = "transmission.generators[" + std::to_string(k++) + "]";
        const Reader gr(g, path, {"name", "bus", "p", "v", "params"});
        power::GeneratorUnit u;
        u.name = gr.string("name");
        u.bus = gr.integer("bus");
        u.p_set = gr.number("p", 0.0);
        u.v_set = gr.number("v", 1.0);
        if (gr.has("params")) u.params = parse_generator_params(gr.raw("params"), path + ".params");
        d.generators.push_back(u);
    }
    return d;
}

json serialize_transmission(const engine::TransmissionData& d) {
    json buses = json::array(), branches = json::array(), gens = json::array();
    for (const auto& b : d.buses) buses.push_back({{"id", b.id}, {"type", bus_type_name(b.type)}});
    for (const auto& b : d.branches) {
        branches.push_back({{"from", b.from}, {"to", b.to}, {"r", b.r}, {"x", b.x}, {"b", b.b}});
    }
    for (const auto& g : d.generators) {
        gens.push_back({{"name", g.name},
                        {"bus", g.bus},
                        {"p", g.p_set},
                        {"v", g.v_set},
                        {"params", serialize_generator_params(g.params)}});
    }
    return {{"base_mva", d.base_mva}, {"buses", buses}, {"branches", branches}, {"generators", gens}};
}

// -------------------------------------------------------------- scenario

engine::Scenario parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
    const Reader r(doc, "scenario", {"name", "transmission", "feeders", "composition", "events", "run", "outputs"});
    engine::Scenario s;
    s.name = r.string("name", "");

    const json& tj = r.raw("transmission");
    if (tj.is_object() && tj.contains("dataset")) {
        const Reader tr(tj, "transmission", {"dataset"});
        const std::string ref = tr.string("dataset");
        const auto path = base_dir / ref;
        std::ifstream in(path);
        if (!in) throw SchemaError("transmission.dataset: cannot open " + path.string());
        json data;
        try {
            data = json::parse(in);
        } catch (const json::parse_error& e) {
            throw SchemaError(path.string() + ": " + e.what());
        }
        s.transmission = parse_transmission(data);
        s.transmission.dataset = ref;
    } else {
        s.transmission = parse_transmission(tj);
    }

    std::size_t k = 0;
    for (const auto& f : r.array("feeders")) {
        const std::string path = "feeders[" + std::to_string(k++) + "]";
        const Reader fr(f, path, {"name", "bus", "energized", "disconnected", "nodes"});
        engine::FeederSpec spec;
        spec.name = fr.string("name");
        spec.bus = fr.integer("bus");
        spec.energized = fr.boolean("energized", true);
        if (fr.has("disconnected")) spec.disconnected = string_list(fr.raw("disconnected"), fr.at("disconnected"));
        std::size_t n = 0;
        for (const auto& node : fr.array("nodes")) {
            const Reader nr(node, path + ".nodes[" + std::to_string(n++) + "]", {"id", "parent", "r", "x", "p", "q"});
            engine::FeederNodeSpec ns;
            ns.id = nr.integer("id");
            ns.parent = nr.integer("parent", -1);
            ns.r = nr.number("r", 0.0);
            ns.x = nr.number("x", 0.0);
            ns.p = nr.number("p", 0.0);
            ns.q = nr.number("q", 0.0);
            spec.nodes.push_back(ns);
        }
        s.feeders.push_back(spec);
    }

    if (r.has("composition")) {
        const Reader cr(r.raw("composition"), "composition", {"static_fraction", "zip", "motor", "motors"});
        s.composition.static_fraction = cr.number("static_fraction", 1.0);
        if (cr.has("zip")) s.composition.zip = parse_zip(cr.raw("zip"), "composition.zip");
        if (cr.has("motor")) s.composition.motor = parse_motor_params(cr.raw("motor"), "composition.motor");
        if (cr.has("motors")) {
            std::size_t m = 0;
            for (const auto& mj : cr.array("motors")) {
                const Reader mr(mj, "composition.motors[" + std::to_string(m++) + "]", {"name", "fraction", "loading"});
                s.composition.motors.push_back({mr.string("name"), mr.number("fraction"), mr.number("loading", 0.7)});
            }
        }
    }

    if (r.has("events")) {
        k = 0;
        for (const auto& e : r.array("events")) {
            const std::string path = "events[" + std::to_string(k++) + "]";
            const Reader er(e, path, {"time", "target", "action", "args"});
            engine::ScenarioEvent ev;
            ev.time = er.number("time");
            ev.target = er.string("target");
            ev.action.name = er.string("action");
            if (er.has("args")) {
                const auto& a = er.raw("args");
                if (!a.is_object()) throw SchemaError(er.at("args") + ": expected an object");
                for (const auto& [key, val] : a.items()) {
                    if (!val.is_string()) throw SchemaError(er.at("args") + "." + key + ": expected a string");
                    ev.action.args[key] = val.get<std::string>();
                }
            }
            s.events.push_back(ev);
        }
    }

    const Reader rr(r.raw("run"), "run",
                    {"method", "H", "t_end", "rk_tolerance", "inner_repeats", "n_micro", "init_tolerance", "concurrent"});
    try {
        s.run.method = engine::run_method_from_string(rr.string("method", "series"));
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("run.method: ") + e.what());
    }
    s.run.h = rr.number("H");
    s.run.t_end = rr.number("t_end");
    s.run.rk_tolerance = rr.number("rk_tolerance", s.run.rk_tolerance);
    s.run.inner_repeats = rr.integer("inner_repeats", s.run.inner_repeats);
    s.run.n_micro = rr.integer("n_micro", s.run.n_micro);
    s.run.init_tolerance = rr.number("init_tolerance", s.run.init_tolerance);
    s.run.concurrent = rr.boolean("concurrent", s.run.concurrent);

    if (r.has("outputs")) {
        const Reader orr(r.raw("outputs"), "outputs", {"channels"});
        if (orr.has("channels")) s.channels = string_list(orr.raw("channels"), "outputs.channels");
    }

    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw SchemaError(e.what());
    }
    return s;
}

engine::Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return parse_scenario(doc, path.parent_path());
}

json serialize_scenario(const engine::Scenario& s) {
    json doc;
    doc["name"] = s.name;
    doc["transmission"] = s.transmission.dataset.empty() ? serialize_transmission(s.transmission)
                                                         : json{{"dataset", s.transmission.dataset}};
    json feeders = json::array();
    for (const auto& f : s.feeders) {
        json nodes = json::array();
        for (const auto& n : f.nodes) {
            nodes.push_back({{"id", n.id}, {"parent", n.parent}, {"r", n.r}, {"x", n.x}, {"p", n.p}, {"q", n.q}});
        }
        feeders.push_back({{"name", f.name},
                           {"bus", f.bus},
                           {"energized", f.energized},
                           {"disconnected", f.disconnected},
                           {"nodes", nodes}});
    }
    doc["feeders"] = feeders;
    json motors = json::array();
    for (const auto& m : s.composition.motors) {
        motors.push_back({{"name", m.name}, {"fraction", m.fraction}, {"loading", m.loading}});
    }
    doc["composition"] = {{"static_fraction", s.composition.static_fraction},
                          {"zip", serialize_zip(s.composition.zip)},
                          {"motor", serialize_motor_params(s.composition.motor)},
                          {"motors", motors}};
    json events = json::array();
    for (const auto& e : s.events) {
        events.push_back({{"time", e.time}, {"target", e.target}, {"action", e.action.name}, {"args", e.action.args}});
    }
    doc["events"] = events;
    doc["run"] = {{"method", engine::to_string(s.run.method)},
                  {"H", s.run.h},
                  {"t_end", s.run.t_end},
                  {"rk_tolerance", s.run.rk_tolerance},
                  {"inner_repeats", s.run.inner_repeats},
                  {"n_micro", s.run.n_micro},
                  {"init_tolerance", s.run.init_tolerance},
                  {"concurrent", s.run.concurrent}};
    doc["outputs"] = {{"channels", s.channels}};
    return doc;
}

// ------------------------------------------------------------------- CSV

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

void write_csv(std::ostream& out, const cosim::TimeSeriesLog& log) {
    out << "t";
    for (const auto& c : log.columns) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
        out << format_double(log.times[i]);
        for (double v : log.rows[i]) out << ',' << format_double(v);
        out << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const cosim::TimeSeriesLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_csv(out, log);
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& s, std::size_t line) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw SchemaError("csv line " + std::to_string(line) + ": not a number: '" + s + "'");
    }
    return v;
}

}  // namespace

cosim::TimeSeriesLog read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split(line);
    if (header.empty() || header[0] != "t") throw SchemaError("csv: header must start with 't'");
    cosim::TimeSeriesLog log;
    log.columns.assign(header.begin() + 1, header.end());
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) throw SchemaError("csv line " + std::to_string(n) + ": wrong number of cells");
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_cell(cells[c], n));
        const double t = parse_cell(cells[0], n);
        if (!log.times.empty() && !(t > log.times.back())) {
            throw SchemaError("csv line " + std::to_string(n) + ": t must increase strictly");
        }
        log.append(t, std::move(row));
    }
    return log;
}

cosim::TimeSeriesLog read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_csv(in);
}

}  // namespace cotds::io
