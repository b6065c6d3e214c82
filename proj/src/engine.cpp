#include "cotds/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "cotds/power/monolithic.hpp"

namespace cotds::engine {

using power::Complex;

std::string to_string(RunMethod m) {
    switch (m) {
        case RunMethod::Parallel: return "parallel";
        case RunMethod::Series: return "series";
        case RunMethod::MonolithicReference: return "monolithic";
    }
    return "?";
}

RunMethod run_method_from_string(const std::string& s) {
    if (s == "parallel") return RunMethod::Parallel;
    if (s == "series") return RunMethod::Series;
    if (s == "monolithic") return RunMethod::MonolithicReference;
    throw std::invalid_argument("unknown method '" + s + "' (expected parallel, series or monolithic)");
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Converged: return "Converged";
        case Verdict::Oscillatory: return "Oscillatory";
        case Verdict::Diverged: return "Diverged";
    }
    return "?";
}

std::string component_name(const std::string& base, int node_id) { return base + "_n" + std::to_string(node_id); }

// ------------------------------------------------------------- building

std::shared_ptr<power::TransmissionNetwork> build_network(const TransmissionData& d) {
    return std::make_shared<power::TransmissionNetwork>(d.base_mva, d.buses, d.branches, d.generators);
}

power::DistributionFeeder build_feeder(const FeederSpec& spec, const Composition& comp, double base_mva,
                                       const RunSettings& run) {
    power::DistributionFeeder f;
    f.name = spec.name;
    std::vector<power::FeederNode> nodes;
    for (const auto& n : spec.nodes) nodes.push_back({n.id, n.parent, n.r, n.x});
    f.topology = power::FeederTopology(std::move(nodes));
    f.energized = spec.energized;
    f.inner_repeats = run.inner_repeats;
    f.n_micro = run.n_micro;
    f.rk_tolerance = run.rk_tolerance;
    const double motor_part = 1.0 - comp.static_fraction;
    for (const auto& n : spec.nodes) {
        if (n.p == 0.0 && n.q == 0.0) continue;
        if (comp.static_fraction > 0.0) {
            power::NodeComponent z;
            z.name = component_name("zip", n.id);
            z.node = n.id;
            z.kind = power::ComponentKind::Zip;
            z.zip = comp.zip;
            z.zip.p0 = comp.static_fraction * n.p;
            z.zip.q0 = comp.static_fraction * n.q;
            z.zip.v0 = 1.0;
            f.components.push_back(z);
        }
        for (const auto& share : comp.motors) {
            const double pm = motor_part * share.fraction * n.p;
            if (!(pm > 0.0)) continue;
            power::NodeComponent m;
            m.name = component_name(share.name, n.id);
            m.node = n.id;
            m.kind = power::ComponentKind::Motor;
            m.motor = comp.motor;
            m.motor.base_mva = base_mva;
            m.motor.rating_mva = pm * base_mva / share.loading;
            m.p_set = pm;
            const bool off =
                std::find(spec.disconnected.begin(), spec.disconnected.end(), m.name) != spec.disconnected.end();
            m.state = power::InductionMotorState::standstill(!off);
            f.components.push_back(m);
        }
    }
    return f;
}

void Scenario::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
    const auto net = build_network(transmission);
    if (!(composition.static_fraction >= 0.0 && composition.static_fraction <= 1.0)) {
        fail("composition: static_fraction must lie in [0, 1]");
    }
    composition.zip.validate();
    composition.motor.validate();
    double motor_sum = 0.0;
    std::set<std::string> motor_names;
    for (const auto& m : composition.motors) {
        if (m.name.empty() || !motor_names.insert(m.name).second) fail("composition: motor names must be unique");
        if (!(m.fraction >= 0.0)) fail("composition: motor fractions must be >= 0");
        if (!(m.loading > 0.0 && m.loading <= 1.5)) fail("composition: motor loading must lie in (0, 1.5]");
        motor_sum += m.fraction;
    }
    if (composition.static_fraction < 1.0 && std::abs(motor_sum - 1.0) > 1e-12) {
        fail("composition: motor fractions must sum to 1");
    }
    std::set<std::string> names;
    for (const auto& f : feeders) {
        if (f.name.empty() || f.name == "T" || !names.insert(f.name).second) {
            fail("feeder names must be unique, non-empty and not 'T'");
        }
        if (!net->has_bus(f.bus)) fail("feeder " + f.name + ": unknown bus " + std::to_string(f.bus));
        if (net->buses()[net->index_of(f.bus)].type != power::BusType::PQ) {
            fail("feeder " + f.name + ": bus " + std::to_string(f.bus) + " is not a load bus");
        }
        const auto built = build_feeder(f, composition, transmission.base_mva, run);
        for (const auto& d : f.disconnected) {
            const auto k = built.component_index(d);
            if (built.components[k].kind != power::ComponentKind::Motor) fail("feeder " + f.name + ": " + d + " is not a motor");
        }
    }
    if (!(run.h > 0.0)) fail("run: H must be positive");
    if (!(run.t_end >= 0.0)) fail("run: t_end must be >= 0");
    if (!(run.rk_tolerance > 0.0)) fail("run: rk_tolerance must be positive");
    if (run.inner_repeats < 1) fail("run: inner_repeats must be >= 1");
    if (run.n_micro < 1) fail("run: n_micro must be >= 1");
    if (!(run.init_tolerance > 0.0)) fail("run: init_tolerance must be positive");
    for (const auto& e : events) {
        if (!(e.time >= 0.0 && e.time <= run.t_end)) fail("event time outside [0, t_end]");
        const auto it = std::find_if(feeders.begin(), feeders.end(), [&](const FeederSpec& f) { return f.name == e.target; });
        if (it == feeders.end()) fail("event targets unknown feeder '" + e.target + "'");
        auto probe = build_feeder(*it, composition, transmission.base_mva, run);
        power::apply_feeder_event(probe, e.action);
    }
}

InitializedModel initialize_scenario(const Scenario& s) {
    s.validate();
    InitializedModel m;
    m.network = build_network(s.transmission);
    for (const auto& f : s.feeders) m.feeders.push_back(build_feeder(f, s.composition, s.transmission.base_mva, s.run));
    std::vector<power::InterfaceBinding> bindings;
    for (std::size_t k = 0; k < s.feeders.size(); ++k) bindings.push_back({s.feeders[k].bus, &m.feeders[k], {}});
    power::TdInitConfig cfg;
    cfg.tolerance = s.run.init_tolerance;
    m.init = power::iterative_td_powerflow_init(*m.network, bindings, cfg);
    return m;
}

// ------------------------------------------------------------------ runs

namespace {

struct Assembly {
    std::shared_ptr<power::TransmissionSubsystem> t;
    std::vector<std::shared_ptr<power::DistributionSubsystem>> d;
    cosim::SubsystemSet all;
    std::vector<cosim::CouplingLink> links;
    std::vector<std::string> channels;
    std::vector<cosim::Event> events;
    std::shared_ptr<power::TransmissionNetwork> network;
};

Assembly assemble(const Scenario& s, InitializedModel model) {
    Assembly a;
    a.network = model.network;
    std::vector<int> slots;
    for (const auto& f : s.feeders) slots.push_back(f.bus);
    a.t = std::make_shared<power::TransmissionSubsystem>(model.network, slots, model.init.transmission);
    a.all.push_back(a.t);
    const auto t_out = a.t->output();
    std::vector<double> t_in;
    for (std::size_t k = 0; k < model.feeders.size(); ++k) {
        auto d = std::make_shared<power::DistributionSubsystem>(std::move(model.feeders[k]));
        const auto off = a.t->output_offset(s.feeders[k].bus);
        d->initialize(std::span<const double>(t_out.data() + off, 2));
        const auto out = d->output();
        t_in.insert(t_in.end(), out.begin(), out.end());
        a.links.push_back({0, {off, 2}, k + 1, {0, 2}});
        a.links.push_back({k + 1, {0, 2}, 0, {2 * k, 2}});
        a.d.push_back(d);
        a.all.push_back(d);
    }
    a.t->initialize(t_in);

    for (const auto& b : model.network->buses()) a.channels.push_back("T.bus" + std::to_string(b.id) + ".v");
    for (const auto& c : s.channels) {
        if (std::find(a.channels.begin(), a.channels.end(), c) == a.channels.end()) a.channels.push_back(c);
    }
    for (const auto& e : s.events) {
        for (std::size_t k = 0; k < s.feeders.size(); ++k) {
            if (s.feeders[k].name == e.target) a.events.push_back({e.time, k + 1, e.action});
        }
    }
    return a;
}

cosim::TimeSeriesLog run_monolithic(const Scenario& s, Assembly& a) {
    std::vector<power::DistributionFeeder*> feeders;
    std::vector<int> buses;
    for (std::size_t k = 0; k < a.d.size(); ++k) {
        feeders.push_back(&a.d[k]->feeder());
        buses.push_back(s.feeders[k].bus);
    }
    power::MonolithicDae dae(*a.network, feeders, buses);

    cosim::TimeSeriesLog log;
    for (const auto& sub : a.all) {
        for (const auto& o : sub->output_names()) log.columns.push_back(sub->name() + "." + o);
    }
    struct Channel {
        std::size_t sub;
        std::string key;
    };
    std::vector<Channel> channels;
    for (const auto& ch : a.channels) {
        bool found = false;
        for (std::size_t id = 0; id < a.all.size() && !found; ++id) {
            const std::string prefix = a.all[id]->name() + ".";
            if (ch.rfind(prefix, 0) == 0 && a.all[id]->snapshot().count(ch.substr(prefix.size()))) {
                channels.push_back({id, ch.substr(prefix.size())});
                found = true;
            }
        }
        if (!found) throw cosim::ScheduleError("unknown channel " + ch);
        log.columns.push_back(ch);
    }
    auto record = [&](double t) {
        std::vector<double> row;
        for (const auto& sub : a.all) {
            const auto o = sub->output();
            row.insert(row.end(), o.begin(), o.end());
        }
        std::vector<std::map<std::string, double>> snaps(a.all.size());
        for (const auto& c : channels) {
            if (snaps[c.sub].empty()) snaps[c.sub] = a.all[c.sub]->snapshot();
            row.push_back(snaps[c.sub].at(c.key));
        }
        const bool finite = std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); });
        log.append(t, std::move(row));
        return finite;
    };

    Vec x, y;
    power::TransmissionState ts = a.t->state();
    dae.pack(ts, x, y);
    const Vec no_input;
    const NewtonConfig cfg;
    (void)solve_algebraic(dae, x, y, no_input, cfg);
    dae.unpack(x, y, ts);
    a.t->set_state(ts);
    record(0.0);

    auto events = a.events;
    std::stable_sort(events.begin(), events.end(), [](const auto& l, const auto& r) { return l.time < r.time; });
    std::size_t next = 0;
    const double h = s.run.h;
    const auto steps = static_cast<long>(std::ceil(s.run.t_end / h - 1e-9));
    for (long i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * h;
        try {
            bool fired = false;
            while (next < events.size() && events[next].time <= t + 1e-9 * h) {
                power::apply_feeder_event(*feeders[events[next].target - 1], events[next].action);
                fired = true;
                ++next;
            }
            if (fired) {
                dae.pack(ts, x, y);
                (void)solve_algebraic(dae, x, y, no_input, cfg);
            }
            const auto r = trapezoidal_dae_step(dae, x, y, no_input, h, cfg);
            x = r.x;
            y = r.y;
            dae.unpack(x, y, ts);
            a.t->set_state(ts);
            for (std::size_t b = 0; b < a.network->size(); ++b) {
                if (std::hypot(y[static_cast<Eigen::Index>(2 * b)], y[static_cast<Eigen::Index>(2 * b + 1)]) <
                    power::kCollapseVoltage) {
                    throw power::VoltageCollapse("transmission voltage collapse (bus voltage below 0.2 pu)");
                }
            }
        } catch (const std::exception& ex) {
            log.truncated = true;
            log.cause = ex.what();
            break;
        }
        if (!record(static_cast<double>(i + 1) * h)) {
            log.truncated = true;
            log.cause = "non-finite interface value";
            break;
        }
    }
    return log;
}

}  // namespace

RunResult run_scenario(const Scenario& s) {
    const auto start = std::chrono::steady_clock::now();
    InitializedModel model = initialize_scenario(s);
    RunResult result;
    result.method = s.run.method;
    result.h = s.run.h;
    result.init_iterations = model.init.outer_iterations;
    Assembly a = assemble(s, std::move(model));

    if (s.run.method == RunMethod::MonolithicReference) {
        result.log = run_monolithic(s, a);
    } else {
        cosim::CouplingSchedule sched;
        sched.method = s.run.method == RunMethod::Parallel ? cosim::Method::Parallel : cosim::Method::Series;
        sched.first_tier = {0};
        sched.h_macro = s.run.h;
        sched.t_end = s.run.t_end;
        sched.events = a.events;
        sched.channels = a.channels;
        sched.concurrent = s.run.concurrent;
        result.log = cosim::run_cosimulation(sched, a.all, a.links);
    }
    double window = 0.0;
    for (const auto& e : s.events) window = std::max(window, e.time);
    result.verdict = detect_convergence(result.log, window);
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

// ------------------------------------------------------------- analysis

Verdict detect_convergence(const cosim::TimeSeriesLog& log, double window_start, const ConvergenceConfig& cfg) {
    if (log.truncated) return Verdict::Diverged;
    for (const auto& r : log.rows) {
        if (!std::all_of(r.begin(), r.end(), [](double v) { return std::isfinite(v); })) return Verdict::Diverged;
    }
    const auto first = static_cast<std::size_t>(
        std::lower_bound(log.times.begin(), log.times.end(), window_start - 1e-12) - log.times.begin());
    const std::size_t n = log.rows.size() - std::min(first, log.rows.size());
    if (n < 3) return Verdict::Converged;

    std::size_t dominant = 0;
    double best = -1.0;
    for (std::size_t c = 0; c < log.columns.size(); ++c) {
        double sum = 0.0;
        for (std::size_t i = first; i + 1 < log.rows.size(); ++i) sum += std::abs(log.rows[i + 1][c] - log.rows[i][c]);
        if (sum > best) {
            best = sum;
            dominant = c;
        }
    }
    std::vector<double> d;
    for (std::size_t i = first; i + 1 < log.rows.size(); ++i) d.push_back(log.rows[i + 1][dominant] - log.rows[i][dominant]);
    double peak = 0.0;
    for (double v : d) peak = std::max(peak, std::abs(v));
    if (peak <= cfg.flat_tolerance) return Verdict::Converged;

    std::size_t flips = 0;
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
        if (d[i] * d[i + 1] < 0.0) ++flips;
    }
    const double alternation = static_cast<double>(flips) / static_cast<double>(d.size() - 1);

    // Least-squares slope of |d| against the step index.
    const double m = static_cast<double>(d.size());
    const double mean_i = 0.5 * (m - 1.0);
    double mean_a = 0.0;
    for (double v : d) mean_a += std::abs(v);
    mean_a /= m;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double di = static_cast<double>(i) - mean_i;
        num += di * (std::abs(d[i]) - mean_a);
        den += di * di;
    }
    const double slope = num / den;
    return alternation > cfg.alternation_threshold && slope >= 0.0 ? Verdict::Oscillatory : Verdict::Converged;
}

double DeviationReport::max_abs() const noexcept {
    double m = 0.0;
    for (const auto& c : channels) m = std::max(m, c.max_abs);
    return m;
}

DeviationReport compare_logs(const cosim::TimeSeriesLog& a, const cosim::TimeSeriesLog& b,
                             const std::vector<std::string>& channels, bool resample) {
    std::vector<std::string> names = channels;
    if (names.empty()) {
        for (const auto& c : a.columns) {
            if (b.has_column(c)) names.push_back(c);
        }
        if (names.empty()) throw std::invalid_argument("compare: the runs share no channels");
    }
    for (const auto& c : names) {
        if (!a.has_column(c) || !b.has_column(c)) throw std::invalid_argument("compare: channel " + c + " missing");
    }
    bool same = a.times.size() == b.times.size();
    for (std::size_t i = 0; same && i < a.times.size(); ++i) {
        same = std::abs(a.times[i] - b.times[i]) <= 1e-9 * std::max(1.0, std::abs(a.times[i]));
    }
    if (!same && !resample) throw GridMismatch("compare: time grids differ (use resampling)");
    if (a.times.empty() || b.times.empty()) throw std::invalid_argument("compare: empty run");

    DeviationReport rep;
    for (const auto& name : names) {
        const auto ca = a.column(name);
        const auto cb = b.column(name);
        ChannelDeviation dev{name, 0.0, 0.0};
        std::size_t count = 0;
        for (std::size_t i = 0; i < ca.size(); ++i) {
            double vb = 0.0;
            if (same) {
                vb = cb[i];
            } else {
                const double t = a.times[i];
                if (t < b.times.front() - 1e-12 || t > b.times.back() + 1e-12) continue;
                const auto it = std::lower_bound(b.times.begin(), b.times.end(), t);
                const auto k = static_cast<std::size_t>(it - b.times.begin());
                if (k == 0) vb = cb[0];
                else if (k >= b.times.size()) vb = cb.back();
                else {
                    const double w = (t - b.times[k - 1]) / (b.times[k] - b.times[k - 1]);
                    vb = (1.0 - w) * cb[k - 1] + w * cb[k];
                }
            }
            const double e = std::abs(ca[i] - vb);
            dev.max_abs = std::max(dev.max_abs, e);
            dev.rms += e * e;
            ++count;
        }
        if (count == 0) throw std::invalid_argument("compare: runs do not overlap in time");
        dev.rms = std::sqrt(dev.rms / static_cast<double>(count));
        rep.channels.push_back(dev);
    }
    return rep;
}

DeviationReport compare_runs(const RunResult& a, const RunResult& b, const std::vector<std::string>& channels,
                             bool resample) {
    return compare_logs(a.log, b.log, channels, resample);
}

std::vector<std::string> bus_voltage_channels(const cosim::TimeSeriesLog& log) {
    std::vector<std::string> out;
    for (const auto& c : log.columns) {
        if (c.rfind("T.bus", 0) == 0 && c.size() > 2 && c.substr(c.size() - 2) == ".v") out.push_back(c);
    }
    return out;
}

}  // namespace cotds::engine
