#include "cotds/cosim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <future>
#include <limits>
#include <set>

namespace cotds::cosim {

std::string to_string(Method m) { return m == Method::Parallel ? "parallel" : "series"; }

void SubSystem::apply_event(const EventAction& action) {
    throw std::invalid_argument(name() + ": unsupported event action '" + action.name + "'");
}

std::size_t TimeSeriesLog::column_index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::out_of_range("no column named " + name);
    return static_cast<std::size_t>(it - columns.begin());
}

bool TimeSeriesLog::has_column(const std::string& name) const {
    return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::vector<double> TimeSeriesLog::column(const std::string& name) const {
    const std::size_t c = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

void TimeSeriesLog::append(double t, std::vector<double> row) {
    if (row.size() != columns.size()) throw std::invalid_argument("log row width mismatch");
    if (!times.empty() && !(t > times.back())) throw std::invalid_argument("log timestamps must increase");
    times.push_back(t);
    rows.push_back(std::move(row));
}

bool ConsistencyReport::ok() const noexcept {
    return std::all_of(links.begin(), links.end(), [](const LinkMismatch& l) { return l.within_tolerance; });
}

void validate_links(const SubsystemSet& subsystems, std::span<const CouplingLink> links) {
    std::set<std::pair<SubsystemId, std::size_t>> fed;
    for (std::size_t k = 0; k < links.size(); ++k) {
        const auto& l = links[k];
        const std::string tag = "link " + std::to_string(k) + ": ";
        if (l.source >= subsystems.size() || l.sink >= subsystems.size()) {
            throw ScheduleError(tag + "unknown sub-system id");
        }
        if (l.source_range.size != l.sink_range.size) {
            throw ScheduleError(tag + "source and sink ranges differ in length");
        }
        if (l.source_range.begin + l.source_range.size > subsystems[l.source]->output_size()) {
            throw ScheduleError(tag + "source range exceeds output size");
        }
        if (l.sink_range.begin + l.sink_range.size > subsystems[l.sink]->input_size()) {
            throw ScheduleError(tag + "sink range exceeds input size");
        }
        for (std::size_t i = 0; i < l.sink_range.size; ++i) {
            if (!fed.insert({l.sink, l.sink_range.begin + i}).second) {
                throw ScheduleError(tag + "input index fed by two links");
            }
        }
    }
}

ConsistencyReport verify_initial_consistency(const SubsystemSet& subsystems, std::span<const CouplingLink> links,
                                             double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("consistency tolerance must be positive");
    validate_links(subsystems, links);
    ConsistencyReport report;
    for (std::size_t k = 0; k < links.size(); ++k) {
        const auto& l = links[k];
        const auto out = subsystems[l.source]->output();
        const auto in = subsystems[l.sink]->current_input();
        LinkMismatch m{k, 0.0, 0, true};
        for (std::size_t i = 0; i < l.source_range.size; ++i) {
            const double d = std::abs(out[l.source_range.begin + i] - in[l.sink_range.begin + i]);
            if (!(d <= m.worst)) {  // also catches NaN
                m.worst = std::isnan(d) ? std::numeric_limits<double>::infinity() : d;
                m.worst_index = i;
            }
        }
        m.within_tolerance = m.worst <= tol;
        report.max_mismatch = std::max(report.max_mismatch, m.worst);
        report.links.push_back(m);
    }
    return report;
}

namespace {

struct Channel {
    SubsystemId subsystem;
    std::string key;
};

void advance_group(const SubsystemSet& subsystems, const std::vector<SubsystemId>& group, double h, bool concurrent) {
    if (!concurrent || group.size() < 2) {
        for (auto id : group) subsystems[id]->advance(h);
        return;
    }
    std::vector<std::future<void>> jobs;
    jobs.reserve(group.size());
    for (auto id : group) {
        jobs.push_back(std::async(std::launch::async, [&subsystems, id, h] { subsystems[id]->advance(h); }));
    }
    std::exception_ptr first;
    for (auto& j : jobs) {
        try {
            j.get();
        } catch (...) {
            if (!first) first = std::current_exception();
        }
    }
    if (first) std::rethrow_exception(first);
}

}  // namespace

TimeSeriesLog run_cosimulation(const CouplingSchedule& schedule, const SubsystemSet& subsystems,
                               std::span<const CouplingLink> links) {
    if (!(schedule.h_macro > 0.0)) throw ScheduleError("macro step must be positive");
    if (!(schedule.t_end >= 0.0)) throw ScheduleError("t_end must be non-negative");
    validate_links(subsystems, links);

    const std::size_t n_sub = subsystems.size();
    std::vector<bool> in_first(n_sub, false);
    for (auto id : schedule.first_tier) {
        if (id >= n_sub) throw ScheduleError("first tier names an unknown sub-system");
        in_first[id] = true;
    }
    if (schedule.method == Method::Series) {
        if (schedule.first_tier.empty()) throw ScheduleError("series mode needs a first tier");
        for (const auto& l : links) {
            if (!in_first[l.source] && !in_first[l.sink]) {
                throw ScheduleError("series mode supports two tiers only; link between second-tier sub-systems");
            }
        }
    }
    for (const auto& e : schedule.events) {
        if (e.target >= n_sub) throw ScheduleError("event targets an unknown sub-system");
        if (e.time < 0.0 || e.time > schedule.t_end) throw ScheduleError("event time outside [0, t_end]");
    }

    const auto report = verify_initial_consistency(subsystems, links, schedule.consistency_tolerance);
    if (!report.ok()) {
        throw InconsistentInitialization("initial interface mismatch " + std::to_string(report.max_mismatch) +
                                         " exceeds tolerance");
    }

    TimeSeriesLog log;
    for (const auto& s : subsystems) {
        for (const auto& o : s->output_names()) log.columns.push_back(s->name() + "." + o);
    }
    std::vector<Channel> channels;
    for (const auto& ch : schedule.channels) {
        bool found = false;
        for (SubsystemId id = 0; id < n_sub && !found; ++id) {
            const std::string prefix = subsystems[id]->name() + ".";
            if (ch.rfind(prefix, 0) == 0) {
                const std::string key = ch.substr(prefix.size());
                if (subsystems[id]->snapshot().count(key)) {
                    channels.push_back({id, key});
                    found = true;
                }
            }
        }
        if (!found) throw ScheduleError("unknown channel " + ch);
        if (!log.has_column(ch)) log.columns.push_back(ch);
        else channels.pop_back();
    }

    std::vector<std::vector<double>> outputs(n_sub);
    std::vector<std::vector<double>> inputs(n_sub);
    for (SubsystemId id = 0; id < n_sub; ++id) {
        outputs[id] = subsystems[id]->output();
        inputs[id] = subsystems[id]->current_input();
    }

    auto record = [&](double t) {
        std::vector<double> row;
        row.reserve(log.columns.size());
        for (const auto& o : outputs) row.insert(row.end(), o.begin(), o.end());
        std::vector<std::map<std::string, double>> snaps(n_sub);
        for (const auto& c : channels) {
            if (snaps[c.subsystem].empty()) snaps[c.subsystem] = subsystems[c.subsystem]->snapshot();
            row.push_back(snaps[c.subsystem].at(c.key));
        }
        const bool finite = std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); });
        log.append(t, std::move(row));
        return finite;
    };
    record(0.0);

    auto deliver = [&](auto&& accept_sink, const std::vector<std::vector<double>>& fresh, auto&& use_fresh) {
        for (const auto& l : links) {
            if (!accept_sink(l.sink)) continue;
            const auto& src = use_fresh(l.source) ? fresh[l.source] : outputs[l.source];
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(l.source_range.begin), l.source_range.size,
                        inputs[l.sink].begin() + static_cast<std::ptrdiff_t>(l.sink_range.begin));
        }
    };

    std::vector<SubsystemId> all_ids(n_sub), first_ids, second_ids;
    for (SubsystemId id = 0; id < n_sub; ++id) {
        all_ids[id] = id;
        (in_first[id] ? first_ids : second_ids).push_back(id);
    }

    std::vector<Event> events = schedule.events;
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
    std::size_t next_event = 0;

    const double h = schedule.h_macro;
    const auto steps = static_cast<long>(std::ceil(schedule.t_end / h - 1e-9));
    std::vector<std::vector<double>> fresh(n_sub);
    for (long i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * h;
        try {
            while (next_event < events.size() && events[next_event].time <= t + 1e-9 * h) {
                subsystems[events[next_event].target]->apply_event(events[next_event].action);
                // the event may change what the target reports at this boundary
                outputs[events[next_event].target] = subsystems[events[next_event].target]->output();
                ++next_event;
            }
            if (schedule.method == Method::Parallel) {
                deliver([](SubsystemId) { return true; }, fresh, [](SubsystemId) { return false; });
                for (auto id : all_ids) subsystems[id]->set_input(inputs[id]);
                advance_group(subsystems, all_ids, h, schedule.concurrent);
                for (auto id : all_ids) fresh[id] = subsystems[id]->output();
            } else {
                deliver([&](SubsystemId s) { return in_first[s]; }, fresh, [](SubsystemId) { return false; });
                for (auto id : first_ids) subsystems[id]->set_input(inputs[id]);
                advance_group(subsystems, first_ids, h, schedule.concurrent);
                for (auto id : first_ids) fresh[id] = subsystems[id]->output();
                deliver([&](SubsystemId s) { return !in_first[s]; }, fresh,
                        [&](SubsystemId s) { return static_cast<bool>(in_first[s]); });
                for (auto id : second_ids) subsystems[id]->set_input(inputs[id]);
                advance_group(subsystems, second_ids, h, schedule.concurrent);
                for (auto id : second_ids) fresh[id] = subsystems[id]->output();
            }
        } catch (const std::exception& ex) {
            log.truncated = true;
            log.cause = ex.what();
            break;
        }
        outputs.swap(fresh);
        if (!record(static_cast<double>(i + 1) * h)) {
            log.truncated = true;
            log.cause = "non-finite interface value";
            break;
        }
    }
    return log;
}

}  // namespace cotds::cosim
