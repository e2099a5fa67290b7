#include "feederplan/grid.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

#include "feederplan/errors.hpp"
#include "feederplan/textio.hpp"

namespace feederplan {

namespace {

// Union-find over bus indices, used for cycle detection among closed branches.
struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[a] = b;
        return true;
    }
};

} // namespace

std::string RadialityReport::describe() const {
    if (ok) return "ok";
    std::ostringstream ss;
    if (!cycle_edges.empty()) {
        ss << "cycle among closed branches:";
        for (const auto& [a, b] : cycle_edges) ss << " (" << a << "," << b << ")";
    }
    if (!disconnected_buses.empty()) {
        if (!cycle_edges.empty()) ss << "; ";
        ss << "disconnected buses:";
        for (int id : disconnected_buses) ss << " " << id;
    }
    return ss.str();
}

int FeederNetwork::find_bus(int bus_id) const {
    for (size_t i = 0; i < buses_.size(); ++i)
        if (buses_[i].id == bus_id) return static_cast<int>(i);
    return -1;
}

int FeederNetwork::index_of(int bus_id) const {
    const int idx = find_bus(bus_id);
    if (idx < 0) throw InputError("unknown bus id " + std::to_string(bus_id));
    return idx;
}

void FeederNetwork::check_invariants() const {
    if (!(base_mva_ > 0.0)) throw ValidationError("base_mva must be positive");
    if (!(base_kv_ > 0.0)) throw ValidationError("base_kv must be positive");

    std::set<int> seen;
    int roots = 0;
    for (const Bus& b : buses_) {
        if (!seen.insert(b.id).second)
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (!(b.vmin > 0.0 && b.vmin < b.vmax))
            throw ValidationError("bus " + std::to_string(b.id) +
                                  ": voltage bounds must satisfy 0 < vmin < vmax");
        if (b.pv_capacity < 0.0)
            throw ValidationError("bus " + std::to_string(b.id) + ": pv capacity must be >= 0");
        if (b.cap_q < 0.0)
            throw ValidationError("bus " + std::to_string(b.id) + ": cap must be >= 0");
        if (b.is_root) ++roots;
    }
    if (roots != 1)
        throw ValidationError("network must have exactly one root bus, found " +
                              std::to_string(roots));

    for (const Branch& br : branches_) {
        if (find_bus(br.from_bus) < 0)
            throw ValidationError("branch references unknown bus " + std::to_string(br.from_bus));
        if (find_bus(br.to_bus) < 0)
            throw ValidationError("branch references unknown bus " + std::to_string(br.to_bus));
        if (br.from_bus == br.to_bus)
            throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                  std::to_string(br.to_bus) + " is a self-loop");
        if (br.r < 0.0)
            throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                  std::to_string(br.to_bus) + ": r must be >= 0");
        if (br.r == 0.0 && br.x == 0.0)
            throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                  std::to_string(br.to_bus) + ": (r, x) must not be (0, 0)");
        if (!(br.l_max > 0.0))
            throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                  std::to_string(br.to_bus) + ": lmax must be > 0");
    }
}

void FeederNetwork::build_adjacency() {
    const int n = bus_count();
    parent_bus_.assign(n, -1);
    parent_branch_.assign(n, -1);
    children_.assign(n, {});
    child_branches_.assign(n, {});
    energized_branches_.clear();
    topo_order_.clear();

    // Closed-branch adjacency, file order preserved for determinism.
    std::vector<std::vector<std::pair<int, int>>> adj(n); // (neighbor bus idx, branch idx)
    for (size_t e = 0; e < branches_.size(); ++e) {
        if (!branches_[e].closed) continue;
        const int a = find_bus(branches_[e].from_bus);
        const int b = find_bus(branches_[e].to_bus);
        adj[a].push_back({b, static_cast<int>(e)});
        adj[b].push_back({a, static_cast<int>(e)});
    }

    std::vector<bool> visited(n, false);
    std::deque<int> queue{root_index_};
    visited[root_index_] = true;
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        topo_order_.push_back(i);
        for (const auto& [j, e] : adj[i]) {
            if (visited[j]) continue;
            visited[j] = true;
            parent_bus_[j] = i;
            parent_branch_[j] = e;
            children_[i].push_back(j);
            child_branches_[i].push_back(e);
            energized_branches_.push_back(e);
            queue.push_back(j);
        }
    }
    // Canonical branch order: file order.
    std::sort(energized_branches_.begin(), energized_branches_.end());
    adjacency_built_ = true;
}

FeederNetwork FeederNetwork::build_unchecked(double base_mva, double base_kv,
                                             std::vector<Bus> buses, std::vector<Branch> branches) {
    FeederNetwork net;
    net.base_mva_ = base_mva;
    net.base_kv_ = base_kv;
    net.buses_ = std::move(buses);
    net.branches_ = std::move(branches);
    for (size_t i = 0; i < net.buses_.size(); ++i)
        if (net.buses_[i].is_root) {
            net.root_index_ = static_cast<int>(i);
            break;
        }
    return net;
}

FeederNetwork FeederNetwork::build(double base_mva, double base_kv,
                                   std::vector<Bus> buses, std::vector<Branch> branches) {
    FeederNetwork net = build_unchecked(base_mva, base_kv, std::move(buses), std::move(branches));
    net.check_invariants();
    const RadialityReport report = validate_radial(net);
    if (!report.ok) {
        if (!report.cycle_edges.empty())
            throw RadialityError("radiality violation: " + report.describe());
        throw ConnectivityError("connectivity violation: " + report.describe());
    }
    net.build_adjacency();
    return net;
}

RadialityReport validate_radial(const FeederNetwork& net) {
    RadialityReport report;
    const int n = net.bus_count();
    if (n == 0 || net.root_index_ < 0) {
        report.ok = false;
        return report;
    }

    // Cycle detection over all closed branches.
    DisjointSet ds(n);
    std::set<int> cyclic_components;
    for (const Branch& br : net.branches()) {
        if (!br.closed) continue;
        const int a = net.find_bus(br.from_bus);
        const int b = net.find_bus(br.to_bus);
        if (a < 0 || b < 0) continue; // dangling endpoint surfaces as disconnection
        if (!ds.unite(a, b)) cyclic_components.insert(ds.find(a));
    }
    if (!cyclic_components.empty()) {
        // Report every closed edge inside an offending component; the caller
        // gets the full edge set containing the loop.
        for (const Branch& br : net.branches()) {
            if (!br.closed) continue;
            const int a = net.find_bus(br.from_bus);
            if (a < 0) continue;
            if (cyclic_components.count(ds.find(a)))
                report.cycle_edges.push_back({br.from_bus, br.to_bus});
        }
    }

    // Connectivity from the root over closed branches.
    std::vector<std::vector<int>> adj(n);
    for (const Branch& br : net.branches()) {
        if (!br.closed) continue;
        const int a = net.find_bus(br.from_bus);
        const int b = net.find_bus(br.to_bus);
        if (a < 0 || b < 0) continue;
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<bool> visited(n, false);
    std::deque<int> queue{net.root_index_};
    visited[net.root_index_] = true;
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        for (int j : adj[i])
            if (!visited[j]) {
                visited[j] = true;
                queue.push_back(j);
            }
    }
    for (int i = 0; i < n; ++i)
        if (!visited[i]) report.disconnected_buses.push_back(net.buses()[i].id);

    report.ok = report.cycle_edges.empty() && report.disconnected_buses.empty();
    return report;
}

namespace {

double require_value(const std::map<std::string, std::string>& kv, const std::string& key,
                     int lineno) {
    auto it = kv.find(key);
    if (it == kv.end())
        throw ParseError("line " + std::to_string(lineno) + ": missing field " + key + "=");
    double v = 0.0;
    if (!parse_double(it->second, v))
        throw ParseError("line " + std::to_string(lineno) + ": bad numeric value for " + key);
    return v;
}

double optional_value(const std::map<std::string, std::string>& kv, const std::string& key,
                      int lineno, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    double v = 0.0;
    if (!parse_double(it->second, v))
        throw ParseError("line " + std::to_string(lineno) + ": bad numeric value for " + key);
    return v;
}

} // namespace

FeederNetwork parse_feeder(const std::string& text) {
    double base_mva = 0.0, base_kv = 0.0;
    bool have_mva = false, have_kv = false;
    std::vector<Bus> buses;
    std::vector<Branch> branches;

    int lineno = 0;
    for (const std::string& raw : split(text, '\n')) {
        ++lineno;
        std::string line = raw;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const std::vector<std::string> tokens = split_ws(line);
        const std::string& head = tokens[0];

        if (head == "base_mva" || head == "base_kv") {
            // header form: base_mva = <real>
            if (tokens.size() != 3 || tokens[1] != "=")
                throw ParseError("line " + std::to_string(lineno) + ": expected " + head + " = <real>");
            double v = 0.0;
            if (!parse_double(tokens[2], v) || v <= 0.0)
                throw ParseError("line " + std::to_string(lineno) + ": bad value for " + head);
            (head == "base_mva" ? base_mva : base_kv) = v;
            (head == "base_mva" ? have_mva : have_kv) = true;
            continue;
        }

        if (head == "bus") {
            if (tokens.size() < 2)
                throw ParseError("line " + std::to_string(lineno) + ": bus record needs an id");
            long long id = 0;
            if (!parse_int(tokens[1], id))
                throw ParseError("line " + std::to_string(lineno) + ": bad bus id '" + tokens[1] + "'");
            Bus bus;
            bus.id = static_cast<int>(id);
            std::map<std::string, std::string> kv;
            for (size_t i = 2; i < tokens.size(); ++i) {
                if (tokens[i] == "root") {
                    bus.is_root = true;
                    continue;
                }
                const size_t eq = tokens[i].find('=');
                if (eq == std::string::npos)
                    throw ParseError("line " + std::to_string(lineno) + ": unexpected token '" +
                                     tokens[i] + "' in bus record");
                kv[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
            }
            for (const auto& [k, v] : kv)
                if (k != "p" && k != "q" && k != "vmin" && k != "vmax" && k != "cap" && k != "pv")
                    throw ParseError("line " + std::to_string(lineno) + ": unknown bus field '" + k + "'");
            bus.demand_p = require_value(kv, "p", lineno);
            bus.demand_q = require_value(kv, "q", lineno);
            bus.vmin = require_value(kv, "vmin", lineno);
            bus.vmax = require_value(kv, "vmax", lineno);
            bus.cap_q = optional_value(kv, "cap", lineno, 0.0);
            bus.pv_capacity = optional_value(kv, "pv", lineno, 0.0);
            buses.push_back(bus);
            continue;
        }

        if (head == "branch") {
            if (tokens.size() < 3)
                throw ParseError("line " + std::to_string(lineno) + ": branch record needs two bus ids");
            long long from = 0, to = 0;
            if (!parse_int(tokens[1], from) || !parse_int(tokens[2], to))
                throw ParseError("line " + std::to_string(lineno) + ": bad branch endpoints");
            Branch br;
            br.from_bus = static_cast<int>(from);
            br.to_bus = static_cast<int>(to);
            std::map<std::string, std::string> kv;
            for (size_t i = 3; i < tokens.size(); ++i) {
                if (tokens[i] == "switch") {
                    br.is_switch = true;
                    if (i + 1 >= tokens.size() || (tokens[i + 1] != "open" && tokens[i + 1] != "closed"))
                        throw ParseError("line " + std::to_string(lineno) +
                                         ": switch must be followed by open|closed");
                    br.closed = (tokens[i + 1] == "closed");
                    ++i;
                    continue;
                }
                const size_t eq = tokens[i].find('=');
                if (eq == std::string::npos)
                    throw ParseError("line " + std::to_string(lineno) + ": unexpected token '" +
                                     tokens[i] + "' in branch record");
                kv[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
            }
            for (const auto& [k, v] : kv)
                if (k != "r" && k != "x" && k != "lmax")
                    throw ParseError("line " + std::to_string(lineno) + ": unknown branch field '" + k + "'");
            br.r = require_value(kv, "r", lineno);
            br.x = require_value(kv, "x", lineno);
            br.l_max = require_value(kv, "lmax", lineno);
            branches.push_back(br);
            continue;
        }

        throw ParseError("line " + std::to_string(lineno) + ": unknown record type '" + head + "'");
    }

    if (!have_mva) throw ParseError("missing base_mva header");
    if (!have_kv) throw ParseError("missing base_kv header");
    if (buses.empty()) throw ParseError("no bus records");

    return FeederNetwork::build(base_mva, base_kv, std::move(buses), std::move(branches));
}

FeederNetwork parse_feeder_file(const std::string& path) {
    return parse_feeder(read_text_file(path));
}

std::string serialize_feeder(const FeederNetwork& net) {
    std::ostringstream out;
    out << "base_mva = " << fmt_double(net.base_mva()) << "\n";
    out << "base_kv = " << fmt_double(net.base_kv()) << "\n";
    for (const Bus& b : net.buses()) {
        out << "bus " << b.id;
        if (b.is_root) out << " root";
        out << " p=" << fmt_double(b.demand_p) << " q=" << fmt_double(b.demand_q)
            << " vmin=" << fmt_double(b.vmin) << " vmax=" << fmt_double(b.vmax);
        if (b.cap_q != 0.0) out << " cap=" << fmt_double(b.cap_q);
        if (b.pv_capacity != 0.0) out << " pv=" << fmt_double(b.pv_capacity);
        out << "\n";
    }
    for (const Branch& br : net.branches()) {
        out << "branch " << br.from_bus << " " << br.to_bus
            << " r=" << fmt_double(br.r) << " x=" << fmt_double(br.x)
            << " lmax=" << fmt_double(br.l_max);
        if (br.is_switch) out << " switch " << (br.closed ? "closed" : "open");
        out << "\n";
    }
    return out.str();
}

int FeederNetwork::count_basic_branches() const {
    int n = 0;
    for (const Branch& b : branches_)
        if (!b.is_switch) ++n;
    return n;
}

int FeederNetwork::count_switches(bool closed) const {
    int n = 0;
    for (const Branch& b : branches_)
        if (b.is_switch && b.closed == closed) ++n;
    return n;
}

int FeederNetwork::count_loads() const {
    int n = 0;
    for (const Bus& b : buses_)
        if (b.has_load()) ++n;
    return n;
}

int FeederNetwork::count_capacitors() const {
    int n = 0;
    for (const Bus& b : buses_)
        if (b.has_capacitor()) ++n;
    return n;
}

std::pair<double, double> aggregate_demand(const FeederNetwork& net, int hour, int horizon) {
    if (hour < 0 || hour >= horizon)
        throw InputError("hour " + std::to_string(hour) + " out of range [0, " +
                         std::to_string(horizon) + ")");
    if (!net.has_adjacency())
        throw InputError("aggregate_demand requires a validated network");
    double p = 0.0, q = 0.0;
    for (int i : net.topo_order()) { // energized buses only
        const Bus& b = net.buses()[i];
        p += b.demand_p;
        q += b.demand_q - b.cap_q;
    }
    return {p, q};
}

} // namespace feederplan
