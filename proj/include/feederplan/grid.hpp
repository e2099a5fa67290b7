#pragma once

#include <string>
#include <utility>
#include <vector>

namespace feederplan {

// Single-phase per-unit equivalent of a distribution bus. Loads and PV are
// kept in file units (kW / kvar); conversions to per-unit go through
// FeederNetwork::s_base_kw(). Voltage bounds are stored as given (pu volts)
// so that parse -> serialize -> parse reproduces every field exactly.
struct Bus {
    int id = -1;
    double demand_p = 0.0;  // kW
    double demand_q = 0.0;  // kvar
    double vmin = 0.0;      // pu
    double vmax = 0.0;      // pu
    double cap_q = 0.0;     // kvar, fixed shunt compensation
    double pv_capacity = 0.0; // kW
    bool is_root = false;

    double v_min_sq() const { return vmin * vmin; }
    double v_max_sq() const { return vmax * vmax; }
    bool has_capacitor() const { return cap_q > 0.0; }
    bool has_load() const { return demand_p != 0.0 || demand_q != 0.0; }
};

struct Branch {
    int from_bus = -1; // parent end
    int to_bus = -1;   // child end
    double r = 0.0;    // pu
    double x = 0.0;    // pu
    double l_max = 0.0; // pu^2, squared-current limit
    bool is_switch = false;
    bool closed = true;

    bool energized() const { return closed; }
};

// Radiality check outcome. Violations are returned, not thrown.
struct RadialityReport {
    bool ok = true;
    // Closed branches participating in a cycle, as (from, to) id pairs.
    std::vector<std::pair<int, int>> cycle_edges;
    // Buses with no closed path to the root.
    std::vector<int> disconnected_buses;
    std::string describe() const;
};

// Radial feeder graph. Immutable after construction; adjacency (parent /
// children over closed branches) is derived once at build time.
class FeederNetwork {
public:
    // Validates invariants and radiality; throws on violation.
    static FeederNetwork build(double base_mva, double base_kv,
                               std::vector<Bus> buses, std::vector<Branch> branches);
    // Skips radiality/adjacency; for constructing deliberately broken
    // networks to feed validate_radial.
    static FeederNetwork build_unchecked(double base_mva, double base_kv,
                                         std::vector<Bus> buses, std::vector<Branch> branches);

    double base_mva() const { return base_mva_; }
    double base_kv() const { return base_kv_; }
    double s_base_kw() const { return base_mva_ * 1000.0; }

    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Branch>& branches() const { return branches_; }

    int bus_count() const { return static_cast<int>(buses_.size()); }
    int find_bus(int bus_id) const;      // index or -1
    int index_of(int bus_id) const;      // index or throws
    int root_index() const { return root_index_; }

    bool has_adjacency() const { return adjacency_built_; }
    int parent_of(int bus_index) const { return parent_bus_[bus_index]; }
    int parent_branch_of(int bus_index) const { return parent_branch_[bus_index]; }
    const std::vector<int>& children_of(int bus_index) const { return children_[bus_index]; }
    const std::vector<int>& child_branches_of(int bus_index) const { return child_branches_[bus_index]; }
    // Energized (closed) branch indices in file order.
    const std::vector<int>& energized_branches() const { return energized_branches_; }
    // Bus indices in root-first topological order over the closed tree.
    const std::vector<int>& topo_order() const { return topo_order_; }

    int count_basic_branches() const;
    int count_switches(bool closed) const;
    int count_loads() const;
    int count_capacitors() const;

private:
    FeederNetwork() = default;
    void check_invariants() const;
    void build_adjacency(); // requires a valid tree

    double base_mva_ = 0.0;
    double base_kv_ = 0.0;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    int root_index_ = -1;

    bool adjacency_built_ = false;
    std::vector<int> parent_bus_;
    std::vector<int> parent_branch_;
    std::vector<std::vector<int>> children_;
    std::vector<std::vector<int>> child_branches_;
    std::vector<int> energized_branches_;
    std::vector<int> topo_order_;

    friend RadialityReport validate_radial(const FeederNetwork&);
};

// Parses the feeder description format:
//   base_mva = <real>
//   base_kv = <real>
//   bus <id> [root] p=<kW> q=<kvar> vmin=<pu> vmax=<pu> [cap=<kvar>] [pv=<kW>]
//   branch <from> <to> r=<pu> x=<pu> lmax=<pu^2> [switch open|closed]
// '#' starts a comment. Throws ParseError / ValidationError subtypes.
FeederNetwork parse_feeder(const std::string& text);
FeederNetwork parse_feeder_file(const std::string& path);

// Inverse of parse_feeder up to comments and whitespace. Field-exact:
// parse(serialize(net)) reproduces every stored value bit for bit.
std::string serialize_feeder(const FeederNetwork& net);

// ok iff the closed branches form a spanning tree of the buses reachable
// from the root. Works on unchecked networks.
RadialityReport validate_radial(const FeederNetwork& net);

// Sums (p, q_net) over energized buses, kW / kvar. q_net subtracts fixed
// capacitor compensation. `hour` must lie in [0, horizon); bus demands are
// scalar, so the hour only selects the (time-invariant) column.
std::pair<double, double> aggregate_demand(const FeederNetwork& net, int hour, int horizon);

} // namespace feederplan
