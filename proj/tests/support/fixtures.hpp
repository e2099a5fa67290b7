#pragma once

#include <string>

#include "feederplan/grid.hpp"

namespace feederplan::testing {

inline std::string data_path(const std::string& name) {
    return std::string(FEEDERPLAN_SOURCE_DIR) + "/data/" + name;
}

// Root 0 feeding bus 1. Loads in kW/kvar on a 1 MVA base.
inline FeederNetwork two_bus_net(double p_kw = 500.0, double q_kvar = 200.0, double r = 0.01,
                                 double x = 0.02) {
    std::vector<Bus> buses{
        {0, 0.0, 0.0, 0.90, 1.10, 0.0, 0.0, true},
        {1, p_kw, q_kvar, 0.90, 1.10, 0.0, 0.0, false},
    };
    std::vector<Branch> branches{{0, 1, r, x, 5.0, false, true}};
    return FeederNetwork::build(1.0, 4.16, std::move(buses), std::move(branches));
}

// Chain 0 -> 1 -> 2 with loads at both downstream buses.
inline FeederNetwork three_bus_chain() {
    std::vector<Bus> buses{
        {0, 0.0, 0.0, 0.90, 1.10, 0.0, 0.0, true},
        {1, 300.0, 100.0, 0.90, 1.10, 0.0, 0.0, false},
        {2, 200.0, 80.0, 0.90, 1.10, 0.0, 0.0, false},
    };
    std::vector<Branch> branches{
        {0, 1, 0.01, 0.02, 5.0, false, true},
        {1, 2, 0.015, 0.025, 5.0, false, true},
    };
    return FeederNetwork::build(1.0, 4.16, std::move(buses), std::move(branches));
}

} // namespace feederplan::testing
