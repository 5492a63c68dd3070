#pragma once

#include <vector>

#include "uavsim/linalg.hpp"

namespace uavsim {

/// Undirected communication graph over agent indices.
struct CoordGraph {
    int n_agents = 0;
    std::vector<std::vector<int>> neighbors;

    /// Throws ConfigError on self-loops, asymmetry, or out-of-range indices.
    /// Returns false (without throwing) when the graph is not connected.
    bool validate() const;
};

CoordGraph complete_graph(int n_agents);

/// Per-agent coordination state with shared gains.
struct CoordState {
    Vec s;            // normalized trajectory progress, one entry per agent
    double k_e = 0.005;
    double k_s = 0.005;
    double rho = 1.0 / 1200.0;  // reference progress rate per tick
};

/// Coordination control input for agent i against one-tick-old neighbor
/// snapshots:
///   z = max{ -k_e e - k_s sum_j (s_i - s_j) + rho + [attacked] k_e e, 0 }
double coord_input(int i, const CoordState& coord, const CoordGraph& graph,
                   double tracking_error, bool attacked);

/// s_i <- min(s_i + z_i, 1). Negative z entries are a contract violation.
CoordState advance(const CoordState& coord, const Vec& z);

}  // namespace uavsim
