#include "uavsim/coordination.hpp"

#include <algorithm>
#include <functional>

namespace uavsim {

bool CoordGraph::validate() const {
    if (n_agents < 0) throw ConfigError("CoordGraph: negative agent count");
    if (int(neighbors.size()) != n_agents)
        throw ConfigError("CoordGraph: adjacency list size must equal n_agents");
    for (int i = 0; i < n_agents; ++i) {
        for (int j : neighbors[i]) {
            if (j < 0 || j >= n_agents) throw ConfigError("CoordGraph: neighbor index out of range");
            if (j == i) throw ConfigError("CoordGraph: self-loops are not allowed");
            if (std::find(neighbors[j].begin(), neighbors[j].end(), i) == neighbors[j].end())
                throw ConfigError("CoordGraph: adjacency must be symmetric");
        }
    }
    if (n_agents == 0) return true;
    std::vector<bool> seen(n_agents, false);
    std::function<void(int)> dfs = [&](int v) {
        seen[v] = true;
        for (int j : neighbors[v])
            if (!seen[j]) dfs(j);
    };
    dfs(0);
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

CoordGraph complete_graph(int n_agents) {
    CoordGraph g;
    g.n_agents = n_agents;
    g.neighbors.resize(n_agents);
    for (int i = 0; i < n_agents; ++i)
        for (int j = 0; j < n_agents; ++j)
            if (i != j) g.neighbors[i].push_back(j);
    return g;
}

double coord_input(int i, const CoordState& coord, const CoordGraph& graph,
                   double tracking_error, bool attacked) {
    if (i < 0 || i >= int(coord.s.size()))
        throw ConfigError("coord_input: agent index out of range");
    if (tracking_error < 0) throw ConfigError("coord_input: tracking_error must be nonnegative");

    double consensus = 0.0;
    for (int j : graph.neighbors[i]) consensus += coord.s[i] - coord.s[j];

    double z = -coord.k_e * tracking_error - coord.k_s * consensus + coord.rho;
    if (attacked) z += coord.k_e * tracking_error;  // virtual target keeps moving
    return std::max(z, 0.0);
}

CoordState advance(const CoordState& coord, const Vec& z) {
    if (z.size() != coord.s.size()) throw ConfigError("advance: z size mismatch");
    if (z.size() > 0 && z.minCoeff() < 0.0)
        throw std::invalid_argument("advance: negative coordination input");
    CoordState next = coord;
    next.s = (coord.s + z).cwiseMin(1.0);
    return next;
}

}  // namespace uavsim
