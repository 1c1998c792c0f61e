// Minimal-cost bipartite assignment (Kuhn-Munkres with potentials),
// rectangular: every ground-truth column is assigned a distinct
// prediction row.
#pragma once

#include <utility>
#include <vector>

namespace sid {

using CostMatrix = std::vector<std::vector<double>>;  // rows x cols

struct Assignment {
    // (prediction row, ground-truth column), one entry per column.
    std::vector<std::pair<int, int>> pairs;
    double cost = 0.0;
};

// Requires rows >= cols and finite entries; throws std::invalid_argument
// otherwise (more ground truths than queries signals a misconfigured
// query count).
Assignment hungarian(const CostMatrix& cost);

}  // namespace sid
