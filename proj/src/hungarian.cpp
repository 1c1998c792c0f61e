#include "sid/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sid {

// Potentials formulation; columns are assigned one at a time via the
// shortest augmenting path over rows. O(cols^2 * rows).
Assignment hungarian(const CostMatrix& cost) {
    const int rows = static_cast<int>(cost.size());
    if (rows == 0) return {};
    const int cols = static_cast<int>(cost[0].size());
    if (cols == 0) return {};
    if (cols > rows)
        throw std::invalid_argument("hungarian: more ground truths than predictions");
    for (const auto& r : cost) {
        if (static_cast<int>(r.size()) != cols)
            throw std::invalid_argument("hungarian: ragged cost matrix");
        for (double v : r)
            if (!std::isfinite(v))
                throw std::invalid_argument("hungarian: non-finite cost entry");
    }

    const double inf = std::numeric_limits<double>::infinity();
    // 1-based; p[j] = column currently assigned to row j (0 = none).
    std::vector<double> u(cols + 1, 0.0), v(rows + 1, 0.0);
    std::vector<int> p(rows + 1, 0), way(rows + 1, 0);

    for (int i = 1; i <= cols; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(rows + 1, inf);
        std::vector<char> used(rows + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= rows; ++j) {
                if (used[j]) continue;
                const double cur = cost[j - 1][i0 - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= rows; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    Assignment out;
    for (int j = 1; j <= rows; ++j) {
        if (p[j] != 0) {
            out.pairs.emplace_back(j - 1, p[j] - 1);
            out.cost += cost[j - 1][p[j] - 1];
        }
    }
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    return out;
}

}  // namespace sid
