#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "sid/matching.hpp"
#include "sid/partmask.hpp"

using namespace sid;

namespace {

// Exhaustive assignment minimum over all injections of columns into rows.
double brute_force_cost(const CostMatrix& c) {
    const int rows = static_cast<int>(c.size());
    const int cols = static_cast<int>(c[0].size());
    std::vector<int> perm(rows);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0;
        for (int j = 0; j < cols; ++j) s += c[perm[j]][j];
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

CostMatrix random_cost(std::uint64_t& rng, int rows, int cols) {
    CostMatrix c(rows, std::vector<double>(cols));
    for (auto& row : c)
        for (auto& v : row) v = uniform01(rng) * 10.0 - 2.0;
    return c;
}

}  // namespace

TEST_CASE("hungarian fixtures") {
    Assignment a = hungarian({{5.0}});
    REQUIRE(a.pairs.size() == 1);
    CHECK(a.pairs[0] == std::pair<int, int>{0, 0});
    CHECK(a.cost == doctest::Approx(5.0));

    a = hungarian({{1.0, 2.0}, {2.0, 1.0}});
    REQUIRE(a.pairs.size() == 2);
    CHECK(a.pairs[0] == std::pair<int, int>{0, 0});
    CHECK(a.pairs[1] == std::pair<int, int>{1, 1});
    CHECK(a.cost == doctest::Approx(2.0));
}

TEST_CASE("hungarian rejects bad input") {
    CHECK_THROWS_AS(hungarian({{1.0, 2.0, 3.0}}), std::invalid_argument);  // cols > rows
    CHECK_THROWS_AS(hungarian({{std::numeric_limits<double>::infinity()}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(hungarian({{std::nan("")}}), std::invalid_argument);
}

TEST_CASE("hungarian matches brute force on random square matrices") {
    std::uint64_t rng = 3;
    for (int trial = 0; trial < 200; ++trial) {
        CostMatrix c = random_cost(rng, 6, 6);
        CHECK(hungarian(c).cost == doctest::Approx(brute_force_cost(c)).epsilon(1e-12));
    }
}

TEST_CASE("hungarian matches brute force on rectangular matrices") {
    std::uint64_t rng = 17;
    for (int trial = 0; trial < 200; ++trial) {
        int cols = 1 + static_cast<int>(splitmix64(rng) % 5);
        int rows = cols + static_cast<int>(splitmix64(rng) % 3);
        CostMatrix c = random_cost(rng, rows, cols);
        Assignment a = hungarian(c);
        CHECK(static_cast<int>(a.pairs.size()) == cols);
        CHECK(a.cost == doctest::Approx(brute_force_cost(c)).epsilon(1e-12));
    }
}

TEST_CASE("hungarian invariant to constant shift and positive scale") {
    std::uint64_t rng = 23;
    for (int trial = 0; trial < 50; ++trial) {
        CostMatrix c = random_cost(rng, 5, 4);
        Assignment base = hungarian(c);
        CostMatrix shifted = c, scaled = c;
        for (auto& row : shifted)
            for (auto& v : row) v += 7.25;
        for (auto& row : scaled)
            for (auto& v : row) v *= 3.5;
        CHECK(hungarian(shifted).pairs == base.pairs);
        CHECK(hungarian(scaled).pairs == base.pairs);
    }
}

TEST_CASE("individual match cost fixtures") {
    Box b(0.5, 0.5, 0.2, 0.3);
    CostMatrix c = individual_match_cost({b}, {1.0}, {b});
    CHECK(c[0][0] == doctest::Approx(0.0).epsilon(1e-12));

    // Crossed predictions pair with their exact-overlap ground truths.
    Box b2(0.2, 0.2, 0.1, 0.1);
    c = individual_match_cost({b2, b}, {1.0, 1.0}, {b, b2});
    Assignment a = hungarian(c);
    CHECK(a.pairs[0] == std::pair<int, int>{1, 0});
    CHECK(a.pairs[1] == std::pair<int, int>{0, 1});
    CHECK(a.cost == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("individual match cost hand-computed entry") {
    Box pred(0.5, 0.5, 0.2, 0.2);
    Box gt(0.45, 0.52, 0.22, 0.2);
    double obj = 0.7;
    MatchWeights w;
    double l1 = std::abs(0.5 - 0.45) + std::abs(0.5 - 0.52) + std::abs(0.2 - 0.22);
    double expected = w.lambda_obj * (1.0 - obj) + w.lambda_l1 * l1 +
                      w.lambda_giou * (1.0 - giou(pred, gt));
    CostMatrix c = individual_match_cost({pred}, {obj}, {gt});
    CHECK(c[0][0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("group match cost fixtures") {
    Box g1(0.3, 0.3, 0.2, 0.2), g2(0.7, 0.7, 0.2, 0.2);
    // Saturated logits for classes {0} and {1} out of 3.
    std::vector<std::vector<double>> logits = {{40.0, -40.0, -40.0}, {-40.0, 40.0, -40.0}};
    std::vector<std::vector<double>> ys = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
    CostMatrix c = group_match_cost({g1, g2}, logits, {g1, g2}, ys);
    CHECK(c[0][0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(c[1][1] == doctest::Approx(0.0).epsilon(1e-9));
    // Exact entry is the row minimum.
    CHECK(c[0][0] < c[0][1]);
    CHECK(c[1][1] < c[1][0]);

    // Equivariance: permuting ground truths permutes the assignment.
    Assignment a = hungarian(c);
    CostMatrix cp = group_match_cost({g1, g2}, logits, {g2, g1}, {ys[1], ys[0]});
    Assignment ap = hungarian(cp);
    CHECK(a.pairs[0].first == ap.pairs[1].first);
    CHECK(a.pairs[1].first == ap.pairs[0].first);
}

TEST_CASE("group match cost hand-computed entry") {
    Box pred(0.5, 0.5, 0.3, 0.3), gt(0.55, 0.45, 0.25, 0.35);
    std::vector<double> logits = {1.0, -2.0};
    std::vector<double> y = {1.0, 1.0};
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    MatchWeights w;
    double cls = (std::abs(sig(1.0) - 1.0) + std::abs(sig(-2.0) - 1.0)) / 2.0;
    double l1 = 0.05 + 0.05 + 0.05 + 0.05;
    double expected =
        w.lambda_cls * cls + w.lambda_l1 * l1 + w.lambda_giou * (1.0 - giou(pred, gt));
    CostMatrix c = group_match_cost({pred}, {logits}, {gt}, {y});
    CHECK(c[0][0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("group match 4x3 instance against permutation oracle") {
    std::uint64_t rng = 31;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Box> preds, gts;
        std::vector<std::vector<double>> logits, ys;
        for (int i = 0; i < 4; ++i) {
            preds.push_back(Box(0.3 + 0.4 * uniform01(rng), 0.3 + 0.4 * uniform01(rng),
                                0.1 + 0.3 * uniform01(rng), 0.1 + 0.3 * uniform01(rng)));
            logits.push_back({4 * uniform01(rng) - 2, 4 * uniform01(rng) - 2});
        }
        for (int j = 0; j < 3; ++j) {
            gts.push_back(Box(0.3 + 0.4 * uniform01(rng), 0.3 + 0.4 * uniform01(rng),
                              0.1 + 0.3 * uniform01(rng), 0.1 + 0.3 * uniform01(rng)));
            ys.push_back({splitmix64(rng) % 2 ? 1.0 : 0.0, 1.0});
        }
        CostMatrix c = group_match_cost(preds, logits, gts, ys);
        CHECK(hungarian(c).cost == doctest::Approx(brute_force_cost(c)).epsilon(1e-12));
    }
}
