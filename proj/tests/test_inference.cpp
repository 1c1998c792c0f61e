#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "sid/inference.hpp"
#include "sid/partmask.hpp"

using namespace sid;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Independent greedy suppression oracle: sort, then exhaustive pairwise
// checks against everything kept so far.
std::vector<Triplet> nms_oracle(std::vector<Triplet> ts, double theta) {
    std::stable_sort(ts.begin(), ts.end(), [](const Triplet& a, const Triplet& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.group_index != b.group_index) return a.group_index < b.group_index;
        if (a.class_id != b.class_id) return a.class_id < b.class_id;
        return a.individual_index < b.individual_index;
    });
    std::vector<Triplet> kept;
    for (const auto& t : ts) {
        bool dead = false;
        for (const auto& k : kept)
            if (k.class_id == t.class_id && iou(k.individual_box, t.individual_box) > theta &&
                iou(k.group_box, t.group_box) > theta) {
                dead = true;
                break;
            }
        if (!dead) kept.push_back(t);
    }
    return kept;
}

bool same(const std::vector<Triplet>& a, const std::vector<Triplet>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].score != b[i].score || a[i].class_id != b[i].class_id ||
            a[i].group_index != b[i].group_index ||
            a[i].individual_index != b[i].individual_index)
            return false;
    return true;
}

std::vector<Triplet> random_triplets(std::uint64_t& rng, int n) {
    // Quantized geometry/scores so overlaps and score ties actually occur.
    std::vector<Triplet> ts;
    for (int i = 0; i < n; ++i) {
        Triplet t;
        auto q = [&](double lo, double hi, int steps) {
            return lo + (hi - lo) * static_cast<double>(splitmix64(rng) % steps) / (steps - 1);
        };
        t.individual_box = Box(q(0.3, 0.6, 4), q(0.3, 0.6, 4), q(0.2, 0.4, 3), q(0.2, 0.4, 3));
        t.group_box = Box(q(0.35, 0.65, 4), q(0.35, 0.65, 4), q(0.3, 0.5, 3), q(0.3, 0.5, 3));
        t.class_id = static_cast<int>(splitmix64(rng) % 3);
        t.score = 0.1 * (1 + static_cast<int>(splitmix64(rng) % 9));
        t.group_index = static_cast<int>(splitmix64(rng) % 8);
        // Unique per element so the deterministic sort has no exact ties,
        // matching real assembled output (one triplet per group/class).
        t.individual_index = i;
        ts.push_back(t);
    }
    return ts;
}

PredictionSet tiny_predictions() {
    PredictionSet p;
    p.individual_boxes = {Box(0.2, 0.2, 0.1, 0.1), Box(0.4, 0.4, 0.1, 0.1),
                          Box(0.6, 0.6, 0.1, 0.1), Box(0.8, 0.8, 0.1, 0.1)};
    p.objectness = {0.9, 0.8, 0.7, 0.6};
    p.group_boxes = {Box(0.3, 0.3, 0.3, 0.3), Box(0.7, 0.7, 0.3, 0.3)};
    p.class_logits = {{2.0, -1.0}, {-3.0, 0.5}};
    p.similarity = {{0.1, 0.2, 0.9, 0.3}, {0.5, 0.5, 0.4, 0.2}};
    return p;
}

}  // namespace

TEST_CASE("assemble carries the argmax-similarity individual") {
    PredictionSet p = tiny_predictions();
    auto ts = assemble_triplets(p);
    // Group 0: argmax similarity at j=2; group 1: tie between j=0 and j=1
    // broken to the lowest index.
    for (const auto& t : ts) {
        if (t.group_index == 0) CHECK(t.individual_index == 2);
        if (t.group_index == 1) CHECK(t.individual_index == 0);
    }
    // One triplet per (group, class) above the zero floor.
    CHECK(ts.size() == 4);
    // Scores are sigmoids of the class logits.
    for (const auto& t : ts)
        CHECK(t.score == doctest::Approx(sig(p.class_logits[t.group_index][t.class_id])));
}

TEST_CASE("assemble argmax is shift invariant per row") {
    PredictionSet p = tiny_predictions();
    auto base = assemble_triplets(p);
    for (auto& v : p.similarity[0]) v += 5.0;
    auto shifted = assemble_triplets(p);
    REQUIRE(base.size() == shifted.size());
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK(base[i].individual_index == shifted[i].individual_index);
}

TEST_CASE("multi-label group emits one triplet per class sharing boxes") {
    PredictionSet p = tiny_predictions();
    std::vector<Triplet> g0;
    for (const auto& t : assemble_triplets(p, 0.1))
        if (t.group_index == 0) g0.push_back(t);
    REQUIRE(g0.size() == 2);
    CHECK(g0[0].class_id != g0[1].class_id);
    CHECK(g0[0].individual_index == g0[1].individual_index);
    CHECK(iou(g0[0].group_box, g0[1].group_box) == doctest::Approx(1.0));
}

TEST_CASE("score floor prunes") {
    PredictionSet p = tiny_predictions();
    auto ts = assemble_triplets(p, 0.5);
    for (const auto& t : ts) CHECK(t.score > 0.5);
    CHECK(ts.size() == 2);  // logits 2.0 and 0.5 clear the 0.5 floor
}

TEST_CASE("nms keeps the higher-score duplicate") {
    Triplet a, b;
    a.individual_box = b.individual_box = Box(0.5, 0.5, 0.2, 0.2);
    a.group_box = b.group_box = Box(0.5, 0.5, 0.4, 0.4);
    a.class_id = b.class_id = 1;
    a.score = 0.9;
    b.score = 0.8;
    auto kept = triplet_nms({a, b}, 0.5);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].score == doctest::Approx(0.9));

    // Same boxes, different classes: condition 3 fails, both survive.
    b.class_id = 0;
    CHECK(triplet_nms({a, b}, 0.5).size() == 2);

    // Same class but group boxes disjoint: condition 2 fails.
    b.class_id = 1;
    b.group_box = Box(0.15, 0.15, 0.2, 0.2);
    CHECK(triplet_nms({a, b}, 0.5).size() == 2);
}

TEST_CASE("nms matches the brute-force oracle on 200 random sets") {
    std::uint64_t rng = 404;
    for (int trial = 0; trial < 200; ++trial) {
        auto ts = random_triplets(rng, 50);
        for (double theta : {0.3, 0.5, 0.7}) {
            auto got = triplet_nms(ts, theta);
            auto want = nms_oracle(ts, theta);
            CHECK(same(got, want));
            // Idempotence.
            CHECK(same(triplet_nms(got, theta), got));
            // No surviving pair violates all three conditions.
            for (std::size_t i = 0; i < got.size(); ++i)
                for (std::size_t j = i + 1; j < got.size(); ++j) {
                    bool dup = got[i].class_id == got[j].class_id &&
                               iou(got[i].individual_box, got[j].individual_box) > theta &&
                               iou(got[i].group_box, got[j].group_box) > theta;
                    CHECK_FALSE(dup);
                }
        }
        // Monotonicity in theta.
        CHECK(triplet_nms(ts, 0.3).size() <= triplet_nms(ts, 0.5).size());
        CHECK(triplet_nms(ts, 0.5).size() <= triplet_nms(ts, 0.7).size());
    }
}

TEST_CASE("nms output is a subset with unmodified scores") {
    std::uint64_t rng = 777;
    auto ts = random_triplets(rng, 30);
    auto kept = triplet_nms(ts, 0.5);
    for (const auto& k : kept) {
        bool found = false;
        for (const auto& t : ts)
            found = found || (t.score == k.score && t.class_id == k.class_id &&
                              t.group_index == k.group_index &&
                              t.individual_index == k.individual_index);
        CHECK(found);
    }
}
