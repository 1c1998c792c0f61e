#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "doctest.h"
#include "sid/evaluation.hpp"
#include "sid/partmask.hpp"

using namespace sid;

namespace {

Triplet make_pred(Box ib, Box gb, int cls, double score) {
    Triplet t;
    t.individual_box = ib;
    t.group_box = gb;
    t.class_id = cls;
    t.score = score;
    return t;
}

GtTriplet make_gt(Box ib, Box gb, int cls) { return GtTriplet{ib, gb, cls}; }

// Independent brute-force reference evaluator, written directly from
// the metric definition.
struct Reference {
    static std::map<int, double> recall(const std::vector<ImagePredictions>& preds,
                                        const std::vector<ImageGroundTruth>& gts, int k,
                                        double t) {
        std::map<int, long> hit, total;
        for (std::size_t im = 0; im < gts.size(); ++im) {
            auto ts = preds[im].triplets;
            std::sort(ts.begin(), ts.end(),
                      [](const Triplet& a, const Triplet& b) { return a.score > b.score; });
            if (static_cast<int>(ts.size()) > k) ts.resize(k);
            std::set<std::size_t> used;
            for (const auto& g : gts[im].triplets) total[g.class_id]++;
            for (const auto& p : ts)
                for (std::size_t j = 0; j < gts[im].triplets.size(); ++j) {
                    const auto& g = gts[im].triplets[j];
                    if (used.count(j)) continue;
                    if (p.class_id == g.class_id &&
                        iou(p.individual_box, g.individual_box) >= t &&
                        iou(p.group_box, g.group_box) >= t) {
                        used.insert(j);
                        hit[g.class_id]++;
                        break;
                    }
                }
        }
        std::map<int, double> out;
        for (const auto& [c, n] : total)
            out[c] = static_cast<double>(hit[c]) / static_cast<double>(n);
        return out;
    }

    static double mr(const std::vector<ImagePredictions>& preds,
                     const std::vector<ImageGroundTruth>& gts, int k) {
        std::map<int, double> sums;
        std::map<int, int> cnts;
        for (double t : {0.25, 0.5, 0.75})
            for (const auto& [c, r] : recall(preds, gts, k, t)) {
                sums[c] += r;
                cnts[c]++;
            }
        double s = 0;
        for (const auto& [c, v] : sums) s += v / cnts[c];
        return sums.empty() ? 0.0 : s / sums.size() * 100.0;
    }
};

// Three images, two classes, deliberately partial recall.
void fixture(std::vector<ImagePredictions>& preds, std::vector<ImageGroundTruth>& gts) {
    Box i1(0.2, 0.2, 0.1, 0.2), g1(0.3, 0.3, 0.4, 0.4);
    Box i2(0.7, 0.7, 0.15, 0.2), g2(0.65, 0.65, 0.5, 0.5);
    Box i1_off(0.23, 0.2, 0.1, 0.2);   // moderate overlap with i1
    Box i1_far(0.8, 0.25, 0.1, 0.2);   // no overlap with i1

    gts = {{"a", {make_gt(i1, g1, 0), make_gt(i2, g2, 1)}},
           {"b", {make_gt(i1, g1, 1)}},
           {"c", {make_gt(i2, g2, 0), make_gt(i2, g2, 1)}}};
    preds = {{"a",
              {make_pred(i1, g1, 0, 0.9),        // exact hit, class 0
               make_pred(i1_off, g1, 1, 0.8)}},  // wrong location for class-1 gt
             {"b",
              {make_pred(i1_off, g1, 1, 0.7),    // partial-overlap hit at low thresholds
               make_pred(i1_far, g1, 1, 0.95)}}, // miss that outranks the hit
             {"c",
              {make_pred(i2, g2, 1, 0.6)}}};     // class 1 hit; class 0 gt missed
}

}  // namespace

TEST_CASE("match_triplet fixtures") {
    Box b(0.5, 0.5, 0.2, 0.2), g(0.5, 0.5, 0.6, 0.6);
    CHECK(match_triplet(make_pred(b, g, 1, 0.5), make_gt(b, g, 1), 0.75));
    CHECK_FALSE(match_triplet(make_pred(b, g, 0, 0.5), make_gt(b, g, 1), 0.25));

    // individual IoU 0.6, group IoU 0.4: true at 0.25, false at 0.5.
    Box ia = from_corners({0.1, 0.1, 0.5, 0.5});
    Box ib = from_corners({0.2, 0.1, 0.6, 0.5});  // shift w/4 -> IoU 0.6
    Box ga = from_corners({0.1, 0.5, 0.45, 0.85});
    Box gb = from_corners({0.25, 0.5, 0.6, 0.85});  // shift 3w/7 -> IoU 0.4
    CHECK(iou(ia, ib) == doctest::Approx(0.6));
    CHECK(iou(ga, gb) == doctest::Approx(0.4));
    CHECK(match_triplet(make_pred(ia, ga, 2, 0.5), make_gt(ib, gb, 2), 0.25));
    CHECK_FALSE(match_triplet(make_pred(ia, ga, 2, 0.5), make_gt(ib, gb, 2), 0.5));
}

TEST_CASE("perfect predictions give recall 1 and AR 100") {
    std::vector<ImageGroundTruth> gts;
    std::vector<ImagePredictions> preds;
    fixture(preds, gts);
    std::vector<ImagePredictions> perfect;
    for (const auto& g : gts) {
        ImagePredictions p{g.id, {}};
        for (const auto& t : g.triplets)
            p.triplets.push_back(make_pred(t.individual_box, t.group_box, t.class_id, 1.0));
        perfect.push_back(p);
    }
    for (const auto& [cls, r] : recall_at_k(perfect, gts, 25, 0.75))
        CHECK(r == doctest::Approx(1.0));
    MetricReport rep = evaluate(perfect, gts);
    CHECK(rep.mr25 == doctest::Approx(100.0));
    CHECK(rep.mr50 == doctest::Approx(100.0));
    CHECK(rep.mr100 == doctest::Approx(100.0));
    CHECK(rep.ar == doctest::Approx(100.0));
}

TEST_CASE("K=0 gives zero recall") {
    std::vector<ImageGroundTruth> gts;
    std::vector<ImagePredictions> preds;
    fixture(preds, gts);
    for (const auto& [cls, r] : recall_at_k(preds, gts, 0, 0.25)) CHECK(r == 0.0);
}

TEST_CASE("evaluator matches the brute-force reference on the 3-image fixture") {
    std::vector<ImageGroundTruth> gts;
    std::vector<ImagePredictions> preds;
    fixture(preds, gts);
    for (int k : {1, 2, 25})
        for (double t : {0.25, 0.5, 0.75}) {
            auto got = recall_at_k(preds, gts, k, t);
            auto want = Reference::recall(preds, gts, k, t);
            REQUIRE(got.size() == want.size());
            for (const auto& [c, r] : want) CHECK(got.at(c) == doctest::Approx(r));
        }
    MetricReport rep = evaluate(preds, gts);
    CHECK(rep.mr25 == doctest::Approx(Reference::mr(preds, gts, 25)));
    CHECK(rep.mr50 == doctest::Approx(Reference::mr(preds, gts, 50)));
    CHECK(rep.mr100 == doctest::Approx(Reference::mr(preds, gts, 100)));
    CHECK(rep.ar == doctest::Approx((rep.mr25 + rep.mr50 + rep.mr100) / 3.0));
    // The fixture is deliberately partial.
    CHECK(rep.ar > 0.0);
    CHECK(rep.ar < 100.0);
}

TEST_CASE("shuffled prediction order leaves the report identical") {
    std::vector<ImageGroundTruth> gts;
    std::vector<ImagePredictions> preds;
    fixture(preds, gts);
    MetricReport a = evaluate(preds, gts);
    std::swap(preds[0], preds[2]);
    std::reverse(preds[1].triplets.begin(), preds[1].triplets.end());
    MetricReport b = evaluate(preds, gts);
    CHECK(a.mr25 == b.mr25);
    CHECK(a.mr50 == b.mr50);
    CHECK(a.mr100 == b.mr100);
    CHECK(a.ar == b.ar);
}

TEST_CASE("image id mismatch is a hard error naming the offenders") {
    std::vector<ImageGroundTruth> gts;
    std::vector<ImagePredictions> preds;
    fixture(preds, gts);
    preds[1].id = "zzz";
    try {
        evaluate(preds, gts);
        FAIL("expected evaluate to throw");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("b") != std::string::npos);
    }
}

TEST_CASE("recall monotone in K, nonincreasing in threshold") {
    std::vector<ImageGroundTruth> gts;
    std::vector<ImagePredictions> preds;
    fixture(preds, gts);
    for (double t : {0.25, 0.5, 0.75}) {
        auto r1 = recall_at_k(preds, gts, 1, t);
        auto r2 = recall_at_k(preds, gts, 2, t);
        for (const auto& [c, r] : r1) CHECK(r <= r2.at(c) + 1e-12);
    }
    for (int k : {1, 2, 25}) {
        auto lo = recall_at_k(preds, gts, k, 0.25);
        auto hi = recall_at_k(preds, gts, k, 0.75);
        for (const auto& [c, r] : hi) CHECK(r <= lo.at(c) + 1e-12);
    }
}

TEST_CASE("zero-score duplicate predictions change nothing") {
    std::vector<ImageGroundTruth> gts;
    std::vector<ImagePredictions> preds;
    fixture(preds, gts);
    MetricReport a = evaluate(preds, gts);
    auto padded = preds;
    padded[0].triplets.push_back(make_pred(Box(0.9, 0.9, 0.05, 0.05),
                                           Box(0.9, 0.9, 0.1, 0.1), 0, 0.0));
    MetricReport b = evaluate(padded, gts);
    CHECK(a.ar == b.ar);
}

TEST_CASE("classes absent from ground truth are excluded") {
    std::vector<ImageGroundTruth> gts = {{"x", {make_gt(Box(0.5, 0.5, 0.2, 0.2),
                                                        Box(0.5, 0.5, 0.4, 0.4), 3)}}};
    std::vector<ImagePredictions> preds = {{"x", {make_pred(Box(0.5, 0.5, 0.2, 0.2),
                                                            Box(0.5, 0.5, 0.4, 0.4), 7, 0.9)}}};
    auto r = recall_at_k(preds, gts, 25, 0.25);
    CHECK(r.size() == 1);
    CHECK(r.count(3) == 1);
    CHECK(r.count(7) == 0);
}

TEST_CASE("prediction file round trip") {
    std::vector<ImageGroundTruth> gts;
    std::vector<ImagePredictions> preds;
    fixture(preds, gts);
    const std::string path = "/tmp/sid_test_preds.txt";
    save_predictions(path, preds);
    auto loaded = load_predictions(path);
    REQUIRE(loaded.size() == preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        CHECK(loaded[i].id == preds[i].id);
        REQUIRE(loaded[i].triplets.size() == preds[i].triplets.size());
        for (std::size_t j = 0; j < preds[i].triplets.size(); ++j) {
            CHECK(loaded[i].triplets[j].score == preds[i].triplets[j].score);
            CHECK(loaded[i].triplets[j].class_id == preds[i].triplets[j].class_id);
            CHECK(iou(loaded[i].triplets[j].individual_box,
                      preds[i].triplets[j].individual_box) == doctest::Approx(1.0));
        }
    }
    MetricReport a = evaluate(preds, gts), b = evaluate(loaded, gts);
    CHECK(a.ar == doctest::Approx(b.ar).epsilon(1e-12));
    std::remove(path.c_str());
}

TEST_CASE("report formatting and key-value dump") {
    std::vector<ImageGroundTruth> gts;
    std::vector<ImagePredictions> preds;
    fixture(preds, gts);
    MetricReport rep = evaluate(preds, gts);
    std::string s = format_report(rep, true);
    CHECK(s.find("mR@25") != std::string::npos);
    CHECK(s.find("AR") != std::string::npos);
    const std::string path = "/tmp/sid_test_report.txt";
    save_report_kv(path, rep);
    FILE* f = std::fopen(path.c_str(), "r");
    REQUIRE(f);
    char buf[256];
    bool saw_ar = false;
    while (std::fgets(buf, sizeof buf, f)) saw_ar |= std::string(buf).rfind("AR=", 0) == 0;
    std::fclose(f);
    CHECK(saw_ar);
    std::remove(path.c_str());
}
