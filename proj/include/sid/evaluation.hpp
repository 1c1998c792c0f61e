// Triplet-level recall metrics: per-class recall@K over IoU thresholds
// {0.25, 0.5, 0.75}, their class-mean mR@K for K in {25, 50, 100}, and
// the average AR.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "sid/inference.hpp"

namespace sid {

struct GtTriplet {
    Box individual_box;
    Box group_box;
    int class_id = 0;
};

struct ImagePredictions {
    std::string id;
    std::vector<Triplet> triplets;
};

struct ImageGroundTruth {
    std::string id;
    std::vector<GtTriplet> triplets;
};

struct MetricReport {
    // values are percentages
    double mr25 = 0, mr50 = 0, mr100 = 0, ar = 0;
    // per class: threshold-averaged recall at each K
    std::map<int, double> per_class_r25, per_class_r50, per_class_r100;
};

bool match_triplet(const Triplet& pred, const GtTriplet& gt, double iou_threshold);

// Per-class recall (fractions in [0,1]) at a single (K, threshold).
// Classes absent from the ground truth are omitted from the map.
std::map<int, double> recall_at_k(const std::vector<ImagePredictions>& preds,
                                  const std::vector<ImageGroundTruth>& gts, int k,
                                  double iou_threshold);

// Full report; throws on image-id mismatch between the two lists.
MetricReport evaluate(const std::vector<ImagePredictions>& preds,
                      const std::vector<ImageGroundTruth>& gts);

// Prediction file: plain text, per image a header line then one triplet
// per line (individual corners, group corners, class id, score).
void save_predictions(const std::string& path, const std::vector<ImagePredictions>& preds);
std::vector<ImagePredictions> load_predictions(const std::string& path);

std::string format_report(const MetricReport& r, bool per_class);
void save_report_kv(const std::string& path, const MetricReport& r);

}  // namespace sid
