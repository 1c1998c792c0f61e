// Triplet assembly from raw predictions and greedy triplet NMS.
#pragma once

#include <string>
#include <vector>

#include "sid/geometry.hpp"

namespace sid {

struct Triplet {
    Box individual_box;
    Box group_box;
    int class_id = 0;
    double score = 0.0;  // sigmoid of the class logit
    int individual_index = -1;
    int group_index = -1;
};

// Raw per-image outputs in plain arrays (decoupled from the network so
// the prediction file can be produced by any source).
struct PredictionSet {
    std::vector<Box> individual_boxes;              // N_I
    std::vector<double> objectness;                 // N_I (probabilities)
    std::vector<Box> group_boxes;                   // N_G
    std::vector<std::vector<double>> class_logits;  // N_G x N_C
    std::vector<std::vector<double>> similarity;    // N_G x N_I
};

// For each group query and each class with sigmoid score > score_floor,
// emit a triplet carrying the argmax-similarity individual (ties broken
// by lowest index).
std::vector<Triplet> assemble_triplets(const PredictionSet& p, double score_floor = 0.0);

// Greedy suppression in descending score order (ties: group index, then
// class index). A triplet is removed iff a retained higher-score triplet
// has individual IoU > theta AND group IoU > theta AND the same class.
std::vector<Triplet> triplet_nms(std::vector<Triplet> ts, double theta = 0.5);

}  // namespace sid
