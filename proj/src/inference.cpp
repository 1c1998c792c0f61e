#include "sid/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sid {

std::vector<Triplet> assemble_triplets(const PredictionSet& p, double score_floor) {
    std::vector<Triplet> out;
    for (std::size_t g = 0; g < p.group_boxes.size(); ++g) {
        const auto& sims = p.similarity.at(g);
        if (sims.empty()) throw std::invalid_argument("assemble_triplets: empty similarity row");
        std::size_t jstar = 0;
        for (std::size_t j = 1; j < sims.size(); ++j)
            if (sims[j] > sims[jstar]) jstar = j;
        for (std::size_t k = 0; k < p.class_logits[g].size(); ++k) {
            const double score = 1.0 / (1.0 + std::exp(-p.class_logits[g][k]));
            if (score <= score_floor) continue;
            Triplet t;
            t.individual_box = p.individual_boxes.at(jstar);
            t.group_box = p.group_boxes[g];
            t.class_id = static_cast<int>(k);
            t.score = score;
            t.individual_index = static_cast<int>(jstar);
            t.group_index = static_cast<int>(g);
            out.push_back(t);
        }
    }
    return out;
}

static bool score_order(const Triplet& a, const Triplet& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.group_index != b.group_index) return a.group_index < b.group_index;
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    return a.individual_index < b.individual_index;
}

std::vector<Triplet> triplet_nms(std::vector<Triplet> ts, double theta) {
    if (theta <= 0.0 || theta > 1.0)
        throw std::invalid_argument("triplet_nms: theta must be in (0,1]");
    std::sort(ts.begin(), ts.end(), score_order);
    std::vector<Triplet> kept;
    for (const auto& t : ts) {
        bool suppressed = false;
        for (const auto& k : kept) {
            if (k.class_id == t.class_id &&
                iou(k.individual_box, t.individual_box) > theta &&
                iou(k.group_box, t.group_box) > theta) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(t);
    }
    return kept;
}

}  // namespace sid
