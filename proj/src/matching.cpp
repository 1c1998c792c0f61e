#include "sid/matching.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace sid {

static double l1_dist(const Box& a, const Box& b) {
    return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) +
           std::abs(a.h - b.h);
}

CostMatrix individual_match_cost(const std::vector<Box>& pred_boxes,
                                 const std::vector<double>& pred_objectness,
                                 const std::vector<Box>& gt_boxes,
                                 const MatchWeights& w) {
    if (pred_boxes.size() != pred_objectness.size())
        throw std::invalid_argument("individual_match_cost: box/objectness size mismatch");
    CostMatrix c(pred_boxes.size(), std::vector<double>(gt_boxes.size(), 0.0));
    for (std::size_t i = 0; i < pred_boxes.size(); ++i) {
        for (std::size_t j = 0; j < gt_boxes.size(); ++j) {
            c[i][j] = w.lambda_obj * (1.0 - pred_objectness[i]) +
                      w.lambda_l1 * l1_dist(pred_boxes[i], gt_boxes[j]) +
                      w.lambda_giou * (1.0 - giou(pred_boxes[i], gt_boxes[j]));
        }
    }
    return c;
}

CostMatrix group_match_cost(const std::vector<Box>& pred_group_boxes,
                            const std::vector<std::vector<double>>& pred_class_logits,
                            const std::vector<Box>& gt_group_boxes,
                            const std::vector<std::vector<double>>& gt_class_vectors,
                            const MatchWeights& w) {
    if (pred_group_boxes.size() != pred_class_logits.size())
        throw std::invalid_argument("group_match_cost: box/logit size mismatch");
    if (gt_group_boxes.size() != gt_class_vectors.size())
        throw std::invalid_argument("group_match_cost: gt box/class size mismatch");
    CostMatrix c(pred_group_boxes.size(), std::vector<double>(gt_group_boxes.size(), 0.0));
    for (std::size_t i = 0; i < pred_group_boxes.size(); ++i) {
        for (std::size_t j = 0; j < gt_group_boxes.size(); ++j) {
            const auto& logits = pred_class_logits[i];
            const auto& y = gt_class_vectors[j];
            if (logits.size() != y.size())
                throw std::invalid_argument("group_match_cost: class count mismatch");
            double cls = 0.0;
            for (std::size_t k = 0; k < y.size(); ++k) {
                const double p = 1.0 / (1.0 + std::exp(-logits[k]));
                cls += std::abs(p - y[k]);
            }
            if (!y.empty()) cls /= static_cast<double>(y.size());
            c[i][j] = w.lambda_cls * cls +
                      w.lambda_l1 * l1_dist(pred_group_boxes[i], gt_group_boxes[j]) +
                      w.lambda_giou * (1.0 - giou(pred_group_boxes[i], gt_group_boxes[j]));
        }
    }
    return c;
}

}  // namespace sid
