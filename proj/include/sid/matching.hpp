// Cost matrices for matching predictions to ground truth before the
// losses. Individuals and groups are matched by two independent
// Hungarian runs.
#pragma once

#include <vector>

#include "sid/geometry.hpp"
#include "sid/hungarian.hpp"

namespace sid {

struct MatchWeights {
    double lambda_obj = 1.0;   // objectness / class agreement term
    double lambda_cls = 2.0;   // multi-label class term (groups)
    double lambda_l1 = 2.5;    // per-coordinate L1
    double lambda_giou = 1.0;  // 1 - giou
};

// entry = lambda_obj*(1 - objectness) + lambda_l1*||b - b_gt||_1
//       + lambda_giou*(1 - giou).
CostMatrix individual_match_cost(const std::vector<Box>& pred_boxes,
                                 const std::vector<double>& pred_objectness,
                                 const std::vector<Box>& gt_boxes,
                                 const MatchWeights& w = {});

// Multi-label class cost: mean over classes of |sigmoid(logit) - y|.
// entry = lambda_cls*class_cost + lambda_l1*||g - g_gt||_1
//       + lambda_giou*(1 - giou).
CostMatrix group_match_cost(const std::vector<Box>& pred_group_boxes,
                            const std::vector<std::vector<double>>& pred_class_logits,
                            const std::vector<Box>& gt_group_boxes,
                            const std::vector<std::vector<double>>& gt_class_vectors,
                            const MatchWeights& w = {});

}  // namespace sid
