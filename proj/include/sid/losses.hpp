// Training losses: focal (objectness), ASL (multi-label interactions),
// L1+GIoU localization, part-attention MSE, association BCE, and their
// weighted combination.
#pragma once

#include <vector>

#include "sid/geometry.hpp"
#include "sid/partmask.hpp"
#include "sid/tensor.hpp"

namespace sid {

struct LossWeights {
    double lambda_ind = 1.0;
    double lambda_cls = 2.0;
    double lambda_loc = 1.0;
    double lambda_l1 = 2.5;
    double lambda_giou = 1.0;
    double lambda_part = 10.0;
    double lambda_assn = 5.0;
};

// Mean binary focal loss over all entries. alpha < 0 disables the
// alpha weighting (the "neutral" setting that reduces to BCE at
// gamma = 0).
ad::Var focal_loss(const ad::Var& logits, const std::vector<double>& targets,
                   double gamma = 2.0, double alpha = 0.25);

// Asymmetric multi-label loss with probability shifting by `margin` on
// negatives; (0, 0, 0) reduces to multi-label BCE.
ad::Var asl_loss(const ad::Var& logits, const std::vector<double>& targets,
                 double gamma_pos = 0.0, double gamma_neg = 4.0, double margin = 0.05);

// Differentiable GIoU between predicted boxes (n x 4, cxcywh) and
// constant ground-truth boxes; returns (n x 1).
ad::Var giou_cols(const ad::Var& pred_boxes, const std::vector<Box>& gt_boxes);

// lambda_l1 * mean_boxes ||b - b_gt||_1 + lambda_giou * mean (1 - giou)
// over matched pairs only.
ad::Var loc_loss(const ad::Var& pred_boxes, const std::vector<Box>& gt_boxes,
                 double lambda_l1, double lambda_giou);

// attn rows are supervised (individual, part) attention maps flattened
// over H*W; masks align row-for-row. Per-map spatial MSE, averaged over
// the supervised maps.
ad::Var part_loss(const ad::Var& attn, const std::vector<PartMask>& masks);

// BCE over matched similarity entries only. matched_group_rows[i] is
// the prediction row matched to ground-truth group i; likewise
// matched_individual_cols[j] for individuals. membership[i][j] in {0,1}.
ad::Var assn_loss(const ad::Var& similarity_logits,
                  const std::vector<std::vector<double>>& membership,
                  const std::vector<int>& matched_group_rows,
                  const std::vector<int>& matched_individual_cols);

ad::Var total_loss(const ad::Var& l_ind, const ad::Var& l_cls, const ad::Var& l_loc,
                   const ad::Var& l_part, const ad::Var& l_assn, const LossWeights& w);

}  // namespace sid
