#include "sid/losses.hpp"

#include <stdexcept>

namespace sid {

using namespace ad;

// x^g for x in (0,1], g >= 0, differentiable in x.
static Var pow_pos(const Var& x, double g) {
    if (g == 0.0) return constant(x.rows(), x.cols(), 1.0);
    if (g == 1.0) return x;
    return ad::exp(mul_scalar(ad::log(x), g));
}

Var focal_loss(const Var& logits, const std::vector<double>& targets, double gamma,
               double alpha) {
    if (targets.size() != logits.size())
        throw std::invalid_argument("focal_loss: target size mismatch");
    const std::size_t n = logits.size();
    std::vector<double> t = targets;
    Var tv = constant(logits.rows(), logits.cols(), t);
    Var one = constant(logits.rows(), logits.cols(), 1.0);
    Var log_p = log_sigmoid(logits);             // log p
    Var log_q = log_sigmoid(neg(logits));        // log (1-p)
    Var p = sigmoid(logits);
    Var q = sub(one, p);
    Var pos = mul(tv, mul(pow_pos(maximum_scalar(q, 1e-300), gamma), log_p));
    Var negterm = mul(sub(one, tv), mul(pow_pos(maximum_scalar(p, 1e-300), gamma), log_q));
    if (alpha >= 0.0) {
        pos = mul_scalar(pos, alpha);
        negterm = mul_scalar(negterm, 1.0 - alpha);
    }
    (void)n;
    return neg(mean(add(pos, negterm)));
}

Var asl_loss(const Var& logits, const std::vector<double>& targets, double gamma_pos,
             double gamma_neg, double margin) {
    if (targets.size() != logits.size())
        throw std::invalid_argument("asl_loss: target size mismatch");
    Var tv = constant(logits.rows(), logits.cols(), targets);
    Var one = constant(logits.rows(), logits.cols(), 1.0);
    Var p = sigmoid(logits);
    Var log_p = log_sigmoid(logits);
    Var pos = mul(tv, mul(pow_pos(maximum_scalar(sub(one, p), 1e-300), gamma_pos), log_p));
    // negatives: shift probability down by the margin, clamp at 0
    Var pm = maximum_scalar(add_scalar(p, -margin), 0.0);
    Var log_qm = ad::log(sub(one, pm));
    Var negterm = mul(sub(one, tv), mul(pow_pos(maximum_scalar(pm, 1e-300), gamma_neg), log_qm));
    return neg(mean(add(pos, negterm)));
}

Var giou_cols(const Var& pred_boxes, const std::vector<Box>& gt_boxes) {
    const std::size_t n = pred_boxes.rows();
    if (pred_boxes.cols() != 4 || gt_boxes.size() != n)
        throw std::invalid_argument("giou_cols: shape mismatch");
    Var cx = slice_cols(pred_boxes, 0, 1);
    Var cy = slice_cols(pred_boxes, 1, 1);
    Var w = slice_cols(pred_boxes, 2, 1);
    Var h = slice_cols(pred_boxes, 3, 1);
    Var half_w = mul_scalar(w, 0.5);
    Var half_h = mul_scalar(h, 0.5);
    Var ax1 = sub(cx, half_w), ax2 = add(cx, half_w);
    Var ay1 = sub(cy, half_h), ay2 = add(cy, half_h);

    std::vector<double> bx1(n), bx2(n), by1(n), by2(n), barea(n);
    for (std::size_t i = 0; i < n; ++i) {
        const CornerBox c = to_corners(gt_boxes[i]);
        bx1[i] = c.x1;
        bx2[i] = c.x2;
        by1[i] = c.y1;
        by2[i] = c.y2;
        barea[i] = (c.x2 - c.x1) * (c.y2 - c.y1);
    }
    Var gx1 = constant(n, 1, bx1), gx2 = constant(n, 1, bx2);
    Var gy1 = constant(n, 1, by1), gy2 = constant(n, 1, by2);
    Var garea = constant(n, 1, barea);

    Var iw = relu(sub(minimum(ax2, gx2), maximum(ax1, gx1)));
    Var ih = relu(sub(minimum(ay2, gy2), maximum(ay1, gy1)));
    Var inter = mul(iw, ih);
    Var parea = mul(w, h);
    Var uni = sub(add(parea, garea), inter);
    Var cw = sub(maximum(ax2, gx2), minimum(ax1, gx1));
    Var ch = sub(maximum(ay2, gy2), minimum(ay1, gy1));
    Var enclose = mul(cw, ch);
    return sub(div(inter, uni), div(sub(enclose, uni), enclose));
}

Var loc_loss(const Var& pred_boxes, const std::vector<Box>& gt_boxes, double lambda_l1,
             double lambda_giou) {
    const std::size_t n = pred_boxes.rows();
    if (n == 0) return scalar(0.0);
    std::vector<double> gt(n * 4);
    for (std::size_t i = 0; i < n; ++i) {
        gt[i * 4 + 0] = gt_boxes[i].cx;
        gt[i * 4 + 1] = gt_boxes[i].cy;
        gt[i * 4 + 2] = gt_boxes[i].w;
        gt[i * 4 + 3] = gt_boxes[i].h;
    }
    Var gtv = constant(n, 4, gt);
    // sum of |.| over the 4 coords, mean over boxes
    Var l1 = mul_scalar(sum(ad::abs(sub(pred_boxes, gtv))), 1.0 / static_cast<double>(n));
    Var g = mean(sub(constant(n, 1, 1.0), giou_cols(pred_boxes, gt_boxes)));
    return add(mul_scalar(l1, lambda_l1), mul_scalar(g, lambda_giou));
}

Var part_loss(const Var& attn, const std::vector<PartMask>& masks) {
    if (attn.rows() == 0) return scalar(0.0);
    if (masks.size() != attn.rows())
        throw std::invalid_argument("part_loss: mask/attention row mismatch");
    std::vector<double> m(attn.size());
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (masks[i].cells.size() != attn.cols())
            throw std::invalid_argument("part_loss: mask/attention grid mismatch");
        for (std::size_t j = 0; j < attn.cols(); ++j)
            m[i * attn.cols() + j] = static_cast<double>(masks[i].cells[j]);
    }
    Var diff = sub(attn, constant(attn.rows(), attn.cols(), m));
    return mean(mul(diff, diff));
}

Var assn_loss(const Var& similarity_logits,
              const std::vector<std::vector<double>>& membership,
              const std::vector<int>& matched_group_rows,
              const std::vector<int>& matched_individual_cols) {
    const std::size_t gi = matched_group_rows.size();
    const std::size_t gj = matched_individual_cols.size();
    if (gi == 0 || gj == 0) return scalar(0.0);
    if (membership.size() != gi)
        throw std::invalid_argument("assn_loss: membership rows != matched groups");
    // S[sigma(i), tau(j)] for all matched (i, j)
    Var rows = gather_rows(similarity_logits, matched_group_rows);
    Var sub_matrix = transpose(gather_rows(transpose(rows), matched_individual_cols));
    std::vector<double> targets(gi * gj);
    for (std::size_t i = 0; i < gi; ++i) {
        if (membership[i].size() != gj)
            throw std::invalid_argument("assn_loss: membership cols != matched individuals");
        for (std::size_t j = 0; j < gj; ++j) targets[i * gj + j] = membership[i][j];
    }
    return mean(bce_with_logits(sub_matrix, targets));
}

Var total_loss(const Var& l_ind, const Var& l_cls, const Var& l_loc, const Var& l_part,
               const Var& l_assn, const LossWeights& w) {
    Var t = mul_scalar(l_ind, w.lambda_ind);
    t = add(t, mul_scalar(l_cls, w.lambda_cls));
    t = add(t, mul_scalar(l_loc, w.lambda_loc));
    t = add(t, mul_scalar(l_part, w.lambda_part));
    t = add(t, mul_scalar(l_assn, w.lambda_assn));
    return t;
}

}  // namespace sid
