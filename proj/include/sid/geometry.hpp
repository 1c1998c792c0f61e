// Box representations and overlap measures shared by losses, matching,
// NMS and evaluation.
#pragma once

#include <stdexcept>

namespace sid {

// Axis-aligned box in normalized center format, coordinates in [0,1].
struct Box {
    double cx = 0.5, cy = 0.5, w = 1.0, h = 1.0;

    Box() = default;
    Box(double cx_, double cy_, double w_, double h_) : cx(cx_), cy(cy_), w(w_), h(h_) {
        if (w <= 0.0 || h <= 0.0)
            throw std::invalid_argument("Box: width/height must be positive");
        if (cx < 0.0 || cx > 1.0 || cy < 0.0 || cy > 1.0 || w > 1.0 || h > 1.0)
            throw std::invalid_argument("Box: center/size out of [0,1]");
    }
};

struct CornerBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

CornerBox to_corners(const Box& b);
Box from_corners(const CornerBox& c);

// Intersection over union, in [0,1].
double iou(const Box& a, const Box& b);

// Generalized IoU: iou - (C - U)/C with C the smallest enclosing box area.
double giou(const Box& a, const Box& b);

// Corner-space variants (used where corners are already at hand).
double iou(const CornerBox& a, const CornerBox& b);
double giou(const CornerBox& a, const CornerBox& b);

}  // namespace sid
