#include "sid/geometry.hpp"

#include <algorithm>

namespace sid {

CornerBox to_corners(const Box& b) {
    return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0};
}

Box from_corners(const CornerBox& c) {
    Box b;
    b.cx = (c.x1 + c.x2) / 2.0;
    b.cy = (c.y1 + c.y2) / 2.0;
    b.w = c.x2 - c.x1;
    b.h = c.y2 - c.y1;
    if (b.w <= 0.0 || b.h <= 0.0)
        throw std::invalid_argument("from_corners: degenerate box");
    return b;
}

static double area(const CornerBox& c) {
    return (c.x2 - c.x1) * (c.y2 - c.y1);
}

double iou(const CornerBox& a, const CornerBox& b) {
    const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = ix * iy;
    const double uni = area(a) + area(b) - inter;
    return inter / uni;
}

double giou(const CornerBox& a, const CornerBox& b) {
    const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = ix * iy;
    const double uni = area(a) + area(b) - inter;
    const double cw = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
    const double ch = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
    const double enclose = cw * ch;
    return inter / uni - (enclose - uni) / enclose;
}

double iou(const Box& a, const Box& b) {
    return iou(to_corners(a), to_corners(b));
}

double giou(const Box& a, const Box& b) {
    return giou(to_corners(a), to_corners(b));
}

}  // namespace sid
