#include "sid/partmask.hpp"

#include <cmath>
#include <stdexcept>

namespace sid {

const std::array<const char*, 13> kPartNames = {
    "face",       "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist",   "left_hip",       "right_hip",  "left_knee",
    "right_knee", "left_ankle",    "right_ankle"};

double window_size(const Box& box, double alpha, int image_w, int image_h) {
    if (alpha < 0.0) throw std::invalid_argument("window_size: alpha must be >= 0");
    const double w = box.w * image_w;
    const double h = box.h * image_h;
    return alpha * std::max(w, h);
}

std::vector<PartMask> keypoints_to_masks(const KeypointSet& kps, const Box& box,
                                         double alpha, int grid_h, int grid_w,
                                         int stride, int image_w, int image_h,
                                         int num_parts) {
    if (static_cast<int>(kps.size()) != num_parts)
        throw std::invalid_argument("keypoints_to_masks: keypoint count != P");
    const double s = window_size(box, alpha, image_w, image_h);
    std::vector<PartMask> out(kps.size());
    for (std::size_t p = 0; p < kps.size(); ++p) {
        PartMask& m = out[p];
        m.grid_h = grid_h;
        m.grid_w = grid_w;
        m.cells.assign(static_cast<std::size_t>(grid_h) * grid_w, 0);
        m.valid = kps[p].valid;
        if (!m.valid || s <= 0.0) continue;
        for (int v = 0; v < grid_h; ++v) {
            // pixel-space center of grid cell row v
            const double cy = (v + 0.5) * stride;
            if (std::abs(cy - kps[p].y) > s / 2.0) continue;
            for (int u = 0; u < grid_w; ++u) {
                const double cx = (u + 0.5) * stride;
                if (std::abs(cx - kps[p].x) <= s / 2.0)
                    m.cells[static_cast<std::size_t>(v) * grid_w + u] = 1;
            }
        }
    }
    return out;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) {
    return (splitmix64(state) >> 11) * 0x1.0p-53;
}

KeypointSet perturb_keypoints(const KeypointSet& kps, double eps, double s,
                              std::uint64_t& rng_state) {
    if (eps < 0.0) throw std::invalid_argument("perturb_keypoints: eps must be >= 0");
    if (eps == 0.0) return kps;
    KeypointSet out = kps;
    for (auto& k : out) {
        if (!k.valid) continue;
        k.x += (uniform01(rng_state) * 2.0 - 1.0) * eps * s;
        k.y += (uniform01(rng_state) * 2.0 - 1.0) * eps * s;
    }
    return out;
}

}  // namespace sid
