// Pose-guided pseudo-supervision: keypoints become binary square
// attention targets on the feature grid. Keypoints arrive from a
// sidecar file (privileged, training only).
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sid/geometry.hpp"

namespace sid {

// Fixed part index table, 13 entries.
extern const std::array<const char*, 13> kPartNames;
constexpr int kNumParts = 13;

struct Keypoint {
    double x = 0, y = 0;  // image pixels
    bool valid = false;
};

using KeypointSet = std::vector<Keypoint>;  // exactly P entries per individual

// Side of the square supervision window in pixels: alpha * max(w, h)
// with the box in pixel units.
double window_size(const Box& box, double alpha, int image_w, int image_h);

struct PartMask {
    int grid_h = 0, grid_w = 0;
    std::vector<std::uint8_t> cells;  // grid_h * grid_w, values 0/1
    bool valid = false;               // false when the keypoint was invalid

    int count() const {
        int s = 0;
        for (auto c : cells) s += c;
        return s;
    }
};

// One mask per part; cell (u,v) is 1 iff the pixel-space center of the
// cell lies within the square window around the keypoint. Invalid
// keypoints yield all-zero masks flagged invalid. Throws if
// kps.size() != P implied by grid config.
std::vector<PartMask> keypoints_to_masks(const KeypointSet& kps, const Box& box,
                                         double alpha, int grid_h, int grid_w,
                                         int stride, int image_w, int image_h,
                                         int num_parts = kNumParts);

// Independent uniform displacement in [-eps*s, eps*s] per coordinate.
// rng_state drives a deterministic generator owned by the caller.
KeypointSet perturb_keypoints(const KeypointSet& kps, double eps, double s,
                              std::uint64_t& rng_state);

// splitmix64 step, exposed for deterministic per-(seed,step,scene) streams.
std::uint64_t splitmix64(std::uint64_t& state);
double uniform01(std::uint64_t& state);

}  // namespace sid
