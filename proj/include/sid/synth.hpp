// Procedural synthetic scenes: stylized persons rendered as body blobs
// with 13 colored part markers at known keypoint locations. Interaction
// labels are deterministic functions of boxes and keypoints, so stored
// labels can be recomputed (and verified) from stored geometry.
#pragma once

#include <cstdint>

#include "sid/data.hpp"

namespace sid {

// Interaction taxonomy (N_C = 8).
enum SynthClass : int {
    kRaiseHand = 0,   // a wrist above face level
    kPointSide = 1,   // a wrist extended sideways at shoulder height
    kArmsWide = 2,    // both wrists far out at hip height
    kCrouch = 3,      // wide-short box aspect
    kBow = 4,         // face below shoulder line
    kFacingPair = 5,  // two nearby persons facing each other
    kNearPair = 6,    // two persons very close together
    kJoinedHands = 7  // wrists of two persons nearly touching
};
constexpr int kSynthNumClasses = 8;

struct SynthSpec {
    int image_size = 128;
    int num_scenes = 64;
    int min_persons = 3;
    int max_persons = 4;
    double pair_scene_prob = 0.15;
    std::uint64_t seed = 7;
};

// Generates scenes with rendered images in memory (Scene::image set).
// Deterministic in the spec (per-scene rng streams split from the seed).
Dataset generate_synthetic(const SynthSpec& spec);

// Writes PPMs + annotations.json + keypoints.json into dir.
void write_dataset(Dataset& ds, const std::string& dir);

// Recomputes group annotations from individuals + keypoints alone;
// used as the label-rule replay oracle.
std::vector<GroupAnnotation> rule_labels(const std::vector<Box>& individuals,
                                         const std::vector<KeypointSet>& keypoints,
                                         int image_w, int image_h);

}  // namespace sid
