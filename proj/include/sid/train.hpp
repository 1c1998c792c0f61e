// Training loop: Hungarian matching, the five losses, AdamW with
// gradient clipping, deterministic shuffling and checkpoint resume.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sid/checkpoint.hpp"
#include "sid/data.hpp"
#include "sid/losses.hpp"
#include "sid/matching.hpp"
#include "sid/network.hpp"

namespace sid {

struct TrainConfig {
    int epochs = 90;
    int max_steps = 0;  // optimizer updates; 0 = run all epochs
    int batch_size = 16;
    double lr = 1e-4;
    double backbone_lr = 1e-5;  // parameters under the "stem." prefix
    int lr_drop_epoch = 60;
    double lr_drop_factor = 0.1;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double weight_decay = 1e-4;
    double clip_norm = 0.1;
    std::uint64_t seed = 1;
    LossWeights loss;
    MatchWeights match;
    double window_alpha = 0.2;   // part supervision window scale
    double keypoint_eps = 0.0;   // jitter amplitude relative to the window side
    double focal_gamma = 2.0, focal_alpha = 0.25;
    double asl_gamma_pos = 0.0, asl_gamma_neg = 4.0, asl_margin = 0.05;
    std::string log_path;         // per-step key=value lines appended here
    std::string checkpoint_path;  // written at the end (and periodically)
    int checkpoint_every = 0;     // steps between periodic saves; 0 = end only
};

struct SceneLoss {
    ad::Var total, ind, cls, loc, part, assn;
};

// Forward + matching + the five losses for one scene. `step` and
// `scene_index` key the keypoint-jitter stream so replays are
// bit-identical.
SceneLoss compute_scene_loss(const Model& model, const Scene& scene, int num_classes,
                             const TrainConfig& cfg, std::int64_t step, int scene_index);

struct TrainResult {
    std::int64_t steps_run = 0;
    double final_loss = 0.0;
};

// Trains in place. If resume_path is non-empty the checkpoint there is
// loaded (weights, optimizer moments, step) and training continues from
// that step with identical subsequent behavior.
TrainResult train(Model& model, const Dataset& ds, const TrainConfig& cfg,
                  const std::string& resume_path = "");

// Deterministic epoch ordering: a pure function of (seed, epoch, n).
std::vector<int> epoch_order(std::uint64_t seed, int epoch, int n);

// Derives an rng stream from a seed and up to three indices.
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                            std::uint64_t c = 0);

// Forward + triplet assembly + NMS (+ top-`cap` truncation) per scene.
std::vector<ImagePredictions> run_inference(const Model& model, const Dataset& ds,
                                            double nms_theta = 0.5,
                                            double score_floor = 0.0, int cap = 100);

}  // namespace sid
