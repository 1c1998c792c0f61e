// Annotation schema, loaders and ground-truth derivation.
//
// On disk a split is a directory with annotations.json, an optional
// keypoints.json sidecar and one PPM per scene. All disk coordinates
// are pixel-space floats (corner format); boxes are normalized at load
// time.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sid/evaluation.hpp"
#include "sid/geometry.hpp"
#include "sid/image.hpp"
#include "sid/partmask.hpp"

namespace sid {

struct GroupAnnotation {
    Box box;                   // normalized
    std::vector<int> members;  // indices into Scene::individuals
    std::vector<int> classes;  // interaction class ids, sorted, unique
};

struct Scene {
    std::string id;
    std::string image_file;  // relative to the split directory
    int width = 0, height = 0;
    std::vector<Box> individuals;             // normalized
    std::vector<GroupAnnotation> groups;
    std::vector<KeypointSet> keypoints;       // pixel-space; empty if no sidecar
    std::optional<Image> image;               // populated by load_images
};

struct Dataset {
    int schema_version = 1;
    int num_classes = 0;
    std::string dir;
    std::vector<Scene> scenes;
};

// Reads <dir>/annotations.json (and keypoints.json if present),
// validating every record; throws with the offending scene named.
Dataset load_split(const std::string& dir);
void save_split(const Dataset& ds);  // writes annotations.json (+ sidecar) into ds.dir

// Loads the PPM for every scene into memory.
void load_images(Dataset& ds);

struct GroupTargets {
    std::vector<Box> boxes;
    std::vector<std::vector<double>> membership;     // groups x individuals, {0,1}
    std::vector<std::vector<double>> class_vectors;  // groups x num_classes, {0,1}
};

GroupTargets derive_group_targets(const Scene& scene, int num_classes);

// One ground-truth triplet per (group, member, class).
std::vector<GtTriplet> derive_gt_triplets(const Scene& scene);
std::vector<ImageGroundTruth> to_ground_truth(const Dataset& ds);

}  // namespace sid
