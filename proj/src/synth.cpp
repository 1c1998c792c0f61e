#include "sid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace sid {

namespace {

// part marker colors (face, L/R shoulder, elbow, wrist, hip, knee, ankle)
const double kPartColors[13][3] = {
    {1.00, 0.85, 0.20},  // face
    {0.90, 0.20, 0.20}, {0.20, 0.55, 0.95},  // shoulders
    {0.95, 0.45, 0.10}, {0.10, 0.75, 0.75},  // elbows
    {0.95, 0.10, 0.60}, {0.30, 0.90, 0.20},  // wrists
    {0.60, 0.30, 0.85}, {0.85, 0.70, 0.50},  // hips
    {0.40, 0.40, 0.10}, {0.10, 0.30, 0.55},  // knees
    {0.70, 0.10, 0.10}, {0.10, 0.60, 0.30},  // ankles
};

enum ArmPose { kArmsDown, kArmRaised, kArmPoint, kArmsAkimbo };

struct PersonParams {
    double x1, y1, w, h;  // pixels
    int facing;           // -1 left, +1 right
    ArmPose arms;
    bool bow = false;
    // crouch is implied by the box aspect
};

double px(const PersonParams& p, double rx) { return p.x1 + rx * p.w; }
double py(const PersonParams& p, double ry) { return p.y1 + ry * p.h; }

KeypointSet person_keypoints(const PersonParams& p) {
    KeypointSet k(13);
    auto set = [&](int i, double rx, double ry) {
        k[i] = {px(p, rx), py(p, ry), true};
    };
    const double f = p.facing;
    set(0, p.bow ? 0.5 + 0.26 * f : 0.5 + 0.22 * f, p.bow ? 0.34 : 0.10);  // face
    set(1, 0.22, 0.24);  // shoulders
    set(2, 0.78, 0.24);
    switch (p.arms) {
        case kArmsDown:
            set(3, 0.16, 0.38), set(4, 0.84, 0.38);
            set(5, 0.16, 0.52), set(6, 0.84, 0.52);
            break;
        case kArmRaised:
            // facing-side arm up, other down
            if (f > 0) {
                set(3, 0.16, 0.38), set(5, 0.16, 0.52);
                set(4, 0.88, 0.16), set(6, 0.5 + 0.20 * f, 0.02);
            } else {
                set(4, 0.84, 0.38), set(6, 0.84, 0.52);
                set(3, 0.12, 0.16), set(5, 0.5 + 0.20 * f, 0.02);
            }
            break;
        case kArmPoint:
            if (f > 0) {
                set(3, 0.16, 0.38), set(5, 0.16, 0.52);
                set(4, 0.5 + 0.30 * f, 0.25), set(6, 0.5 + 0.48 * f, 0.26);
            } else {
                set(4, 0.84, 0.38), set(6, 0.84, 0.52);
                set(3, 0.5 + 0.30 * f, 0.25), set(5, 0.5 + 0.48 * f, 0.26);
            }
            break;
        case kArmsAkimbo:
            set(3, 0.02, 0.38), set(4, 0.98, 0.38);
            set(5, 0.04, 0.50), set(6, 0.96, 0.50);
            break;
    }
    set(7, 0.30, 0.56), set(8, 0.70, 0.56);   // hips
    set(9, 0.30, 0.76), set(10, 0.70, 0.76);  // knees
    set(11, 0.30, 0.94), set(12, 0.70, 0.94); // ankles
    return k;
}

struct PxBox {
    double x1, y1, x2, y2;
    double cx() const { return (x1 + x2) / 2; }
    double cy() const { return (y1 + y2) / 2; }
    double w() const { return x2 - x1; }
    double h() const { return y2 - y1; }
};

PxBox to_px(const Box& b, int iw, int ih) {
    const CornerBox c = to_corners(b);
    return {c.x1 * iw, c.y1 * ih, c.x2 * iw, c.y2 * ih};
}

// single-person rules
std::vector<int> person_classes(const PxBox& b, const KeypointSet& k) {
    std::vector<int> out;
    const double face_y = k[0].y;
    const double shoulder_y = (k[1].y + k[2].y) / 2.0;
    const double cx = b.cx();
    bool raise = false, point = false;
    for (int wi : {5, 6}) {
        if (k[wi].y < face_y - 0.04 * b.h()) raise = true;
        if (std::abs(k[wi].x - cx) > 0.44 * b.w() &&
            std::abs(k[wi].y - shoulder_y) < 0.06 * b.h())
            point = true;
    }
    if (raise) out.push_back(kRaiseHand);
    if (point) out.push_back(kPointSide);
    if (std::abs(k[5].x - cx) > 0.40 * b.w() && std::abs(k[6].x - cx) > 0.40 * b.w() &&
        k[5].y - b.y1 > 0.40 * b.h() && k[5].y - b.y1 < 0.65 * b.h() &&
        k[6].y - b.y1 > 0.40 * b.h() && k[6].y - b.y1 < 0.65 * b.h())
        out.push_back(kArmsWide);
    if (b.w() / b.h() > 0.62) out.push_back(kCrouch);
    if (face_y - shoulder_y > 0.06 * b.h()) out.push_back(kBow);
    return out;
}

// pair rules for persons a, b
std::vector<int> pair_classes(const PxBox& ba, const KeypointSet& ka, const PxBox& bb,
                              const KeypointSet& kb) {
    std::vector<int> out;
    const double dist = std::hypot(ba.cx() - bb.cx(), ba.cy() - bb.cy());
    const double face_dir_a = ka[0].x - (ka[1].x + ka[2].x) / 2.0;
    const double face_dir_b = kb[0].x - (kb[1].x + kb[2].x) / 2.0;
    const double toward_a = bb.cx() - ba.cx();
    const bool mutual = face_dir_a * toward_a > 0 && face_dir_b * (-toward_a) > 0;
    if (mutual && dist < 48.0) out.push_back(kFacingPair);
    if (dist < 30.0) out.push_back(kNearPair);
    double wrist_min = 1e30;
    for (int wi : {5, 6})
        for (int wj : {5, 6})
            wrist_min = std::min(wrist_min, std::hypot(ka[wi].x - kb[wj].x, ka[wi].y - kb[wj].y));
    if (wrist_min < 7.0) out.push_back(kJoinedHands);
    return out;
}

Box hull(const Box& a, const Box& b) {
    const CornerBox ca = to_corners(a), cb = to_corners(b);
    return from_corners({std::min(ca.x1, cb.x1), std::min(ca.y1, cb.y1),
                         std::max(ca.x2, cb.x2), std::max(ca.y2, cb.y2)});
}

void fill_rect(Image& img, double x1, double y1, double x2, double y2, const double rgb[3]) {
    const int ix1 = std::max(0, static_cast<int>(std::floor(x1)));
    const int iy1 = std::max(0, static_cast<int>(std::floor(y1)));
    const int ix2 = std::min(img.width - 1, static_cast<int>(std::ceil(x2)) - 1);
    const int iy2 = std::min(img.height - 1, static_cast<int>(std::ceil(y2)) - 1);
    for (int y = iy1; y <= iy2; ++y)
        for (int x = ix1; x <= ix2; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = rgb[c];
}

void draw_marker(Image& img, double x, double y, int half, const double rgb[3]) {
    fill_rect(img, x - half, y - half, x + half + 1, y + half + 1, rgb);
}

}  // namespace

std::vector<GroupAnnotation> rule_labels(const std::vector<Box>& individuals,
                                         const std::vector<KeypointSet>& keypoints,
                                         int image_w, int image_h) {
    if (individuals.size() != keypoints.size())
        throw std::invalid_argument("rule_labels: keypoints required for every individual");
    std::vector<GroupAnnotation> out;
    std::vector<PxBox> pb;
    for (const auto& b : individuals) pb.push_back(to_px(b, image_w, image_h));
    for (std::size_t i = 0; i < individuals.size(); ++i) {
        auto cls = person_classes(pb[i], keypoints[i]);
        if (!cls.empty())
            out.push_back({individuals[i], {static_cast<int>(i)}, cls});
    }
    for (std::size_t i = 0; i < individuals.size(); ++i) {
        for (std::size_t j = i + 1; j < individuals.size(); ++j) {
            auto cls = pair_classes(pb[i], keypoints[i], pb[j], keypoints[j]);
            if (!cls.empty())
                out.push_back({hull(individuals[i], individuals[j]),
                               {static_cast<int>(i), static_cast<int>(j)},
                               cls});
        }
    }
    return out;
}

Dataset generate_synthetic(const SynthSpec& spec) {
    if (spec.image_size < 96)
        throw std::invalid_argument("generate_synthetic: image_size too small for the layout");
    Dataset ds;
    ds.num_classes = kSynthNumClasses;

    for (int si = 0; si < spec.num_scenes; ++si) {
        std::uint64_t rng = spec.seed ^ (0x5851f42d4c957f2dULL * (si + 1));
        splitmix64(rng);
        const double S = spec.image_size;

        Scene scene;
        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "scene_%04d", si);
        scene.id = idbuf;
        scene.image_file = scene.id + std::string(".ppm");
        scene.width = scene.height = spec.image_size;

        const bool pair_scene = uniform01(rng) < spec.pair_scene_prob;
        const int n =
            spec.min_persons +
            static_cast<int>(uniform01(rng) * (spec.max_persons - spec.min_persons + 1));

        std::vector<PersonParams> persons;
        auto sample_size = [&](bool crouch, double& w, double& h) {
            if (crouch) {
                w = 16 + uniform01(rng) * 4;
                h = 20 + uniform01(rng) * 4;
            } else {
                w = 14 + uniform01(rng) * 6;
                h = 34 + uniform01(rng) * 10;
            }
        };
        auto far_from_all = [&](double cx, double cy, double min_dist) {
            for (const auto& q : persons) {
                const double qcx = q.x1 + q.w / 2, qcy = q.y1 + q.h / 2;
                if (std::hypot(cx - qcx, cy - qcy) < min_dist) return false;
            }
            return true;
        };

        if (pair_scene) {
            const double r = uniform01(rng);
            const int pair_type = r < 0.55 ? 0 : (r < 0.85 ? 1 : 2);  // facing/close/hands
            PersonParams a{}, b{};
            sample_size(false, a.w, a.h);
            sample_size(false, b.w, b.h);
            double dx;
            if (pair_type == 0) {
                dx = 34 + uniform01(rng) * 10;
                a.facing = 1, b.facing = -1;
                a.arms = b.arms = kArmsDown;
            } else if (pair_type == 1) {
                dx = 22 + uniform01(rng) * 5;
                a.facing = b.facing = 1;  // same direction: near, not mutual
                a.arms = b.arms = kArmsDown;
            } else {
                b.h = a.h;  // align wrists
                dx = a.w / 2 + b.w / 2 + 1 + uniform01(rng) * 2;
                a.facing = 1, b.facing = -1;
                a.arms = b.arms = kArmPoint;
            }
            const double cy = 30 + uniform01(rng) * (S - 80);
            const double cxa = 10 + a.w / 2 + uniform01(rng) * (S - dx - a.w - b.w - 20);
            a.x1 = cxa - a.w / 2;
            a.y1 = cy;
            b.x1 = cxa + dx - b.w / 2;
            b.y1 = pair_type == 2 ? cy : cy + (uniform01(rng) * 8 - 4);
            persons.push_back(a);
            persons.push_back(b);
        }

        while (static_cast<int>(persons.size()) < n) {
            PersonParams p{};
            const double pose_r = uniform01(rng);
            bool crouch = false;
            if (pose_r < 0.20) p.arms = kArmsDown;
            else if (pose_r < 0.42) p.arms = kArmRaised;
            else if (pose_r < 0.62) p.arms = kArmPoint;
            else if (pose_r < 0.77) p.arms = kArmsAkimbo;
            else if (pose_r < 0.88) { p.arms = kArmsDown; p.bow = true; }
            else { crouch = true; p.arms = uniform01(rng) < 0.5 ? kArmsDown : kArmRaised; }
            p.facing = uniform01(rng) < 0.5 ? -1 : 1;
            sample_size(crouch, p.w, p.h);
            // Neighbors closer than 48px must not face each other, or the
            // facing-pair rule would turn them into a group.
            auto mutual_close = [&](double cx, double cy, int facing) {
                for (const auto& q : persons) {
                    const double qcx = q.x1 + q.w / 2, qcy = q.y1 + q.h / 2;
                    if (std::hypot(cx - qcx, cy - qcy) >= 48.0) continue;
                    if (facing * (qcx - cx) > 0 && q.facing * (cx - qcx) > 0) return true;
                }
                return false;
            };
            bool placed = false;
            for (int attempt = 0; attempt < 200; ++attempt) {
                const double cx = p.w / 2 + 4 + uniform01(rng) * (S - p.w - 8);
                const double cyv = p.h / 2 + 4 + uniform01(rng) * (S - p.h - 8);
                if (!far_from_all(cx, cyv, 34.0)) continue;
                if (mutual_close(cx, cyv, p.facing)) {
                    p.facing = -p.facing;
                    if (mutual_close(cx, cyv, p.facing)) continue;
                }
                p.x1 = cx - p.w / 2;
                p.y1 = cyv - p.h / 2;
                placed = true;
                break;
            }
            if (!placed) break;  // scene is full; proceed with fewer persons
            persons.push_back(p);
        }

        // geometry -> annotation
        for (const auto& p : persons) {
            scene.individuals.push_back(from_corners(
                {p.x1 / S, p.y1 / S, (p.x1 + p.w) / S, (p.y1 + p.h) / S}));
            scene.keypoints.push_back(person_keypoints(p));
        }
        scene.groups = rule_labels(scene.individuals, scene.keypoints, spec.image_size,
                                   spec.image_size);

        // sporadic invalid keypoints on parts no rule consumes
        for (auto& kps : scene.keypoints)
            for (int pi : {9, 10, 11, 12})
                if (uniform01(rng) < 0.03) kps[pi].valid = false;

        // render
        Image img;
        img.width = img.height = spec.image_size;
        img.rgb.assign(static_cast<std::size_t>(spec.image_size) * spec.image_size * 3, 0.85);
        for (std::size_t pi = 0; pi < persons.size(); ++pi) {
            const auto& p = persons[pi];
            // Per-person body tint: dark enough that the bright part
            // markers stay distinguishable, varied enough that queries can
            // bind to appearance rather than position alone.
            const double body[3] = {0.15 + 0.40 * uniform01(rng),
                                    0.15 + 0.40 * uniform01(rng),
                                    0.15 + 0.40 * uniform01(rng)};
            fill_rect(img, p.x1, p.y1, p.x1 + p.w, p.y1 + p.h, body);
            const auto& kps = scene.keypoints[pi];
            // Face, shoulders and wrists carry the pose rules, so their
            // markers are drawn larger to survive the stride-8 downsampling.
            for (int k = 12; k >= 0; --k)
                draw_marker(img, kps[k].x, kps[k].y, k <= 2 || k == 5 || k == 6 ? 2 : 1,
                            kPartColors[k]);
        }
        scene.image = std::move(img);
        ds.scenes.push_back(std::move(scene));
    }
    return ds;
}

void write_dataset(Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    ds.dir = dir;
    for (const auto& s : ds.scenes) {
        if (!s.image) throw std::runtime_error("write_dataset: scene without image");
        save_ppm(dir + "/" + s.image_file, *s.image);
    }
    save_split(ds);
}

}  // namespace sid
