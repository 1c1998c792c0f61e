#include "sid/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "sid/inference.hpp"

namespace sid {
namespace {

// Box list for the matching path only; clamps away sigmoid underflow so
// a diverged forward pass surfaces as a non-finite loss rather than a
// box-constructor failure. The loss path uses the raw tensors.
std::vector<Box> boxes_from_rows(const ad::Var& v) {
    std::vector<Box> out;
    out.reserve(v.rows());
    for (std::size_t i = 0; i < v.rows(); ++i) {
        const double* b = &v.val()[i * 4];
        out.emplace_back(std::clamp(b[0], 0.0, 1.0), std::clamp(b[1], 0.0, 1.0),
                         std::clamp(b[2], 1e-9, 1.0), std::clamp(b[3], 1e-9, 1.0));
    }
    return out;
}

void check_finite(const ad::Var& v, const char* name) {
    if (!std::isfinite(v.item()))
        throw std::runtime_error(std::string("non-finite loss component: ") + name);
}

void check_outputs_finite(const ForwardResult& fr) {
    auto scan = [](const ad::Var& v, const char* name) {
        for (double x : v.val())
            if (!std::isfinite(x))
                throw std::runtime_error(std::string("non-finite network output: ") + name);
    };
    scan(fr.ind_boxes, "individual boxes");
    scan(fr.objectness, "objectness");
    scan(fr.group_boxes, "group boxes");
    scan(fr.class_logits, "class logits");
    scan(fr.similarity, "similarity");
}

}  // namespace

std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                            std::uint64_t c) {
    std::uint64_t s = seed;
    for (std::uint64_t v : {a, b, c}) {
        s ^= v + 0x9e3779b97f4a7c15ULL;
        (void)splitmix64(s);
    }
    return s;
}

std::vector<int> epoch_order(std::uint64_t seed, int epoch, int n) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::uint64_t s = derive_stream(seed, 0x534855ULL, static_cast<std::uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(splitmix64(s) % static_cast<std::uint64_t>(i + 1));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

SceneLoss compute_scene_loss(const Model& model, const Scene& scene, int num_classes,
                             const TrainConfig& cfg, std::int64_t step, int scene_index) {
    if (!scene.image) throw std::runtime_error("scene " + scene.id + " has no image loaded");
    const ModelConfig& mc = model.config();
    ForwardResult fr = model.forward(*scene.image);
    check_outputs_finite(fr);

    // Individuals: Hungarian on (objectness, box) cost, then focal
    // objectness with matched queries as positives.
    std::vector<Box> pred_ind = boxes_from_rows(fr.ind_boxes);
    std::vector<double> pred_obj(pred_ind.size());
    for (std::size_t i = 0; i < pred_obj.size(); ++i)
        pred_obj[i] = 1.0 / (1.0 + std::exp(-fr.objectness.val()[i]));
    Assignment ind_asg =
        hungarian(individual_match_cost(pred_ind, pred_obj, scene.individuals, cfg.match));

    SceneLoss out;
    std::vector<double> obj_targets(pred_ind.size(), 0.0);
    std::vector<int> matched_ind_rows(scene.individuals.size(), -1);
    for (const auto& [row, col] : ind_asg.pairs) {
        obj_targets[row] = 1.0;
        matched_ind_rows[col] = row;
    }
    out.ind = focal_loss(fr.objectness, obj_targets, cfg.focal_gamma, cfg.focal_alpha);

    // Groups: Hungarian on (class, box) cost; unmatched queries get
    // all-zero class targets.
    GroupTargets gt = derive_group_targets(scene, num_classes);
    const std::size_t ng = fr.group_boxes.rows();
    std::vector<int> matched_grp_rows(gt.boxes.size(), -1);
    std::vector<double> cls_targets(ng * num_classes, 0.0);
    if (!gt.boxes.empty()) {
        std::vector<Box> pred_grp = boxes_from_rows(fr.group_boxes);
        std::vector<std::vector<double>> logits;
        for (std::size_t g = 0; g < ng; ++g)
            logits.emplace_back(fr.class_logits.val().begin() + g * num_classes,
                                fr.class_logits.val().begin() + (g + 1) * num_classes);
        Assignment grp_asg = hungarian(
            group_match_cost(pred_grp, logits, gt.boxes, gt.class_vectors, cfg.match));
        for (const auto& [row, col] : grp_asg.pairs) {
            matched_grp_rows[col] = row;
            for (int c = 0; c < num_classes; ++c)
                cls_targets[static_cast<std::size_t>(row) * num_classes + c] =
                    gt.class_vectors[col][c];
        }
    }
    out.cls = asl_loss(fr.class_logits, cls_targets, cfg.asl_gamma_pos, cfg.asl_gamma_neg,
                       cfg.asl_margin);

    // Localization over matched individuals and matched groups.
    out.loc = loc_loss(ad::gather_rows(fr.ind_boxes, matched_ind_rows), scene.individuals,
                       cfg.loss.lambda_l1, cfg.loss.lambda_giou);
    if (!gt.boxes.empty())
        out.loc = ad::add(out.loc, loc_loss(ad::gather_rows(fr.group_boxes, matched_grp_rows),
                                            gt.boxes, cfg.loss.lambda_l1,
                                            cfg.loss.lambda_giou));

    // Part supervision: binary window targets for matched individuals
    // with keypoints, optionally jittered by a per-(seed,step,scene,person)
    // stream.
    std::vector<int> attn_rows;
    std::vector<PartMask> masks;
    if (!scene.keypoints.empty()) {
        for (std::size_t j = 0; j < scene.individuals.size(); ++j) {
            const Box& box = scene.individuals[j];
            KeypointSet kps = scene.keypoints[j];
            if (cfg.keypoint_eps > 0.0) {
                double s = window_size(box, cfg.window_alpha, scene.width, scene.height);
                std::uint64_t rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(step),
                                                  static_cast<std::uint64_t>(scene_index),
                                                  j + 1);
                kps = perturb_keypoints(kps, cfg.keypoint_eps, s, rng);
            }
            auto pm = keypoints_to_masks(kps, box, cfg.window_alpha, fr.grid_h, fr.grid_w,
                                         mc.stride, scene.width, scene.height, mc.num_parts);
            for (int p = 0; p < mc.num_parts; ++p) {
                if (!pm[p].valid) continue;
                attn_rows.push_back(matched_ind_rows[j] * mc.num_parts + p);
                masks.push_back(std::move(pm[p]));
            }
        }
    }
    out.part = attn_rows.empty() ? ad::scalar(0.0)
                                 : part_loss(ad::gather_rows(fr.part_attn, attn_rows), masks);

    // Association over matched similarity entries.
    if (!gt.boxes.empty())
        out.assn = assn_loss(fr.similarity, gt.membership, matched_grp_rows, matched_ind_rows);
    else
        out.assn = ad::scalar(0.0);

    out.total = total_loss(out.ind, out.cls, out.loc, out.part, out.assn, cfg.loss);
    return out;
}

namespace {

struct Optimizer {
    OptimizerState st;

    void init(const Model& model) {
        for (const auto& [name, var] : model.params().all()) {
            st.m[name].assign(var.size(), 0.0);
            st.v[name].assign(var.size(), 0.0);
        }
    }

    void step(Model& model, const TrainConfig& cfg, double lr_scale) {
        // Global-norm clipping over the whole gradient.
        double sq = 0.0;
        for (const auto& [name, var] : model.params().all())
            for (double g : var.grad()) sq += g * g;
        double norm = std::sqrt(sq);
        double clip = cfg.clip_norm > 0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;

        st.step += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
        for (auto& [name, var] : model.params().all()) {
            double lr = (name.rfind("stem.", 0) == 0 ? cfg.backbone_lr : cfg.lr) * lr_scale;
            auto& m = st.m[name];
            auto& v = st.v[name];
            auto& w = var.val();
            auto& grad = var.grad();
            for (std::size_t i = 0; i < w.size(); ++i) {
                double g = grad.empty() ? 0.0 : grad[i] * clip;
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
                w[i] -= lr * (update + cfg.weight_decay * w[i]);
            }
            if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
        }
    }
};

}  // namespace

TrainResult train(Model& model, const Dataset& ds, const TrainConfig& cfg,
                  const std::string& resume_path) {
    if (ds.scenes.empty()) throw std::invalid_argument("train: empty dataset");
    Optimizer opt;
    opt.init(model);
    std::int64_t start_step = 0;
    if (!resume_path.empty()) {
        Checkpoint ck = load_checkpoint(resume_path);
        restore_weights(model, ck);
        if (ck.optim) {
            for (auto& [name, m] : opt.st.m) {
                auto im = ck.optim->m.find(name);
                auto iv = ck.optim->v.find(name);
                if (im == ck.optim->m.end() || iv == ck.optim->v.end() ||
                    im->second.size() != m.size())
                    throw std::runtime_error("checkpoint: optimizer state mismatch for " + name);
                m = im->second;
                opt.st.v[name] = iv->second;
            }
            opt.st.step = ck.optim->step;
        }
        start_step = ck.global_step;
    }

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path, std::ios::app);
        if (!log) throw std::runtime_error("train: cannot open log " + cfg.log_path);
    }

    const int n = static_cast<int>(ds.scenes.size());
    const int batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    TrainResult result;
    result.steps_run = start_step;
    std::int64_t step = 0;  // global batch counter
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr_scale = epoch >= cfg.lr_drop_epoch ? cfg.lr_drop_factor : 1.0;
        std::vector<int> order = epoch_order(cfg.seed, epoch, n);
        for (int b = 0; b < batches_per_epoch; ++b, ++step) {
            if (cfg.max_steps > 0 && step >= cfg.max_steps) goto done;
            if (step < start_step) continue;  // fast-forward on resume
            int lo = b * cfg.batch_size;
            int hi = std::min(n, lo + cfg.batch_size);
            ad::Var total, l_ind, l_cls, l_loc, l_part, l_assn;
            for (int k = lo; k < hi; ++k) {
                SceneLoss sl = compute_scene_loss(model, ds.scenes[order[k]], ds.num_classes,
                                                  cfg, step, order[k]);
                auto acc = [&](ad::Var& a, const ad::Var& x) {
                    a = a.defined() ? ad::add(a, x) : x;
                };
                acc(total, sl.total);
                acc(l_ind, sl.ind);
                acc(l_cls, sl.cls);
                acc(l_loc, sl.loc);
                acc(l_part, sl.part);
                acc(l_assn, sl.assn);
            }
            const double inv = 1.0 / (hi - lo);
            total = ad::mul_scalar(total, inv);
            check_finite(l_ind, "individual");
            check_finite(l_cls, "class");
            check_finite(l_loc, "localization");
            check_finite(l_part, "part");
            check_finite(l_assn, "association");
            check_finite(total, "total");
            ad::backward(total);
            opt.step(model, cfg, lr_scale);
            result.steps_run = step + 1;
            result.final_loss = total.item();
            if (log) {
                char buf[512];
                std::snprintf(buf, sizeof(buf),
                              "step=%lld epoch=%d loss=%.17g ind=%.17g cls=%.17g "
                              "loc=%.17g part=%.17g assn=%.17g\n",
                              static_cast<long long>(step + 1), epoch, total.item(),
                              l_ind.item() * inv, l_cls.item() * inv, l_loc.item() * inv,
                              l_part.item() * inv, l_assn.item() * inv);
                log << buf;
                log.flush();
            }
            if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
                (step + 1) % cfg.checkpoint_every == 0)
                save_checkpoint(cfg.checkpoint_path, model, &opt.st, step + 1);
        }
    }
done:
    if (!cfg.checkpoint_path.empty())
        save_checkpoint(cfg.checkpoint_path, model, &opt.st, result.steps_run);
    return result;
}

std::vector<ImagePredictions> run_inference(const Model& model, const Dataset& ds,
                                            double nms_theta, double score_floor, int cap) {
    std::vector<ImagePredictions> out;
    out.reserve(ds.scenes.size());
    for (const auto& scene : ds.scenes) {
        if (!scene.image)
            throw std::runtime_error("scene " + scene.id + " has no image loaded");
        ForwardResult fr = model.forward(*scene.image);
        PredictionSet ps = fr.to_predictions();
        std::vector<Triplet> ts = triplet_nms(assemble_triplets(ps, score_floor), nms_theta);
        std::sort(ts.begin(), ts.end(), [](const Triplet& a, const Triplet& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.group_index != b.group_index) return a.group_index < b.group_index;
            if (a.class_id != b.class_id) return a.class_id < b.class_id;
            return a.individual_index < b.individual_index;
        });
        if (cap > 0 && static_cast<int>(ts.size()) > cap) ts.resize(cap);
        out.push_back({scene.id, std::move(ts)});
    }
    return out;
}

}  // namespace sid
