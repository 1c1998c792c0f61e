// Command-line entry point: dataset generation, training, inference,
// evaluation, attention dumps and a quick selftest.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sid/checkpoint.hpp"
#include "sid/evaluation.hpp"
#include "sid/network.hpp"
#include "sid/synth.hpp"
#include "sid/train.hpp"

namespace {

void add_model_flags(CLI::App* app, sid::ModelConfig& mc) {
    app->add_option("--embed-dim", mc.embed_dim, "transformer width D");
    app->add_option("--heads", mc.heads, "attention heads");
    app->add_option("--enc-layers", mc.encoder_layers, "encoder layers");
    app->add_option("--ind-dec-layers", mc.individual_decoder_layers,
                    "individual decoder layers");
    app->add_option("--enh-layers", mc.enhancer_layers, "part enhancer layers");
    app->add_option("--grp-dec-layers", mc.group_decoder_layers, "group decoder layers");
    app->add_option("--ffn-dim", mc.ffn_dim, "feedforward width");
    app->add_option("--ind-queries", mc.num_individual_queries, "individual queries N_I");
    app->add_option("--grp-queries", mc.num_group_queries, "group queries N_G");
    app->add_option("--parts", mc.num_parts, "part queries per individual P");
    app->add_option("--stem-c1", mc.stem_c1, "stem conv1 channels");
    app->add_option("--stem-c2", mc.stem_c2, "stem conv2 channels");
    app->add_option("--stem-c3", mc.stem_c3, "stem conv3 channels");
}

void add_train_flags(CLI::App* app, sid::TrainConfig& tc) {
    app->add_option("--epochs", tc.epochs, "training epochs");
    app->add_option("--steps", tc.max_steps, "hard cap on optimizer steps (0 = none)");
    app->add_option("--batch", tc.batch_size, "batch size");
    app->add_option("--lr", tc.lr, "learning rate");
    app->add_option("--backbone-lr", tc.backbone_lr, "stem learning rate");
    app->add_option("--lr-drop-epoch", tc.lr_drop_epoch, "epoch at which lr decays");
    app->add_option("--lr-drop-factor", tc.lr_drop_factor, "lr decay factor");
    app->add_option("--beta1", tc.beta1, "Adam beta1");
    app->add_option("--beta2", tc.beta2, "Adam beta2");
    app->add_option("--adam-eps", tc.adam_eps, "Adam epsilon");
    app->add_option("--weight-decay", tc.weight_decay, "decoupled weight decay");
    app->add_option("--clip-norm", tc.clip_norm, "global gradient-norm clip");
    app->add_option("--seed", tc.seed, "training seed");
    app->add_option("--lambda-ind", tc.loss.lambda_ind, "individual loss weight");
    app->add_option("--lambda-cls", tc.loss.lambda_cls, "class loss weight");
    app->add_option("--lambda-loc", tc.loss.lambda_loc, "localization loss weight");
    app->add_option("--lambda-l1", tc.loss.lambda_l1, "L1 term weight");
    app->add_option("--lambda-giou", tc.loss.lambda_giou, "GIoU term weight");
    app->add_option("--lambda-part", tc.loss.lambda_part, "part loss weight");
    app->add_option("--lambda-assn", tc.loss.lambda_assn, "association loss weight");
    app->add_option("--alpha", tc.window_alpha, "part window scale");
    app->add_option("--eps", tc.keypoint_eps, "keypoint jitter amplitude");
    app->add_option("--focal-gamma", tc.focal_gamma, "focal gamma");
    app->add_option("--focal-alpha", tc.focal_alpha, "focal alpha (<0 disables)");
    app->add_option("--asl-gamma-pos", tc.asl_gamma_pos, "ASL positive gamma");
    app->add_option("--asl-gamma-neg", tc.asl_gamma_neg, "ASL negative gamma");
    app->add_option("--asl-margin", tc.asl_margin, "ASL probability margin");
    app->add_option("--log", tc.log_path, "append per-step stats here");
    app->add_option("--checkpoint-every", tc.checkpoint_every, "periodic save interval");
}

int cmd_selftest() {
    sid::ModelConfig mc;
    mc.embed_dim = 16;
    mc.heads = 2;
    mc.encoder_layers = 1;
    mc.individual_decoder_layers = 1;
    mc.enhancer_layers = 1;
    mc.group_decoder_layers = 1;
    mc.ffn_dim = 32;
    mc.num_individual_queries = 4;
    mc.num_group_queries = 5;
    mc.num_parts = 13;
    mc.num_classes = 3;
    mc.stem_c1 = 4;
    mc.stem_c2 = 8;
    mc.stem_c3 = 16;
    sid::Model model(mc, 11);
    sid::Image img;
    img.width = img.height = 32;
    img.rgb.assign(32 * 32 * 3, 0.5);
    sid::ForwardResult fr = model.forward(img);
    bool ok = fr.grid_h == 4 && fr.grid_w == 4 &&
              fr.ind_embed.rows() == 4 && fr.part_attn.rows() == 4 * 13 &&
              fr.part_attn.cols() == 16 && fr.similarity.rows() == 5 &&
              fr.similarity.cols() == 4;
    double row0 = 0;
    for (std::size_t c = 0; c < fr.part_attn.cols(); ++c) row0 += fr.part_attn.val()[c];
    ok = ok && std::abs(row0 - 1.0) < 1e-9;
    std::printf("selftest: forward shapes %s, attention rows %s\n", ok ? "ok" : "BAD",
                ok ? "stochastic" : "BAD");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"part-aware group interaction detector"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic split");
    sid::SynthSpec spec;
    std::string gen_out;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--scenes", spec.num_scenes, "number of scenes");
    gen->add_option("--image-size", spec.image_size, "square image side");
    gen->add_option("--min-persons", spec.min_persons, "minimum persons per scene");
    gen->add_option("--max-persons", spec.max_persons, "maximum persons per scene");
    gen->add_option("--pair-prob", spec.pair_scene_prob, "staged pair scene probability");
    gen->add_option("--seed", spec.seed, "generator seed");

    // train
    auto* tr = app.add_subcommand("train", "train a model");
    tr->set_config("--config", "", "key=value config file (CLI overrides)");
    std::string tr_data, tr_ckpt, tr_resume;
    sid::ModelConfig tr_mc;
    sid::TrainConfig tr_tc;
    std::uint64_t tr_init_seed = 11;
    tr->add_option("--data", tr_data, "training split directory")->required();
    tr->add_option("--checkpoint", tr_ckpt, "checkpoint output path")->required();
    tr->add_option("--resume", tr_resume, "checkpoint to resume from");
    tr->add_option("--init-seed", tr_init_seed, "weight initialization seed");
    add_model_flags(tr, tr_mc);
    add_train_flags(tr, tr_tc);

    // infer
    auto* inf = app.add_subcommand("infer", "run inference and write predictions");
    std::string inf_data, inf_ckpt, inf_out;
    double inf_theta = 0.5, inf_floor = 0.0;
    int inf_cap = 100;
    inf->add_option("--data", inf_data, "split directory")->required();
    inf->add_option("--checkpoint", inf_ckpt, "trained checkpoint")->required();
    inf->add_option("--out", inf_out, "prediction file")->required();
    inf->add_option("--theta", inf_theta, "triplet NMS IoU threshold");
    inf->add_option("--score-floor", inf_floor, "minimum class score");
    inf->add_option("--cap", inf_cap, "max triplets per image after NMS");

    // eval
    auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
    std::string ev_pred, ev_gt, ev_out;
    bool ev_per_class = false;
    ev->add_option("--pred", ev_pred, "prediction file")->required();
    ev->add_option("--gt", ev_gt, "ground-truth split directory")->required();
    ev->add_option("--out", ev_out, "also write key=value report here");
    ev->add_flag("--per-class", ev_per_class, "print per-class recalls");

    // dump-attn
    auto* da = app.add_subcommand("dump-attn", "write part attention maps as PGM");
    std::string da_data, da_ckpt, da_scene, da_out;
    int da_individual = 0;
    da->add_option("--data", da_data, "split directory")->required();
    da->add_option("--checkpoint", da_ckpt, "trained checkpoint")->required();
    da->add_option("--scene", da_scene, "scene id")->required();
    da->add_option("--out", da_out, "output directory")->required();
    da->add_option("--individual", da_individual, "individual query index");

    auto* st = app.add_subcommand("selftest", "quick internal sanity check");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            sid::Dataset ds = sid::generate_synthetic(spec);
            ds.dir = gen_out;
            sid::write_dataset(ds, gen_out);
            std::printf("wrote %zu scenes to %s\n", ds.scenes.size(), gen_out.c_str());
        } else if (tr->parsed()) {
            sid::Dataset ds = sid::load_split(tr_data);
            sid::load_images(ds);
            tr_mc.num_classes = ds.num_classes;
            sid::Model model(tr_mc, tr_init_seed);
            tr_tc.checkpoint_path = tr_ckpt;
            sid::TrainResult res = sid::train(model, ds, tr_tc, tr_resume);
            std::printf("trained %lld steps, final loss %.6f, checkpoint %s\n",
                        static_cast<long long>(res.steps_run), res.final_loss,
                        tr_ckpt.c_str());
        } else if (inf->parsed()) {
            sid::Checkpoint ck = sid::load_checkpoint(inf_ckpt);
            sid::Model model(ck.config, 0);
            sid::restore_weights(model, ck);
            sid::Dataset ds = sid::load_split(inf_data);
            sid::load_images(ds);
            auto preds = sid::run_inference(model, ds, inf_theta, inf_floor, inf_cap);
            sid::save_predictions(inf_out, preds);
            std::printf("wrote predictions for %zu images to %s\n", preds.size(),
                        inf_out.c_str());
        } else if (ev->parsed()) {
            auto preds = sid::load_predictions(ev_pred);
            sid::Dataset ds = sid::load_split(ev_gt);
            auto gts = sid::to_ground_truth(ds);
            sid::MetricReport r = sid::evaluate(preds, gts);
            std::fputs(sid::format_report(r, ev_per_class).c_str(), stdout);
            if (!ev_out.empty()) sid::save_report_kv(ev_out, r);
        } else if (da->parsed()) {
            sid::Checkpoint ck = sid::load_checkpoint(da_ckpt);
            sid::Model model(ck.config, 0);
            sid::restore_weights(model, ck);
            sid::Dataset ds = sid::load_split(da_data);
            sid::load_images(ds);
            const sid::Scene* scene = nullptr;
            for (const auto& s : ds.scenes)
                if (s.id == da_scene) scene = &s;
            if (!scene) throw std::runtime_error("unknown scene id " + da_scene);
            sid::ForwardResult fr = model.forward(*scene->image);
            std::filesystem::create_directories(da_out);
            const int P = model.config().num_parts;
            for (int p = 0; p < P; ++p) {
                std::size_t row = static_cast<std::size_t>(da_individual) * P + p;
                std::vector<double> gray(fr.part_attn.val().begin() + row * fr.part_attn.cols(),
                                         fr.part_attn.val().begin() +
                                             (row + 1) * fr.part_attn.cols());
                double mx = 0;
                for (double v : gray) mx = std::max(mx, v);
                if (mx > 0)
                    for (double& v : gray) v /= mx;
                sid::save_pgm(da_out + "/" + da_scene + "_i" + std::to_string(da_individual) +
                                  "_" + sid::kPartNames[p] + ".pgm",
                              fr.grid_w, fr.grid_h, gray);
            }
            std::printf("wrote %d attention maps to %s\n", P, da_out.c_str());
        } else if (st->parsed()) {
            return cmd_selftest();
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
