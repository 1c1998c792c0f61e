#include <cmath>
#include <vector>

#include "doctest.h"
#include "sid/network.hpp"
#include "sid/partmask.hpp"
#include "sid/synth.hpp"
#include "sid/train.hpp"

using namespace sid;

namespace {

Image flat_image(int size, double v = 0.5) {
    Image img;
    img.width = img.height = size;
    img.rgb.assign(static_cast<std::size_t>(size) * size * 3, v);
    return img;
}

Image noise_image(int size, std::uint64_t seed) {
    Image img;
    img.width = img.height = size;
    img.rgb.resize(static_cast<std::size_t>(size) * size * 3);
    for (auto& v : img.rgb) v = uniform01(seed);
    return img;
}

void check_shapes(const ModelConfig& c, const ForwardResult& r, int img_size) {
    const std::size_t hw = static_cast<std::size_t>(img_size / c.stride) *
                           (img_size / c.stride);
    CHECK(r.grid_h == img_size / c.stride);
    CHECK(r.grid_w == img_size / c.stride);
    CHECK(r.feature_map.rows() == hw);
    CHECK(r.feature_map.cols() == static_cast<std::size_t>(c.embed_dim));
    CHECK(r.ind_embed.rows() == static_cast<std::size_t>(c.num_individual_queries));
    CHECK(r.ind_embed.cols() == static_cast<std::size_t>(c.embed_dim));
    CHECK(r.part_queries.rows() ==
          static_cast<std::size_t>(c.num_individual_queries) * c.num_parts);
    CHECK(r.part_queries.cols() == static_cast<std::size_t>(c.embed_dim));
    CHECK(r.part_embed.rows() == r.part_queries.rows());
    CHECK(r.part_attn.rows() == r.part_queries.rows());
    CHECK(r.part_attn.cols() == hw);
    CHECK(r.aware_embed.rows() == static_cast<std::size_t>(c.num_individual_queries));
    CHECK(r.aware_embed.cols() == static_cast<std::size_t>(c.embed_dim));
    CHECK(r.group_embed.rows() == static_cast<std::size_t>(c.num_group_queries));
    CHECK(r.group_embed.cols() == static_cast<std::size_t>(c.embed_dim));
    CHECK(r.ind_boxes.rows() == static_cast<std::size_t>(c.num_individual_queries));
    CHECK(r.ind_boxes.cols() == 4);
    CHECK(r.objectness.rows() == static_cast<std::size_t>(c.num_individual_queries));
    CHECK(r.objectness.cols() == 1);
    CHECK(r.group_boxes.rows() == static_cast<std::size_t>(c.num_group_queries));
    CHECK(r.group_boxes.cols() == 4);
    CHECK(r.class_logits.rows() == static_cast<std::size_t>(c.num_group_queries));
    CHECK(r.class_logits.cols() == static_cast<std::size_t>(c.num_classes));
    CHECK(r.similarity.rows() == static_cast<std::size_t>(c.num_group_queries));
    CHECK(r.similarity.cols() == static_cast<std::size_t>(c.num_individual_queries));
}

ModelConfig tiny_config() {
    ModelConfig c;
    c.embed_dim = 16;
    c.num_individual_queries = 4;
    c.num_group_queries = 5;
    c.num_parts = 13;
    c.num_classes = 8;
    c.encoder_layers = 1;
    c.individual_decoder_layers = 1;
    c.enhancer_layers = 1;
    c.group_decoder_layers = 1;
    c.heads = 2;
    c.ffn_dim = 24;
    c.stem_c1 = 4;
    c.stem_c2 = 6;
    c.stem_c3 = 8;
    return c;
}

}  // namespace

TEST_CASE("forward shapes under the desk profile") {
    ModelConfig c;  // defaults are the desk profile
    Model m(c, 1);
    ForwardResult r = m.forward(noise_image(128, 11));
    check_shapes(c, r, 128);
    // Boxes come out of a sigmoid.
    for (double v : r.ind_boxes.val()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("forward shapes under the full-scale profile") {
    ModelConfig c = ModelConfig::full_scale();
    CHECK(c.embed_dim == 256);
    CHECK(c.num_individual_queries == 24);
    CHECK(c.num_group_queries == 32);
    CHECK(c.encoder_layers == 6);
    CHECK(c.heads == 8);
    Model m(c, 1);
    // Small image keeps the quadratic attention affordable in the test.
    ForwardResult r = m.forward(noise_image(64, 12));
    check_shapes(c, r, 64);
}

TEST_CASE("doubling the resolution scales the grid, not the query counts") {
    ModelConfig c = tiny_config();
    Model m(c, 2);
    ForwardResult a = m.forward(noise_image(64, 3));
    ForwardResult b = m.forward(noise_image(128, 3));
    CHECK(b.grid_h == 2 * a.grid_h);
    CHECK(b.feature_map.rows() == 4 * a.feature_map.rows());
    CHECK(b.ind_embed.rows() == a.ind_embed.rows());
    CHECK(b.group_embed.rows() == a.group_embed.rows());
}

TEST_CASE("encode rejects resolutions not divisible by the stride") {
    Model m(tiny_config(), 2);
    int gh = 0, gw = 0;
    CHECK_THROWS_AS(m.encode(flat_image(60), gh, gw), std::invalid_argument);
}

TEST_CASE("forward is deterministic for a fixed seed") {
    ModelConfig c = tiny_config();
    Model m1(c, 7), m2(c, 7), m3(c, 8);
    Image img = noise_image(64, 5);
    ForwardResult a = m1.forward(img), b = m2.forward(img), d = m3.forward(img);
    CHECK(a.similarity.val() == b.similarity.val());
    CHECK(a.ind_boxes.val() == b.ind_boxes.val());
    CHECK(a.class_logits.val() == b.class_logits.val());
    CHECK(a.similarity.val() != d.similarity.val());
}

TEST_CASE("attention rows are probability distributions") {
    ModelConfig c = tiny_config();
    Model m(c, 4);
    ForwardResult r = m.forward(noise_image(64, 6));
    const std::size_t hw = r.part_attn.cols();
    for (std::size_t i = 0; i < r.part_attn.rows(); ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < hw; ++j) {
            double v = r.part_attn.val()[i * hw + j];
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("part queries equal the sliced linear projection of E_I") {
    ModelConfig c = tiny_config();
    Model m(c, 9);
    const int D = c.embed_dim, P = c.num_parts, N = 3;
    std::uint64_t rng = 1234;
    std::vector<double> e(static_cast<std::size_t>(N) * D);
    for (auto& v : e) v = uniform01(rng) - 0.5;
    ad::Var ei = ad::constant(N, D, e);
    ad::Var q = m.make_part_queries(ei);
    REQUIRE(q.rows() == static_cast<std::size_t>(N) * P);
    REQUIRE(q.cols() == static_cast<std::size_t>(D));

    const auto& w = m.params().at("part.proj.w").val();  // (D, P*D)
    for (int i = 0; i < N; ++i)
        for (int p = 0; p < P; ++p)
            for (int d = 0; d < D; ++d) {
                double want = 0;
                for (int k = 0; k < D; ++k)
                    want += e[static_cast<std::size_t>(i) * D + k] *
                            w[static_cast<std::size_t>(k) * P * D + p * D + d];
                double got = q.val()[(static_cast<std::size_t>(i) * P + p) * D + d];
                CHECK(got == doctest::Approx(want).epsilon(1e-6));
            }
}

TEST_CASE("fusion equals the concatenated projection") {
    ModelConfig c = tiny_config();
    Model m(c, 10);
    const int D = c.embed_dim, P = c.num_parts, N = 2;
    std::uint64_t rng = 88;
    std::vector<double> e(static_cast<std::size_t>(N) * D), pe(static_cast<std::size_t>(N) * P * D);
    for (auto& v : e) v = uniform01(rng) - 0.5;
    for (auto& v : pe) v = uniform01(rng) - 0.5;
    ad::Var ei = ad::constant(N, D, e);
    ad::Var ep = ad::constant(static_cast<std::size_t>(N) * P, D, pe);
    ad::Var fused = m.fuse(ei, ep);
    REQUIRE(fused.rows() == static_cast<std::size_t>(N));
    REQUIRE(fused.cols() == static_cast<std::size_t>(D));

    const auto& w = m.params().at("fuse.w").val();  // ((P+1)*D, D)
    for (int i = 0; i < N; ++i) {
        std::vector<double> cat(static_cast<std::size_t>(P + 1) * D);
        for (int d = 0; d < D; ++d) cat[d] = e[static_cast<std::size_t>(i) * D + d];
        for (int p = 0; p < P; ++p)
            for (int d = 0; d < D; ++d)
                cat[static_cast<std::size_t>(p + 1) * D + d] =
                    pe[(static_cast<std::size_t>(i) * P + p) * D + d];
        for (int d = 0; d < D; ++d) {
            double want = 0;
            for (int k = 0; k < (P + 1) * D; ++k)
                want += cat[k] * w[static_cast<std::size_t>(k) * D + d];
            CHECK(fused.val()[static_cast<std::size_t>(i) * D + d] ==
                  doctest::Approx(want).epsilon(1e-6));
        }
    }

    // Linearity in the fused inputs.
    ad::Var doubled = m.fuse(ad::mul_scalar(ei, 2.0), ad::mul_scalar(ep, 2.0));
    for (std::size_t k = 0; k < fused.val().size(); ++k)
        CHECK(doubled.val()[k] == doctest::Approx(2.0 * fused.val()[k]).epsilon(1e-9));
}

TEST_CASE("similarity equals the projected dot product") {
    ModelConfig c = tiny_config();
    Model m(c, 11);
    const int D = c.embed_dim, NG = 3, NI = 4;
    std::uint64_t rng = 55;
    std::vector<double> ge(static_cast<std::size_t>(NG) * D), ie(static_cast<std::size_t>(NI) * D);
    for (auto& v : ge) v = uniform01(rng) - 0.5;
    for (auto& v : ie) v = uniform01(rng) - 0.5;
    ad::Var g = ad::constant(NG, D, ge);
    ad::Var i = ad::constant(NI, D, ie);
    ad::Var s = m.similarity(g, i);
    REQUIRE(s.rows() == static_cast<std::size_t>(NG));
    REQUIRE(s.cols() == static_cast<std::size_t>(NI));

    // Manual two-layer MLP (relu between), then dot products.
    auto mlp = [&](const std::string& pre, const std::vector<double>& x, int n) {
        const auto& w1 = m.params().at(pre + ".1.w").val();
        const auto& b1 = m.params().at(pre + ".1.b").val();
        const auto& w2 = m.params().at(pre + ".2.w").val();
        const auto& b2 = m.params().at(pre + ".2.b").val();
        const int h = static_cast<int>(m.params().at(pre + ".1.b").cols());
        const int o = static_cast<int>(m.params().at(pre + ".2.b").cols());
        std::vector<double> out(static_cast<std::size_t>(n) * o);
        for (int r = 0; r < n; ++r) {
            std::vector<double> hid(h, 0.0);
            for (int j = 0; j < h; ++j) {
                double a = b1[j];
                for (int k = 0; k < D; ++k)
                    a += x[static_cast<std::size_t>(r) * D + k] *
                         w1[static_cast<std::size_t>(k) * h + j];
                hid[j] = std::max(0.0, a);
            }
            for (int j = 0; j < o; ++j) {
                double a = b2[j];
                for (int k = 0; k < h; ++k)
                    a += hid[k] * w2[static_cast<std::size_t>(k) * o + j];
                out[static_cast<std::size_t>(r) * o + j] = a;
            }
        }
        return out;
    };
    const int o = static_cast<int>(m.params().at("head.sim_g.2.b").cols());
    auto pg = mlp("head.sim_g", ge, NG);
    auto pi = mlp("head.sim_i", ie, NI);
    for (int a = 0; a < NG; ++a)
        for (int b = 0; b < NI; ++b) {
            double want = 0;
            for (int k = 0; k < o; ++k)
                want += pg[static_cast<std::size_t>(a) * o + k] *
                        pi[static_cast<std::size_t>(b) * o + k];
            CHECK(s.val()[static_cast<std::size_t>(a) * NI + b] ==
                  doctest::Approx(want).epsilon(1e-6));
        }
}

TEST_CASE("duplicated individual embedding duplicates its similarity column") {
    ModelConfig c = tiny_config();
    Model m(c, 13);
    std::uint64_t rng = 77;
    const int D = c.embed_dim;
    std::vector<double> ge(2 * static_cast<std::size_t>(D)), ie(3 * static_cast<std::size_t>(D));
    for (auto& v : ge) v = uniform01(rng) - 0.5;
    for (auto& v : ie) v = uniform01(rng) - 0.5;
    // Make individual 2 a copy of individual 0.
    for (int d = 0; d < D; ++d) ie[2 * static_cast<std::size_t>(D) + d] = ie[d];
    ad::Var s = m.similarity(ad::constant(2, D, ge), ad::constant(3, D, ie));
    for (int g = 0; g < 2; ++g)
        CHECK(s.val()[static_cast<std::size_t>(g) * 3 + 0] ==
              doctest::Approx(s.val()[static_cast<std::size_t>(g) * 3 + 2]).epsilon(1e-12));
}

TEST_CASE("perturbing one part-aware embedding changes group outputs") {
    ModelConfig c = tiny_config();
    Model m(c, 14);
    Image img = noise_image(64, 21);
    ForwardResult r = m.forward(img);
    ad::Var bumped = ad::add(r.aware_embed,
                             ad::constant(r.aware_embed.rows(), r.aware_embed.cols(), 0.25));
    ad::Var g2 = m.decode_groups(bumped, r.feature_map, r.grid_h, r.grid_w);
    bool changed = false;
    for (std::size_t k = 0; k < g2.val().size(); ++k)
        changed |= g2.val()[k] != r.group_embed.val()[k];
    CHECK(changed);
}

TEST_CASE("every parameter receives gradient from the combined loss") {
    ModelConfig c = tiny_config();
    Model m(c, 15);
    SynthSpec spec;
    spec.image_size = 96;
    spec.num_scenes = 1;
    spec.min_persons = 2;
    spec.max_persons = 3;
    spec.pair_scene_prob = 1.0;  // guarantees a group with 2 members
    spec.seed = 3;
    Dataset ds = generate_synthetic(spec);
    REQUIRE(!ds.scenes[0].groups.empty());

    TrainConfig tc;
    SceneLoss sl = compute_scene_loss(m, ds.scenes[0], ds.num_classes, tc, 0, 0);
    CHECK(std::isfinite(sl.total.item()));
    ad::backward(sl.total);
    for (const auto& [name, p] : m.params().all()) {
        INFO("param ", name);
        REQUIRE(!p.grad().empty());
        double norm = 0;
        for (double g : p.grad()) norm += g * g;
        CHECK(norm > 0.0);
    }
}
