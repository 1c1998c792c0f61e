#include "sid/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sid/partmask.hpp"

namespace sid {
namespace {

using ad::Var;

Var linear(const Var& x, const Var& w, const Var& b) {
    return ad::add_rowvec(ad::matmul(x, w), b);
}

struct Attn {
    Var out;
    Var probs;  // head-averaged, (rows_q, rows_k)
};

Attn mha(ParamStore& ps, const std::string& pre, const Var& q_in, const Var& k_in,
         const Var& v_in, const Var* q_pos, const Var* k_pos, int heads) {
    Var q = q_pos ? ad::add(q_in, *q_pos) : q_in;
    Var k = k_pos ? ad::add(k_in, *k_pos) : k_in;
    Var Q = linear(q, ps.at(pre + ".q.w"), ps.at(pre + ".q.b"));
    Var K = linear(k, ps.at(pre + ".k.w"), ps.at(pre + ".k.b"));
    Var V = linear(v_in, ps.at(pre + ".v.w"), ps.at(pre + ".v.b"));
    const int dh = static_cast<int>(Q.cols()) / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> outs;
    Var avg;
    for (int h = 0; h < heads; ++h) {
        Var Qh = ad::slice_cols(Q, static_cast<std::size_t>(h) * dh, dh);
        Var Kh = ad::slice_cols(K, static_cast<std::size_t>(h) * dh, dh);
        Var Vh = ad::slice_cols(V, static_cast<std::size_t>(h) * dh, dh);
        Var probs = ad::softmax_rows(ad::mul_scalar(ad::matmul(Qh, ad::transpose(Kh)), scale));
        outs.push_back(ad::matmul(probs, Vh));
        avg = h == 0 ? probs : ad::add(avg, probs);
    }
    Attn a;
    a.out = linear(ad::concat_cols(outs), ps.at(pre + ".o.w"), ps.at(pre + ".o.b"));
    a.probs = ad::mul_scalar(avg, 1.0 / heads);
    return a;
}

Var lnorm(ParamStore& ps, const std::string& pre, const Var& x) {
    return ad::layernorm_rows(x, ps.at(pre + ".g"), ps.at(pre + ".b"));
}

Var ffn(ParamStore& ps, const std::string& pre, const Var& x) {
    Var h = ad::relu(linear(x, ps.at(pre + "1.w"), ps.at(pre + "1.b")));
    return linear(h, ps.at(pre + "2.w"), ps.at(pre + "2.b"));
}

Var box_mlp(ParamStore& ps, const std::string& pre, const Var& x) {
    Var h = ad::relu(linear(x, ps.at(pre + ".1.w"), ps.at(pre + ".1.b")));
    h = ad::relu(linear(h, ps.at(pre + ".2.w"), ps.at(pre + ".2.b")));
    return ad::sigmoid(linear(h, ps.at(pre + ".3.w"), ps.at(pre + ".3.b")));
}

Var sim_mlp(ParamStore& ps, const std::string& pre, const Var& x) {
    Var h = ad::relu(linear(x, ps.at(pre + ".1.w"), ps.at(pre + ".1.b")));
    return linear(h, ps.at(pre + ".2.w"), ps.at(pre + ".2.b"));
}

// im2col convolution: x is (H*W, Cin) row-major by pixel; returns
// (OH*OW, Cout) with OH = ceil over stride, pad=1, k=3 style geometry.
Var conv2d(const Var& x, int H, int W, int Cin, const Var& w, const Var& b, int k,
           int stride, int pad, int& OH, int& OW) {
    OH = (H + 2 * pad - k) / stride + 1;
    OW = (W + 2 * pad - k) / stride + 1;
    std::vector<long> idx;
    idx.reserve(static_cast<std::size_t>(OH) * OW * k * k * Cin);
    for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    int iy = oy * stride - pad + ky;
                    int ix = ox * stride - pad + kx;
                    bool in = iy >= 0 && iy < H && ix >= 0 && ix < W;
                    for (int c = 0; c < Cin; ++c)
                        idx.push_back(in ? (static_cast<long>(iy) * W + ix) * Cin + c : -1);
                }
    Var cols = ad::gather_flat(x, static_cast<std::size_t>(OH) * OW,
                               static_cast<std::size_t>(k) * k * Cin, idx);
    return linear(cols, w, b);
}

}  // namespace

void ModelConfig::validate() const {
    if (embed_dim <= 0 || embed_dim % heads != 0)
        throw std::invalid_argument("embed_dim must be a positive multiple of heads");
    if (embed_dim % 4 != 0)
        throw std::invalid_argument("embed_dim must be divisible by 4 for the positional encoding");
    if (num_individual_queries <= 0 || num_group_queries <= 0 || num_parts <= 0 ||
        num_classes <= 0)
        throw std::invalid_argument("query/part/class counts must be positive");
    if (encoder_layers <= 0 || individual_decoder_layers <= 0 || enhancer_layers <= 0 ||
        group_decoder_layers <= 0)
        throw std::invalid_argument("layer counts must be positive");
    if (stride != 8) throw std::invalid_argument("stem stride is fixed at 8");
}

ModelConfig ModelConfig::full_scale() {
    ModelConfig c;
    c.embed_dim = 256;
    c.num_individual_queries = 24;
    c.num_group_queries = 32;
    c.encoder_layers = 6;
    c.individual_decoder_layers = 3;
    c.enhancer_layers = 3;
    c.group_decoder_layers = 3;
    c.heads = 8;
    c.ffn_dim = 2048;
    c.stem_c1 = 64;
    c.stem_c2 = 128;
    c.stem_c3 = 256;
    return c;
}

Var ParamStore::make(const std::string& name, std::size_t rows, std::size_t cols,
                     std::uint64_t& rng, double scale) {
    if (params_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    if (scale < 0) scale = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = (2.0 * uniform01(rng) - 1.0) * scale;
    Var p = ad::parameter(rows, cols, std::move(v));
    params_.emplace(name, p);
    return p;
}

Var ParamStore::zeros(const std::string& name, std::size_t rows, std::size_t cols) {
    if (params_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    Var p = ad::parameter(rows, cols, std::vector<double>(rows * cols, 0.0));
    params_.emplace(name, p);
    return p;
}

Var ParamStore::values(const std::string& name, std::size_t rows, std::size_t cols,
                       std::vector<double> v) {
    if (params_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    if (v.size() != rows * cols) throw std::invalid_argument("bad value count for " + name);
    Var p = ad::parameter(rows, cols, std::move(v));
    params_.emplace(name, p);
    return p;
}

Var& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
    return it->second;
}

std::vector<double> sinusoidal_position_encoding(int grid_h, int grid_w, int dim) {
    const int half = dim / 2;
    const double two_pi = 2.0 * 3.14159265358979323846;
    std::vector<double> pe(static_cast<std::size_t>(grid_h) * grid_w * dim);
    for (int y = 0; y < grid_h; ++y)
        for (int x = 0; x < grid_w; ++x) {
            double py = (y + 0.5) / grid_h * two_pi;
            double px = (x + 0.5) / grid_w * two_pi;
            double* row = &pe[(static_cast<std::size_t>(y) * grid_w + x) * dim];
            for (int i = 0; i < half; i += 2) {
                double freq = std::pow(10000.0, static_cast<double>(i) / half);
                row[i] = std::sin(py / freq);
                row[i + 1] = std::cos(py / freq);
                row[half + i] = std::sin(px / freq);
                row[half + i + 1] = std::cos(px / freq);
            }
        }
    return pe;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::uint64_t rng = seed;
    const int D = cfg_.embed_dim, F = cfg_.ffn_dim;
    auto attn_params = [&](const std::string& pre) {
        for (const char* part : {".q", ".k", ".v", ".o"}) {
            params_.make(pre + part + ".w", D, D, rng);
            params_.zeros(pre + part + ".b", 1, D);
        }
    };
    auto norm_params = [&](const std::string& pre) {
        auto g = params_.zeros(pre + ".g", 1, D);
        std::fill(g.val().begin(), g.val().end(), 1.0);
        params_.zeros(pre + ".b", 1, D);
    };
    auto ffn_params = [&](const std::string& pre) {
        params_.make(pre + "1.w", D, F, rng);
        params_.zeros(pre + "1.b", 1, F);
        params_.make(pre + "2.w", F, D, rng);
        params_.zeros(pre + "2.b", 1, D);
    };

    params_.make("stem.conv1.w", 27, cfg_.stem_c1, rng);
    params_.zeros("stem.conv1.b", 1, cfg_.stem_c1);
    params_.make("stem.conv2.w", 9 * cfg_.stem_c1, cfg_.stem_c2, rng);
    params_.zeros("stem.conv2.b", 1, cfg_.stem_c2);
    params_.make("stem.conv3.w", 9 * cfg_.stem_c2, cfg_.stem_c3, rng);
    params_.zeros("stem.conv3.b", 1, cfg_.stem_c3);
    params_.make("proj.w", cfg_.stem_c3, D, rng);
    params_.zeros("proj.b", 1, D);

    for (int l = 0; l < cfg_.encoder_layers; ++l) {
        std::string pre = "enc" + std::to_string(l);
        attn_params(pre + ".attn");
        norm_params(pre + ".norm1");
        ffn_params(pre + ".ffn");
        norm_params(pre + ".norm2");
    }

    params_.make("ind.query.content", cfg_.num_individual_queries, D, rng);
    params_.make("ind.query.pos", cfg_.num_individual_queries, D, rng);
    for (int l = 0; l < cfg_.individual_decoder_layers; ++l) {
        std::string pre = "ind" + std::to_string(l);
        attn_params(pre + ".self");
        norm_params(pre + ".norm1");
        attn_params(pre + ".cross");
        norm_params(pre + ".norm2");
        ffn_params(pre + ".ffn");
        norm_params(pre + ".norm3");
    }

    params_.make("part.proj.w", D, cfg_.num_parts * D, rng);
    params_.make("enh.pos", cfg_.num_parts, D, rng);
    for (int l = 0; l < cfg_.enhancer_layers; ++l) {
        std::string pre = "enh" + std::to_string(l);
        attn_params(pre + ".self");
        norm_params(pre + ".norm1");
        attn_params(pre + ".cross");
        norm_params(pre + ".norm2");
        ffn_params(pre + ".ffn");
        norm_params(pre + ".norm3");
    }

    params_.make("fuse.w", (cfg_.num_parts + 1) * D, D, rng);

    params_.make("grp.query.content", cfg_.num_group_queries, D, rng);
    params_.make("grp.query.pos", cfg_.num_group_queries, D, rng);
    for (int l = 0; l < cfg_.group_decoder_layers; ++l) {
        std::string pre = "grp" + std::to_string(l);
        attn_params(pre + ".self");
        norm_params(pre + ".norm1");
        attn_params(pre + ".crossA");
        norm_params(pre + ".norm2");
        attn_params(pre + ".crossF");
        norm_params(pre + ".norm3");
        ffn_params(pre + ".ffn");
        norm_params(pre + ".norm4");
    }

    for (const char* head : {"head.ind_box", "head.grp_box"}) {
        params_.make(std::string(head) + ".1.w", D, D, rng);
        params_.zeros(std::string(head) + ".1.b", 1, D);
        params_.make(std::string(head) + ".2.w", D, D, rng);
        params_.zeros(std::string(head) + ".2.b", 1, D);
        params_.make(std::string(head) + ".3.w", D, 4, rng);
        params_.zeros(std::string(head) + ".3.b", 1, 4);
    }
    params_.make("head.obj.w", D, 1, rng);
    params_.zeros("head.obj.b", 1, 1);
    params_.make("head.cls.w", D, cfg_.num_classes, rng);
    params_.zeros("head.cls.b", 1, cfg_.num_classes);
    // The similarity heads start with a "no link" prior: opposite fixed
    // offsets in one output coordinate put every group-individual logit
    // near -6.25 at initialization, so pairs that never receive
    // supervision default to low similarity instead of floating at the
    // scale the supervised logits reach.
    for (const char* head : {"head.sim_g", "head.sim_i"}) {
        params_.make(std::string(head) + ".1.w", D, D, rng);
        params_.zeros(std::string(head) + ".1.b", 1, D);
        params_.make(std::string(head) + ".2.w", D, D, rng);
        std::vector<double> b(D, 0.0);
        b[0] = std::string(head) == "head.sim_g" ? 2.5 : -2.5;
        params_.values(std::string(head) + ".2.b", 1, D, std::move(b));
    }
}

Var Model::encode(const Image& img, int& grid_h, int& grid_w) const {
    if (img.width <= 0 || img.height <= 0 || img.width % cfg_.stride != 0 ||
        img.height % cfg_.stride != 0)
        throw std::invalid_argument("image resolution must be a positive multiple of the stride");
    Var x = ad::constant(static_cast<std::size_t>(img.height) * img.width, 3, img.rgb);
    int H = img.height, W = img.width, oh = 0, ow = 0;
    x = ad::relu(conv2d(x, H, W, 3, params_.at("stem.conv1.w"), params_.at("stem.conv1.b"),
                        3, 2, 1, oh, ow));
    H = oh; W = ow;
    x = ad::relu(conv2d(x, H, W, cfg_.stem_c1, params_.at("stem.conv2.w"),
                        params_.at("stem.conv2.b"), 3, 2, 1, oh, ow));
    H = oh; W = ow;
    x = ad::relu(conv2d(x, H, W, cfg_.stem_c2, params_.at("stem.conv3.w"),
                        params_.at("stem.conv3.b"), 3, 2, 1, oh, ow));
    grid_h = oh;
    grid_w = ow;
    x = linear(x, params_.at("proj.w"), params_.at("proj.b"));

    Var pos = ad::constant(static_cast<std::size_t>(oh) * ow, cfg_.embed_dim,
                           sinusoidal_position_encoding(oh, ow, cfg_.embed_dim));
    for (int l = 0; l < cfg_.encoder_layers; ++l) {
        std::string pre = "enc" + std::to_string(l);
        Attn a = mha(params_, pre + ".attn", x, x, x, &pos, &pos, cfg_.heads);
        x = lnorm(params_, pre + ".norm1", ad::add(x, a.out));
        x = lnorm(params_, pre + ".norm2", ad::add(x, ffn(params_, pre + ".ffn", x)));
    }
    return x;
}

Var Model::decode_individuals(const Var& fmap, int gh, int gw) const {
    Var fpos = ad::constant(static_cast<std::size_t>(gh) * gw, cfg_.embed_dim,
                            sinusoidal_position_encoding(gh, gw, cfg_.embed_dim));
    Var tgt = params_.at("ind.query.content");
    Var qpos = params_.at("ind.query.pos");
    for (int l = 0; l < cfg_.individual_decoder_layers; ++l) {
        std::string pre = "ind" + std::to_string(l);
        Attn sa = mha(params_, pre + ".self", tgt, tgt, tgt, &qpos, &qpos, cfg_.heads);
        tgt = lnorm(params_, pre + ".norm1", ad::add(tgt, sa.out));
        Attn ca = mha(params_, pre + ".cross", tgt, fmap, fmap, &qpos, &fpos, cfg_.heads);
        tgt = lnorm(params_, pre + ".norm2", ad::add(tgt, ca.out));
        tgt = lnorm(params_, pre + ".norm3", ad::add(tgt, ffn(params_, pre + ".ffn", tgt)));
    }
    return tgt;
}

Var Model::make_part_queries(const Var& ind_embed) const {
    Var m = ad::matmul(ind_embed, params_.at("part.proj.w"));
    return ad::reshape(m, ind_embed.rows() * cfg_.num_parts, cfg_.embed_dim);
}

void Model::enhance(const Var& part_q, const Var& fmap, int gh, int gw, Var& part_embed,
                    Var& part_attn) const {
    const int P = cfg_.num_parts;
    const int n_ind = static_cast<int>(part_q.rows()) / P;
    Var fpos = ad::constant(static_cast<std::size_t>(gh) * gw, cfg_.embed_dim,
                            sinusoidal_position_encoding(gh, gw, cfg_.embed_dim));
    Var ppos = params_.at("enh.pos");
    Var ppos_tiled = ad::concat_rows(std::vector<Var>(n_ind, ppos));
    Var x = part_q;
    for (int l = 0; l < cfg_.enhancer_layers; ++l) {
        std::string pre = "enh" + std::to_string(l);
        // Self-attention is scoped to each individual's P part queries.
        std::vector<Var> per_ind;
        for (int i = 0; i < n_ind; ++i) {
            Var xi = ad::slice_rows(x, static_cast<std::size_t>(i) * P, P);
            per_ind.push_back(mha(params_, pre + ".self", xi, xi, xi, &ppos, &ppos,
                                  cfg_.heads).out);
        }
        x = lnorm(params_, pre + ".norm1", ad::add(x, ad::concat_rows(per_ind)));
        Attn ca = mha(params_, pre + ".cross", x, fmap, fmap, &ppos_tiled, &fpos, cfg_.heads);
        x = lnorm(params_, pre + ".norm2", ad::add(x, ca.out));
        x = lnorm(params_, pre + ".norm3", ad::add(x, ffn(params_, pre + ".ffn", x)));
        if (l == cfg_.enhancer_layers - 1) part_attn = ca.probs;
    }
    part_embed = x;
}

Var Model::fuse(const Var& ind_embed, const Var& part_embed) const {
    const int P = cfg_.num_parts;
    const int n_ind = static_cast<int>(ind_embed.rows());
    std::vector<Var> pieces = {ind_embed};
    for (int p = 0; p < P; ++p) {
        std::vector<int> idx(n_ind);
        for (int i = 0; i < n_ind; ++i) idx[i] = i * P + p;
        pieces.push_back(ad::gather_rows(part_embed, idx));
    }
    return ad::matmul(ad::concat_cols(pieces), params_.at("fuse.w"));
}

Var Model::decode_groups(const Var& aware_embed, const Var& fmap, int gh, int gw) const {
    Var fpos = ad::constant(static_cast<std::size_t>(gh) * gw, cfg_.embed_dim,
                            sinusoidal_position_encoding(gh, gw, cfg_.embed_dim));
    Var tgt = params_.at("grp.query.content");
    Var qpos = params_.at("grp.query.pos");
    for (int l = 0; l < cfg_.group_decoder_layers; ++l) {
        std::string pre = "grp" + std::to_string(l);
        Attn sa = mha(params_, pre + ".self", tgt, tgt, tgt, &qpos, &qpos, cfg_.heads);
        tgt = lnorm(params_, pre + ".norm1", ad::add(tgt, sa.out));
        Attn ca = mha(params_, pre + ".crossA", tgt, aware_embed, aware_embed, &qpos,
                      nullptr, cfg_.heads);
        tgt = lnorm(params_, pre + ".norm2", ad::add(tgt, ca.out));
        Attn cf = mha(params_, pre + ".crossF", tgt, fmap, fmap, &qpos, &fpos, cfg_.heads);
        tgt = lnorm(params_, pre + ".norm3", ad::add(tgt, cf.out));
        tgt = lnorm(params_, pre + ".norm4", ad::add(tgt, ffn(params_, pre + ".ffn", tgt)));
    }
    return tgt;
}

Var Model::similarity(const Var& group_embed, const Var& ind_embed) const {
    Var g = sim_mlp(params_, "head.sim_g", group_embed);
    Var i = sim_mlp(params_, "head.sim_i", ind_embed);
    return ad::matmul(g, ad::transpose(i));
}

ForwardResult Model::forward(const Image& img) const {
    ForwardResult r;
    r.feature_map = encode(img, r.grid_h, r.grid_w);
    r.ind_embed = decode_individuals(r.feature_map, r.grid_h, r.grid_w);
    r.part_queries = make_part_queries(r.ind_embed);
    enhance(r.part_queries, r.feature_map, r.grid_h, r.grid_w, r.part_embed, r.part_attn);
    r.aware_embed = fuse(r.ind_embed, r.part_embed);
    r.group_embed = decode_groups(r.aware_embed, r.feature_map, r.grid_h, r.grid_w);
    r.ind_boxes = box_mlp(params_, "head.ind_box", r.ind_embed);
    r.objectness = linear(r.ind_embed, params_.at("head.obj.w"), params_.at("head.obj.b"));
    r.group_boxes = box_mlp(params_, "head.grp_box", r.group_embed);
    r.class_logits = linear(r.group_embed, params_.at("head.cls.w"), params_.at("head.cls.b"));
    r.similarity = this->similarity(r.group_embed, r.ind_embed);
    return r;
}

PredictionSet ForwardResult::to_predictions() const {
    PredictionSet p;
    const std::size_t ni = ind_boxes.rows(), ng = group_boxes.rows();
    const std::size_t nc = class_logits.cols();
    for (std::size_t i = 0; i < ni; ++i) {
        const double* b = &ind_boxes.val()[i * 4];
        p.individual_boxes.emplace_back(b[0], b[1], b[2], b[3]);
        p.objectness.push_back(1.0 / (1.0 + std::exp(-objectness.val()[i])));
    }
    for (std::size_t g = 0; g < ng; ++g) {
        const double* b = &group_boxes.val()[g * 4];
        p.group_boxes.emplace_back(b[0], b[1], b[2], b[3]);
        p.class_logits.emplace_back(class_logits.val().begin() + g * nc,
                                    class_logits.val().begin() + (g + 1) * nc);
        p.similarity.emplace_back(similarity.val().begin() + g * ni,
                                  similarity.val().begin() + (g + 1) * ni);
    }
    return p;
}

}  // namespace sid
