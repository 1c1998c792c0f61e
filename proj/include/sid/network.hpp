// The model: convolutional stem + transformer encoder, individual
// decoder, per-individual part-query enhancer, fusion, group decoder,
// similarity head and prediction heads.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sid/image.hpp"
#include "sid/inference.hpp"
#include "sid/tensor.hpp"

namespace sid {

struct ModelConfig {
    int embed_dim = 64;       // D
    int num_individual_queries = 12;  // N_I
    int num_group_queries = 16;       // N_G
    int num_parts = 13;               // P
    int num_classes = 8;              // N_C
    int encoder_layers = 2;
    int individual_decoder_layers = 2;
    int enhancer_layers = 2;
    int group_decoder_layers = 2;
    int heads = 4;
    int ffn_dim = 128;
    int stride = 8;  // total stem stride (three stride-2 convs)
    int stem_c1 = 16, stem_c2 = 32, stem_c3 = 64;

    void validate() const;

    // Full-scale profile from the reference configuration.
    static ModelConfig full_scale();
};

// Named parameter set; iteration order is the (sorted) name order, so
// optimizer and checkpoint traversals are deterministic.
class ParamStore {
public:
    ad::Var make(const std::string& name, std::size_t rows, std::size_t cols,
                 std::uint64_t& rng, double scale = -1.0);  // scale<0 => xavier
    ad::Var zeros(const std::string& name, std::size_t rows, std::size_t cols);
    ad::Var values(const std::string& name, std::size_t rows, std::size_t cols,
                   std::vector<double> v);
    ad::Var& at(const std::string& name);
    const std::map<std::string, ad::Var>& all() const { return params_; }
    std::map<std::string, ad::Var>& all() { return params_; }

private:
    std::map<std::string, ad::Var> params_;
};

struct ForwardResult {
    int grid_h = 0, grid_w = 0;
    ad::Var feature_map;   // (H*W, D)
    ad::Var ind_embed;     // E_I (N_I, D)
    ad::Var part_queries;  // Q_P (N_I*P, D)
    ad::Var part_embed;    // E_P (N_I*P, D)
    ad::Var part_attn;     // A (N_I*P, H*W), final enhancer layer, head-averaged
    ad::Var aware_embed;   // E_A (N_I, D)
    ad::Var group_embed;   // E_G (N_G, D)
    ad::Var ind_boxes;     // (N_I, 4) sigmoid cxcywh
    ad::Var objectness;    // (N_I, 1) logits
    ad::Var group_boxes;   // (N_G, 4) sigmoid cxcywh
    ad::Var class_logits;  // (N_G, N_C)
    ad::Var similarity;    // S (N_G, N_I) logits

    PredictionSet to_predictions() const;
};

class Model {
public:
    Model(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Full pipeline on one image; throws if the resolution is not
    // divisible by the stem stride.
    ForwardResult forward(const Image& img) const;

    // Stages, exposed for targeted tests.
    ad::Var encode(const Image& img, int& grid_h, int& grid_w) const;
    ad::Var decode_individuals(const ad::Var& fmap, int gh, int gw) const;
    ad::Var make_part_queries(const ad::Var& ind_embed) const;
    void enhance(const ad::Var& part_q, const ad::Var& fmap, int gh, int gw,
                 ad::Var& part_embed, ad::Var& part_attn) const;
    ad::Var fuse(const ad::Var& ind_embed, const ad::Var& part_embed) const;
    ad::Var decode_groups(const ad::Var& aware_embed, const ad::Var& fmap, int gh,
                          int gw) const;
    ad::Var similarity(const ad::Var& group_embed, const ad::Var& ind_embed) const;

private:
    ModelConfig cfg_;
    mutable ParamStore params_;
};

// Fixed 2-D sinusoidal positional encoding, (H*W, D).
std::vector<double> sinusoidal_position_encoding(int grid_h, int grid_w, int dim);

}  // namespace sid
