#include "sid/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sid {
namespace {

constexpr const char* kMagic = "SIDCKPT1";

void write_blob(std::ostream& os, const std::string& name,
                const std::vector<double>& data) {
    os << name << " " << data.size() << "\n";
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
    os << "\n";
}

std::pair<std::string, std::vector<double>> read_blob(std::istream& is) {
    std::string name;
    std::size_t n = 0;
    if (!(is >> name >> n)) throw std::runtime_error("checkpoint: truncated blob header");
    is.get();  // newline
    std::vector<double> data(n);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated blob " + name);
    is.get();  // trailing newline
    return {std::move(name), std::move(data)};
}

std::map<std::string, int> config_kv(const ModelConfig& c) {
    return {{"embed_dim", c.embed_dim},
            {"num_individual_queries", c.num_individual_queries},
            {"num_group_queries", c.num_group_queries},
            {"num_parts", c.num_parts},
            {"num_classes", c.num_classes},
            {"encoder_layers", c.encoder_layers},
            {"individual_decoder_layers", c.individual_decoder_layers},
            {"enhancer_layers", c.enhancer_layers},
            {"group_decoder_layers", c.group_decoder_layers},
            {"heads", c.heads},
            {"ffn_dim", c.ffn_dim},
            {"stride", c.stride},
            {"stem_c1", c.stem_c1},
            {"stem_c2", c.stem_c2},
            {"stem_c3", c.stem_c3}};
}

void apply_config_kv(ModelConfig& c, const std::string& k, int v) {
    if (k == "embed_dim") c.embed_dim = v;
    else if (k == "num_individual_queries") c.num_individual_queries = v;
    else if (k == "num_group_queries") c.num_group_queries = v;
    else if (k == "num_parts") c.num_parts = v;
    else if (k == "num_classes") c.num_classes = v;
    else if (k == "encoder_layers") c.encoder_layers = v;
    else if (k == "individual_decoder_layers") c.individual_decoder_layers = v;
    else if (k == "enhancer_layers") c.enhancer_layers = v;
    else if (k == "group_decoder_layers") c.group_decoder_layers = v;
    else if (k == "heads") c.heads = v;
    else if (k == "ffn_dim") c.ffn_dim = v;
    else if (k == "stride") c.stride = v;
    else if (k == "stem_c1") c.stem_c1 = v;
    else if (k == "stem_c2") c.stem_c2 = v;
    else if (k == "stem_c3") c.stem_c3 = v;
    else throw std::runtime_error("checkpoint: unknown config key " + k);
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const OptimizerState* optim, std::int64_t global_step) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os << kMagic << "\n";
    auto kv = config_kv(model.config());
    os << "config " << kv.size() << "\n";
    for (const auto& [k, v] : kv) os << k << " " << v << "\n";
    os << "global_step " << global_step << "\n";
    os << "weights " << model.params().all().size() << "\n";
    for (const auto& [name, var] : model.params().all()) write_blob(os, name, var.val());
    if (optim) {
        os << "optim " << optim->m.size() << " " << optim->step << "\n";
        for (const auto& [name, m] : optim->m) write_blob(os, name, m);
        for (const auto& [name, v] : optim->v) write_blob(os, name, v);
    } else {
        os << "optim 0 0\n";
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path);

    Checkpoint ck;
    std::string tag;
    std::size_t n = 0;
    is >> tag >> n;
    if (tag != "config") throw std::runtime_error("checkpoint: expected config section");
    for (std::size_t i = 0; i < n; ++i) {
        std::string k;
        int v = 0;
        is >> k >> v;
        apply_config_kv(ck.config, k, v);
    }
    is >> tag >> ck.global_step;
    if (tag != "global_step") throw std::runtime_error("checkpoint: expected global_step");
    is >> tag >> n;
    if (tag != "weights") throw std::runtime_error("checkpoint: expected weights section");
    is.get();
    for (std::size_t i = 0; i < n; ++i) ck.weights.insert(read_blob(is));
    std::size_t n_opt = 0;
    std::int64_t opt_step = 0;
    is >> tag >> n_opt >> opt_step;
    if (tag != "optim") throw std::runtime_error("checkpoint: expected optim section");
    is.get();
    if (n_opt > 0) {
        OptimizerState st;
        st.step = opt_step;
        for (std::size_t i = 0; i < n_opt; ++i) st.m.insert(read_blob(is));
        for (std::size_t i = 0; i < n_opt; ++i) st.v.insert(read_blob(is));
        ck.optim = std::move(st);
    }
    return ck;
}

void restore_weights(Model& model, const Checkpoint& ck) {
    auto here = config_kv(model.config());
    auto there = config_kv(ck.config);
    for (const auto& [k, v] : here) {
        if (there.at(k) != v) {
            std::ostringstream msg;
            msg << "checkpoint: config mismatch on " << k << " (model " << v
                << ", checkpoint " << there.at(k) << ")";
            throw std::runtime_error(msg.str());
        }
    }
    for (auto& [name, var] : model.params().all()) {
        auto it = ck.weights.find(name);
        if (it == ck.weights.end())
            throw std::runtime_error("checkpoint: missing tensor " + name);
        if (it->second.size() != var.size())
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        var.val() = it->second;
    }
}

}  // namespace sid
