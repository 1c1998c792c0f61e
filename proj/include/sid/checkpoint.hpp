// Single-file model checkpoint: config, weights, and (optionally) the
// optimizer moment estimates plus the global step, so training can
// resume bit-identically.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sid/network.hpp"

namespace sid {

struct OptimizerState {
    // First/second moment per parameter, keyed by parameter name.
    std::map<std::string, std::vector<double>> m;
    std::map<std::string, std::vector<double>> v;
    std::int64_t step = 0;  // Adam timestep (number of updates applied)
};

struct Checkpoint {
    ModelConfig config;
    std::map<std::string, std::vector<double>> weights;
    std::optional<OptimizerState> optim;
    std::int64_t global_step = 0;
};

void save_checkpoint(const std::string& path, const Model& model,
                     const OptimizerState* optim, std::int64_t global_step);

Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint weights into the model; throws if the stored config
// is incompatible or any tensor is missing/mis-shaped.
void restore_weights(Model& model, const Checkpoint& ck);

}  // namespace sid
