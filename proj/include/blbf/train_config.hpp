#pragma once

#include <cstdint>
#include <vector>

namespace blbf {

/// Mini-batch gradient descent settings shared by every trainer.
///
/// lambda_grid entries are translation fractions strictly inside (0, 1);
/// trainers map them affinely onto the observed loss range (the identity map
/// for binary 0/1 losses).
struct TrainConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    int batch_size = 64;
    int epochs = 60;
    std::uint64_t seed = 1;
    std::vector<double> lambda_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    double propensity_floor = 1e-3;

    void validate() const;  // throws DataError
};

}  // namespace blbf
