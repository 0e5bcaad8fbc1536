#pragma once

#include <string>
#include <vector>

#include "blbf/dataset.hpp"

namespace blbf {

/// Fixed map from a variable-length sequence (plus optional static features)
/// to a flat context vector. Stands in for a learned sequence encoder; the
/// policy architecture downstream is a pluggable choice.
enum class FeaturizerMode { MeanPool, LastStep, MeanPoolConcatStatic };

FeaturizerMode featurizer_mode_from_string(const std::string& s);
std::string to_string(FeaturizerMode mode);

struct Featurizer {
    FeaturizerMode mode = FeaturizerMode::MeanPool;
    int token_width = 0;
    int static_dim = 0;  // used by MeanPoolConcatStatic only

    int output_dim() const;

    std::vector<double> apply(const std::vector<std::vector<double>>& sequence,
                              const std::vector<double>& static_features) const;
    std::vector<double> apply(const SupervisedSample& s) const {
        return apply(s.sequence, s.static_features);
    }
};

/// Row-major matrix of featurized samples (one row per sample).
std::vector<double> featurize_all(const Featurizer& f,
                                  std::span<const SupervisedSample> samples);

}  // namespace blbf
