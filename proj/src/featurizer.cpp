#include "blbf/featurizer.hpp"

#include "blbf/errors.hpp"

namespace blbf {

FeaturizerMode featurizer_mode_from_string(const std::string& s) {
    if (s == "mean-pool") return FeaturizerMode::MeanPool;
    if (s == "last-step") return FeaturizerMode::LastStep;
    if (s == "mean-pool-concat-static") return FeaturizerMode::MeanPoolConcatStatic;
    throw DataError("unknown featurizer mode: " + s);
}

std::string to_string(FeaturizerMode mode) {
    switch (mode) {
        case FeaturizerMode::MeanPool: return "mean-pool";
        case FeaturizerMode::LastStep: return "last-step";
        case FeaturizerMode::MeanPoolConcatStatic: return "mean-pool-concat-static";
    }
    throw DataError("bad featurizer mode");
}

int Featurizer::output_dim() const {
    switch (mode) {
        case FeaturizerMode::MeanPool:
        case FeaturizerMode::LastStep: return token_width;
        case FeaturizerMode::MeanPoolConcatStatic: return token_width + static_dim;
    }
    throw DataError("bad featurizer mode");
}

std::vector<double> Featurizer::apply(const std::vector<std::vector<double>>& sequence,
                                      const std::vector<double>& static_features) const {
    if (sequence.empty()) throw DataError("featurize: empty sequence");
    for (const auto& row : sequence)
        if (static_cast<int>(row.size()) != token_width)
            throw DataError("featurize: token width " + std::to_string(row.size()) +
                            " != " + std::to_string(token_width));

    std::vector<double> out;
    switch (mode) {
        case FeaturizerMode::LastStep:
            out = sequence.back();
            break;
        case FeaturizerMode::MeanPool:
        case FeaturizerMode::MeanPoolConcatStatic: {
            out.assign(token_width, 0.0);
            for (const auto& row : sequence)
                for (int j = 0; j < token_width; ++j) out[j] += row[j];
            const double inv = 1.0 / static_cast<double>(sequence.size());
            for (double& v : out) v *= inv;
            if (mode == FeaturizerMode::MeanPoolConcatStatic) {
                if (static_cast<int>(static_features.size()) != static_dim)
                    throw DataError("featurize: static width " +
                                    std::to_string(static_features.size()) + " != " +
                                    std::to_string(static_dim));
                out.insert(out.end(), static_features.begin(), static_features.end());
            }
            break;
        }
    }
    return out;
}

std::vector<double> featurize_all(const Featurizer& f,
                                  std::span<const SupervisedSample> samples) {
    const int d = f.output_dim();
    std::vector<double> X(samples.size() * static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::vector<double> row = f.apply(samples[i]);
        std::copy(row.begin(), row.end(), X.begin() + static_cast<std::ptrdiff_t>(i) * d);
    }
    return X;
}

}  // namespace blbf
