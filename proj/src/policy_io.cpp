#include <cmath>
#include <cstdlib>
#include <sstream>

#include "blbf/errors.hpp"
#include "blbf/policy.hpp"
#include "blbf/report.hpp"

namespace blbf {

namespace {

// Line-based "key value" document; params follow as one decimal per line.
struct FieldReader {
    std::istringstream in;
    std::string source;

    explicit FieldReader(const std::string& text, std::string src)
        : in(text), source(std::move(src)) {}

    std::string line() {
        std::string l;
        if (!std::getline(in, l)) throw DataError(source + ": truncated model file");
        if (!l.empty() && l.back() == '\r') l.pop_back();
        return l;
    }

    std::string field(const std::string& key) {
        const std::string l = line();
        const auto space = l.find(' ');
        if (space == std::string::npos || l.substr(0, space) != key)
            throw DataError(source + ": expected '" + key + " ...', got '" + l + "'");
        return l.substr(space + 1);
    }

    long int_field(const std::string& key) {
        const std::string v = field(key);
        char* end = nullptr;
        const long x = std::strtol(v.c_str(), &end, 10);
        if (end == v.c_str() || *end != '\0')
            throw DataError(source + ": bad integer for '" + key + "': " + v);
        return x;
    }

    std::uint64_t u64_field(const std::string& key) {
        const std::string v = field(key);
        char* end = nullptr;
        const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
        if (end == v.c_str() || *end != '\0')
            throw DataError(source + ": bad integer for '" + key + "': " + v);
        return x;
    }

    std::vector<double> param_block(std::size_t count) {
        std::vector<double> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::string l = line();
            char* end = nullptr;
            const double v = std::strtod(l.c_str(), &end);
            if (end == l.c_str() || *end != '\0' || !std::isfinite(v))
                throw DataError(source + ": bad parameter value '" + l + "'");
            out.push_back(v);
        }
        return out;
    }
};

void append_params(std::string& out, std::span<const double> params) {
    out += "params " + std::to_string(params.size()) + "\n";
    for (double v : params) {
        out += format_double(v);
        out += '\n';
    }
}

}  // namespace

std::string policy_to_string(const SoftmaxPolicy& policy) {
    const PolicyArch& a = policy.arch();
    std::string out = "blbf-policy v1\n";
    out += "kind softmax\n";
    out += std::string("arch ") + (a.hidden > 0 ? "mlp" : "linear") + "\n";
    out += "feature_dim " + std::to_string(a.input_dim) + "\n";
    out += "hidden " + std::to_string(a.hidden) + "\n";
    out += "actions " + std::to_string(a.n_actions) + "\n";
    out += "bias " + std::to_string(a.bias ? 1 : 0) + "\n";
    out += "featurizer " + to_string(policy.featurizer.mode) + "\n";
    out += "token_width " + std::to_string(policy.featurizer.token_width) + "\n";
    out += "static_dim " + std::to_string(policy.featurizer.static_dim) + "\n";
    out += "seed " + std::to_string(policy.seed()) + "\n";
    append_params(out, policy.params());
    return out;
}

SoftmaxPolicy policy_from_string(const std::string& text) {
    FieldReader r(text, "policy");
    if (r.line() != "blbf-policy v1") throw DataError("not a blbf-policy v1 document");
    if (r.field("kind") != "softmax") throw DataError("model kind is not 'softmax'");
    const std::string arch_tag = r.field("arch");
    PolicyArch arch;
    arch.input_dim = static_cast<int>(r.int_field("feature_dim"));
    arch.hidden = static_cast<int>(r.int_field("hidden"));
    arch.n_actions = static_cast<int>(r.int_field("actions"));
    arch.bias = r.int_field("bias") != 0;
    if ((arch.hidden > 0) != (arch_tag == "mlp"))
        throw DataError("arch tag '" + arch_tag + "' disagrees with hidden size " +
                        std::to_string(arch.hidden));
    Featurizer f;
    f.mode = featurizer_mode_from_string(r.field("featurizer"));
    f.token_width = static_cast<int>(r.int_field("token_width"));
    f.static_dim = static_cast<int>(r.int_field("static_dim"));
    const std::uint64_t seed = r.u64_field("seed");
    const auto n_params = static_cast<std::size_t>(r.int_field("params"));
    if (n_params != arch.n_params())
        throw DataError("parameter count " + std::to_string(n_params) +
                        " does not match architecture");
    SoftmaxPolicy policy = make_policy(arch, r.param_block(n_params), seed);
    policy.featurizer = f;
    return policy;
}

void save_policy(const std::string& path, const SoftmaxPolicy& policy) {
    write_file_atomic(path, policy_to_string(policy));
}

SoftmaxPolicy load_policy(const std::string& path) {
    try {
        return policy_from_string(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::string loss_model_to_string(const LossModel& model) {
    std::string out = "blbf-policy v1\n";
    out += "kind lossmodel\n";
    out += std::string("arch ") + (model.hidden() > 0 ? "mlp" : "linear") + "\n";
    out += "feature_dim " + std::to_string(model.feature_dim()) + "\n";
    out += "hidden " + std::to_string(model.hidden()) + "\n";
    out += "actions " + std::to_string(model.n_actions()) + "\n";
    out += "bias " + std::to_string(model.bias() ? 1 : 0) + "\n";
    out += "seed " + std::to_string(model.seed()) + "\n";
    append_params(out, model.params());
    return out;
}

LossModel loss_model_from_string(const std::string& text) {
    FieldReader r(text, "loss model");
    if (r.line() != "blbf-policy v1") throw DataError("not a blbf-policy v1 document");
    if (r.field("kind") != "lossmodel") throw DataError("model kind is not 'lossmodel'");
    const std::string arch_tag = r.field("arch");
    const int feature_dim = static_cast<int>(r.int_field("feature_dim"));
    const int hidden = static_cast<int>(r.int_field("hidden"));
    const int actions = static_cast<int>(r.int_field("actions"));
    const bool bias = r.int_field("bias") != 0;
    if ((hidden > 0) != (arch_tag == "mlp"))
        throw DataError("arch tag disagrees with hidden size");
    const std::uint64_t seed = r.u64_field("seed");
    const auto n_params = static_cast<std::size_t>(r.int_field("params"));
    return make_loss_model(feature_dim, actions, hidden, bias, r.param_block(n_params), seed);
}

void save_loss_model(const std::string& path, const LossModel& model) {
    write_file_atomic(path, loss_model_to_string(model));
}

LossModel load_loss_model(const std::string& path) {
    try {
        return loss_model_from_string(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

}  // namespace blbf
