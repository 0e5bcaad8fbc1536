// blbf command-line tool: reproducible pipelines over the library modules.
//
// Exit codes: 0 success, 2 usage, 3 data validation, 4 numeric failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blbf/conversion.hpp"
#include "blbf/dataset.hpp"
#include "blbf/errors.hpp"
#include "blbf/estimators.hpp"
#include "blbf/evaluation.hpp"
#include "blbf/kernels.hpp"
#include "blbf/policy.hpp"
#include "blbf/report.hpp"
#include "blbf/rng.hpp"
#include "blbf/training.hpp"
#include "blbf/version.hpp"

namespace {

using namespace blbf;
namespace fs = std::filesystem;

using KvList = std::vector<std::pair<std::string, std::string>>;

void meta_section(ReportDoc& doc, const std::string& command, const KvList& options,
                  std::uint64_t seed) {
    doc.section("meta");
    doc.kv("tool", std::string(kToolName) + " " + kToolVersion);
    doc.kv("command", command);
    doc.kv("config_digest", hex64(config_digest(options)));
    doc.kv("seed", static_cast<std::int64_t>(seed));
}

std::string out_path(const std::string& out_dir, const std::string& name) {
    fs::create_directories(out_dir);
    return (fs::path(out_dir) / name).string();
}

std::vector<double> parse_lambda_grid(const std::string& text) {
    double start = 0.0, stop = 0.0, step = 0.0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3)
        throw CLI::ValidationError("--lambda-grid", "expected start:stop:step");
    if (!(step > 0.0) || stop < start)
        throw CLI::ValidationError("--lambda-grid", "need step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::llround((stop - start) / step)) + 1;
    std::vector<double> grid;
    for (std::size_t i = 0; i < count; ++i)
        grid.push_back(start + static_cast<double>(i) * step);
    return grid;
}

std::pair<double, double> parse_band(const std::string& text) {
    double lo = 0.0, hi = 0.0;
    if (std::sscanf(text.c_str(), "%lf:%lf", &lo, &hi) != 2)
        throw CLI::ValidationError("--band", "expected lo:hi");
    return {lo, hi};
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::string task = "counting";
    std::uint64_t n = 10000;
    int classes = 3;
    int vocab = 10;
    int len_mean = 20;
    int len_spread = 5;
    std::string idx_images, idx_labels;
    std::uint64_t seed = 1;
    std::string out = ".";
};

int run_generate(const GenerateArgs& a) {
    std::vector<SupervisedSample> samples;
    if (a.task == "counting") {
        samples = generate_counting_task(a.n, a.classes, a.vocab, a.len_mean, a.len_spread,
                                         a.seed);
    } else if (a.task == "idx") {
        samples = load_idx_pair(a.idx_images, a.idx_labels);
    } else {
        throw DataError("unknown task: " + a.task);
    }
    save_supervised_jsonl(out_path(a.out, "supervised.jsonl"), samples);
    save_labels(out_path(a.out, "labels.txt"), samples);

    int n_classes = 0;
    for (const auto& s : samples) n_classes = std::max(n_classes, s.label + 1);
    std::vector<std::size_t> counts(n_classes, 0);
    for (const auto& s : samples) ++counts[s.label];
    for (int c = 0; c < n_classes; ++c)
        std::cout << "class " << c << ": " << counts[c] << "\n";

    KvList options = {{"task", a.task},
                      {"n", std::to_string(a.n)},
                      {"classes", std::to_string(a.classes)},
                      {"vocab", std::to_string(a.vocab)},
                      {"len_mean", std::to_string(a.len_mean)},
                      {"len_spread", std::to_string(a.len_spread)},
                      {"idx_images", a.idx_images},
                      {"idx_labels", a.idx_labels},
                      {"seed", std::to_string(a.seed)}};
    ReportDoc doc;
    meta_section(doc, "generate", options, a.seed);
    doc.section("dataset");
    doc.kv("samples", samples.size());
    doc.kv("classes", n_classes);
    for (int c = 0; c < n_classes; ++c) doc.kv("class_" + std::to_string(c), counts[c]);
    write_file_atomic(out_path(a.out, "generate_summary.txt"), doc.str());
    return 0;
}

// ---------------------------------------------------------------------------
// logpolicy
// ---------------------------------------------------------------------------

struct LogPolicyArgs {
    std::string data;
    std::string featurizer = "mean-pool";
    double subset_fraction = 0.05;
    std::string band = "0.60:0.72";
    std::uint64_t seed = 1;
    std::string out = ".";
};

int run_logpolicy(const LogPolicyArgs& a) {
    const std::vector<SupervisedSample> samples = load_supervised_jsonl(a.data);
    Featurizer featurizer;
    featurizer.mode = featurizer_mode_from_string(a.featurizer);
    featurizer.token_width = static_cast<int>(samples.front().sequence.front().size());
    featurizer.static_dim = static_cast<int>(samples.front().static_features.size());

    LoggingPolicyResult result = train_logging_policy(samples, featurizer, a.subset_fraction,
                                                      parse_band(a.band), a.seed);
    save_policy(out_path(a.out, "logging_policy.txt"), result.policy);

    std::string subset_lines;
    std::vector<std::size_t> sorted = result.subset_indices;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i : sorted) subset_lines += std::to_string(i) + "\n";
    write_file_atomic(out_path(a.out, "logging_subset.txt"), subset_lines);

    KvList options = {{"data", a.data},
                      {"featurizer", a.featurizer},
                      {"subset_fraction", format_double(a.subset_fraction)},
                      {"band", a.band},
                      {"seed", std::to_string(a.seed)}};
    ReportDoc doc;
    meta_section(doc, "logpolicy", options, a.seed);
    doc.section("logging_policy");
    doc.kv("checkpoint_epoch", result.checkpoint_epoch);
    doc.kv("heldout_accuracy", result.heldout_accuracy);
    doc.kv("subset_size", result.subset_indices.size());
    write_file_atomic(out_path(a.out, "logpolicy_summary.txt"), doc.str());
    std::cout << "checkpoint epoch " << result.checkpoint_epoch << ", held-out accuracy "
              << format_double(result.heldout_accuracy) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// convert
// ---------------------------------------------------------------------------

struct ConvertArgs {
    std::string data;
    std::string policy;
    std::string exclude;
    std::uint64_t seed = 1;
    std::string out = ".";
};

int run_convert(const ConvertArgs& a) {
    std::vector<SupervisedSample> samples = load_supervised_jsonl(a.data);
    const SoftmaxPolicy logging = load_policy(a.policy);

    if (!a.exclude.empty()) {
        std::set<std::size_t> skip;
        for (int idx : load_labels(a.exclude)) skip.insert(static_cast<std::size_t>(idx));
        std::vector<SupervisedSample> kept;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (!skip.count(i)) kept.push_back(std::move(samples[i]));
        samples = std::move(kept);
        if (samples.empty()) throw DataError("exclusion list removed every sample");
    }

    BanditConversion conv = convert_to_bandit(samples, logging.featurizer, logging, a.seed);
    save_logged_csv(out_path(a.out, "logged.csv"), conv.data);
    {
        std::string lines;
        for (int y : conv.labels) lines += std::to_string(y) + "\n";
        write_file_atomic(out_path(a.out, "labels.txt"), lines);
    }

    std::vector<double> losses = conv.data.losses();
    const double mean_loss = kern::pairwise_sum(losses.data(), losses.size()) /
                             static_cast<double>(losses.size());
    std::vector<std::size_t> action_counts(conv.data.n_actions, 0);
    for (const auto& s : conv.data.samples) ++action_counts[s.action];

    KvList options = {{"data", a.data},
                      {"policy", a.policy},
                      {"exclude", a.exclude},
                      {"seed", std::to_string(a.seed)}};
    ReportDoc doc;
    meta_section(doc, "convert", options, a.seed);
    doc.section("conversion");
    doc.kv("samples", conv.data.samples.size());
    doc.kv("actions", conv.data.n_actions);
    doc.kv("mean_loss", mean_loss);
    doc.kv("dataset_hash", hex64(dataset_hash(conv.data)));
    for (int c = 0; c < conv.data.n_actions; ++c)
        doc.kv("action_" + std::to_string(c), action_counts[c]);
    write_file_atomic(out_path(a.out, "conversion_summary.txt"), doc.str());
    std::cout << "mean loss " << format_double(mean_loss) << " over "
              << conv.data.samples.size() << " samples\n";
    for (int c = 0; c < conv.data.n_actions; ++c)
        std::cout << "action " << c << ": " << action_counts[c] << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string method = "etips";
    std::string propensities;  // logged | estimated; default depends on method
    std::string lambda_grid = "0.1:0.9:0.1";
    int hidden = 64;
    double lr = 0.1;
    double momentum = 0.9;
    int batch = 64;
    int epochs = 60;
    double floor = 1e-3;
    int actions = 0;  // 0 = infer from data
    std::uint64_t seed = 1;
    std::string out = ".";
};

void audit_runs(ReportDoc& doc, const std::vector<TrainRun>& runs, int winner) {
    for (std::size_t j = 0; j < runs.size(); ++j) {
        const TrainRun& run = runs[j];
        doc.section("candidate_" + std::to_string(j));
        doc.kv("lambda", run.lambda);
        doc.kv("tmf", run.tmf_final);
        doc.kv("snips", run.snips);
        doc.kv("admitted", run.admitted ? 1 : 0);
        doc.kv("verdict", to_string(diagnose_overfit(run.tmf_final)));
        doc.kv("winner", static_cast<int>(j) == winner ? 1 : 0);
        for (std::size_t e = 0; e < run.objective_trace.size(); ++e)
            doc.kv("epoch_" + std::to_string(e + 1), run.objective_trace[e]);
    }
}

int run_train(const TrainArgs& a) {
    CsvSchema schema;
    if (a.actions > 0) schema.n_actions_override = a.actions;
    const LoggedDataset data = load_logged_csv(a.data, schema);

    std::string prop_mode = a.propensities;
    if (prop_mode.empty())
        prop_mode = (a.method == "ips" || a.method == "tips") ? "logged" : "estimated";
    if (prop_mode != "logged" && prop_mode != "estimated")
        throw DataError("--propensities must be 'logged' or 'estimated'");

    TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.momentum = a.momentum;
    cfg.batch_size = a.batch;
    cfg.epochs = a.epochs;
    cfg.seed = a.seed;
    cfg.propensity_floor = a.floor;
    cfg.lambda_grid = parse_lambda_grid(a.lambda_grid);
    const PolicyArch arch{data.feature_dim, a.hidden, data.n_actions, true};

    KvList options = {{"data", a.data},
                      {"method", a.method},
                      {"propensities", prop_mode},
                      {"lambda_grid", a.lambda_grid},
                      {"hidden", std::to_string(a.hidden)},
                      {"lr", format_double(a.lr)},
                      {"momentum", format_double(a.momentum)},
                      {"batch", std::to_string(a.batch)},
                      {"epochs", std::to_string(a.epochs)},
                      {"floor", format_double(a.floor)},
                      {"actions", std::to_string(a.actions)},
                      {"seed", std::to_string(a.seed)}};
    ReportDoc doc;
    meta_section(doc, "train", options, a.seed);
    doc.section("input");
    doc.kv("dataset_hash", hex64(dataset_hash(data)));
    doc.kv("samples", data.size());
    doc.kv("actions", data.n_actions);
    doc.kv("method", a.method);
    doc.kv("propensity_mode", prop_mode);

    if (a.method == "rp") {
        save_policy(out_path(a.out, "policy.txt"), baseline_policy(BaselineKind::Random, data));
    } else if (a.method == "dm") {
        LossModelResult lm = train_loss_model(data, a.hidden, cfg);
        save_loss_model(out_path(a.out, "loss_model.txt"), lm.model);
        doc.section("loss_model");
        for (std::size_t e = 0; e < lm.bce_trace.size(); ++e)
            doc.kv("epoch_" + std::to_string(e + 1), lm.bce_trace[e]);
    } else if (a.method == "ips" || a.method == "tips" || a.method == "eips" ||
               a.method == "etips") {
        std::vector<double> props;
        if (prop_mode == "logged") {
            if (!data.has_propensities())
                throw DataError(
                    "dataset has no propensity column; rerun with --propensities estimated");
            props = data.logged_propensities();
        } else {
            PropensityFit fit = fit_propensity_model(data, data, arch, cfg);
            save_policy(out_path(a.out, "propensity_model.txt"), fit.model);
            doc.section("propensity_model");
            doc.kv("train_accuracy", fit.train_accuracy);
            doc.kv("val_accuracy", fit.val_accuracy);
            doc.kv("clipped", fit.clipped_count);
            props = std::move(fit.propensities);
        }
        const bool translated = (a.method == "tips" || a.method == "etips");
        if (translated) {
            GridTrainResult grid = tips_grid_train(data, props, arch, cfg);
            save_policy(out_path(a.out, "policy.txt"), grid.policy);
            doc.section("grid");
            doc.kv("loss_lo", grid.loss_lo);
            doc.kv("loss_hi", grid.loss_hi);
            doc.kv("winner", grid.winner_index);
            audit_runs(doc, grid.runs, grid.winner_index);
        } else {
            TrainRun run = train_tips(data, props, 0.0, arch, cfg);
            save_policy(out_path(a.out, "policy.txt"), run.policy);
            audit_runs(doc, {run}, run.admitted ? 0 : -1);
        }
    } else {
        throw DataError("unknown method: " + a.method);
    }
    write_file_atomic(out_path(a.out, "train_audit.txt"), doc.str());
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string test;
    std::string propensity_model;
    std::string loss_model;
    std::vector<std::string> policy_specs;  // name=path
    std::string baselines;                  // comma list of rp, mf, dm
    std::string train_data;                 // optional leakage check
    double floor = 1e-3;
    std::uint64_t seed = 1;
    std::string out = ".";
};

int run_evaluate(const EvaluateArgs& a) {
    const LoggedDataset test = load_logged_csv(a.test);
    std::optional<LoggedDataset> train;
    if (!a.train_data.empty()) {
        train = load_logged_csv(a.train_data);
        std::set<std::string> train_groups, shared;
        for (const auto& s : train->samples)
            if (s.group_id) train_groups.insert(*s.group_id);
        for (const auto& s : test.samples)
            if (s.group_id && train_groups.count(*s.group_id)) shared.insert(*s.group_id);
        if (!shared.empty())
            throw DataError("group leakage between train and test: group_id '" +
                            *shared.begin() + "' appears in both");
    }

    const SoftmaxPolicy pm = load_policy(a.propensity_model);
    const LossModel lm = load_loss_model(a.loss_model);

    std::vector<EvalPolicy> rows;
    for (const std::string& spec : a.policy_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw DataError("--policy expects name=path, got '" + spec + "'");
        EvalPolicy row;
        row.name = spec.substr(0, eq);
        row.rule = load_policy(spec.substr(eq + 1));
        row.probabilistic = true;
        rows.push_back(std::move(row));
    }
    for (const std::string& b : split_list(a.baselines)) {
        EvalPolicy row;
        row.name = b;
        if (b == "rp") {
            row.rule = baseline_policy(BaselineKind::Random, test);
            row.probabilistic = true;
        } else if (b == "mf") {
            row.rule = baseline_policy(BaselineKind::MostFrequent, train ? *train : test);
            row.probabilistic = false;  // deterministic point mass
        } else if (b == "dm") {
            row.rule = lm;
            row.probabilistic = false;
        } else {
            throw DataError("unknown baseline: " + b);
        }
        rows.push_back(std::move(row));
    }

    EvaluationReport rep = evaluate_offline(test, rows, pm, lm, pm.featurizer, a.floor);

    KvList options = {{"test", a.test},
                      {"propensity_model", a.propensity_model},
                      {"loss_model", a.loss_model},
                      {"baselines", a.baselines},
                      {"train_data", a.train_data},
                      {"floor", format_double(a.floor)},
                      {"seed", std::to_string(a.seed)}};
    for (const auto& spec : a.policy_specs) options.emplace_back("policy", spec);

    ReportDoc doc;
    meta_section(doc, "evaluate", options, a.seed);
    doc.section("input");
    doc.kv("dataset_hash", hex64(rep.dataset_hash));
    doc.kv("samples", rep.m);
    doc.kv("actions", rep.n_actions);
    doc.kv("propensity_floor", rep.propensity_floor);
    auto cell = [&doc](const std::string& key, const EvalCell& c) {
        if (c.value)
            doc.kv(key, *c.value);
        else
            doc.kv(key, c.marker);
    };
    for (const auto& row : rep.rows) {
        doc.section("policy " + row.name);
        cell("atenp", row.atenp);
        cell("ips", row.ips);
        cell("dr", row.dr);
        cell("tmf", row.tmf);
        if (row.group_one_size) doc.kv("group_one", *row.group_one_size);
        if (row.group_two_size) doc.kv("group_two", *row.group_two_size);
        doc.kv("clipped", row.clipped_count);
        if (!row.verdict.empty()) doc.kv("verdict", row.verdict);
    }
    write_file_atomic(out_path(a.out, "evaluation.txt"), doc.str());
    std::cout << rep.to_table();
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckArgs {
    int instances = 100;
    double step = 1e-5;
    std::uint64_t seed = 7;
    bool inject_sign_flip = false;
};

int run_gradcheck(const GradcheckArgs& a) {
    if (a.instances < 1) throw DataError("--instances must be >= 1");
    Rng rng(a.seed);
    const double lambdas[3] = {0.0, 0.5, 0.9};
    double worst = 0.0;
    for (int i = 0; i < a.instances; ++i) {
        PolicyArch arch;
        arch.input_dim = 1 + rng.below_int(8);
        arch.hidden = (i % 2 == 0) ? 0 : 1 + rng.below_int(8);
        arch.n_actions = 2 + rng.below_int(4);
        arch.bias = rng.below_int(2) == 0;
        SoftmaxPolicy policy = SoftmaxPolicy::random_init(arch, rng.next_u64());

        const int b = 1 + rng.below_int(8);
        std::vector<LoggedSample> batch(b);
        std::vector<double> props(b);
        for (int s = 0; s < b; ++s) {
            batch[s].features.resize(arch.input_dim);
            for (double& f : batch[s].features) f = rng.uniform(-2.0, 2.0);
            batch[s].action = rng.below_int(arch.n_actions);
            batch[s].loss = rng.uniform(-1.0, 2.0);
            props[s] = rng.uniform(0.05, 1.0);
        }
        const double lambda = lambdas[i % 3];

        double err;
        if (a.inject_sign_flip) {
            auto [obj, grad] = tips_objective_and_gradient(policy, batch, props, lambda);
            (void)obj;
            for (double& g : grad) g = -g;
            SoftmaxPolicy probe = policy;
            auto objective = [&]() { return tips_objective(probe, batch, props, lambda); };
            err = fd_max_rel_err(probe.params(), objective, grad, a.step);
        } else {
            err = finite_difference_check(policy, batch, props, lambda, a.step);
        }
        worst = std::max(worst, err);
    }
    const bool pass = worst < 1e-4;
    std::cout << (pass ? "PASS" : "FAIL") << " max_rel_err=" << format_double(worst)
              << "\n";
    return pass ? 0 : 4;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string task = "counting";
    std::uint64_t n = 10000;
    int classes = 3;
    int vocab = 10;
    int len_mean = 20;
    int len_spread = 5;
    std::string idx_images, idx_labels;
    double test_fraction = 0.2;
    std::string methods = "dm,rp,ips,tips,eips,etips,skyline";
    int folds = 5;
    std::string band = "0.60:0.72";
    double subset_fraction = 0.05;
    int hidden = 64;
    double lr = 0.1;
    double momentum = 0.9;
    int batch = 64;
    int epochs = 60;
    std::string lambda_grid = "0.1:0.9:0.1";
    double floor = 1e-3;
    std::uint64_t seed = 1;
    std::string out = ".";
};

int run_simulate(const SimulateArgs& a) {
    TaskSpec task;
    if (a.task == "counting") {
        task.kind = TaskSpec::Kind::Counting;
        task.counting = {a.n, a.classes, a.vocab, a.len_mean, a.len_spread};
    } else if (a.task == "idx") {
        task.kind = TaskSpec::Kind::Idx;
        task.idx_images = a.idx_images;
        task.idx_labels = a.idx_labels;
    } else {
        throw DataError("unknown task: " + a.task);
    }
    task.test_fraction = a.test_fraction;

    StudyConfig config;
    config.hidden = a.hidden;
    config.train.learning_rate = a.lr;
    config.train.momentum = a.momentum;
    config.train.batch_size = a.batch;
    config.train.epochs = a.epochs;
    config.train.lambda_grid = parse_lambda_grid(a.lambda_grid);
    config.train.propensity_floor = a.floor;
    config.logging_band = parse_band(a.band);
    config.logging_subset_fraction = a.subset_fraction;

    std::vector<Method> methods;
    for (const std::string& m : split_list(a.methods)) methods.push_back(method_from_string(m));
    if (methods.empty()) throw DataError("--methods list is empty");

    SimulationReport rep = run_simulation_study(task, methods, a.folds, a.seed, config);

    KvList options = {{"task", a.task},
                      {"n", std::to_string(a.n)},
                      {"classes", std::to_string(a.classes)},
                      {"vocab", std::to_string(a.vocab)},
                      {"len_mean", std::to_string(a.len_mean)},
                      {"len_spread", std::to_string(a.len_spread)},
                      {"test_fraction", format_double(a.test_fraction)},
                      {"methods", a.methods},
                      {"folds", std::to_string(a.folds)},
                      {"band", a.band},
                      {"subset_fraction", format_double(a.subset_fraction)},
                      {"hidden", std::to_string(a.hidden)},
                      {"lr", format_double(a.lr)},
                      {"momentum", format_double(a.momentum)},
                      {"batch", std::to_string(a.batch)},
                      {"epochs", std::to_string(a.epochs)},
                      {"lambda_grid", a.lambda_grid},
                      {"floor", format_double(a.floor)},
                      {"seed", std::to_string(a.seed)}};
    ReportDoc doc;
    meta_section(doc, "simulate", options, a.seed);
    doc.section("logging");
    doc.kv("accuracy_mean", rep.logging_mean);
    doc.kv("accuracy_std", rep.logging_std);
    doc.kv("folds", rep.k);
    for (const auto& m : rep.methods) {
        doc.section("method " + to_string(m.method));
        doc.kv("accuracy_mean", m.mean);
        doc.kv("accuracy_std", m.stddev);
        for (std::size_t f = 0; f < m.fold_accuracies.size(); ++f)
            doc.kv("fold_" + std::to_string(f), m.fold_accuracies[f]);
        for (std::size_t f = 0; f < m.fold_tmfs.size(); ++f)
            doc.kv("tmf_fold_" + std::to_string(f), m.fold_tmfs[f]);
    }
    write_file_atomic(out_path(a.out, "simulation.txt"), doc.str());
    std::cout << rep.to_table();
    return 0;
}

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"batch learning from bandit feedback: train and evaluate policies "
                 "from logged decisions"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "configuration file with one [subcommand] section per command;\nflags given on the command line override file values");

    GenerateArgs gen;
    LogPolicyArgs logp;
    ConvertArgs conv;
    TrainArgs train;
    EvaluateArgs eval;
    GradcheckArgs grad;
    SimulateArgs sim;
    int rc = 0;

    auto* g = app.add_subcommand("generate", "generate a supervised dataset + label sidecar");
    g->add_option("--task", gen.task, "counting | idx")->capture_default_str();
    g->add_option("--n", gen.n, "sample count")->check(CLI::PositiveNumber)
        ->capture_default_str();
    g->add_option("--classes", gen.classes)->capture_default_str();
    g->add_option("--vocab", gen.vocab)->capture_default_str();
    g->add_option("--len-mean", gen.len_mean)->capture_default_str();
    g->add_option("--len-spread", gen.len_spread)->capture_default_str();
    g->add_option("--idx-images", gen.idx_images, "IDX image file (task=idx)");
    g->add_option("--idx-labels", gen.idx_labels, "IDX label file (task=idx)");
    g->add_option("--seed", gen.seed)->capture_default_str();
    g->add_option("--out", gen.out, "output directory")->capture_default_str();
    g->callback([&] { rc = run_generate(gen); });

    auto* l = app.add_subcommand("logpolicy",
                                 "train a deliberately suboptimal logging policy");
    l->add_option("--data", logp.data, "supervised .jsonl file")->required();
    l->add_option("--featurizer", logp.featurizer)->capture_default_str();
    l->add_option("--subset-fraction", logp.subset_fraction)->capture_default_str();
    l->add_option("--band", logp.band, "target accuracy band lo:hi")->capture_default_str();
    l->add_option("--seed", logp.seed)->capture_default_str();
    l->add_option("--out", logp.out)->capture_default_str();
    l->callback([&] { rc = run_logpolicy(logp); });

    auto* c = app.add_subcommand("convert", "supervised-to-bandit conversion");
    c->add_option("--data", conv.data, "supervised .jsonl file")->required();
    c->add_option("--policy", conv.policy, "logging policy file")->required();
    c->add_option("--exclude", conv.exclude, "file of sample indices to exclude");
    c->add_option("--seed", conv.seed)->capture_default_str();
    c->add_option("--out", conv.out)->capture_default_str();
    c->callback([&] { rc = run_convert(conv); });

    auto* t = app.add_subcommand("train", "train a policy from logged bandit data");
    t->add_option("--data", train.data, "logged CSV")->required();
    t->add_option("--method", train.method, "dm | rp | ips | tips | eips | etips")
        ->capture_default_str();
    t->add_option("--propensities", train.propensities, "logged | estimated");
    t->add_option("--lambda-grid", train.lambda_grid, "start:stop:step")
        ->capture_default_str();
    t->add_option("--hidden", train.hidden)->capture_default_str();
    t->add_option("--lr", train.lr)->capture_default_str();
    t->add_option("--momentum", train.momentum)->capture_default_str();
    t->add_option("--batch", train.batch)->capture_default_str();
    t->add_option("--epochs", train.epochs)->capture_default_str();
    t->add_option("--floor", train.floor, "propensity floor")->capture_default_str();
    t->add_option("--actions", train.actions, "override action count");
    t->add_option("--seed", train.seed)->capture_default_str();
    t->add_option("--out", train.out)->capture_default_str();
    t->callback([&] { rc = run_train(train); });

    auto* e = app.add_subcommand("evaluate", "offline estimator report on a test fold");
    e->add_option("--test", eval.test, "logged test CSV")->required();
    e->add_option("--propensity-model", eval.propensity_model)->required();
    e->add_option("--loss-model", eval.loss_model)->required();
    e->add_option("--policy", eval.policy_specs, "name=path (repeatable)");
    e->add_option("--baselines", eval.baselines, "comma list of rp, mf, dm");
    e->add_option("--train-data", eval.train_data, "train CSV for group-leakage check");
    e->add_option("--floor", eval.floor)->capture_default_str();
    e->add_option("--seed", eval.seed)->capture_default_str();
    e->add_option("--out", eval.out)->capture_default_str();
    e->callback([&] { rc = run_evaluate(eval); });

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    gc->add_option("--instances", grad.instances)->capture_default_str();
    gc->add_option("--step", grad.step)->capture_default_str();
    gc->add_option("--seed", grad.seed)->capture_default_str();
    gc->add_flag("--inject-sign-flip", grad.inject_sign_flip,
                 "negate the analytic gradient (mutation check; must FAIL)");
    gc->callback([&] { rc = run_gradcheck(grad); });

    auto* s = app.add_subcommand("simulate", "supervised-to-bandit simulation study");
    s->add_option("--task", sim.task, "counting | idx")->capture_default_str();
    s->add_option("--n", sim.n)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--classes", sim.classes)->capture_default_str();
    s->add_option("--vocab", sim.vocab)->capture_default_str();
    s->add_option("--len-mean", sim.len_mean)->capture_default_str();
    s->add_option("--len-spread", sim.len_spread)->capture_default_str();
    s->add_option("--idx-images", sim.idx_images);
    s->add_option("--idx-labels", sim.idx_labels);
    s->add_option("--test-fraction", sim.test_fraction)->capture_default_str();
    s->add_option("--methods", sim.methods)->capture_default_str();
    s->add_option("--folds", sim.folds)->capture_default_str();
    s->add_option("--band", sim.band)->capture_default_str();
    s->add_option("--subset-fraction", sim.subset_fraction)->capture_default_str();
    s->add_option("--hidden", sim.hidden)->capture_default_str();
    s->add_option("--lr", sim.lr)->capture_default_str();
    s->add_option("--momentum", sim.momentum)->capture_default_str();
    s->add_option("--batch", sim.batch)->capture_default_str();
    s->add_option("--epochs", sim.epochs)->capture_default_str();
    s->add_option("--lambda-grid", sim.lambda_grid)->capture_default_str();
    s->add_option("--floor", sim.floor)->capture_default_str();
    s->add_option("--seed", sim.seed)->capture_default_str();
    s->add_option("--out", sim.out)->capture_default_str();
    s->callback([&] { rc = run_simulate(sim); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
