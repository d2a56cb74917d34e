#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prefopt/datagen.hpp"
#include "prefopt/errors.hpp"
#include "prefopt/log.hpp"
#include "prefopt/loss.hpp"
#include "prefopt/metrics.hpp"
#include "prefopt/optim.hpp"
#include "prefopt/policy.hpp"
#include "prefopt/verify.hpp"

namespace fs = std::filesystem;
using namespace prefopt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read '" + path + "'");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write '" + path + "'");
    out << content;
}

void prepare_output_dir(const std::string& dir, bool overwrite) {
    fs::path p(dir);
    if (fs::exists(p)) {
        if (!fs::is_directory(p)) throw config_error("'" + dir + "' exists and is not a directory");
        if (!fs::is_empty(p) && !overwrite) {
            throw config_error("output directory '" + dir +
                               "' is not empty; pass --overwrite to reuse it");
        }
    } else {
        fs::create_directories(p);
    }
}

struct GenArgs {
    std::string out;
    std::string config_path;
    bool overwrite = false;
    // flag overrides; only applied when the user passed them
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> num_queries, num_responses, tuples_per_query;
    std::optional<std::string> dist;
    std::optional<double> label_noise, prompt_gain;
};

int run_gen(const GenArgs& args) {
    ScenarioSpec spec;
    if (!args.config_path.empty()) spec = ScenarioSpec::from_json(read_text(args.config_path));
    if (args.seed) spec.seed = *args.seed;
    if (args.num_queries) spec.num_queries = *args.num_queries;
    if (args.num_responses) spec.num_responses = *args.num_responses;
    if (args.tuples_per_query) spec.tuples_per_query = *args.tuples_per_query;
    if (args.dist) spec.reward_distribution = RewardDistribution::parse(*args.dist);
    if (args.label_noise) spec.label_noise = *args.label_noise;
    if (args.prompt_gain) spec.prompt_gain = *args.prompt_gain;

    auto [gt, dataset] = generate(spec);
    prepare_output_dir(args.out, args.overwrite);
    const fs::path out(args.out);
    save_jsonl(dataset, (out / "dataset.jsonl").string());
    write_text((out / "ground_truth.json").string(), gt.to_json());
    write_text((out / "scenario.json").string(), spec.to_json());
    std::cout << dataset.size() << " tuples written to " << (out / "dataset.jsonl").string()
              << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::string config_path;
    std::string gt_path;
    std::string init_mode = "auto";  // auto | ref | assumption
    bool overwrite = false;
    std::optional<std::string> method;
    std::optional<double> beta, lambda, lr, grad_clip, prompt_gain;
    std::optional<std::size_t> steps, batch_size, eval_interval;
    std::optional<std::uint64_t> seed;
    bool no_grad_clip = false;
};

TrainConfig make_train_config(const TrainArgs& args) {
    TrainConfig config;
    if (!args.config_path.empty()) config = TrainConfig::from_json(read_text(args.config_path));
    if (args.method) config.method = method_from_string(*args.method);
    if (args.beta) config.beta = *args.beta;
    if (args.lambda) config.lambda = *args.lambda;
    if (args.lr) config.learning_rate = *args.lr;
    if (args.steps) config.steps = *args.steps;
    if (args.batch_size) config.batch_size = *args.batch_size;
    if (args.eval_interval) config.eval_interval = *args.eval_interval;
    if (args.seed) config.seed = *args.seed;
    if (args.grad_clip) config.grad_clip_norm = *args.grad_clip;
    if (args.no_grad_clip) config.grad_clip_norm.reset();
    config.validate();
    return config;
}

struct LoadedExperiment {
    Dataset dataset;
    PolicyTable ref;
    std::optional<PolicyTable> initial;
};

LoadedExperiment load_experiment(const TrainArgs& args, const TrainConfig& config) {
    if (args.data.empty()) throw config_error("missing dataset path (--data)");
    fs::path data_path(args.data);
    fs::path gt_path(args.gt_path);
    if (fs::is_directory(data_path)) {
        if (gt_path.empty()) gt_path = data_path / "ground_truth.json";
        data_path /= "dataset.jsonl";
    }

    LoadedExperiment exp;
    exp.dataset = load_jsonl(data_path.string());

    std::optional<GroundTruth> gt;
    if (!gt_path.empty() && fs::exists(gt_path)) {
        gt = GroundTruth::from_json(read_text(gt_path.string()));
        if (gt->num_queries() != exp.dataset.num_queries ||
            gt->num_responses() != exp.dataset.num_responses) {
            throw config_error("ground truth shape does not match the dataset header");
        }
    }

    std::string mode = args.init_mode;
    if (mode == "auto") mode = gt ? "assumption" : "ref";
    if (mode == "assumption") {
        if (!gt) throw config_error("--init assumption requires a ground-truth sidecar");
        const double gain = args.prompt_gain.value_or(gt->prompt_gain());
        auto [pi0, ref] = make_assumption_satisfying_policies(*gt, config.beta, gain);
        exp.ref = std::move(ref);
        exp.initial = std::move(pi0);
    } else if (mode == "ref") {
        // uniform reference with an identity-offset aug map so the refined
        // losses stay well defined (their refinement is 0 at initialization)
        std::vector<std::size_t> aug_map(exp.dataset.num_queries);
        for (std::size_t i = 0; i < aug_map.size(); ++i) aug_map[i] = exp.dataset.num_queries + i;
        exp.ref = PolicyTable(exp.dataset.num_queries, aug_map, exp.dataset.num_responses, false);
    } else {
        throw config_error("unknown --init mode '" + mode + "' (auto|ref|assumption)");
    }
    return exp;
}

int run_train(const TrainArgs& args) {
    const TrainConfig config = make_train_config(args);
    LoadedExperiment exp = load_experiment(args, config);
    prepare_output_dir(args.out, args.overwrite);
    const fs::path out(args.out);

    std::ofstream csv(out / "metrics.csv");
    csv << metrics_csv_header() << "\n";

    MetricsReport last_report;
    auto on_eval = [&](std::size_t step, double /*batch_loss*/, const MetricsReport& report,
                       const PolicyTable& policy) {
        const double full_loss = evaluate_loss(config.method, policy, exp.ref, exp.dataset.tuples,
                                               config.beta, config.lambda, config.detach_delta)
                                     .loss;
        last_report = report;
        csv << metrics_csv_row(step, full_loss, last_report) << "\n";

        std::ostringstream tag;
        tag << "checkpoint_" << step;
        write_text((out / (tag.str() + ".policy.json")).string(), policy.to_json());
        nlohmann::json meta;
        meta["step"] = step;
        meta["config_hash"] = config.hash_hex();
        meta["metrics"] = nlohmann::json::parse(last_report.to_json());
        write_text((out / (tag.str() + ".meta.json")).string(), meta.dump());
        log::info("step %zu loss %.6f accuracy %.4f", step, full_loss, last_report.accuracy);
    };

    train(config, exp.dataset, exp.ref, on_eval, exp.initial);
    std::cout << last_report.to_json() << "\n";
    return kExitOk;
}

struct SweepArgs {
    TrainArgs train;
    std::string grid = "0,0.1,0.3,0.5,1";
    std::size_t holdout_k = 50;
};

int run_sweep(const SweepArgs& args) {
    TrainConfig base_config = make_train_config(args.train);
    if (base_config.method != Method::sr_dpo && base_config.method != Method::sr_ipo) {
        throw config_error("sweep varies lambda; --method must be sr-dpo or sr-ipo");
    }
    std::vector<double> grid;
    {
        std::stringstream body(args.grid);
        std::string piece;
        while (std::getline(body, piece, ',')) {
            try {
                grid.push_back(std::stod(piece));
            } catch (const std::exception&) {
                throw config_error("bad lambda '" + piece + "' in --grid");
            }
        }
        if (grid.empty()) throw config_error("--grid is empty");
    }

    LoadedExperiment exp = load_experiment(args.train, base_config);
    if (args.holdout_k == 0 || args.holdout_k >= exp.dataset.size()) {
        throw config_error("--holdout-k must lie in [1, dataset size)");
    }

    Dataset holdout{exp.dataset.num_queries, exp.dataset.num_responses, {}};
    Dataset train_split{exp.dataset.num_queries, exp.dataset.num_responses, {}};
    holdout.tuples.assign(exp.dataset.tuples.begin(),
                          exp.dataset.tuples.begin() + static_cast<long>(args.holdout_k));
    train_split.tuples.assign(exp.dataset.tuples.begin() + static_cast<long>(args.holdout_k),
                              exp.dataset.tuples.end());

    prepare_output_dir(args.train.out, args.train.overwrite);
    const fs::path out(args.train.out);
    std::ostringstream summary_name;
    summary_name << "sweep_seed" << base_config.seed << ".csv";
    std::ofstream csv(out / summary_name.str());
    csv << "lambda,status,holdout_accuracy," << metrics_csv_header() << "\n";
    csv.precision(17);

    struct Row {
        double lambda;
        bool ok;
        double holdout_accuracy;
    };
    std::vector<Row> rows;
    for (double lambda : grid) {
        TrainConfig config = base_config;
        config.lambda = lambda;
        try {
            const TrainState state = train(config, train_split, exp.ref, nullptr, exp.initial);
            const double holdout_acc = accuracy(state.policy, exp.ref, holdout, false);
            const double full_loss =
                evaluate_loss(config.method, state.policy, exp.ref, train_split.tuples,
                              config.beta, config.lambda, config.detach_delta)
                    .loss;
            const MetricsReport report = evaluate_metrics(state.policy, exp.ref, train_split);
            csv << lambda << ",ok," << holdout_acc << ","
                << metrics_csv_row(config.steps, full_loss, report) << "\n";
            rows.push_back({lambda, true, holdout_acc});
            log::info("lambda %.3g holdout accuracy %.4f", lambda, holdout_acc);
        } catch (const std::exception& e) {
            std::string reason = e.what();
            for (char& c : reason) {
                if (c == ',' || c == '\n') c = ';';
            }
            csv << lambda << ",error: " << reason << ",,,,,,,,,\n";
            rows.push_back({lambda, false, 0.0});
            log::error("lambda %.3g failed: %s", lambda, e.what());
        }
    }

    // selection: best held-out accuracy, smallest lambda breaking ties
    std::optional<Row> best;
    for (const auto& row : rows) {
        if (!row.ok) continue;
        if (!best || row.holdout_accuracy > best->holdout_accuracy ||
            (row.holdout_accuracy == best->holdout_accuracy && row.lambda < best->lambda)) {
            best = row;
        }
    }
    if (!best) throw config_error("every sweep run failed");
    nlohmann::json selection;
    selection["selected_lambda"] = best->lambda;
    selection["holdout_accuracy"] = best->holdout_accuracy;
    write_text((out / "selection.json").string(), selection.dump());
    std::cout << selection.dump() << "\n";
    return kExitOk;
}

struct VerifyArgs {
    std::uint64_t seed = 2026;
    bool list = false;
    bool flip_delta_sign = false;
    std::vector<std::string> only;
};

int run_verify(const VerifyArgs& args) {
    if (args.list) {
        for (const auto& name : check_names()) std::cout << name << "\n";
        return kExitOk;
    }
    CheckOptions options;
    options.seed = args.seed;
    options.flip_delta_sign = args.flip_delta_sign;
    const auto results = run_checks(options, args.only);
    if (results.empty()) throw config_error("no checks matched --only");

    bool all_passed = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.name << "\n";
        all_passed = all_passed && r.passed;
    }
    if (!all_passed) {
        nlohmann::json report = nlohmann::json::array();
        for (const auto& r : results) {
            if (r.passed) continue;
            nlohmann::json entry;
            entry["check"] = r.name;
            entry["details"] = nlohmann::json::parse(r.details_json);
            report.push_back(std::move(entry));
        }
        std::cout << report.dump() << "\n";
        return kExitCheckFailure;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prefopt: preference-optimization laboratory over tabular softmax policies"};
    app.require_subcommand(1);

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "generate a synthetic preference dataset");
    gen->add_option("--out", gen_args.out, "output directory")->required();
    gen->add_option("--config", gen_args.config_path, "scenario JSON file");
    gen->add_option("--seed", gen_args.seed, "generation seed");
    gen->add_option("--num-queries", gen_args.num_queries, "number of base queries");
    gen->add_option("--num-responses", gen_args.num_responses, "responses per query");
    gen->add_option("--dist", gen_args.dist,
                    "uniform(lo,hi) | gaussian(mu,sigma) | two_cluster(gap_small,gap_large,mix)");
    gen->add_option("--label-noise", gen_args.label_noise, "0 = deterministic labels, >0 = Bradley-Terry draws");
    gen->add_option("--tuples-per-query", gen_args.tuples_per_query, "tuples per query");
    gen->add_option("--prompt-gain", gen_args.prompt_gain, "augmented-context reward strength");
    gen->add_flag("--overwrite", gen_args.overwrite, "reuse a non-empty output directory");

    TrainArgs train_args;
    auto add_train_options = [](CLI::App* cmd, TrainArgs& args) {
        cmd->add_option("--data", args.data, "dataset.jsonl or a directory produced by gen");
        cmd->add_option("--out", args.out, "output directory")->required();
        cmd->add_option("--config", args.config_path, "train config JSON file");
        cmd->add_option("--gt", args.gt_path, "ground-truth sidecar (defaults to the data directory's)");
        cmd->add_option("--init", args.init_mode, "initial policy: auto | ref | assumption");
        cmd->add_option("--method", args.method, "dpo | ipo | sr-dpo | sr-ipo");
        cmd->add_option("--beta", args.beta, "KL strength");
        cmd->add_option("--lambda", args.lambda, "refinement weight");
        cmd->add_option("--lr", args.lr, "learning rate");
        cmd->add_option("--steps", args.steps, "training steps");
        cmd->add_option("--batch-size", args.batch_size, "minibatch size");
        cmd->add_option("--eval-interval", args.eval_interval, "steps between checkpoints");
        cmd->add_option("--seed", args.seed, "training seed");
        cmd->add_option("--grad-clip", args.grad_clip, "gradient norm cap");
        cmd->add_flag("--no-grad-clip", args.no_grad_clip, "disable gradient clipping");
        cmd->add_option("--prompt-gain", args.prompt_gain,
                        "override the sidecar prompt gain for assumption init");
        cmd->add_flag("--overwrite", args.overwrite, "reuse a non-empty output directory");
    };
    auto* train_cmd = app.add_subcommand("train", "train one method on a dataset");
    add_train_options(train_cmd, train_args);

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "train once per lambda and select on held-out tuples");
    add_train_options(sweep_cmd, sweep_args.train);
    sweep_cmd->add_option("--grid", sweep_args.grid, "comma-separated lambda grid");
    sweep_cmd->add_option("--holdout-k", sweep_args.holdout_k,
                          "tuples held out (from the front) for selection");

    VerifyArgs verify_args;
    auto* verify_cmd = app.add_subcommand("verify", "run the property-check suite");
    verify_cmd->add_option("--seed", verify_args.seed, "instance seed");
    verify_cmd->add_flag("--list", verify_args.list, "print check names without running");
    verify_cmd->add_flag("--flip-delta-sign", verify_args.flip_delta_sign,
                         "fault injection: flip the refinement sign inside the checks");
    verify_cmd->add_option("--only", verify_args.only, "run only the named checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return run_gen(gen_args);
        if (train_cmd->parsed()) return run_train(train_args);
        if (sweep_cmd->parsed()) return run_sweep(sweep_args);
        if (verify_cmd->parsed()) return run_verify(verify_args);
        return kExitUsage;
    } catch (const divergence_error& e) {
        log::error("%s", e.what());
        return kExitDivergence;
    } catch (const config_error& e) {
        log::error("%s", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        log::error("%s", e.what());
        return kExitUsage;
    } catch (const std::out_of_range& e) {
        log::error("%s", e.what());
        return kExitUsage;
    } catch (const std::domain_error& e) {
        log::error("%s", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        log::error("unexpected failure: %s", e.what());
        return kExitUsage;
    }
}
