#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout only
};

RunResult run_cli(const std::string& args) {
    const std::string cmd =
        std::string("PREFOPT_LOG=error ") + PREFOPT_CLI_PATH + " " + args + " 2>/dev/null";
    std::array<char, 4096> buffer{};
    RunResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buffer.data(), buffer.size(), pipe) != nullptr) result.output += buffer.data();
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "prefopt_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) {
        if (c == '\n') ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("gen writes the dataset files and reports the tuple count") {
    const fs::path out = fresh_dir("gen_ok");
    const auto res = run_cli("gen --out " + out.string() +
                             " --seed 3 --num-queries 4 --num-responses 5 --tuples-per-query 6");
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("24 tuples") != std::string::npos);
    CHECK(fs::exists(out / "dataset.jsonl"));
    CHECK(fs::exists(out / "ground_truth.json"));
}

TEST_CASE("gen with a single response exits with the usage code") {
    const fs::path out = fresh_dir("gen_bad");
    const auto res = run_cli("gen --out " + out.string() + " --num-responses 1");
    CHECK(res.exit_code == 2);
}

TEST_CASE("gen refuses a non-empty output directory unless --overwrite") {
    const fs::path out = fresh_dir("gen_overwrite");
    CHECK(run_cli("gen --out " + out.string() + " --seed 1").exit_code == 0);
    CHECK(run_cli("gen --out " + out.string() + " --seed 1").exit_code == 2);
    CHECK(run_cli("gen --out " + out.string() + " --seed 1 --overwrite").exit_code == 0);
}

TEST_CASE("gen is byte-reproducible for a fixed seed") {
    const fs::path a = fresh_dir("gen_repeat_a");
    const fs::path b = fresh_dir("gen_repeat_b");
    const std::string spec = " --seed 11 --num-queries 3 --num-responses 4 --tuples-per-query 5";
    CHECK(run_cli("gen --out " + a.string() + spec).exit_code == 0);
    CHECK(run_cli("gen --out " + b.string() + spec).exit_code == 0);
    CHECK(slurp(a / "dataset.jsonl") == slurp(b / "dataset.jsonl"));
    CHECK(slurp(a / "ground_truth.json") == slurp(b / "ground_truth.json"));
}

TEST_CASE("train without a dataset path is a usage error") {
    const fs::path out = fresh_dir("train_missing");
    const auto res = run_cli("train --out " + out.string());
    CHECK(res.exit_code == 2);
}

TEST_CASE("train with zero steps emits a single metrics row") {
    const fs::path data = fresh_dir("train_zero_data");
    REQUIRE(run_cli("gen --out " + data.string() + " --seed 5").exit_code == 0);
    const fs::path out = fresh_dir("train_zero_out");
    const auto res =
        run_cli("train --data " + data.string() + " --out " + out.string() + " --steps 0");
    CHECK(res.exit_code == 0);
    const std::string csv = slurp(out / "metrics.csv");
    CHECK(count_lines(csv) == 2);  // header + step 0
    CHECK(fs::exists(out / "checkpoint_0.policy.json"));
    CHECK(fs::exists(out / "checkpoint_0.meta.json"));
    // last stdout line is the metrics report
    CHECK(nlohmann::json::parse(res.output).contains("accuracy"));
}

TEST_CASE("sr methods at lambda zero reproduce their base methods through the CLI") {
    const fs::path data = fresh_dir("lambda_zero_data");
    REQUIRE(run_cli("gen --out " + data.string() + " --seed 21 --num-queries 6 --num-responses 5")
                .exit_code == 0);

    const auto run_method = [&](const std::string& method, const std::string& lambda,
                                const std::string& tag) {
        const fs::path out = fresh_dir("lambda_zero_" + tag);
        const auto res = run_cli("train --data " + data.string() + " --out " + out.string() +
                                 " --method " + method + " --lambda " + lambda +
                                 " --steps 200 --seed 9 --eval-interval 100");
        REQUIRE(res.exit_code == 0);
        return nlohmann::json::parse(res.output);
    };

    const auto dpo = run_method("dpo", "0", "dpo");
    const auto sr_dpo = run_method("sr-dpo", "0", "sr_dpo");
    for (const char* key : {"avg_marginal", "accuracy", "aug_accuracy"}) {
        CHECK(std::abs(dpo[key].get<double>() - sr_dpo[key].get<double>()) <= 1e-12);
    }

    const auto ipo = run_method("ipo", "0", "ipo");
    const auto sr_ipo = run_method("sr-ipo", "0", "sr_ipo");
    for (const char* key : {"avg_marginal", "accuracy", "aug_accuracy"}) {
        CHECK(std::abs(ipo[key].get<double>() - sr_ipo[key].get<double>()) <= 1e-12);
    }
}

TEST_CASE("training divergence exits with code 3") {
    const fs::path data = fresh_dir("diverge_data");
    REQUIRE(run_cli("gen --out " + data.string() + " --seed 2").exit_code == 0);
    const fs::path out = fresh_dir("diverge_out");
    const auto res = run_cli("train --data " + data.string() + " --out " + out.string() +
                             " --steps 50 --lr 1e308 --no-grad-clip");
    CHECK(res.exit_code == 3);
}

TEST_CASE("sweep produces one summary row per lambda and selects by held-out accuracy") {
    const fs::path data = fresh_dir("sweep_data");
    REQUIRE(run_cli("gen --out " + data.string() +
                    " --seed 31 --num-queries 8 --num-responses 5 --tuples-per-query 10")
                .exit_code == 0);
    const fs::path out = fresh_dir("sweep_out");
    const auto res = run_cli("sweep --data " + data.string() + " --out " + out.string() +
                             " --method sr-dpo --steps 100 --seed 4 --holdout-k 20");
    CHECK(res.exit_code == 0);
    const std::string csv = slurp(out / "sweep_seed4.csv");
    CHECK(count_lines(csv) == 6);  // header + default grid {0, 0.1, 0.3, 0.5, 1}
    const auto selection = nlohmann::json::parse(res.output);
    CHECK(selection.contains("selected_lambda"));
}

TEST_CASE("a stationary sweep ties on accuracy and selects the smallest lambda") {
    const fs::path data = fresh_dir("sweep_tie_data");
    REQUIRE(run_cli("gen --out " + data.string() + " --seed 32 --num-queries 6").exit_code == 0);
    const fs::path out = fresh_dir("sweep_tie_out");
    const auto res = run_cli("sweep --data " + data.string() + " --out " + out.string() +
                             " --method sr-ipo --steps 0 --seed 7 --holdout-k 10");
    CHECK(res.exit_code == 0);
    const auto selection = nlohmann::json::parse(res.output);
    CHECK(selection["selected_lambda"].get<double>() == 0.0);
}

TEST_CASE("two sweep seeds leave two summary files") {
    const fs::path data = fresh_dir("sweep_two_seeds_data");
    REQUIRE(run_cli("gen --out " + data.string() + " --seed 33 --num-queries 6").exit_code == 0);
    const fs::path out = fresh_dir("sweep_two_seeds_out");
    CHECK(run_cli("sweep --data " + data.string() + " --out " + out.string() +
                  " --method sr-dpo --steps 20 --seed 1 --holdout-k 10 --grid 0,0.5")
              .exit_code == 0);
    CHECK(run_cli("sweep --data " + data.string() + " --out " + out.string() +
                  " --method sr-dpo --steps 20 --seed 2 --holdout-k 10 --grid 0,0.5 --overwrite")
              .exit_code == 0);
    CHECK(fs::exists(out / "sweep_seed1.csv"));
    CHECK(fs::exists(out / "sweep_seed2.csv"));
}

TEST_CASE("sweep rejects an oversized holdout") {
    const fs::path data = fresh_dir("sweep_bad_holdout_data");
    REQUIRE(run_cli("gen --out " + data.string() + " --seed 34 --num-queries 2 --tuples-per-query 3")
                .exit_code == 0);
    const fs::path out = fresh_dir("sweep_bad_holdout_out");
    const auto res = run_cli("sweep --data " + data.string() + " --out " + out.string() +
                             " --method sr-dpo --steps 10 --holdout-k 50");
    CHECK(res.exit_code == 2);
}

TEST_CASE("verify passes on the default seed and honors --list") {
    const auto listing = run_cli("verify --list");
    CHECK(listing.exit_code == 0);
    CHECK(count_lines(listing.output) == 8);
    CHECK(listing.output.find("telescoping") != std::string::npos);
    CHECK(listing.output.find("monotone_equivalence") != std::string::npos);

    const auto res = run_cli("verify");
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("FAIL") == std::string::npos);
}

TEST_CASE("fault injection flips only the semantic checks") {
    const auto res = run_cli("verify --flip-delta-sign");
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("PASS  telescoping") != std::string::npos);
    CHECK(res.output.find("FAIL  monotone_equivalence") != std::string::npos);
    // the failure payload is a JSON violation report
    CHECK(res.output.find("sign_agreement") != std::string::npos);
}

TEST_CASE("unknown flags and missing subcommands are usage errors") {
    CHECK(run_cli("train --bogus-flag 1").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);
}

TEST_CASE("config files drive both commands and flags override them") {
    const fs::path dir = fresh_dir("config_file");
    fs::create_directories(dir);
    const fs::path scenario = dir / "scenario.json";
    {
        std::ofstream out(scenario);
        out << R"({"num_queries":3,"num_responses":4,"tuples_per_query":5,"seed":77})";
    }
    const fs::path data = fresh_dir("config_file_data");
    const auto gen = run_cli("gen --config " + scenario.string() + " --out " + data.string());
    CHECK(gen.exit_code == 0);
    CHECK(gen.output.find("15 tuples") != std::string::npos);

    // the flag wins over the file value
    const fs::path data2 = fresh_dir("config_file_data2");
    const auto gen2 = run_cli("gen --config " + scenario.string() + " --out " + data2.string() +
                              " --tuples-per-query 2");
    CHECK(gen2.exit_code == 0);
    CHECK(gen2.output.find("6 tuples") != std::string::npos);

    const fs::path train_cfg = dir / "train.json";
    {
        std::ofstream out(train_cfg);
        out << R"({"method":"sr-dpo","lambda":0.3,"steps":40,"seed":5,"learning_rate":0.01})";
    }
    const fs::path out = fresh_dir("config_file_train");
    const auto trained = run_cli("train --config " + train_cfg.string() + " --data " +
                                 data.string() + " --out " + out.string() + " --steps 20");
    CHECK(trained.exit_code == 0);
    const std::string csv = slurp(out / "metrics.csv");
    CHECK(csv.find("\n20,") != std::string::npos);  // flag-overridden final step
}

TEST_CASE("train accepts a bare dataset file and falls back to the uniform reference") {
    const fs::path data = fresh_dir("bare_file_data");
    REQUIRE(run_cli("gen --out " + data.string() + " --seed 55").exit_code == 0);
    const fs::path out = fresh_dir("bare_file_out");
    const auto res = run_cli("train --data " + (data / "dataset.jsonl").string() + " --out " +
                             out.string() + " --method sr-dpo --lambda 0.5 --steps 30");
    CHECK(res.exit_code == 0);
}

TEST_CASE("assumption init without a ground-truth sidecar is a usage error") {
    const fs::path data = fresh_dir("no_gt_data");
    REQUIRE(run_cli("gen --out " + data.string() + " --seed 56").exit_code == 0);
    const fs::path out = fresh_dir("no_gt_out");
    const auto res = run_cli("train --data " + (data / "dataset.jsonl").string() + " --out " +
                             out.string() + " --init assumption --steps 10");
    CHECK(res.exit_code == 2);
}
