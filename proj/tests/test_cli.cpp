#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args, const std::string& log_path) {
    const std::string cmd = std::string(CPSC_CLI_PATH) + " " + args + " > " + log_path + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("cpsc_cli_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string str(const std::string& sub = "") const {
        return (sub.empty() ? path : path / sub).string();
    }
};

const char* kSmallConfig = R"({
  "model": {"feature_dim": 6, "component_count": 3, "top_k": 2, "hidden_dims": [8, 8]},
  "train": {
    "warmup_epochs": 1, "total_epochs": 3, "batch_size": 16,
    "alpha": 0.1, "cp_update_interval": 1, "calibration_fraction": 0.25,
    "lambda1": 0.8, "lambda2": 0.2, "gsc_a": 1.0, "gsc_b": 0.5, "seed": 0,
    "optimizer": {"kind": "sgd", "learning_rate": 0.1}
  },
  "data": {
    "class_count": 3, "samples": 160, "test_samples": 60,
    "modalities": [
      {"input_dim": 8, "signal_strength": 1.0, "noise_sigma": 0.3},
      {"input_dim": 8, "signal_strength": 0.4, "noise_sigma": 0.3}
    ]
  }
})";

std::string write_config(const TempDir& dir, const std::string& body) {
    const std::string path = dir.str("config.json");
    std::ofstream os(path);
    os << body;
    return path;
}

} // namespace

TEST_CASE("cli train runs are byte-deterministic") {
    TempDir dir;
    const std::string cfg = write_config(dir, kSmallConfig);
    const int rc1 = run_cli("train --config " + cfg + " --out " + dir.str("run1") +
                                " --seeds 0",
                            dir.str("log1.txt"));
    const int rc2 = run_cli("train --config " + cfg + " --out " + dir.str("run2") +
                                " --seeds 0",
                            dir.str("log2.txt"));
    INFO(slurp(dir.str("log1.txt")));
    REQUIRE(rc1 == 0);
    REQUIRE(rc2 == 0);
    for (const std::string file : {"metrics.csv", "coverage.csv", "gsc.csv",
                                   "reliability_hist.csv", "summary.json", "config.json"}) {
        const std::string a = slurp(dir.str("run1") + "/seed_0/" + file);
        const std::string b = slurp(dir.str("run2") + "/seed_0/" + file);
        INFO(file);
        REQUIRE_FALSE(a.empty());
        REQUIRE(a == b);
    }
}

TEST_CASE("cli rejects unknown config keys with the key name") {
    TempDir dir;
    const std::string cfg = write_config(
        dir, R"({"train": {"warmup_epochs": 1, "totall_epochs": 5}})");
    const int rc =
        run_cli("train --config " + cfg + " --out " + dir.str("out"), dir.str("log.txt"));
    REQUIRE(rc == 2);
    const std::string log = slurp(dir.str("log.txt"));
    REQUIRE(log.find("totall_epochs") != std::string::npos);
}

TEST_CASE("cli usage errors") {
    TempDir dir;
    SECTION("missing subcommand") {
        REQUIRE(run_cli("", dir.str("log.txt")) == 2);
    }
    SECTION("unknown ablation") {
        const std::string cfg = write_config(dir, kSmallConfig);
        REQUIRE(run_cli("train --config " + cfg + " --out " + dir.str("out") +
                            " --ablate bogus",
                        dir.str("log.txt")) == 2);
    }
    SECTION("unknown sweep axis") {
        const std::string cfg = write_config(dir, kSmallConfig);
        REQUIRE(run_cli("sweep --config " + cfg + " --out " + dir.str("out") +
                            " --axis bogus --seeds 0",
                        dir.str("log.txt")) == 2);
    }
    SECTION("missing config file") {
        REQUIRE(run_cli("train --config /nonexistent.json --out " + dir.str("out"),
                        dir.str("log.txt")) == 2);
    }
    SECTION("missing checkpoint for coverage audit") {
        const std::string cfg = write_config(dir, kSmallConfig);
        REQUIRE(run_cli("coverage-audit --config " + cfg + " --out " + dir.str("out") +
                            " --checkpoint /nonexistent.bin --reps 1",
                        dir.str("log.txt")) == 2);
    }
}

TEST_CASE("cli gradcheck passes on the default configuration") {
    TempDir dir;
    const std::string cfg = write_config(dir, kSmallConfig);
    const int rc = run_cli("gradcheck --config " + cfg + " --inits 2", dir.str("log.txt"));
    INFO(slurp(dir.str("log.txt")));
    REQUIRE(rc == 0);
    REQUIRE(slurp(dir.str("log.txt")).find("gradcheck PASS") != std::string::npos);
}

TEST_CASE("cli seed env var overrides the seed list") {
    TempDir dir;
    const std::string cfg = write_config(dir, kSmallConfig);
    const std::string cmd = "CPSC_SEED=3 " + std::string(CPSC_CLI_PATH) + " train --config " +
                            cfg + " --out " + dir.str("out") + " --seeds 0,1 > " +
                            dir.str("log.txt") + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    REQUIRE(WEXITSTATUS(status) == 0);
    REQUIRE(std::filesystem::exists(dir.str("out") + "/seed_3/metrics.csv"));
    REQUIRE_FALSE(std::filesystem::exists(dir.str("out") + "/seed_0"));
}

TEST_CASE("cli ablation flags") {
    TempDir dir;
    const std::string cfg = write_config(dir, kSmallConfig);
    // rsc ablation: K_sel = n and no diversity loss; run must succeed and the
    // config echo must show the degenerate values
    const int rc = run_cli("train --config " + cfg + " --out " + dir.str("out") +
                               " --seeds 0 --ablate rsc --ablate gsc",
                           dir.str("log.txt"));
    REQUIRE(rc == 0);
    const std::string echo = slurp(dir.str("out") + "/seed_0/config.json");
    REQUIRE(echo.find("\"top_k\": 3") != std::string::npos);
    REQUIRE(echo.find("\"lambda1\": 0.0") != std::string::npos);
    REQUIRE(echo.find("\"gsc_a\": 0.0") != std::string::npos);
    REQUIRE(echo.find("\"gsc_b\": 1.0") != std::string::npos);
}
