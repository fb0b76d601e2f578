#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int status;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(SYMMLP_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) out.append(buf, n);
    const int raw = pclose(pipe);
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("symmlp_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const std::string data_dir = SYMMLP_TEST_DATA_DIR;

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("gen-climate is byte-identical across runs") {
        const auto dir = scratch("gen");
        const auto a = run("gen-climate --n 260 --seed 7 --out " + (dir / "a.csv").string());
        const auto b = run("gen-climate --n 260 --seed 7 --out " + (dir / "b.csv").string());
        REQUIRE(a.status == 0);
        REQUIRE(b.status == 0);
        const auto csv = slurp(dir / "a.csv");
        CHECK(csv == slurp(dir / "b.csv"));
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 261);
        const auto manifest = json::parse(slurp(dir / "a.csv.manifest.json"));
        CHECK(manifest["command"] == "gen-climate");
        CHECK(manifest["config"]["seed"] == 7);
        CHECK(manifest["config_hash"].get<std::string>().rfind("fnv1a64:", 0) == 0);
        CHECK(manifest["outputs"].size() == 1);
        CHECK(manifest.contains("versions"));
        fs::remove_all(dir);
    }

    TEST_CASE("recode reports the category divisor") {
        const auto dir = scratch("recode");
        const auto r = run("recode " + data_dir + "/five_categories.json --out " + (dir / "enc.csv").string() +
                           " --groups " + (dir / "groups.json").string());
        REQUIRE(r.status == 0);
        const auto groups = json::parse(slurp(dir / "groups.json"));
        bool found = false;
        for (const auto& g : groups["groups"])
            if (g["source_variable"] == "colour") {
                CHECK(g["decay_divisor"] == 5.0);
                CHECK(g["end"].get<int>() - g["begin"].get<int>() == 5);
                found = true;
            }
        CHECK(found);
        const auto csv = slurp(dir / "enc.csv");
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);
        fs::remove_all(dir);
    }

    TEST_CASE("train then evaluate") {
        const auto dir = scratch("train");
        const auto t = run("train " + data_dir + "/five_categories.json --restarts 1 --seed 3 --out-dir " + dir.string());
        REQUIRE(t.status == 0);
        CHECK(fs::exists(dir / "model.json"));
        CHECK(fs::exists(dir / "fit_report.json"));
        CHECK(fs::exists(dir / "manifest.json"));
        const auto e = run("evaluate " + (dir / "model.json").string() + " " + data_dir + "/five_categories.json --out " +
                           (dir / "metrics.json").string());
        REQUIRE(e.status == 0);
        CHECK(json::parse(slurp(dir / "metrics.json"))["rows"] == 40);
        fs::remove_all(dir);
    }

    TEST_CASE("experiment with two methods gives two rows") {
        const auto dir = scratch("experiment");
        std::ofstream(dir / "config.json") << R"({"plan": {"hidden_sizes": [2, 3],
            "split": {"train_ratio": 0.5, "validation_ratio": 0.25, "test_ratio": 0.25}},
            "train": {"max_iterations": 40}})";
        const auto r = run("experiment --config " + (dir / "config.json").string() +
                           " --n 60 --restarts 1 --methods mean2,mean_sd4 --out-dir " + dir.string());
        REQUIRE(r.status == 0);
        const auto report = json::parse(slurp(dir / "report.json"));
        CHECK(report["results"].size() == 2);
        CHECK(report["results"][0]["method"] == "mean2");
        CHECK(fs::exists(dir / "table.txt"));
        CHECK(fs::exists(dir / "predictions.csv"));
        const auto manifest = json::parse(slurp(dir / "manifest.json"));
        CHECK(manifest["config"]["train"]["restarts"] == 1);
        CHECK(manifest["config"]["train"]["max_iterations"] == 40);
        fs::remove_all(dir);
    }

    TEST_CASE("impute fills a CSV") {
        const auto dir = scratch("impute");
        std::ofstream(dir / "in.csv") << "a,b\n1,2\n,4\n3,NA\n";
        const auto r = run("impute " + (dir / "in.csv").string() + " --out " + (dir / "out.csv").string());
        REQUIRE(r.status == 0);
        CHECK(slurp(dir / "out.csv") == "a,b\n1,2\n2,4\n3,3\n");
        fs::remove_all(dir);
    }

    TEST_CASE("exit codes") {
        CHECK(run("recode --no-such-flag x").status == 2);
        CHECK(run("frobnicate").status == 2);
        CHECK(run("").status != 0);
        const auto missing = run("recode /nonexistent/table.json");
        CHECK(missing.status == 1);
        CHECK(missing.out.find("error:") != std::string::npos);
        CHECK(run("--help").status == 0);
    }
}
