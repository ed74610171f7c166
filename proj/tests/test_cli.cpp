#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "jumpflow/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace jumpflow;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "jumpflow");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("jumpflow_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("simulate writes its files and reruns byte-identically") {
    auto dir = scratch("sim");
    auto r = run({"simulate", "--scenario", "compound-poisson", "--n", "2000", "--dt", "1e-2",
                  "--seed", "7", "--out", dir.string()});
    REQUIRE(r.code == cli::kExitOk);
    for (const char* f : {"ensemble.csv", "summary.json", "config.echo.json"}) CHECK(fs::exists(dir / f));
    auto summary = read_json(dir / "summary.json");
    CHECK(summary["n_paths"] == 2000);
    CHECK(summary["seed"] == 7);
    CHECK(summary["epsilon"] == 0.0);

    auto again = scratch("sim_again");
    REQUIRE(run({"simulate", "--config", (dir / "config.echo.json").string(), "--out",
                 again.string()})
                .code == cli::kExitOk);
    CHECK(slurp(dir / "ensemble.csv") == slurp(again / "ensemble.csv"));
    CHECK(slurp(dir / "summary.json") == slurp(again / "summary.json"));
}

TEST_CASE("the ensemble CSV round-trips") {
    auto dir = scratch("roundtrip");
    REQUIRE(run({"simulate", "--scenario", "ou-jump", "--n", "50", "--K", "10", "--out",
                 dir.string()})
                .code == cli::kExitOk);
    auto ens = read_ensemble_csv((dir / "ensemble.csv").string(), 1, 0.0);
    CHECK(ens.size() == 50);
    CHECK(ens.grid().size() == 11);
    auto out = scratch("roundtrip_out");
    fs::create_directories(out);
    write_ensemble_csv((out / "ensemble.csv").string(), ens, 1);
    CHECK(slurp(dir / "ensemble.csv") == slurp(out / "ensemble.csv"));
}

TEST_CASE("regularized simulation records epsilon") {
    auto dir = scratch("sim_eps");
    auto r = run({"simulate", "--scenario", "compound-poisson", "--n", "200", "--K", "10",
                  "--epsilon", "0.1", "--out", dir.string()});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(read_json(dir / "summary.json")["epsilon"] == 0.1);
}

TEST_CASE("verify exit codes") {
    SUBCASE("matched scenario passes") {
        auto dir = scratch("verify_ok");
        auto r = run({"verify", "--scenario", "compound-poisson", "--n", "20000", "--out",
                      dir.string()});
        CHECK(r.code == cli::kExitOk);
        CHECK(fs::exists(dir / "residuals.csv"));
        CHECK(fs::exists(dir / "martingale.csv"));
        CHECK(fs::exists(dir / "config.echo.json"));
    }
    SUBCASE("double-drift control fails") {
        auto dir = scratch("verify_neg");
        auto r = run({"verify", "--scenario", "ou-jump", "--n", "20000", "--negative-control",
                      "double-drift", "--out", dir.string()});
        CHECK(r.code == cli::kExitFailure);
        CHECK(slurp(dir / "residuals.csv").find(",fail") != std::string::npos);
    }
    SUBCASE("missing input directory") {
        auto r = run({"verify", "--input", scratch("nothing_here").string(), "--out",
                      scratch("verify_missing").string()});
        CHECK(r.code == cli::kExitUsage);
    }
    SUBCASE("unknown scenario") {
        auto r = run({"verify", "--scenario", "nope"});
        CHECK(r.code == cli::kExitUsage);
        CHECK(r.err.find("compound-poisson") != std::string::npos);
    }
}

TEST_CASE("verify reads an earlier simulate run") {
    auto sim = scratch("input_sim");
    REQUIRE(run({"simulate", "--scenario", "compound-poisson", "--n", "20000", "--K", "20",
                 "--out", sim.string()})
                .code == cli::kExitOk);
    auto dir = scratch("input_verify");
    CHECK(run({"verify", "--input", sim.string(), "--out", dir.string()}).code == cli::kExitOk);
}

TEST_CASE("growth probe emits JSON") {
    auto dir = scratch("growth");
    auto r = run({"verify", "--scenario", "ou-jump", "--probe", "growth", "--epsilons", "0.1",
                  "--out", dir.string()});
    REQUIRE(r.code == cli::kExitOk);
    auto j = read_json(dir / "growth.json");
    CHECK(j.is_object());
    CHECK(fs::exists(dir / "config.echo.json"));
}

TEST_CASE("chain") {
    SUBCASE("epsilons are required") {
        auto r = run({"chain", "--scenario", "compound-poisson", "--out", scratch("chain_none").string()});
        CHECK(r.code == cli::kExitUsage);
        CHECK(r.err.find("--epsilons") != std::string::npos);
    }
    SUBCASE("single-particle flow") {
        auto dir = scratch("chain_dirac");
        auto r = run({"chain", "--scenario", "pure-drift", "--epsilons", "0.1,0.01", "--n", "2000",
                      "--out", dir.string()});
        CHECK(r.code == cli::kExitOk);
        CHECK(fs::exists(dir / "chain.csv"));
        CHECK(fs::exists(dir / "config.echo.json"));
        auto s = read_json(dir / "summary.json");
        CHECK(s.is_object());
    }
}

TEST_CASE("fp-solve and scenario list") {
    auto dir = scratch("fp");
    auto r = run({"fp-solve", "--scenario", "compound-poisson", "--times", "0.5,1", "--out",
                  dir.string()});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "config.echo.json"));
    auto list = run({"scenario", "list"});
    CHECK(list.code == cli::kExitOk);
    for (const auto& n : scenario_names()) CHECK(list.out.find(n) != std::string::npos);
}

TEST_CASE("config validation") {
    CHECK(run({"simulate", "--scenario", "compound-poisson", "--dt", "0.3"}).code == cli::kExitUsage);
    CHECK(run({"simulate", "--scenario", "compound-poisson", "--n", "0"}).code == cli::kExitUsage);
    CHECK(run({"simulate", "--problem", R"({"drift":{"family":"cubic"}})"}).code == cli::kExitUsage);
    CHECK(run({"bogus"}).code == cli::kExitUsage);
}

TEST_CASE("installed binary follows the exit-code contract") {
    const char* bin = std::getenv("JUMPFLOW_BIN");
    if (!bin) {
        MESSAGE("JUMPFLOW_BIN not set; skipping");
        return;
    }
    auto status = [&](const std::string& args) {
        int s = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    CHECK(status("scenario list") == 0);
    CHECK(status("chain --scenario compound-poisson --out " + scratch("bin_chain").string()) == 2);
    CHECK(status("simulate --scenario pure-drift --n 10 --K 4 --out " + scratch("bin_sim").string()) == 0);
}
