#include <doctest.h>

#include "cli.hpp"
#include "dustat/data.hpp"
#include "dustat/error.hpp"
#include "dustat/serialize.hpp"
#include "dustat/simulate.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dustat;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dustat");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("dustat_cli_" + name)).string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string saturated_csv() {
    static const std::string path = [] {
        const std::string p = temp_path("saturated.csv");
        write_csv(gen_saturated(1000, 0.1, 2024), p);
        return p;
    }();
    return path;
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST_CASE("a subcommand is required") {
    const Outcome r = run_cli({});
    CHECK(r.code == cli::kConfig);
    CHECK(starts_with(r.err, "E_CONFIG"));
}

TEST_CASE("missing --outcome exits 2 with usage text") {
    const Outcome r = run_cli({"estimate", "iop", "--data", saturated_csv()});
    CHECK(r.code == 2);
    CHECK(starts_with(r.err, "E_CONFIG"));
    CHECK(r.err.find("--outcome") != std::string::npos);
    CHECK(r.err.find("Usage") != std::string::npos);
}

TEST_CASE("folds table for n=21, K=3") {
    const Outcome r = run_cli({"folds", "--n", "21", "--k", "3", "--seed", "7"});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line.find("L=6") != std::string::npos);
    std::getline(in, line);
    std::vector<int> pairs;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        int id = 0;
        std::string folds;
        int count = 0;
        int training = 0;
        row >> id >> folds >> count >> training;
        pairs.push_back(count);
        CHECK(training == (folds.find(',') == std::string::npos ? 14 : 7));
    }
    CHECK(pairs == std::vector<int>{21, 21, 21, 49, 49, 49});
}

TEST_CASE("folds with K > n exits 2") {
    const Outcome r = run_cli({"folds", "--n", "10", "--k", "11"});
    CHECK(r.code == 2);
    CHECK(starts_with(r.err, "E_CONFIG"));
}

TEST_CASE("fold listing is stable for a fixed seed") {
    const Outcome a = run_cli({"folds", "--n", "25", "--k", "4", "--seed", "3", "--list"});
    const Outcome b = run_cli({"folds", "--n", "25", "--k", "4", "--seed", "3", "--list"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find("assignment:") != std::string::npos);
}

TEST_CASE("simulate with reps=0 exits 2") {
    const Outcome r = run_cli({"simulate", "--dgp", "linear", "--n", "50", "--reps", "0"});
    CHECK(r.code == 2);
    CHECK(starts_with(r.err, "E_CONFIG"));
}

TEST_CASE("identical simulate runs write byte-identical files") {
    const std::string a = temp_path("sim_a.csv");
    const std::string b = temp_path("sim_b.csv");
    const std::vector<std::string> base = {"simulate", "--dgp",     "linear", "--n",       "60",
                                           "--reps",   "3",         "--learner", "ridge", "--lambda",
                                           "0.5",      "--folds",   "3"};
    auto with_out = [&](const std::string& path, const std::string& threads) {
        std::vector<std::string> args = {"--threads", threads};
        args.insert(args.end(), base.begin(), base.end());
        args.insert(args.end(), {"--out", path});
        return run_cli(args);
    };
    const Outcome ra = with_out(a, "1");
    const Outcome rb = with_out(b, "2");
    REQUIRE(ra.code == 0);
    REQUIRE(rb.code == 0);
    CHECK(ra.out == rb.out);
    CHECK(slurp(a) == slurp(b));
    CHECK(starts_with(slurp(a), mc_csv_header()));
}

TEST_CASE("debiased and plug-in IOp on a generated sample") {
    const std::string json = temp_path("iop.json");
    const Outcome deb = run_cli({"estimate", "iop", "--data", saturated_csv(), "--outcome", "y",
                                 "--learner", "rf", "--trees", "100", "--log-outcome",
                                 "--factors", "x1,x2,x3", "--categorical-codes", "--out", json});
    REQUIRE(deb.code == 0);
    CHECK(deb.out.find("debiased_np") != std::string::npos);
    CHECK(deb.out.find("95% CI") != std::string::npos);

    const nlohmann::json j = nlohmann::json::parse(slurp(json));
    CHECK(j.at("schema_version") == kSchemaVersion);
    const EstimateResult r = estimate_from_json(j);
    CHECK(std::abs(r.theta - true_gini_saturated(0.1)) <= 3.0 * r.se);
    CHECK(r.ci_low <= r.theta);
    CHECK(r.n == 1000);
    CHECK(r.folds == 5);
    CHECK(to_json(r) == j);

    const Outcome plug = run_cli({"estimate", "iop", "--data", saturated_csv(), "--outcome", "y",
                                  "--learner", "rf", "--trees", "100", "--log-outcome", "--method",
                                  "plugin"});
    REQUIRE(plug.code == 0);
    CHECK(plug.out.find("plugin") != std::string::npos);
    CHECK(plug.out.find("warning: plug-in standard error") != std::string::npos);
}

TEST_CASE("json schema mismatches are rejected") {
    EstimateResult r;
    r.estimand = "varfv";
    nlohmann::json j = to_json(r);
    CHECK(to_json(estimate_from_json(j)) == j);
    j["schema_version"] = kSchemaVersion + 1;
    CHECK_THROWS_AS(estimate_from_json(j), ConfigError);
}

TEST_CASE("data errors exit 3 and name the row") {
    const std::string path = temp_path("bad.csv");
    std::ofstream(path) << "y,x\n1,2\nNA,3\n4,5\n";
    const Outcome r = run_cli({"estimate", "varfv", "--data", path, "--outcome", "y", "--method",
                               "plugin", "--learner", "ridge", "--lambda", "1"});
    CHECK(r.code == 3);
    CHECK(starts_with(r.err, "E_DATA"));
    CHECK(r.err.find("row 2") != std::string::npos);
}

TEST_CASE("numerical errors exit 4") {
    const std::string path = temp_path("collinear.csv");
    std::ofstream f(path);
    f << "y,a,b\n";
    for (int i = 0; i < 20; ++i) {
        f << (i % 7) * 0.5 + 1 << ',' << i << ',' << 2 * i << '\n';
    }
    f.close();
    const Outcome r = run_cli({"estimate", "varfv", "--data", path, "--outcome", "y", "--method",
                               "plugin", "--learner", "ridge", "--lambda", "0"});
    CHECK(r.code == 4);
    CHECK(starts_with(r.err, "E_NUM"));
}

TEST_CASE("configuration errors in estimate") {
    const std::string csv = saturated_csv();
    CHECK(run_cli({"estimate", "ranking", "--data", csv, "--outcome", "y", "--method", "plugin"}).code == 2);
    CHECK(run_cli({"estimate", "ate", "--data", csv, "--outcome", "y"}).code == 2);
    CHECK(run_cli({"estimate", "iop", "--data", csv, "--outcome", "income"}).code == 2);
    CHECK(run_cli({"estimate", "iop", "--data", csv, "--outcome", "y", "--learner", "svm"}).code == 2);
    CHECK(run_cli({"estimate", "iop", "--data", csv, "--outcome", "y", "--folds", "1"}).code == 2);
    const Outcome missing = run_cli({"estimate", "iop", "--data", temp_path("none.csv"), "--outcome", "y"});
    CHECK(missing.code == 2);
    CHECK(starts_with(missing.err, "E_CONFIG"));
}

TEST_CASE("treatment contrast from the command line") {
    const std::string path = temp_path("treat.csv");
    write_csv(gen_randomized_treatment(400, 0.5, 1.0, 9), path);
    const std::string json = temp_path("ate.json");
    const Outcome r = run_cli({"estimate", "ate", "--data", path, "--outcome", "y", "--treatment",
                               "d", "--learner", "fixed:0.5", "--alpha-learner", "ridge", "--out", json});
    REQUIRE(r.code == 0);
    const EstimateResult e = estimate_from_json(nlohmann::json::parse(slurp(json)));
    CHECK(e.estimand == "ate");
    CHECK(std::abs(e.theta - 1.0) <= 4.0 * e.se);
}

TEST_CASE("learner names") {
    CHECK(cli::parse_learner("ridge").kind == LearnerKind::ridge);
    CHECK(cli::parse_learner("lasso").penalty.mode == PenaltySpec::Mode::cv);
    CHECK(cli::parse_learner("lasso-theory").penalty.mode == PenaltySpec::Mode::theory);
    CHECK(cli::parse_learner("rf").kind == LearnerKind::random_forest);
    CHECK(cli::parse_learner("fixed:0.25").fixed_value == 0.25);
    CHECK_THROWS_AS(cli::parse_learner("fixed:abc"), ConfigError);
    CHECK_THROWS_AS(cli::parse_learner("boost"), ConfigError);
}
