#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spinhj/cli.hpp"

using namespace spinhj;
using cli::json;

namespace {

cli::Outcome run(const std::string& sub, const std::string& text, std::optional<std::uint64_t> seed = 42) {
    cli::Session s;
    return cli::execute(sub, json::parse(text), seed, s);
}

json report(const std::string& sub, const std::string& text, std::optional<std::uint64_t> seed = 42) {
    return json::parse(run(sub, text, seed).body);
}

std::string where(const std::string& sub, const std::string& text) {
    try {
        run(sub, text);
    } catch (const ValidationError& e) {
        return e.where();
    }
    return "<no error>";
}

std::vector<std::vector<std::string>> csv_rows(const std::string& body) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(body);
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

std::string temp_file(const std::string& name, const std::string& content) {
    const std::string path = ::testing::TempDir() + name;
    std::ofstream(path) << content;
    return path;
}

}  // namespace

TEST(Cli, PsiOfZeroPath) {
    const auto r = report("psi", R"({"cmd":"psi","path":{"cuts":[0,1],"values":[0]}})");
    EXPECT_EQ(r["result"]["psi"]["value"].get<double>(), 0.0);
    EXPECT_EQ(r["result"]["psi"]["provenance"], "exact");
}

TEST(Cli, FreeEnergyClosedForm) {
    const auto r = report("fe", R"({"cmd":"fe","model":{"coeffs":{"2":1.0}},"N":1,"t":0.7,"path":"zero"})");
    const auto& F = r["result"]["F"];
    EXPECT_NEAR(F["mean"].get<double>(), 0.7, 1e-15);
    EXPECT_EQ(F["stderr"].get<double>(), 0.0);
    EXPECT_EQ(F["provenance"], "estimate");
    EXPECT_EQ(F["replicas"].get<int>(), 200);
    EXPECT_FALSE(r["result"].contains("F_2K"));
}

TEST(Cli, EstimatesOnMultiLevelPathsCarryDoubledK) {
    const auto r = report("fe", R"({"N":2,"t":0.2,"path":{"cuts":[0,0.5,1],"values":[0.1,0.4]},"replicas":4,"K":20})");
    EXPECT_EQ(r["result"]["F"]["K"].get<int>(), 20);
    EXPECT_EQ(r["result"]["F_2K"]["K"].get<int>(), 40);
}

TEST(Cli, SeedsAreReportedAndReproducible) {
    const std::string cfg = R"({"N":2,"t":0.3,"replicas":10})";
    const auto a = run("fe", cfg, 5), b = run("fe", cfg, 5), c = run("fe", cfg, 6);
    EXPECT_EQ(a.body, b.body);
    EXPECT_NE(a.body, c.body);
    EXPECT_EQ(json::parse(a.body)["seed"].get<std::uint64_t>(), 5u);
    // No seed anywhere: one is generated and reported.
    const auto auto_seeded = report("fe", cfg, std::nullopt);
    EXPECT_TRUE(auto_seeded["seed"].is_number_unsigned());
    // Config seed is used when --seed is absent.
    EXPECT_EQ(report("fe", R"({"N":2,"t":0.3,"replicas":10,"seed":5})", std::nullopt).dump(), json::parse(a.body).dump());
}

TEST(Cli, AssSweepHasOneRowPerN) {
    const auto out = run("sweep", R"({"cmd":"ass","N":{"from":1,"to":8},"t":0.1,"replicas":10})");
    ASSERT_TRUE(out.csv);
    const auto rows = csv_rows(out.body);
    ASSERT_EQ(rows.size(), 9u);
    EXPECT_EQ(rows[0][0], "N");
    EXPECT_EQ(rows[0][2], "A.mean");
    EXPECT_EQ(rows[0][3], "A.stderr");
    std::set<std::string> seeds;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i][0], std::to_string(i));
        seeds.insert(rows[i][1]);
    }
    EXPECT_EQ(seeds.size(), 8u);
    // A range on a plain subcommand also sweeps.
    EXPECT_EQ(run("ass", R"({"N":{"values":[1,2]},"t":0.1,"replicas":10})").body,
              run("sweep", R"({"cmd":"ass","N":{"values":[1,2]},"t":0.1,"replicas":10})").body);
}

TEST(Cli, HopfLaxSweepIsMonotoneInT) {
    const auto rows = csv_rows(run("sweep", R"({"cmd":"hopflax","t":{"from":0.1,"to":0.5,"step":0.1},"j":1})").body);
    ASSERT_EQ(rows.size(), 6u);
    ASSERT_EQ(rows[0][2], "f.value");
    for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_GE(std::stod(rows[i][2]), std::stod(rows[i - 1][2]) - 1e-12);
}

TEST(Cli, RangeErrors) {
    EXPECT_EQ(where("ass", R"({"N":{"values":[]},"t":0.1})"), "/N");
    EXPECT_EQ(where("ass", R"({"N":{"from":3,"to":1},"t":0.1})"), "/N");
    EXPECT_EQ(where("ass", R"({"N":{"values":[1]},"t":{"values":[0.1]}})"), "/t");
    EXPECT_EQ(where("sweep", R"({"cmd":"ass","N":1,"t":0.1})"), "/");
    EXPECT_EQ(where("fe", R"({"N":2,"t":0.1,"path":{"from":0,"to":1}})"), "/path/from");
    EXPECT_EQ(where("ass", R"({"N":{"from":1,"to":2,"by":1},"t":0.1})"), "/N/by");
}

TEST(Cli, SchemaErrorsNameTheField) {
    EXPECT_EQ(where("xi", R"({"r":0.5,"bogus":1})"), "/bogus");
    EXPECT_EQ(where("xi", R"({})"), "/r");
    EXPECT_EQ(where("xi", R"({"r":"half"})"), "/r");
    EXPECT_EQ(where("xi", R"({"cmd":"psi","r":0.5})"), "/cmd");
    EXPECT_EQ(where("xi", R"({"r":0.5,"model":{"coeffs":{"2":-1}}})"), "/model/coeffs/2");
    EXPECT_EQ(where("xi", R"({"r":0.5,"model":{"coeffs":{"two":1}}})"), "/model/coeffs/two");
    EXPECT_EQ(where("xi", R"({"r":0.5,"model":{"coefs":{"2":1}}})"), "/model/coefs");
    EXPECT_EQ(where("psi", R"({"path":{"cuts":[0,0.5,1],"values":[0.4,0.2]}})"), "/path/values/1");
    EXPECT_EQ(where("psi", R"({"path":{"cuts":[0,0.5,1],"values":[0.4,"x"]}})"), "/path/values/1");
    EXPECT_EQ(where("fe", R"({"N":20,"t":0.1})"), "/N");
    EXPECT_EQ(where("fe", R"({"N":2,"t":0.1,"replicas":1})"), "/replicas");
    EXPECT_EQ(where("hj", R"({"j":0,"h":0.1,"T":0.2,"init":{"affine":[1,2]}})"), "/init/affine");
    EXPECT_EQ(where("hj", R"({"j":0,"h":0.1,"T":0.2,"residual":{"nu":0,"t":0.1,"points":[[0.5,0.6]]}})"),
              "/residual/points/0");
    EXPECT_EQ(where("verify", R"({"suite":"nope"})"), "/suite");
    EXPECT_EQ(where("sweep", R"({"cmd":"sweep"})"), "/cmd");
}

TEST(Cli, HjReportAndDump) {
    const std::string csv = ::testing::TempDir() + "hj_dump.csv";
    const auto r = report("hj", R"({"j":1,"h":0.1,"M":1,"T":0.1,"init":{"constant":0.3},"csv":")" + csv + R"("})");
    EXPECT_EQ(r["result"]["grid"]["points"].get<int>(), 66);
    EXPECT_LE(r["result"]["scheme"]["cfl_ratio"].get<double>(), 1.0);
    EXPECT_NEAR(r["result"]["final_min"]["value"].get<double>(), 0.3, 1e-15);
    EXPECT_NEAR(r["result"]["final_max"]["value"].get<double>(), 0.3, 1e-15);
    std::ifstream is(csv);
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "t,q1,q2,value");
}

TEST(Cli, HjResidualsAreArrays) {
    const auto r = report("hj", R"({"j":0,"h":0.1,"T":0.1,"init":{"constant":0},
        "residual":{"nu":0,"t":0.2,"points":[[0.1],[0.5]]}})");
    const auto& res = r["result"]["residuals"];
    ASSERT_TRUE(res.is_array());
    ASSERT_EQ(res.size(), 2u);
    // nu = 0 leaves -xi(grad) <= 0.
    for (const auto& x : res) EXPECT_LE(x["value"].get<double>(), 0.0);
}

TEST(Cli, VerifyCoversEverySuite) {
    const auto r = report("verify", R"({"suite":"all"})");
    EXPECT_TRUE(r["result"]["passed"].get<bool>());
    std::set<std::string> seen;
    for (const auto& c : r["result"]["checks"]) {
        seen.insert(c["suite"].get<std::string>());
        EXPECT_TRUE(c.contains("slack"));
    }
    EXPECT_EQ(seen.size(), verify::suites().size());
}

TEST(Cli, ExitCodes) {
    std::ostringstream out, err;
    const auto good = temp_file("good.json", R"({"r":0.5})");
    EXPECT_EQ(cli::run_file("xi", good, std::nullopt, 1, out, err), cli::kOk);

    out.str("");
    const auto bad = temp_file("bad.json", R"({"r":0.5,"extra":true})");
    EXPECT_EQ(cli::run_file("xi", bad, std::nullopt, 1, out, err), cli::kValidation);
    const auto doc = json::parse(out.str());
    EXPECT_EQ(doc["error"]["kind"], "validation");
    EXPECT_EQ(doc["error"]["path"], "/extra");

    out.str("");
    const auto garbage = temp_file("garbage.json", "{\"r\":");
    EXPECT_EQ(cli::run_file("xi", garbage, std::nullopt, 1, out, err), cli::kValidation);

    out.str("");
    const auto cfl = temp_file("cfl.json", R"({"j":0,"h":0.1,"T":0.2,"dt":0.1,"init":{"constant":0}})");
    EXPECT_EQ(cli::run_file("hj", cfl, std::nullopt, 1, out, err), cli::kNumerical);
    EXPECT_EQ(json::parse(out.str())["error"]["kind"], "numerical");

    out.str("");
    EXPECT_EQ(cli::run_file("xi", ::testing::TempDir() + "missing.json", std::nullopt, 1, out, err), cli::kIo);
    out.str("");
    EXPECT_EQ(cli::run_file("xi", good, std::string("/nonexistent-dir/x.json"), 1, out, err), cli::kIo);
}

TEST(Cli, SchemaTextListsEveryCommand) {
    const auto text = cli::schema_text();
    for (const auto& c : cli::commands()) EXPECT_NE(text.find("\n  " + c.name + ":"), std::string::npos) << c.name;
}
