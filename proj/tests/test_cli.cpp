#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int status = -1;
    json record;
};

Result run(const std::string& args) {
    std::string cmd = std::string(STICKY_FLOWS_BIN) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    std::string out;
    std::array<char, 4096> buf{};
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
    int rc = pclose(pipe);
    Result r;
    r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.record = json::parse(out);
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("sticky_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::size_t data_rows(const fs::path& csv) {
    std::ifstream is(csv);
    std::string line;
    std::size_t rows = 0;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.rfind("#", 0) == 0) continue;
        if (!header) {
            header = true;
            continue;
        }
        ++rows;
    }
    return rows;
}

} // namespace

TEST(Cli, ThetaTable) {
    auto dir = fresh_dir("theta");
    auto r = run("theta --nmax 5 --deterministic --out " + dir.string());
    ASSERT_EQ(r.status, 0) << r.record.dump();
    EXPECT_EQ(r.record["results"]["rows"], 10);
    EXPECT_EQ(data_rows(dir / "theta.csv"), 10u);
    auto folded = run("theta --nmax 5 --fold true --out " + dir.string());
    EXPECT_EQ(folded.record["results"]["rows"], 6);
    std::string text = slurp(dir / "theta.csv");
    EXPECT_EQ(text.rfind("# schema theta/1\n# config {", 0), 0u);
    EXPECT_NE(text.find("\"version\""), std::string::npos);
}

TEST(Cli, ExitsRecord) {
    auto dir = fresh_dir("exits");
    auto r = run("exits --N 3 --n 10 --epsilon 0.5 --replicas 60 --c 0.05 --out " + dir.string());
    ASSERT_EQ(r.status, 0) << r.record.dump();
    const auto& res = r.record["results"];
    EXPECT_TRUE(res.contains("mean_exit_time"));
    EXPECT_EQ(res["cells"].size(), 6u);
    EXPECT_EQ(res["theta_estimates"].size(), 2u);
    auto saved = json::parse(slurp(dir / "exits.json"));
    EXPECT_EQ(saved["results"]["cells"], res["cells"]);
    EXPECT_EQ(saved["config"]["params"]["N"], "3");
}

TEST(Cli, KernelArtifacts) {
    auto dir = fresh_dir("kernel");
    auto r = run("kernel --mode spde --cells 128 --t 0.01 --snapshots 4 --out " + dir.string());
    ASSERT_EQ(r.status, 0) << r.record.dump();
    for (const char* name : {"kernel.svg", "kernel_heatmap.svg", "kernel.csv", "kernel.json", "kernel.bin"})
        EXPECT_TRUE(fs::exists(dir / name)) << name;
    EXPECT_EQ(data_rows(dir / "kernel.csv"), 4u * 128u);
    EXPECT_EQ(slurp(dir / "kernel.svg").rfind("<svg", 0), 0u);
    EXPECT_NEAR(r.record["results"]["mass"].get<double>(), 1.0, 1e-10);
}

TEST(Cli, ErrorsAreJsonRecords) {
    auto usage = run("cells --n 0");
    EXPECT_EQ(usage.status, 2);
    EXPECT_EQ(usage.record["status"], "error");
    EXPECT_EQ(usage.record["message"], "n must be ≥ 1");
    auto runtime = run("coalesce --mode paths --starts 0,1 --out " + fresh_dir("bad").string());
    EXPECT_EQ(runtime.status, 1);
    EXPECT_EQ(runtime.record["kind"], "runtime");
}

TEST(Cli, OutputsIndependentOfWorkerCount) {
    const std::string common = " --deterministic --seed 17 ";
    struct Case {
        std::string args;
        std::vector<std::string> files;
    };
    std::vector<Case> cases = {
        {"exits --N 3 --n 10 --epsilon 0.5 --replicas 40 --c 0.05", {"exits.csv", "exits.json"}},
        {"marttest --N 3 --n 20 --replicas 20 --horizon 0.005", {"marttest.json"}},
        {"coalesce --mode splitting --trials 5000 --ratios 0.25,0.5", {"coalesce.csv", "coalesce.json", "coalesce.svg"}},
        {"kernel --mode filter --cells 64 --t 0.01 --particles 200 --snapshots 2", {"kernel.csv", "kernel.json", "kernel.bin", "kernel.svg"}},
    };
    for (const auto& c : cases) {
        auto d1 = fresh_dir("w1"), d3 = fresh_dir("w3");
        ASSERT_EQ(run(c.args + common + "--workers 1 --out " + d1.string()).status, 0) << c.args;
        ASSERT_EQ(run(c.args + common + "--workers 3 --out " + d3.string()).status, 0) << c.args;
        for (const auto& f : c.files) {
            ASSERT_TRUE(fs::exists(d1 / f)) << f;
            EXPECT_EQ(slurp(d1 / f), slurp(d3 / f)) << c.args << " " << f;
        }
    }
}
