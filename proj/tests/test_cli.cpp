#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <string>

#ifndef SEMIGRAD_CLI_PATH
#define SEMIGRAD_CLI_PATH "semigrad"
#endif

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run(const std::string& args) {
    std::string cmd = std::string(SEMIGRAD_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    EXPECT_NE(pipe, nullptr);
    std::string out;
    std::array<char, 4096> buf;
    while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
    int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

std::string grab(const std::string& text, const std::string& key) {
    auto pos = text.find(key + "=");
    if (pos == std::string::npos) return "";
    pos += key.size() + 1;
    auto end = text.find_first_of(" \n", pos);
    return text.substr(pos, end - pos);
}

}  // namespace

TEST(Cli, ZeroStepsIsUsageError) {
    RunResult r = run("attack --attack pgd --steps 0");
    EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, ZeroEpsilonSucceedsWithZeroPerturbation) {
    RunResult r = run("attack --attack fgsm --eps 0 --steps 1 --model mlp-2x16 --dim 8 --samples 8 --batch 4");
    EXPECT_EQ(r.exit_code, 0) << r.output;
    EXPECT_EQ(grab(r.output, "linf"), "0");
}

TEST(Cli, SemiAndFullProduceEqualHashAndHalvedBackwardFlops) {
    std::string common =
        "attack --attack pgd --steps 8 --eps 0.1 --model mlp-3x32 --dim 16 "
        "--samples 16 --batch 8 --seed 5 ";
    RunResult semi = run(common + "--mode semi");
    RunResult full = run(common + "--mode full");
    ASSERT_EQ(semi.exit_code, 0) << semi.output;
    ASSERT_EQ(full.exit_code, 0) << full.output;
    EXPECT_EQ(grab(semi.output, "perturbation_hash"),
              grab(full.output, "perturbation_hash"));
    EXPECT_NE(grab(semi.output, "perturbation_hash"), "");
    std::uint64_t semi_bwd = std::stoull(grab(semi.output, "bwd_flops"));
    std::uint64_t full_bwd = std::stoull(grab(full.output, "bwd_flops"));
    EXPECT_EQ(full_bwd, 2 * semi_bwd);
}

TEST(Cli, BadIdxMagicIsLoadFailure) {
    std::string img = ::testing::TempDir() + "cli_bad.idx";
    std::ofstream os(img, std::ios::binary);
    os << "garbage data here";
    os.close();
    RunResult r = run("attack --data " + img + ":" + img);
    EXPECT_EQ(r.exit_code, 3) << r.output;
    EXPECT_NE(r.output.find("error: load:"), std::string::npos) << r.output;
    std::remove(img.c_str());
}

TEST(Cli, TrainZeroEpochsIsUsageError) {
    RunResult r = run("train --epochs 0");
    EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, TrainVerifyReportsModelsIdentical) {
    RunResult r = run(
        "train --model mlp-2x16 --K 3 --epochs 2 --verify --dim 8 --samples 16 "
        "--batch 8 --out /dev/null");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("models identical"), std::string::npos) << r.output;
}

TEST(Cli, BenchEmitsCsvWithFixedColumns) {
    std::string out = ::testing::TempDir() + "bench.csv";
    RunResult r = run("bench --model mlp-2x16 --batch 4 --K 2 --repeats 3 --warmup 1 --out " + out);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    std::ifstream is(out);
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header,
              "model,batch,K,mode,fwd_flops,bwd_flops,peak_bytes,"
              "wall_ns_median,wall_ns_std,speedup");
    std::string line;
    int rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 2);  // full + semi
    std::remove(out.c_str());
}

TEST(Cli, CsvReportIsBitStableAcrossRuns) {
    std::string a = ::testing::TempDir() + "rep_a.csv";
    std::string b = ::testing::TempDir() + "rep_b.csv";
    std::string common =
        "attack --attack bim --steps 4 --eps 0.05 --model mlp-2x16 --dim 8 "
        "--samples 8 --batch 4 --seed 9 --out ";
    ASSERT_EQ(run(common + a).exit_code, 0);
    ASSERT_EQ(run(common + b).exit_code, 0);
    auto strip_wall = [](const std::string& path) {
        std::ifstream is(path);
        std::string text, line;
        while (std::getline(is, line)) {
            // wall-clock columns vary run to run; drop them
            std::size_t col = 0, start = 0;
            std::string kept;
            for (std::size_t i = 0; i <= line.size(); ++i) {
                if (i == line.size() || line[i] == ',') {
                    if (col != 7 && col != 8)
                        kept += line.substr(start, i - start) + ",";
                    ++col;
                    start = i + 1;
                }
            }
            text += kept + "\n";
        }
        return text;
    };
    EXPECT_EQ(strip_wall(a), strip_wall(b));
    std::remove(a.c_str());
    std::remove(b.c_str());
}
