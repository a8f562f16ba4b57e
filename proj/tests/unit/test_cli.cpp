/*******************************************************************************
 * Copyright 2026 The escgen Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *******************************************************************************/


#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "commands.hpp"
#include "esc/esc_format.hpp"
#include "esc/matrix.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = escgen::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string data(const char* name) { return (fs::path(ESC_TEST_DATA_DIR) / name).string(); }

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("esc_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const char* name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, TransformWritesContainer) {
    const auto r = cli({"transform", "--input", data("worked4x4.smtx"), "--ufi", "4", "--ufk", "2", "--out", path("w.esc")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("groups=2\n"), std::string::npos);
    EXPECT_NE(r.out.find("padding_slots=2\n"), std::string::npos);
    std::ifstream in(path("w.esc"), std::ios::binary);
    const auto t = esc::deserialize(in);
    EXPECT_EQ(t, esc::transform(esc::load_matrix(data("worked4x4.smtx")), 4, 2));
}

TEST_F(Cli, GenerateWritesArtifacts) {
    const auto r = cli({"generate", "--input", data("worked4x4.mtx"), "--schedule", "4-1-1-32", "--out-dir", path("gen"),
                        "--name", "k"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("bodies=4\n"), std::string::npos);
    for (const char* f : {"k_kernel.cu", "k_host.cu", "k_transformer.cpp", "manifest.txt"})
        EXPECT_TRUE(fs::exists(dir_ / "gen" / f)) << f;
    const auto plain = cli({"generate", "--input", data("worked4x4.mtx"), "--schedule", "4-1-1-32", "--no-compaction",
                            "--out-dir", path("gen2")});
    ASSERT_EQ(plain.code, 0) << plain.err;
    EXPECT_NE(plain.out.find("bodies=15\n"), std::string::npos);
    EXPECT_NE(plain.out.find("compaction=off\n"), std::string::npos);
}

TEST_F(Cli, SimulatePasses) {
    const auto r = cli({"simulate", "--input", data("worked4x4.mtx"), "--schedule", "4-2-2-32", "--bcols", "64"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("fma_count=640\n"), std::string::npos);
    EXPECT_NE(r.out.find("\nPASS\n"), std::string::npos);
}

TEST_F(Cli, SimulatePatternOnlyInput) {
    const auto r = cli({"simulate", "--input", data("worked4x4.smtx"), "--schedule", "2-3-1-32", "--bcols", "40"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("\nPASS\n"), std::string::npos);
}

TEST_F(Cli, TuneReportsBestAndDefault) {
    const auto r = cli({"tune", "--input", data("worked4x4.mtx"), "--bcols", "32", "--top", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("arch=A100 sm_count=108\n"), std::string::npos);
    EXPECT_NE(r.out.find("candidates=64\n"), std::string::npos);
    EXPECT_NE(r.out.find("default=4-7-1-32 cost="), std::string::npos);
    EXPECT_NE(r.out.find("best="), std::string::npos);
}

TEST_F(Cli, TuneHonoursArchEnvironment) {
    std::ofstream(path("arch.cfg")) << "name=Tiny\nsm_count=2\n";
    ::setenv("ESC_ARCH_CONFIG", path("arch.cfg").c_str(), 1);
    const auto r = cli({"tune", "--input", data("worked4x4.mtx"), "--bcols", "32", "--top", "1"});
    ::unsetenv("ESC_ARCH_CONFIG");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("arch=Tiny sm_count=2\n"), std::string::npos);
}

TEST_F(Cli, AnalyzeSweepCsv) {
    const auto r = cli({"analyze", "--sweep", "--m", "64", "--k", "64", "--sparsities", "0.5,0.9"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "sparsity,esc_over_dense,csr_over_dense");
    EXPECT_NE(r.out.find("\n0.5000,"), std::string::npos);
    EXPECT_NE(r.out.find("\n0.9000,"), std::string::npos);
    const auto f = cli({"analyze", "--sweep", "--sparsities", "0.7", "--out", path("s.csv")});
    ASSERT_EQ(f.code, 0) << f.err;
    EXPECT_TRUE(fs::exists(path("s.csv")));
}

TEST_F(Cli, AnalyzeCompaction) {
    const auto r = cli({"analyze", "--compaction", "--input", data("worked4x4.mtx"), "--schedule", "4-1-1-32"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("4-1-1-32,15,4,"), std::string::npos);
}

TEST_F(Cli, UserErrorsExitOne) {
    EXPECT_EQ(cli({}).code, 1);
    EXPECT_EQ(cli({"frobnicate"}).code, 1);
    EXPECT_EQ(cli({"transform", "--input", data("worked4x4.smtx")}).code, 1);
    EXPECT_EQ(cli({"generate", "--input", data("worked4x4.mtx"), "--schedule", "0-1-1-32", "--out-dir", path("x")}).code, 1);
    EXPECT_EQ(cli({"simulate", "--input", path("missing.smtx"), "--schedule", "4-1-1-32"}).code, 1);
    EXPECT_EQ(cli({"analyze"}).code, 1);
    EXPECT_EQ(cli({"analyze", "--sweep", "--sparsities", "1.5"}).code, 1);
    const auto bad = cli({"transform", "--input", data("worked4x4.smtx"), "--ufi", "99", "--out", path("o")});
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.err.find("escgen: "), std::string::npos);
}

TEST_F(Cli, NegativeToleranceRejected) {
    const auto r = cli({"simulate", "--input", data("worked4x4.mtx"), "--schedule", "4-1-1-32", "--tol", "-1"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--tol"), std::string::npos);
}

TEST_F(Cli, HelpExitsZero) {
    const auto r = cli({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("transform"), std::string::npos);
}
