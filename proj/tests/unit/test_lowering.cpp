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

#include <bit>
#include <map>
#include <string>

#include "esc/error.hpp"
#include "esc/lowering.hpp"
#include "esc/sim.hpp"
#include "oracles.hpp"

namespace {

using namespace esc;

struct OpCount {
    int fma = 0, declare = 0, atomic = 0, let = 0;
    std::int64_t advance = 0;
};

std::map<std::uint32_t, OpCount> count_ops(const KernelIR& ir) {
    std::map<std::uint32_t, OpCount> out;
    for (const auto& s : ir.stmts) {
        auto& c = out[s.key];
        if (std::holds_alternative<Fma>(s.op)) ++c.fma;
        if (std::holds_alternative<Declare>(s.op)) ++c.declare;
        if (std::holds_alternative<AtomicAdd>(s.op)) ++c.atomic;
        if (std::holds_alternative<Let>(s.op)) ++c.let;
        if (const auto* a = std::get_if<Advance>(&s.op)) c.advance += a->amount;
    }
    return out;
}

std::string body_text(const KernelIR& ir, std::uint32_t key) {
    std::string out;
    for (const auto& s : ir.stmts)
        if (s.key == key) out += to_string(s) + "\n";
    return out;
}

KernelIR enumerated(int ufi) { return pass_enumerate(unroll(build_spmm_ir(), "i", ufi), ufi); }

void expect_matches_oracle(const KernelIR& ir, const EscMatrix& t, const SparseMatrix& a, const DenseMatrix& b,
                           double tol) {
    const auto r = simulate(ir, t, b);
    EXPECT_LE(oracle::max_rel_error(r.c, oracle::matmul(a, b)), tol);
}

} // namespace

TEST(Enumerate, BodyCountIsAllNonEmptyPatterns) {
    EXPECT_EQ(body_keys(enumerated(4)).size(), 15u);
    EXPECT_EQ(body_keys(enumerated(3)).size(), 7u);
    EXPECT_EQ(body_keys(enumerated(1)).size(), 1u);
}

TEST(Enumerate, FmasPerBodyEqualPopcount) {
    for (int ufi : {1, 2, 4, 6}) {
        const auto ops = count_ops(enumerated(ufi));
        for (const auto& [key, c] : ops) EXPECT_EQ(c.fma, std::popcount(key)) << "ufi=" << ufi << " key=" << key;
    }
}

TEST(Enumerate, GuardsAreExactConjunctions) {
    const auto ir = enumerated(4);
    for (const auto& s : ir.stmts) {
        const auto& f = std::get<Fma>(s.op);
        ASSERT_EQ(f.guard.size(), 4u);
        for (int r = 0; r < 4; ++r) {
            EXPECT_EQ(f.guard[r].positive, ((s.key >> r) & 1u) != 0);
            EXPECT_EQ(f.guard[r].a.idx[0].constant, r);
        }
    }
    EXPECT_NE(body_text(ir, 0b0101).find("if(A[i+0][k] && !A[i+1][k] && A[i+2][k] && !A[i+3][k])"),
              std::string::npos);
}

TEST(Enumerate, SingleRowKeepsOriginalStatement) {
    const auto text = to_string(enumerated(1));
    EXPECT_NE(text.find("if(A[i][k]) C[i][j]+=A[i][k]*B[k][j];"), std::string::npos);
}

TEST(Enumerate, RejectsMismatchedUnroll) {
    EXPECT_THROW(pass_enumerate(unroll(build_spmm_ir(), "i", 2), 4), IrError);
}

TEST(Enumerate, PreservesSemantics) {
    const auto a = gen_random(20, 24, 0.6, 3);
    const auto b = gen_dense_random(24, 8, 4);
    const auto t = transform(a, 4, 1);
    expect_matches_oracle(enumerated(4), t, a, b, 1e-5);
}

TEST(BlockMap, RemovesEveryConditional) {
    const auto a = gen_random(32, 32, 0.7, 1);
    const auto t = transform(a, 4, 1);
    const auto before = enumerated(4);
    EXPECT_GT(count_conditionals(before), 0u);
    const auto ir = pass_block_map(before, t);
    EXPECT_EQ(count_conditionals(ir), 0u);
    EXPECT_EQ(ir.decode, BlockDecode::Enumerated);
    EXPECT_EQ(ir.grid_size, grid_size(t));
    EXPECT_EQ(ir.num_patterns, t.num_patterns());
    expect_matches_oracle(ir, t, a, gen_dense_random(32, 4, 2), 1e-5);
}

TEST(BlockMap, GridIsRowsWhenUnrollIsOne) {
    for (double sp : {0.0, 0.5, 0.95}) {
        const auto a = gen_random(37, 20, sp, 9);
        const auto t = transform(a, 1, 1);
        const auto ir = pass_block_map(enumerated(1), t);
        EXPECT_EQ(ir.grid_size, 37);
    }
}

TEST(BlockMap, RejectsWrongInput) {
    const auto t = transform(oracle::worked_4x4(), 4, 1);
    EXPECT_THROW(pass_block_map(unroll(build_spmm_ir(), "i", 4), t), IrError);
    EXPECT_THROW(pass_block_map(pass_block_map(enumerated(4), t), t), IrError);
    EXPECT_THROW(pass_block_map(enumerated(2), t), ScheduleError);
}

TEST(BlockMap, EmptyGroupsExecuteNothing) {
    // Panel 0 holds patterns 0b11 and 0b01, panel 1 only 0b11.
    SparseMatrix a;
    a.rows = 4;
    a.cols = 2;
    a.row_ptr = {0, 2, 3, 4, 5};
    a.col_idx = {0, 1, 0, 0, 0};
    a.values = {1, 2, 3, 4, 5};
    const auto t = transform(a, 2, 1);
    ASSERT_EQ(grid_size(t), 4);
    const auto ir = lower_ir(t, Schedule{2, 1, 1, 32});
    const auto r = simulate(ir, t, gen_dense_random(2, 32, 1));
    EXPECT_EQ(r.blocks_executed, 3);
    const auto ref = oracle::matmul(a, gen_dense_random(2, 32, 1));
    EXPECT_LE(oracle::max_rel_error(r.c, ref), 1e-6);
}

TEST(ThreadMap, LaneStepAndWarpTileOffsets) {
    const auto t = transform(oracle::worked_4x4(), 4, 1);
    const auto bm = pass_block_map(enumerated(4), t);
    {
        const auto ir = pass_thread_map(bm, Schedule{4, 1, 1, 32});
        const auto* j = ir.find_loop("j");
        ASSERT_NE(j, nullptr);
        EXPECT_TRUE(j->lane);
        EXPECT_EQ(j->step, 32);
        // N = 32 with one lane group covers j in a single trip.
        EXPECT_EQ((32 + j->step - 1) / j->step, 1);
    }
    {
        const auto ir = pass_thread_map(bm, Schedule{4, 1, 2, 32});
        EXPECT_EQ(ir.find_loop("j")->step, 64);
        const auto body = body_text(ir, 0b0001);
        EXPECT_NE(body.find("B[k][j+tid]"), std::string::npos);
        EXPECT_NE(body.find("B[k][j+tid+32]"), std::string::npos);
    }
    EXPECT_THROW(pass_thread_map(enumerated(4), Schedule{4, 1, 1, 32}), IrError);
}

TEST(Coarsen, WorkedPatternCounts) {
    const auto t = transform(oracle::worked_4x4(), 4, 2);
    const auto ir = lower_ir(t, Schedule{4, 2, 2, 32});
    const auto ops = count_ops(ir);
    const auto& c = ops.at(0b1101);
    EXPECT_EQ(c.fma, 12);
    EXPECT_EQ(c.declare, 6);
    EXPECT_EQ(c.atomic, 6);
    EXPECT_EQ(c.advance, 6);
    const auto body = body_text(ir, 0b1101);
    EXPECT_NE(body.find("t_nnz+=6;"), std::string::npos);
    EXPECT_NE(body.find("AtomicAdd(C[i+0][j+tid],c00);"), std::string::npos);
    EXPECT_NE(body.find("c00+=ANNZ[t_nnz+0]*B[br0][j+tid];"), std::string::npos);
}

TEST(Coarsen, SingletonShape) {
    const auto t = transform(oracle::worked_4x4(), 4, 1);
    const auto c = count_ops(lower_ir(t, Schedule{4, 1, 1, 32})).at(0b0100);
    EXPECT_EQ(c.fma, 1);
    EXPECT_EQ(c.declare, 1);
    EXPECT_EQ(c.atomic, 1);
    EXPECT_EQ(c.advance, 1);
}

TEST(Coarsen, FmaCountIsPopcountTimesTileTimesUnroll) {
    const auto a = gen_random(24, 24, 0.5, 5);
    for (int ufi : {1, 3, 4})
        for (int ufk : {1, 2, 4})
            for (int wt : {1, 2, 4}) {
                const Schedule s{ufi, ufk, wt, 32};
                const auto l = lower(a, s);
                for (const auto& [key, c] : count_ops(l.ir)) {
                    if (key == 0) continue;
                    const int pc = std::popcount(key);
                    EXPECT_EQ(c.fma, pc * wt * ufk) << s.str() << " key=" << key;
                    EXPECT_EQ(c.declare, pc * wt) << s.str();
                    EXPECT_EQ(c.atomic, pc * wt) << s.str();
                    EXPECT_EQ(c.advance, pc * ufk) << s.str();
                }
            }
}

TEST(Coarsen, PreservesSemantics) {
    const auto a = gen_random(40, 36, 0.7, 11);
    const auto b = gen_dense_random(36, 70, 12);
    const Schedule s{4, 2, 2, 64};
    const auto t = transform(a, 4, 2);
    const auto tm = pass_thread_map(pass_block_map(enumerated(4), t), s);
    expect_matches_oracle(tm, t, a, b, 1e-5);
    expect_matches_oracle(pass_coarsen(tm, s), t, a, b, 1e-5);
}

TEST(DataTransform, BitwiseEquivalentToDenseReads) {
    for (int ufk : {1, 2, 4}) {
        const auto a = gen_random(33, 50, 0.8, 20 + ufk);
        const auto b = gen_dense_random(50, 40, 7);
        const Schedule s{3, ufk, 1, 32};
        const auto t = transform(a, 3, ufk);
        const auto pre = pass_coarsen(pass_thread_map(pass_block_map(enumerated(3), t), s), s);
        const auto post = pass_data_transform(pre, t);
        EXPECT_TRUE(post.data_transformed);
        const auto r0 = simulate(pre, t, b);
        const auto r1 = simulate(post, t, b);
        EXPECT_EQ(r0.c, r1.c) << s.str();
        EXPECT_EQ(r0.fma_count, r1.fma_count);
    }
}

TEST(DataTransform, AdvanceMatchesPopcountTimesUnroll) {
    const auto t = transform(oracle::worked_4x4(), 4, 2);
    const auto ops = count_ops(lower_ir(t, Schedule{4, 2, 1, 32}));
    for (const auto& [key, c] : ops)
        if (key) {
            EXPECT_EQ(c.advance, std::popcount(key) * 2);
        }
}

TEST(DataTransform, RejectsMismatchedFormat) {
    const auto t2 = transform(oracle::worked_4x4(), 4, 2);
    const auto t1 = transform(oracle::worked_4x4(), 4, 1);
    const Schedule s{4, 2, 1, 32};
    const auto pre = pass_coarsen(pass_thread_map(pass_block_map(enumerated(4), t2), s), s);
    EXPECT_THROW(pass_data_transform(pre, t1), ScheduleError);
    EXPECT_THROW(lower_ir(t1, s), ScheduleError);
}

TEST(Lower, DefaultScheduleOnRealisticMatrix) {
    for (double sp : {0.7, 0.9}) {
        const auto a = gen_random(512, 512, sp, 42);
        const auto l = lower(a, Schedule::parse("4-7-1-32"));
        EXPECT_NO_THROW(verify(l.ir));
        EXPECT_EQ(body_keys(l.ir).size(), 15u);
        EXPECT_EQ(count_conditionals(l.ir), 0u);
        EXPECT_EQ(l.ir.grid_size, grid_size(l.t));
    }
}

TEST(Lower, EmptyMatrixHasNoBlocks) {
    SparseMatrix e;
    e.rows = 4;
    e.cols = 4;
    e.row_ptr = {0, 0, 0, 0, 0};
    const auto l = lower(e, Schedule{4, 1, 1, 32});
    EXPECT_EQ(l.ir.grid_size, 0);
    const auto r = simulate(l.ir, l.t, gen_dense_random(4, 32, 1));
    EXPECT_EQ(r.blocks_executed, 0);
    EXPECT_EQ(r.fma_count, 0);
    for (float v : r.c.data) EXPECT_EQ(v, 0.0f);
}

TEST(Lower, Deterministic) {
    const auto a = gen_random(64, 64, 0.8, 3);
    const Schedule s{5, 3, 2, 64};
    EXPECT_EQ(to_string(lower(a, s).ir), to_string(lower(a, s).ir));
}

TEST(Lower, DroppingAFlushIsCaught) {
    const auto a = gen_random(16, 16, 0.5, 8);
    auto l = lower(a, Schedule{2, 1, 1, 32});
    for (auto it = l.ir.stmts.begin(); it != l.ir.stmts.end(); ++it) {
        if (it->key == 0b11 && std::holds_alternative<AtomicAdd>(it->op)) {
            l.ir.stmts.erase(it);
            break;
        }
    }
    EXPECT_THROW(verify(l.ir), IrError);
    const auto b = gen_dense_random(16, 32, 2);
    const auto r = simulate(l.ir, l.t, b);
    EXPECT_GT(oracle::max_rel_error(r.c, oracle::matmul(a, b)), 1e-3);
}

TEST(Compact, KeysArePopcounts) {
    const auto a = gen_random(32, 32, 0.6, 4);
    const auto l = lower(a, Schedule{4, 2, 1, 32});
    const auto c = pass_compact(l.ir);
    EXPECT_EQ(c.key_kind, KeyKind::Popcount);
    EXPECT_EQ(body_keys(c), (std::vector<std::uint32_t>{1, 2, 3, 4}));
    const auto text = to_string(c);
    EXPECT_NE(text.find("int ro0=RowOff[4*g+0];"), std::string::npos);
    EXPECT_NE(text.find("AtomicAdd(C[i+ro0][j+tid],c00)"), std::string::npos);
}

TEST(Compact, NoOpForSingleRow) {
    const auto l = lower(gen_random(8, 8, 0.5, 1), Schedule{1, 1, 1, 32});
    EXPECT_EQ(to_string(pass_compact(l.ir)), to_string(l.ir));
}

TEST(Compact, RequiresTransformedIr) { EXPECT_THROW(pass_compact(enumerated(4)), IrError); }

TEST(Compact, RowOffsetTable) {
    const auto t = transform(oracle::worked_4x4(), 4, 1);
    const auto ro = row_offset_table(t);
    ASSERT_EQ(ro.size(), static_cast<std::size_t>(t.num_groups()) * 4);
    for (int g = 0; g < t.num_groups(); ++g) {
        const auto rows = t.groups[g].pattern.rows();
        for (std::size_t q = 0; q < rows.size(); ++q) EXPECT_EQ(ro[g * 4 + q], rows[q]);
    }
}
