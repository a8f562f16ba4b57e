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

#include <benchmark/benchmark.h>

#include "esc/emit.hpp"
#include "esc/esc_format.hpp"
#include "esc/lowering.hpp"
#include "esc/matrix.hpp"
#include "esc/sim.hpp"

namespace {

void BM_Transform(benchmark::State& state) {
    const auto n = static_cast<std::int32_t>(state.range(0));
    const auto a = esc::gen_random(n, n, 0.9, 7);
    for (auto _ : state) benchmark::DoNotOptimize(esc::transform(a, 4, 2));
    state.SetComplexityN(static_cast<std::int64_t>(n) * n);
}
BENCHMARK(BM_Transform)->RangeMultiplier(2)->Range(128, 2048)->Complexity(benchmark::oN);

void BM_Lower(benchmark::State& state) {
    const auto ufi = static_cast<std::int32_t>(state.range(0));
    const auto t = esc::transform(esc::gen_random(256, 256, 0.9, 7), ufi, 4);
    const esc::Schedule s{ufi, 4, 2, 64};
    for (auto _ : state) benchmark::DoNotOptimize(esc::lower_ir(t, s));
}
BENCHMARK(BM_Lower)->DenseRange(1, 8, 1);

void BM_Simulate(benchmark::State& state) {
    const bool counters = state.range(0) != 0;
    const auto a = esc::gen_random(256, 256, 0.9, 7);
    const auto b = esc::gen_dense_random(256, 128, 8);
    const auto l = esc::lower(a, esc::Schedule{3, 8, 2, 64});
    for (auto _ : state) benchmark::DoNotOptimize(esc::simulate(l.ir, l.t, b, esc::SimOptions{counters}));
}
BENCHMARK(BM_Simulate)->Arg(0)->Arg(1);

void BM_Emit(benchmark::State& state) {
    const bool compaction = state.range(0) != 0;
    const auto l = esc::lower(esc::gen_random(256, 256, 0.9, 7), esc::Schedule{8, 2, 1, 32});
    for (auto _ : state) benchmark::DoNotOptimize(esc::emit(l.ir, l.t, compaction));
}
BENCHMARK(BM_Emit)->Arg(0)->Arg(1);

} // namespace

BENCHMARK_MAIN();
