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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "esc/ir.hpp"
#include "esc/matrix.hpp"

namespace esc {

/// Register-pressure occupancy model and cost weights.
struct ArchModel {
    std::string name = "A100";
    std::int64_t registers_per_sm = 65536;
    std::int64_t max_threads_per_sm = 2048;
    std::int32_t warp_size = 32;
    std::int32_t sm_count = 108;
    /// Resident-warp floors for the UFi sweep (UFk = 1) and the full schedule.
    double occupancy_floor_ufi = 16;
    double occupancy_floor_ufk = 12;
    /// registers per thread = reg_a * UFi * WarpTile * UFk + reg_b
    double reg_a = 1;
    double reg_b = 16;
    /// Unroll factors scanned by search_space.
    std::int32_t max_unroll = 8;
    /// cost = w_loads * loads + w_atomics * atomics + w_grid * grid shortfall
    double w_loads = 1;
    double w_atomics = 4;
    double w_grid = 64;

    static ArchModel a100() { return {}; }
    void validate() const;
};

/// key=value lines, '#' comments. Keys not given keep the A100 value.
ArchModel parse_arch(std::istream& in);
/// "A100" (any case) selects the preset, anything else is a config file path.
ArchModel load_arch(const std::string& source);
std::string to_string(const ArchModel& a);

/// Resident warps per SM under the register model.
double estimate_occupancy(const Schedule& s, const ArchModel& arch);

/// Schedules over UFi, UFk in 1..max_unroll, power-of-two WarpTile with
/// WarpTile * 32 <= max(N, 32) and power-of-two multiples of 32 for
/// ThreadBlockSize up to max(N, 32), meeting both occupancy floors. Sorted
/// lexicographically.
std::vector<Schedule> search_space(std::int32_t n, const ArchModel& arch);

/// N <= 32: 4-7-1-32, N <= 64: 3-7-2-32, otherwise 3-8-2-64.
Schedule default_schedule(std::int32_t n);

struct CostComponents {
    std::int64_t fma = 0;
    std::int64_t loads = 0;
    std::int64_t atomics = 0;
    std::int64_t grid_size = 0;
    double occupancy = 0;
};

struct CostReport {
    Schedule schedule;
    double cost = 0;
    CostComponents components;
};

struct TuneResult {
    CostReport best;
    /// Every evaluated candidate, cheapest first, ties in schedule order.
    std::vector<CostReport> ranked;
};

/// Lowers and simulates (counters only) one schedule on A with a seeded B.
CostReport evaluate_schedule(const SparseMatrix& a, std::int32_t n, const Schedule& s, const ArchModel& arch,
                             std::uint64_t seed = 1);

/// Argmin over the given candidates; ties go to the lexicographically
/// smallest schedule. Throws ScheduleError on an empty list.
TuneResult tune_candidates(const SparseMatrix& a, std::int32_t n, std::vector<Schedule> candidates,
                           const ArchModel& arch, std::uint64_t seed = 1);

/// tune_candidates over search_space(N) plus default_schedule(N).
TuneResult tune(const SparseMatrix& a, std::int32_t n, const ArchModel& arch, std::uint64_t seed = 1);

} // namespace esc
