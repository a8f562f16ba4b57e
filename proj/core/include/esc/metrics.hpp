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
#include <string>
#include <vector>

#include "esc/esc_format.hpp"
#include "esc/ir.hpp"
#include "esc/matrix.hpp"
#include "esc/sim.hpp"

namespace esc {

// All index widths are 32-bit.
std::uint64_t dense_bytes(std::int64_t rows, std::int64_t cols);
std::uint64_t csr_bytes(std::int64_t rows, std::int64_t nnz);

enum class StorageKind { Dense, Csr };
std::uint64_t storage_bytes(StorageKind kind, const SparseMatrix& a);
/// Header, group table and the four arrays. Equals serialized_size(t).
std::uint64_t storage_bytes(const EscMatrix& t);

struct SweepRow {
    double sparsity = 0;
    double esc_over_dense = 0;
    double csr_over_dense = 0;
};

/// One seeded random matrix per sparsity (seed + row index).
std::vector<SweepRow> size_sweep(std::int32_t rows, std::int32_t cols, const std::vector<double>& sparsities,
                                 std::int32_t ufi, std::int32_t ufk, std::uint64_t seed);
/// Header "sparsity,esc_over_dense,csr_over_dense".
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct ReuseReport {
    double measured = 0;
    /// Mean popcount over executed groups, weighted by padded columns.
    std::int64_t expected_num = 0;
    std::int64_t expected_den = 0;
    bool matches = false;

    double expected() const;
    std::string str() const;
};

/// B register reuse of a simulated run of the lowered schedule s on t. The
/// comparison is exact: fma * den == num * loads_b.
ReuseReport reuse_report(const SimResult& r, const EscMatrix& t, const Schedule& s);

struct CompactionRow {
    Schedule schedule;
    std::int32_t bodies_plain = 0;
    std::int32_t bodies_compacted = 0;
    std::int64_t lines_plain = 0;
    std::int64_t lines_compacted = 0;
};

/// Emitted line counts with and without compaction.
std::vector<CompactionRow> compaction_study(const SparseMatrix& a, const std::vector<Schedule>& schedules);
std::string compaction_csv(const std::vector<CompactionRow>& rows);

} // namespace esc
