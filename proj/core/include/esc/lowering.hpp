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

#include "esc/esc_format.hpp"
#include "esc/ir.hpp"
#include "esc/matrix.hpp"

namespace esc {

/// Replaces the UFi guarded FMAs of an i-unrolled nest by 2^UFi - 1
/// enumerated blocks keyed by pattern. Each block carries the exact
/// conjunction guard of its pattern and the FMAs of its rows.
KernelIR pass_enumerate(const KernelIR& ir, std::int32_t ufi);

/// Binds blocks to (row panel, pattern ordinal) of T, makes k walk the group's
/// column list, drops the guards and interchanges k and j (j outer).
KernelIR pass_block_map(const KernelIR& ir, const EscMatrix& t);

/// Lane-maps j with step WarpTile * ThreadBlockSize and replicates the body
/// for the WarpTile column groups j+tid+32*t.
KernelIR pass_thread_map(const KernelIR& ir, const Schedule& s);

/// Unrolls k by UFk, moves C updates into per-thread accumulators c<row><t>
/// declared before the k loop and flushed by atomic adds after it.
KernelIR pass_coarsen(const KernelIR& ir, const Schedule& s);

/// Rewrites A reads to ANNZ cursor reads and B rows to Cols lookups; k runs
/// over RPP[g] .. RPP[g+1].
KernelIR pass_data_transform(const KernelIR& ir, const EscMatrix& t);

/// Folds the pattern bodies into one body per popcount class whose C rows come
/// from a per-group row-offset table. Identity for UFi = 1.
KernelIR pass_compact(const KernelIR& ir);

/// Runs the fixed pipeline on an existing transform.
KernelIR lower_ir(const EscMatrix& t, const Schedule& s);

struct Lowered {
    EscMatrix t;
    KernelIR ir;
};
Lowered lower(const SparseMatrix& a, const Schedule& s);

/// Per-group row offsets consumed by compacted bodies: entry g * UFi + r is
/// the panel-relative row of the r-th set bit of group g's pattern, 0 past the
/// popcount.
std::vector<std::int32_t> row_offset_table(const EscMatrix& t);

/// Row-per-block kernel with k mapped to lanes and a warp reduction per
/// output. Simulation only; never emitted.
KernelIR lower_k_lane_baseline();

} // namespace esc
