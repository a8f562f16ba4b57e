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

namespace esc {

struct SimOptions {
    /// Skip all floating-point work; counters are still exact.
    bool counters_only = false;
};

struct SimResult {
    DenseMatrix c;
    std::int64_t fma_count = 0;
    std::int64_t padded_fma_count = 0;
    std::int64_t load_count_a = 0;
    std::int64_t load_count_b = 0;
    std::int64_t atomic_count = 0;
    std::int64_t reduce_count = 0;
    /// Statement executions, one per warp.
    std::int64_t statement_count = 0;
    std::int64_t blocks_executed = 0;
    std::int32_t max_accumulators_live = 0;

    /// fma_count / load_count_b, 1 when nothing was loaded.
    double reuse_factor_b() const;
};

/// Executes ir over the blocks of its grid in ascending order, warps
/// ascending, lanes ascending. A is read through t (dense reads of A use the
/// reconstruction of t). Throws ShapeError when B does not have t.cols rows and
/// IrError when the IR references an unbound name.
SimResult simulate(const KernelIR& ir, const EscMatrix& t, const DenseMatrix& b, const SimOptions& opt = {});

/// C = A * B by the plain i, k, j triple loop.
DenseMatrix oracle_spmm(const SparseMatrix& a, const DenseMatrix& b);

struct Offender {
    std::int32_t row = 0;
    std::int32_t col = 0;
    float got = 0;
    float want = 0;
    double error = 0;
};

struct CompareReport {
    bool pass = false;
    double max_rel_error = 0;
    double rel_tol = 0;
    /// Largest errors first.
    std::vector<Offender> worst;

    std::string str() const;
};

/// Elementwise |got - want| / max(|want|, 1) against rel_tol.
CompareReport compare(const DenseMatrix& got, const DenseMatrix& want, double rel_tol, std::size_t max_offenders = 5);
inline CompareReport compare(const SimResult& sim, const DenseMatrix& want, double rel_tol) {
    return compare(sim.c, want, rel_tol);
}

/// key=value lines, one counter per line.
std::string report(const SimResult& r);

} // namespace esc
