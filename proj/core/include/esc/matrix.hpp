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
#include <vector>

namespace esc {

/// Sparse operand A in CSR form. Indices are 32-bit, values float32.
///
/// Invariants (checked by validate()):
///   row_ptr has rows+1 entries, starts at 0, is non-decreasing and ends at nnz;
///   column indices inside a row are strictly increasing and < cols;
///   every stored value is finite. Stored zeros are legal and count as nonzeros.
struct SparseMatrix {
    std::int32_t rows = 0;
    std::int32_t cols = 0;
    std::vector<std::int32_t> row_ptr{0};
    std::vector<std::int32_t> col_idx;
    std::vector<float> values;
    /// Values are 1.0 placeholders because the source file only carried the
    /// sparsity pattern.
    bool synthetic_values = false;

    std::int64_t nnz() const { return static_cast<std::int64_t>(col_idx.size()); }

    /// Throws esc::Error describing the first violated invariant.
    void validate() const;

    /// Exact structural and bitwise value equality. The synthetic flag is
    /// metadata and does not participate.
    friend bool operator==(const SparseMatrix& a, const SparseMatrix& b);
};

/// Row-major dense matrix of float32.
struct DenseMatrix {
    std::int32_t rows = 0;
    std::int32_t cols = 0;
    std::vector<float> data;

    DenseMatrix() = default;
    DenseMatrix(std::int32_t r, std::int32_t c)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0f) {}

    float& at(std::int32_t r, std::int32_t c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    float at(std::int32_t r, std::int32_t c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b);
};

// Loaders. SMTX is the DLMC pattern format:
//   line 1: "M, K, nnz"; line 2: M+1 row pointers; line 3: nnz column indices.
// Commas and whitespace are interchangeable separators. Errors carry the line
// number (esc::ParseError).
SparseMatrix parse_smtx(std::istream& in);
SparseMatrix load_smtx(const std::filesystem::path& path);
void write_smtx(const SparseMatrix& a, std::ostream& out);

// Matrix Market "coordinate real general" (also accepts integer and pattern
// fields; pattern files get synthetic 1.0 values).
SparseMatrix parse_matrix_market(std::istream& in);
SparseMatrix load_matrix_market(const std::filesystem::path& path);

/// Dispatches on extension: ".mtx" is Matrix Market, anything else SMTX.
SparseMatrix load_matrix(const std::filesystem::path& path);

/// nnz = round((1 - sparsity) * M * K) positions drawn uniformly without
/// replacement; values uniform in [-1, 1] and never exactly 0. Deterministic per
/// (M, K, sparsity, seed) on every platform.
SparseMatrix gen_random(std::int32_t rows, std::int32_t cols, double sparsity, std::uint64_t seed);

/// Dense matrix with entries uniform in [-1, 1), deterministic per seed.
DenseMatrix gen_dense_random(std::int32_t rows, std::int32_t cols, std::uint64_t seed);

/// Replaces all values with seeded uniform values in [-1, 1] \ {0} and clears
/// the synthetic flag.
void randomize_values(SparseMatrix& a, std::uint64_t seed);

DenseMatrix to_dense(const SparseMatrix& a);

/// Keeps exactly the entries of d that compare != 0.
SparseMatrix csr_from_dense(const DenseMatrix& d);

} // namespace esc
