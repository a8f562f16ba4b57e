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

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace esc {

/// UFi-UFk-WarpTile-ThreadBlockSize.
struct Schedule {
    std::int32_t ufi = 1;
    std::int32_t ufk = 1;
    std::int32_t warp_tile = 1;
    std::int32_t tbs = 32;

    /// Throws ScheduleError unless all factors are >= 1, UFi is within the
    /// pattern-mask limit and tbs is a positive multiple of 32.
    void validate() const;
    /// "4-7-1-32".
    std::string str() const;
    /// Inverse of str(); validates the result.
    static Schedule parse(const std::string& text);

    auto operator<=>(const Schedule&) const = default;
};

/// Integer affine expression over named symbols. Terms keep insertion order so
/// printing is stable; zero coefficients are dropped.
struct Affine {
    std::vector<std::pair<std::string, std::int64_t>> terms;
    std::int64_t constant = 0;
    /// Print "+0" for a zero constant; set on unrolled clones so "i+0" survives.
    bool show_zero = false;

    static Affine var(std::string name, std::int64_t coef = 1);
    static Affine lit(std::int64_t c);

    std::int64_t coef(const std::string& name) const;
    bool uses(const std::string& name) const { return coef(name) != 0; }

    Affine& add(const std::string& name, std::int64_t coef);
    Affine operator+(const Affine& rhs) const;
    Affine operator+(std::int64_t c) const;
    /// Replaces every occurrence of name by repl (scaled by its coefficient).
    Affine substitute(const std::string& name, const Affine& repl) const;

    std::string str() const;
    bool operator==(const Affine&) const = default;
};

enum class Array { A, B, C, ANNZ, Cols, RPP, NPP, RowOff };
const char* array_name(Array a);

struct Access {
    Array target = Array::A;
    std::vector<Affine> idx;

    bool uses(const std::string& name) const;
    Access substitute(const std::string& name, const Affine& repl) const;
    std::string str() const;
    bool operator==(const Access&) const = default;
};

/// One conjunct of a guard: A[...] is (or is not, when !positive) stored.
struct Predicate {
    Access a;
    bool positive = true;
    bool operator==(const Predicate&) const = default;
};

/// dst += a * b. dst is either a C access or a named accumulator.
struct Fma {
    std::optional<Access> dst_c;
    std::string acc;
    Access a;
    Access b;
    std::vector<Predicate> guard;
};
struct Declare {
    std::string acc;
};
struct AtomicAdd {
    Access c;
    std::string acc;
};
/// Sums acc across the warp's lanes and adds the total to c.
struct WarpReduce {
    Access c;
    std::string acc;
};
/// Marks the per-block body selection; carries no semantics of its own.
struct Dispatch {};
/// int var = src;
struct Let {
    std::string var;
    Access src;
};
/// var += amount;
struct Advance {
    std::string var;
    std::int64_t amount = 0;
};

using StmtOp = std::variant<Fma, Declare, AtomicAdd, WarpReduce, Dispatch, Let, Advance>;

/// Statements are kept in lexicographic order. scope is the number of
/// enclosing loops of the (perfectly nested) loop chain. key 0 is shared by
/// every body; otherwise the statement belongs to one body only.
struct Stmt {
    int scope = 0;
    std::uint32_t key = 0;
    StmtOp op;
};

enum class KeyKind { None, Pattern, Popcount };

/// Range: lower <= iter < upper. GroupColumns: iter walks the padded column
/// slots of the block's group positionally (0 .. padded columns); uses of
/// iter in the column dimension of A or the row dimension of B go through Cols.
enum class Domain { Range, GroupColumns };

struct Bound {
    Affine expr;
    /// When set the bound is load[expr].
    std::optional<Array> load;
    std::string str() const;
};

struct Loop {
    std::string iter;
    Bound lower;
    Bound upper;
    std::int64_t step = 1;
    Domain domain = Domain::Range;
    /// Lane-mapped: every thread runs the loop with iter + tid substituted.
    bool lane = false;
};

enum class BlockDecode {
    None,       // a single block runs the whole nest
    Direct,     // block_iter = blockIdx.x * block_stride
    Enumerated, // g = blockIdx.x; i = (g / num_patterns) * UFi; body = pattern(g)
};

/// tid = (t / 32) * 32 * warp_tile + t % 32 for thread t of the block.
struct ThreadBinding {
    std::string iter;
    std::int32_t threads = 32;
    std::int32_t warp_tile = 1;
};

struct KernelIR {
    std::vector<Loop> loops;
    std::vector<Stmt> stmts;

    BlockDecode decode = BlockDecode::None;
    std::string block_iter;
    std::int64_t block_stride = 1;
    /// Upper bound of the loop removed by a Direct block mapping.
    Affine block_extent;
    std::optional<ThreadBinding> thread;

    KeyKind key_kind = KeyKind::None;
    std::int32_t ufi = 1;
    std::optional<Schedule> schedule;
    bool compacted = false;
    bool data_transformed = false;
    /// Recorded by the enumerated block mapping.
    std::int64_t grid_size = 0;
    std::int32_t num_patterns = 0;

    const Loop* find_loop(const std::string& iter) const;
    int loop_index(const std::string& iter) const;
    /// Copy of everything but the statement list.
    KernelIR shell() const;
};

/// Indented text form used by golden tests and debugging dumps.
std::string to_string(const KernelIR& ir);
std::string to_string(const Stmt& s);

/// Sorted distinct non-zero keys of the statement list.
std::vector<std::uint32_t> body_keys(const KernelIR& ir);
/// Statements carrying a guard.
std::size_t count_conditionals(const KernelIR& ir);
/// Checks scopes, accumulator declare/flush pairing per body, one A and one B
/// slot per FMA and at most one indirect variable per access. Throws IrError.
void verify(const KernelIR& ir);

/// Reference nest: i, k, j loops and one guarded FMA.
KernelIR build_spmm_ir();

/// Multiplies the step of iter by uf and clones every contiguous run of
/// statements that uses iter, substituting iter + c * old_step.
KernelIR unroll(const KernelIR& ir, const std::string& iter, std::int32_t uf);

enum class Binding { Block, Lane };
/// Block: iter must be the outermost loop; it is removed and bound to
/// blockIdx.x * step. Lane: step becomes stride and iter + tid is substituted;
/// stride must be a multiple of 32 * warp_tile.
KernelIR map_iter(const KernelIR& ir, const std::string& iter, Binding binding, std::int64_t stride = 0,
                  std::int32_t warp_tile = 1);

} // namespace esc
