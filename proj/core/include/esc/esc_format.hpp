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

#include <bit>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "esc/matrix.hpp"

namespace esc {

inline constexpr int kMaxUnroll = 16;

/// UFi-bit row mask of a panel column: bit r set iff row (panel * UFi + r) holds
/// a nonzero in that column.
struct PatternId {
    std::uint32_t bits = 0;

    int popcount() const { return std::popcount(bits); }
    bool has_row(int r) const { return (bits >> r) & 1u; }
    /// Rows of the pattern in ascending order.
    std::vector<int> rows() const;
    std::string binary(int width) const;

    auto operator<=>(const PatternId&) const = default;
};

/// One (row panel, pattern) group of the compressed format.
struct Group {
    std::int32_t panel = 0;
    PatternId pattern;
    std::int32_t padded_cols = 0;

    bool operator==(const Group&) const = default;
};

/// Enumerated compressed form of A for a fixed (UFi, UFk).
///
/// Groups are stored densely, panel-major, one per (row panel, pattern ordinal)
/// pair, so group index == thread-block index. Absent pairs have zero columns.
/// For group g with pattern popcount p and padded column count c:
///   rpp[g+1] - rpp[g] == c, npp[g+1] - npp[g] == p * c, c % ufk == 0.
/// annz is column-major within a group: for every padded column, the values of
/// the pattern rows in ascending row order. Padding columns repeat the group's
/// last real column index and hold 0.0.
struct EscMatrix {
    std::int32_t rows = 0;
    std::int32_t cols = 0;
    std::int32_t ufi = 1;
    std::int32_t ufk = 1;
    /// Ordinal -> pattern, ascending; shared by every panel.
    std::vector<PatternId> patterns;
    std::vector<Group> groups;
    std::vector<std::int32_t> rpp{0};
    std::vector<std::int32_t> col_index;
    std::vector<std::int32_t> npp{0};
    std::vector<float> annz;

    std::int32_t num_patterns() const { return static_cast<std::int32_t>(patterns.size()); }
    std::int32_t num_row_panels() const { return rows == 0 ? 0 : (rows + ufi - 1) / ufi; }
    std::int32_t num_groups() const { return static_cast<std::int32_t>(groups.size()); }

    /// True when slot s of Cols belongs to the padded tail of its group.
    /// Real columns are strictly increasing, padding repeats the last one.
    bool is_padding_slot(std::int32_t group, std::int32_t slot) const {
        return slot > rpp[group] && col_index[slot] == col_index[slot - 1];
    }
    std::int32_t real_cols(std::int32_t group) const;

    friend bool operator==(const EscMatrix& a, const EscMatrix& b);
};

struct BlockCoord {
    std::int32_t panel = 0;
    std::int32_t ordinal = 0;
};

/// Columns of A grouped by their row mask within one row panel. Columns are in
/// increasing order; all-zero columns are absent. Rows past the end of A are
/// treated as zero.
std::map<PatternId, std::vector<std::int32_t>> enumerate_patterns(const SparseMatrix& a, std::int32_t panel,
                                                                  std::int32_t ufi);

EscMatrix transform(const SparseMatrix& a, std::int32_t ufi, std::int32_t ufk);

/// Inverse of transform. Throws FormatError on overlapping slots, bad spans or
/// out-of-range columns.
SparseMatrix reconstruct(const EscMatrix& t);

/// Structural self-check of the format (spans, padding, pattern table).
void verify(const EscMatrix& t);

/// num_patterns * ceil(M / UFi).
std::int64_t grid_size(const EscMatrix& t);

/// block b -> (b / num_patterns, b % num_patterns).
BlockCoord decode_block(const EscMatrix& t, std::int64_t block);

// Binary container, little-endian:
//   "ESC1" | u32 M | u32 K | u32 UFi | u32 UFk | u32 nGroups | u32 numPatterns | u32 reserved
//   groups  : nGroups x (u32 panel, u32 pattern, u32 paddedCols)
//   RPP     : (nGroups + 1) x u32
//   Cols    : RPP[nGroups] x u32
//   NPP     : (nGroups + 1) x u32
//   ANNZ    : NPP[nGroups] x f32 (IEEE-754 bit patterns)
void serialize(const EscMatrix& t, std::ostream& out);
std::string serialize(const EscMatrix& t);
EscMatrix deserialize(std::istream& in);
EscMatrix deserialize(const std::string& bytes);

/// Byte length of serialize(t) without producing it.
std::uint64_t serialized_size(const EscMatrix& t);

} // namespace esc
