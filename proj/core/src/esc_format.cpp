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

#include "esc/esc_format.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "esc/error.hpp"

namespace esc {

namespace {

void check_unroll(std::int32_t ufi, std::int32_t ufk) {
    if (ufi < 1 || ufi > kMaxUnroll) throw ScheduleError("UFi must be in [1, " + std::to_string(kMaxUnroll) + "]");
    if (ufk < 1) throw ScheduleError("UFk must be >= 1");
}

// Scatters the rows of one panel into a per-column mask and a column-major
// value scratch (col * ufi + r). Returns nothing; the caller scans masks.
void scatter_panel(const SparseMatrix& a, std::int32_t panel, std::int32_t ufi, std::vector<std::uint32_t>& mask,
                   std::vector<float>* vals) {
    const std::int32_t base = panel * ufi;
    const std::int32_t end = std::min(a.rows, base + ufi);
    for (std::int32_t row = base; row < end; ++row) {
        const int r = row - base;
        for (std::int32_t p = a.row_ptr[row]; p < a.row_ptr[row + 1]; ++p) {
            const std::int32_t c = a.col_idx[p];
            mask[c] |= 1u << r;
            if (vals) (*vals)[static_cast<std::size_t>(c) * ufi + r] = a.values[p];
        }
    }
}

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated ESC container");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

constexpr char kMagic[4] = {'E', 'S', 'C', '1'};
constexpr std::uint64_t kHeaderBytes = 32;
constexpr std::uint64_t kGroupBytes = 12;

} // namespace

std::vector<int> PatternId::rows() const {
    std::vector<int> out;
    for (std::uint32_t b = bits; b != 0; b &= b - 1) out.push_back(std::countr_zero(b));
    return out;
}

std::string PatternId::binary(int width) const {
    std::string s = "0b";
    for (int r = width - 1; r >= 0; --r) s.push_back(has_row(r) ? '1' : '0');
    return s;
}

std::int32_t EscMatrix::real_cols(std::int32_t group) const {
    std::int32_t n = 0;
    for (std::int32_t s = rpp[group]; s < rpp[group + 1]; ++s)
        if (!is_padding_slot(group, s)) ++n;
    return n;
}

bool operator==(const EscMatrix& a, const EscMatrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.ufi == b.ufi && a.ufk == b.ufk && a.patterns == b.patterns &&
           a.groups == b.groups && a.rpp == b.rpp && a.col_index == b.col_index && a.npp == b.npp &&
           a.annz.size() == b.annz.size() &&
           (a.annz.empty() || std::memcmp(a.annz.data(), b.annz.data(), a.annz.size() * sizeof(float)) == 0);
}

std::map<PatternId, std::vector<std::int32_t>> enumerate_patterns(const SparseMatrix& a, std::int32_t panel,
                                                                  std::int32_t ufi) {
    check_unroll(ufi, 1);
    const std::int32_t panels = a.rows == 0 ? 0 : (a.rows + ufi - 1) / ufi;
    if (panel < 0 || panel >= panels) throw Error("panel index out of range");
    std::vector<std::uint32_t> mask(static_cast<std::size_t>(a.cols), 0);
    scatter_panel(a, panel, ufi, mask, nullptr);
    std::map<PatternId, std::vector<std::int32_t>> out;
    for (std::int32_t c = 0; c < a.cols; ++c)
        if (mask[c] != 0) out[PatternId{mask[c]}].push_back(c);
    return out;
}

EscMatrix transform(const SparseMatrix& a, std::int32_t ufi, std::int32_t ufk) {
    check_unroll(ufi, ufk);
    EscMatrix t;
    t.rows = a.rows;
    t.cols = a.cols;
    t.ufi = ufi;
    t.ufk = ufk;

    const std::int32_t panels = t.num_row_panels();
    const std::size_t k = static_cast<std::size_t>(a.cols);
    std::vector<std::uint32_t> mask(k, 0);

    // Pass 1: the global set of patterns.
    std::vector<bool> seen(std::size_t{1} << ufi, false);
    for (std::int32_t panel = 0; panel < panels; ++panel) {
        scatter_panel(a, panel, ufi, mask, nullptr);
        for (std::size_t c = 0; c < k; ++c) {
            if (mask[c] != 0) {
                seen[mask[c]] = true;
                mask[c] = 0;
            }
        }
    }
    std::vector<std::int32_t> ordinal_of(seen.size(), -1);
    for (std::uint32_t bits = 1; bits < seen.size(); ++bits) {
        if (seen[bits]) {
            ordinal_of[bits] = static_cast<std::int32_t>(t.patterns.size());
            t.patterns.push_back(PatternId{bits});
        }
    }
    const auto np = static_cast<std::size_t>(t.num_patterns());
    if (np == 0) return t;

    // Pass 2: bucket each panel's columns by ordinal, then lay out groups.
    std::vector<float> vals(k * static_cast<std::size_t>(ufi), 0.0f);
    std::vector<std::int32_t> bucket_start(np + 1);
    std::vector<std::int32_t> bucket_cols;
    std::vector<std::int32_t> fill(np);
    t.groups.reserve(static_cast<std::size_t>(panels) * np);
    t.rpp.reserve(static_cast<std::size_t>(panels) * np + 1);
    t.npp.reserve(static_cast<std::size_t>(panels) * np + 1);
    t.annz.reserve(static_cast<std::size_t>(a.nnz()));

    for (std::int32_t panel = 0; panel < panels; ++panel) {
        scatter_panel(a, panel, ufi, mask, &vals);
        std::fill(bucket_start.begin(), bucket_start.end(), 0);
        for (std::size_t c = 0; c < k; ++c)
            if (mask[c] != 0) ++bucket_start[ordinal_of[mask[c]] + 1];
        for (std::size_t o = 0; o < np; ++o) bucket_start[o + 1] += bucket_start[o];
        bucket_cols.resize(static_cast<std::size_t>(bucket_start[np]));
        std::copy(bucket_start.begin(), bucket_start.end() - 1, fill.begin());
        for (std::size_t c = 0; c < k; ++c)
            if (mask[c] != 0) bucket_cols[fill[ordinal_of[mask[c]]]++] = static_cast<std::int32_t>(c);

        for (std::size_t o = 0; o < np; ++o) {
            const PatternId pat = t.patterns[o];
            const auto rows = pat.rows();
            const std::int32_t real = bucket_start[o + 1] - bucket_start[o];
            const std::int32_t padded = (real + ufk - 1) / ufk * ufk;
            for (std::int32_t s = 0; s < padded; ++s) {
                const bool pad = s >= real;
                const std::int32_t c = bucket_cols[bucket_start[o] + (pad ? real - 1 : s)];
                t.col_index.push_back(c);
                for (int r : rows)
                    t.annz.push_back(pad ? 0.0f : vals[static_cast<std::size_t>(c) * ufi + r]);
            }
            t.groups.push_back(Group{panel, pat, padded});
            t.rpp.push_back(static_cast<std::int32_t>(t.col_index.size()));
            t.npp.push_back(static_cast<std::int32_t>(t.annz.size()));
        }
        for (std::int32_t idx = bucket_start[0]; idx < bucket_start[np]; ++idx) {
            const auto c = static_cast<std::size_t>(bucket_cols[idx]);
            mask[c] = 0;
        }
    }
    return t;
}

void verify(const EscMatrix& t) {
    if (t.ufi < 1 || t.ufi > kMaxUnroll || t.ufk < 1) throw FormatError("unroll factors out of range");
    if (t.rows < 0 || t.cols < 0) throw FormatError("negative dimension");
    for (std::size_t o = 0; o < t.patterns.size(); ++o) {
        const auto bits = t.patterns[o].bits;
        if (bits == 0 || bits >= (1u << t.ufi)) throw FormatError("pattern out of range");
        if (o > 0 && !(t.patterns[o - 1] < t.patterns[o])) throw FormatError("pattern table not ascending");
    }
    const auto expected_groups = static_cast<std::size_t>(t.num_row_panels()) * t.patterns.size();
    if (t.groups.size() != expected_groups) throw FormatError("group count does not match panels x patterns");
    if (t.rpp.size() != t.groups.size() + 1 || t.npp.size() != t.groups.size() + 1)
        throw FormatError("pointer arrays must have one entry per group plus terminal");
    if (t.rpp.front() != 0 || t.npp.front() != 0) throw FormatError("pointer arrays must start at 0");
    if (static_cast<std::size_t>(t.rpp.back()) != t.col_index.size())
        throw FormatError("RPP terminal does not match Cols length");
    if (static_cast<std::size_t>(t.npp.back()) != t.annz.size())
        throw FormatError("NPP terminal does not match ANNZ length");

    const auto np = t.patterns.size();
    for (std::size_t g = 0; g < t.groups.size(); ++g) {
        const auto& grp = t.groups[g];
        if (grp.panel != static_cast<std::int32_t>(g / np) || grp.pattern != t.patterns[g % np])
            throw FormatError("group " + std::to_string(g) + " does not match its block coordinate");
        const std::int32_t c = t.rpp[g + 1] - t.rpp[g];
        if (c != grp.padded_cols || c < 0) throw FormatError("RPP span disagrees with group table");
        if (c % t.ufk != 0) throw FormatError("padded column count is not a multiple of UFk");
        if (t.npp[g + 1] - t.npp[g] != grp.pattern.popcount() * c)
            throw FormatError("NPP span is not popcount x columns in group " + std::to_string(g));
        const auto gi = static_cast<std::int32_t>(g);
        bool in_tail = false;
        std::int32_t tail = 0;
        for (std::int32_t s = t.rpp[g]; s < t.rpp[g + 1]; ++s) {
            const std::int32_t col = t.col_index[s];
            if (col < 0 || col >= t.cols) throw FormatError("column index out of range");
            if (t.is_padding_slot(gi, s)) {
                in_tail = true;
                ++tail;
                const auto p = static_cast<std::size_t>(grp.pattern.popcount());
                const auto v0 = static_cast<std::size_t>(t.npp[g]) + static_cast<std::size_t>(s - t.rpp[g]) * p;
                for (std::size_t r = 0; r < p; ++r)
                    if (t.annz[v0 + r] != 0.0f) throw FormatError("padding slot holds a nonzero value");
            } else {
                if (in_tail) throw FormatError("overlapping slots: real column after padding");
                if (s > t.rpp[g] && col < t.col_index[s - 1])
                    throw FormatError("columns not increasing in group " + std::to_string(g));
            }
        }
        if (tail >= t.ufk) throw FormatError("more padding than UFk - 1 in group " + std::to_string(g));
        const std::int32_t top_row = grp.panel * t.ufi + (31 - std::countl_zero(grp.pattern.bits));
        if (c > 0 && top_row >= t.rows) throw FormatError("pattern addresses a row past the matrix");
    }
}

SparseMatrix reconstruct(const EscMatrix& t) {
    verify(t);
    struct Entry {
        std::int32_t col;
        float v;
    };
    std::vector<std::vector<Entry>> by_row(static_cast<std::size_t>(t.rows));
    for (std::int32_t g = 0; g < t.num_groups(); ++g) {
        const auto& grp = t.groups[g];
        const auto rows = grp.pattern.rows();
        const auto p = static_cast<std::int32_t>(rows.size());
        for (std::int32_t s = t.rpp[g]; s < t.rpp[g + 1]; ++s) {
            if (t.is_padding_slot(g, s)) continue;
            const std::int32_t v0 = t.npp[g] + (s - t.rpp[g]) * p;
            for (std::int32_t r = 0; r < p; ++r) {
                const std::int32_t row = grp.panel * t.ufi + rows[r];
                by_row[row].push_back({t.col_index[s], t.annz[v0 + r]});
            }
        }
    }
    SparseMatrix a;
    a.rows = t.rows;
    a.cols = t.cols;
    a.row_ptr.assign(static_cast<std::size_t>(t.rows) + 1, 0);
    for (std::int32_t r = 0; r < t.rows; ++r) {
        auto& es = by_row[r];
        std::sort(es.begin(), es.end(), [](const Entry& x, const Entry& y) { return x.col < y.col; });
        for (std::size_t i = 0; i < es.size(); ++i) {
            if (i > 0 && es[i].col == es[i - 1].col)
                throw FormatError("overlapping slots: (" + std::to_string(r) + ", " + std::to_string(es[i].col) +
                                  ") stored twice");
            a.col_idx.push_back(es[i].col);
            a.values.push_back(es[i].v);
        }
        a.row_ptr[r + 1] = static_cast<std::int32_t>(a.col_idx.size());
    }
    return a;
}

std::int64_t grid_size(const EscMatrix& t) {
    return static_cast<std::int64_t>(t.num_patterns()) * t.num_row_panels();
}

BlockCoord decode_block(const EscMatrix& t, std::int64_t block) {
    const auto np = t.num_patterns();
    if (np == 0 || block < 0 || block >= grid_size(t)) throw Error("block index out of range");
    return BlockCoord{static_cast<std::int32_t>(block / np), static_cast<std::int32_t>(block % np)};
}

std::uint64_t serialized_size(const EscMatrix& t) {
    return kHeaderBytes + kGroupBytes * t.groups.size() + 4 * (t.rpp.size() + t.npp.size()) +
           4 * t.col_index.size() + 4 * t.annz.size();
}

void serialize(const EscMatrix& t, std::ostream& out) {
    out.write(kMagic, 4);
    for (auto v : {t.rows, t.cols, t.ufi, t.ufk, t.num_groups(), t.num_patterns(), 0})
        put_u32(out, static_cast<std::uint32_t>(v));
    for (const auto& g : t.groups) {
        put_u32(out, static_cast<std::uint32_t>(g.panel));
        put_u32(out, g.pattern.bits);
        put_u32(out, static_cast<std::uint32_t>(g.padded_cols));
    }
    for (auto v : t.rpp) put_u32(out, static_cast<std::uint32_t>(v));
    for (auto v : t.col_index) put_u32(out, static_cast<std::uint32_t>(v));
    for (auto v : t.npp) put_u32(out, static_cast<std::uint32_t>(v));
    for (float v : t.annz) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

std::string serialize(const EscMatrix& t) {
    std::ostringstream os(std::ios::binary);
    serialize(t, os);
    return std::move(os).str();
}

EscMatrix deserialize(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad ESC magic");
    EscMatrix t;
    t.rows = static_cast<std::int32_t>(get_u32(in));
    t.cols = static_cast<std::int32_t>(get_u32(in));
    t.ufi = static_cast<std::int32_t>(get_u32(in));
    t.ufk = static_cast<std::int32_t>(get_u32(in));
    const auto ngroups = get_u32(in);
    const auto npatterns = get_u32(in);
    get_u32(in);
    if (t.ufi < 1 || t.ufi > kMaxUnroll || t.ufk < 1 || t.rows < 0 || t.cols < 0)
        throw FormatError("ESC header out of range");
    if (static_cast<std::uint64_t>(ngroups) != static_cast<std::uint64_t>(t.num_row_panels()) * npatterns)
        throw FormatError("ESC header group count inconsistent");

    t.groups.resize(ngroups);
    for (auto& g : t.groups) {
        g.panel = static_cast<std::int32_t>(get_u32(in));
        g.pattern.bits = get_u32(in);
        g.padded_cols = static_cast<std::int32_t>(get_u32(in));
    }
    for (std::uint32_t o = 0; o < npatterns && o < ngroups; ++o) t.patterns.push_back(t.groups[o].pattern);
    auto read_i32 = [&](std::vector<std::int32_t>& v, std::size_t n) {
        v.resize(n);
        for (auto& x : v) x = static_cast<std::int32_t>(get_u32(in));
    };
    read_i32(t.rpp, ngroups + 1ull);
    if (t.rpp.back() < 0) throw FormatError("negative RPP terminal");
    read_i32(t.col_index, static_cast<std::size_t>(t.rpp.back()));
    read_i32(t.npp, ngroups + 1ull);
    if (t.npp.back() < 0) throw FormatError("negative NPP terminal");
    t.annz.resize(static_cast<std::size_t>(t.npp.back()));
    for (auto& v : t.annz) v = std::bit_cast<float>(get_u32(in));
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after ESC container");
    verify(t);
    return t;
}

EscMatrix deserialize(const std::string& bytes) {
    std::istringstream is(bytes, std::ios::binary);
    return deserialize(is);
}

} // namespace esc
