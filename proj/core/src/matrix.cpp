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

#include "esc/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "esc/error.hpp"

namespace esc {

namespace {

// Uniform in [0, 1) with 24 bits, independent of the standard library's
// distribution implementations.
float unit_float(std::mt19937_64& rng) {
    return static_cast<float>(rng() >> 40) * 0x1.0p-24f;
}

double unit_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

float nonzero_value(std::mt19937_64& rng) {
    for (;;) {
        const float v = 2.0f * unit_float(rng) - 1.0f;
        if (v != 0.0f) return v;
    }
}

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::int64_t parse_int(const std::string& tok, std::size_t line, const char* what) {
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(tok, &pos);
    } catch (const std::exception&) {
        throw ParseError(std::string("expected integer ") + what + ", got '" + tok + "'", line);
    }
    if (pos != tok.size())
        throw ParseError(std::string("expected integer ") + what + ", got '" + tok + "'", line);
    return v;
}

double parse_real(const std::string& tok, std::size_t line) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw ParseError("expected real value, got '" + tok + "'", line);
    }
    if (pos != tok.size()) throw ParseError("expected real value, got '" + tok + "'", line);
    return v;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return in;
}

} // namespace

void SparseMatrix::validate() const {
    if (rows < 0 || cols < 0) throw Error("negative matrix dimension");
    if (row_ptr.size() != static_cast<std::size_t>(rows) + 1)
        throw Error("row_ptr has " + std::to_string(row_ptr.size()) + " entries, expected " +
                    std::to_string(rows + 1));
    if (row_ptr.front() != 0) throw Error("row_ptr[0] must be 0");
    if (values.size() != col_idx.size()) throw Error("values/col_idx length mismatch");
    if (row_ptr.back() != nnz()) throw Error("pointer/count mismatch");
    for (std::int32_t r = 0; r < rows; ++r) {
        if (row_ptr[r + 1] < row_ptr[r]) throw Error("row_ptr decreases at row " + std::to_string(r));
        for (std::int32_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
            if (col_idx[p] < 0 || col_idx[p] >= cols)
                throw Error("column index " + std::to_string(col_idx[p]) + " out of range in row " +
                            std::to_string(r));
            if (p > row_ptr[r] && col_idx[p] <= col_idx[p - 1])
                throw Error("columns not strictly increasing in row " + std::to_string(r));
            if (!std::isfinite(values[p])) throw Error("non-finite value in row " + std::to_string(r));
        }
    }
}

bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols || a.row_ptr != b.row_ptr || a.col_idx != b.col_idx)
        return false;
    if (a.values.size() != b.values.size()) return false;
    return a.values.empty() ||
           std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0;
}

bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols || a.data.size() != b.data.size()) return false;
    return a.data.empty() ||
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

SparseMatrix parse_smtx(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&](std::string& out) -> bool {
        while (std::getline(in, out)) {
            ++lineno;
            if (!split_tokens(out).empty()) return true;
        }
        return false;
    };

    if (!next_line(line)) throw ParseError("malformed header: file is empty", 1);
    auto header = split_tokens(line);
    if (header.size() != 3) throw ParseError("malformed header: expected 'M, K, nnz'", lineno);
    const auto m = parse_int(header[0], lineno, "M");
    const auto k = parse_int(header[1], lineno, "K");
    const auto nnz = parse_int(header[2], lineno, "nnz");
    if (m < 0 || k < 0 || nnz < 0 || m > INT32_MAX || k > INT32_MAX || nnz > INT32_MAX)
        throw ParseError("malformed header: dimensions out of range", lineno);
    if (nnz > m * k) throw ParseError("malformed header: nnz exceeds M*K", lineno);

    SparseMatrix a;
    a.rows = static_cast<std::int32_t>(m);
    a.cols = static_cast<std::int32_t>(k);
    a.synthetic_values = true;

    if (!next_line(line)) throw ParseError("missing row pointer line", lineno + 1);
    const std::size_t ptr_line = lineno;
    auto ptr_tok = split_tokens(line);
    if (ptr_tok.size() != static_cast<std::size_t>(m) + 1)
        throw ParseError("expected " + std::to_string(m + 1) + " row pointers, got " +
                             std::to_string(ptr_tok.size()),
                         ptr_line);
    a.row_ptr.assign(ptr_tok.size(), 0);
    for (std::size_t i = 0; i < ptr_tok.size(); ++i) {
        const auto v = parse_int(ptr_tok[i], ptr_line, "row pointer");
        if (v < 0 || v > nnz) throw ParseError("row pointer out of range", ptr_line);
        if (i > 0 && v < a.row_ptr[i - 1]) throw ParseError("row pointers decrease", ptr_line);
        a.row_ptr[i] = static_cast<std::int32_t>(v);
    }
    if (a.row_ptr.front() != 0) throw ParseError("first row pointer must be 0", ptr_line);
    if (a.row_ptr.back() != nnz) throw ParseError("pointer/count mismatch", ptr_line);

    std::vector<std::string> col_tok;
    std::size_t col_line = lineno + 1;
    if (next_line(line)) {
        col_line = lineno;
        col_tok = split_tokens(line);
    }
    if (col_tok.size() != static_cast<std::size_t>(nnz))
        throw ParseError("expected " + std::to_string(nnz) + " column indices, got " +
                             std::to_string(col_tok.size()),
                         col_line);
    a.col_idx.resize(col_tok.size());
    for (std::size_t i = 0; i < col_tok.size(); ++i) {
        const auto v = parse_int(col_tok[i], col_line, "column index");
        if (v < 0 || v >= k) throw ParseError("index out of range: column " + col_tok[i], col_line);
        a.col_idx[i] = static_cast<std::int32_t>(v);
    }
    for (std::int32_t r = 0; r < a.rows; ++r)
        for (std::int32_t p = a.row_ptr[r] + 1; p < a.row_ptr[r + 1]; ++p)
            if (a.col_idx[p] <= a.col_idx[p - 1])
                throw ParseError("columns not strictly increasing in row " + std::to_string(r), col_line);

    if (next_line(line)) throw ParseError("unexpected trailing content", lineno);
    a.values.assign(a.col_idx.size(), 1.0f);
    return a;
}

SparseMatrix load_smtx(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return parse_smtx(in);
}

void write_smtx(const SparseMatrix& a, std::ostream& out) {
    out << a.rows << ", " << a.cols << ", " << a.nnz() << '\n';
    for (std::size_t i = 0; i < a.row_ptr.size(); ++i) out << (i ? " " : "") << a.row_ptr[i];
    out << '\n';
    for (std::size_t i = 0; i < a.col_idx.size(); ++i) out << (i ? " " : "") << a.col_idx[i];
    out << '\n';
}

SparseMatrix parse_matrix_market(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("malformed header: file is empty", 1);
    ++lineno;
    auto banner = split_tokens(line);
    for (auto& t : banner) std::transform(t.begin(), t.end(), t.begin(), ::tolower);
    if (banner.size() != 5 || banner[0] != "%%matrixmarket" || banner[1] != "matrix")
        throw ParseError("malformed header: expected %%MatrixMarket banner", lineno);
    if (banner[2] != "coordinate") throw ParseError("only coordinate format is supported", lineno);
    const bool pattern = banner[3] == "pattern";
    if (!pattern && banner[3] != "real" && banner[3] != "integer")
        throw ParseError("unsupported field '" + banner[3] + "'", lineno);
    if (banner[4] != "general") throw ParseError("only general symmetry is supported", lineno);

    std::vector<std::string> size_tok;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '%') continue;
        size_tok = split_tokens(line);
        if (!size_tok.empty()) break;
    }
    if (size_tok.size() != 3) throw ParseError("malformed size line: expected 'M K nnz'", lineno);
    const auto m = parse_int(size_tok[0], lineno, "M");
    const auto k = parse_int(size_tok[1], lineno, "K");
    const auto nnz = parse_int(size_tok[2], lineno, "nnz");
    if (m < 0 || k < 0 || nnz < 0 || m > INT32_MAX || k > INT32_MAX || nnz > m * k)
        throw ParseError("malformed size line: dimensions out of range", lineno);

    struct Entry {
        std::int32_t r, c;
        float v;
        std::size_t line;
    };
    std::vector<Entry> entries;
    entries.reserve(static_cast<std::size_t>(nnz));
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '%') continue;
        auto tok = split_tokens(line);
        if (tok.empty()) continue;
        if (tok.size() != (pattern ? 2u : 3u)) throw ParseError("malformed entry line", lineno);
        const auto r = parse_int(tok[0], lineno, "row");
        const auto c = parse_int(tok[1], lineno, "column");
        if (r < 1 || r > m || c < 1 || c > k) throw ParseError("index out of range", lineno);
        float v = 1.0f;
        if (!pattern) {
            v = static_cast<float>(parse_real(tok[2], lineno));
            if (!std::isfinite(v)) throw ParseError("non-finite value", lineno);
        }
        entries.push_back({static_cast<std::int32_t>(r - 1), static_cast<std::int32_t>(c - 1), v, lineno});
    }
    if (entries.size() != static_cast<std::size_t>(nnz))
        throw ParseError("pointer/count mismatch: header says " + std::to_string(nnz) + " entries, found " +
                             std::to_string(entries.size()),
                         lineno);
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.r != b.r ? a.r < b.r : a.c < b.c; });

    SparseMatrix a;
    a.rows = static_cast<std::int32_t>(m);
    a.cols = static_cast<std::int32_t>(k);
    a.synthetic_values = pattern;
    a.row_ptr.assign(static_cast<std::size_t>(m) + 1, 0);
    a.col_idx.reserve(entries.size());
    a.values.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (i > 0 && entries[i - 1].r == e.r && entries[i - 1].c == e.c)
            throw ParseError("duplicate entry", e.line);
        ++a.row_ptr[e.r + 1];
        a.col_idx.push_back(e.c);
        a.values.push_back(e.v);
    }
    std::partial_sum(a.row_ptr.begin(), a.row_ptr.end(), a.row_ptr.begin());
    return a;
}

SparseMatrix load_matrix_market(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return parse_matrix_market(in);
}

SparseMatrix load_matrix(const std::filesystem::path& path) {
    if (path.extension() == ".mtx") return load_matrix_market(path);
    return load_smtx(path);
}

SparseMatrix gen_random(std::int32_t rows, std::int32_t cols, double sparsity, std::uint64_t seed) {
    if (rows < 1 || cols < 1) throw Error("gen_random: M and K must be >= 1");
    if (!(sparsity >= 0.0 && sparsity < 1.0)) throw Error("gen_random: sparsity must be in [0, 1)");

    const std::int64_t total = static_cast<std::int64_t>(rows) * cols;
    const auto target = static_cast<std::int64_t>(std::llround((1.0 - sparsity) * static_cast<double>(total)));

    std::mt19937_64 rng(seed);
    SparseMatrix a;
    a.rows = rows;
    a.cols = cols;
    a.row_ptr.assign(static_cast<std::size_t>(rows) + 1, 0);
    a.col_idx.reserve(static_cast<std::size_t>(target));

    // Selection sampling: visits positions in row-major order and keeps each
    // with probability (still needed) / (still available).
    std::int64_t chosen = 0;
    for (std::int64_t t = 0; t < total && chosen < target; ++t) {
        const double u = unit_double(rng);
        if (static_cast<double>(total - t) * u < static_cast<double>(target - chosen)) {
            const auto r = static_cast<std::int32_t>(t / cols);
            a.col_idx.push_back(static_cast<std::int32_t>(t % cols));
            ++a.row_ptr[r + 1];
            ++chosen;
        }
    }
    std::partial_sum(a.row_ptr.begin(), a.row_ptr.end(), a.row_ptr.begin());
    a.values.resize(a.col_idx.size());
    for (auto& v : a.values) v = nonzero_value(rng);
    return a;
}

DenseMatrix gen_dense_random(std::int32_t rows, std::int32_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DenseMatrix d(rows, cols);
    for (auto& v : d.data) v = 2.0f * unit_float(rng) - 1.0f;
    return d;
}

void randomize_values(SparseMatrix& a, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& v : a.values) v = nonzero_value(rng);
    a.synthetic_values = false;
}

DenseMatrix to_dense(const SparseMatrix& a) {
    DenseMatrix d(a.rows, a.cols);
    for (std::int32_t r = 0; r < a.rows; ++r)
        for (std::int32_t p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) d.at(r, a.col_idx[p]) = a.values[p];
    return d;
}

SparseMatrix csr_from_dense(const DenseMatrix& d) {
    SparseMatrix a;
    a.rows = d.rows;
    a.cols = d.cols;
    a.row_ptr.assign(static_cast<std::size_t>(d.rows) + 1, 0);
    for (std::int32_t r = 0; r < d.rows; ++r) {
        for (std::int32_t c = 0; c < d.cols; ++c) {
            const float v = d.at(r, c);
            if (v != 0.0f) {
                a.col_idx.push_back(c);
                a.values.push_back(v);
            }
        }
        a.row_ptr[r + 1] = static_cast<std::int32_t>(a.col_idx.size());
    }
    return a;
}

} // namespace esc
