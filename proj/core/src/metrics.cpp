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

#include "esc/metrics.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "esc/emit.hpp"
#include "esc/error.hpp"
#include "esc/lowering.hpp"

namespace esc {

std::uint64_t dense_bytes(std::int64_t rows, std::int64_t cols) {
    return 4ULL * static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols);
}

std::uint64_t csr_bytes(std::int64_t rows, std::int64_t nnz) {
    return 8ULL * static_cast<std::uint64_t>(nnz) + 4ULL * static_cast<std::uint64_t>(rows + 1);
}

std::uint64_t storage_bytes(StorageKind kind, const SparseMatrix& a) {
    return kind == StorageKind::Dense ? dense_bytes(a.rows, a.cols) : csr_bytes(a.rows, a.nnz());
}

std::uint64_t storage_bytes(const EscMatrix& t) {
    return 32ULL + 12ULL * t.groups.size() + 4ULL * (t.annz.size() + t.col_index.size() + t.rpp.size() + t.npp.size());
}

std::vector<SweepRow> size_sweep(std::int32_t rows, std::int32_t cols, const std::vector<double>& sparsities,
                                 std::int32_t ufi, std::int32_t ufk, std::uint64_t seed) {
    std::vector<SweepRow> out;
    const double dense = static_cast<double>(dense_bytes(rows, cols));
    for (std::size_t i = 0; i < sparsities.size(); ++i) {
        const auto a = gen_random(rows, cols, sparsities[i], seed + i);
        const auto t = transform(a, ufi, ufk);
        out.push_back({sparsities[i], static_cast<double>(storage_bytes(t)) / dense,
                       static_cast<double>(storage_bytes(StorageKind::Csr, a)) / dense});
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "sparsity,esc_over_dense,csr_over_dense\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.4f,%.6f,%.6f\n", r.sparsity, r.esc_over_dense, r.csr_over_dense);
        out += buf;
    }
    return out;
}

double ReuseReport::expected() const {
    return expected_den == 0 ? 1.0 : static_cast<double>(expected_num) / static_cast<double>(expected_den);
}

std::string ReuseReport::str() const {
    std::ostringstream os;
    os << "reuse_factor_b=" << measured << '\n'
       << "expected_reuse=" << expected_num << '/' << expected_den << '\n'
       << "reuse_match=" << (matches ? "yes" : "no") << '\n';
    return os.str();
}

ReuseReport reuse_report(const SimResult& r, const EscMatrix& t, const Schedule& s) {
    if (s.ufi != t.ufi || s.ufk != t.ufk) throw ScheduleError("reuse_report: schedule does not match the transform");
    ReuseReport rep;
    rep.measured = r.reuse_factor_b();
    for (const auto& g : t.groups) {
        rep.expected_num += static_cast<std::int64_t>(g.pattern.popcount()) * g.padded_cols;
        rep.expected_den += g.padded_cols;
    }
    if (rep.expected_den == 0) {
        rep.expected_num = rep.expected_den = 1;
        rep.matches = r.load_count_b == 0;
    } else {
        rep.matches = r.fma_count * rep.expected_den == rep.expected_num * r.load_count_b;
    }
    return rep;
}

std::vector<CompactionRow> compaction_study(const SparseMatrix& a, const std::vector<Schedule>& schedules) {
    std::map<std::pair<std::int32_t, std::int32_t>, EscMatrix> cache;
    std::vector<CompactionRow> out;
    for (const auto& s : schedules) {
        s.validate();
        auto key = std::make_pair(s.ufi, s.ufk);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, transform(a, s.ufi, s.ufk)).first;
        const auto ir = lower_ir(it->second, s);
        const auto plain = emit(ir, it->second, false);
        const auto comp = emit(ir, it->second, true);
        out.push_back({s, plain.body_count, comp.body_count, line_count(plain).total(), line_count(comp).total()});
    }
    return out;
}

std::string compaction_csv(const std::vector<CompactionRow>& rows) {
    std::ostringstream os;
    os << "schedule,bodies_plain,bodies_compacted,lines_plain,lines_compacted\n";
    for (const auto& r : rows)
        os << r.schedule.str() << ',' << r.bodies_plain << ',' << r.bodies_compacted << ',' << r.lines_plain << ','
           << r.lines_compacted << '\n';
    return os.str();
}

} // namespace esc
