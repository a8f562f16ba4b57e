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


// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "esc/emit.hpp"
#include "esc/error.hpp"
#include "esc/esc_format.hpp"
#include "esc/lowering.hpp"
#include "esc/matrix.hpp"
#include "esc/metrics.hpp"
#include "esc/sim.hpp"
#include "esc/tuner.hpp"

namespace {

using namespace esc;
using Clock = std::chrono::steady_clock;

// Pinned tolerances.
constexpr double kRelTol = 1e-4;
constexpr int kCorpusSize = 50;
constexpr double kCorpusSparsity[] = {0.5, 0.7, 0.9, 0.98};
constexpr std::int32_t kBCols[] = {32, 64, 128};
constexpr double kMaxGrowth = 3.0;
constexpr int kTimingTrials = 5;
constexpr double kSweepLow = 0.5, kSweepHigh = 0.8, kSweepReversal = 0.99;

struct Verdict {
    bool pass = true;
    std::string detail;
};

struct CorpusEntry {
    std::uint64_t seed;
    SparseMatrix a;
};

std::vector<CorpusEntry> corpus() {
    std::vector<CorpusEntry> out;
    std::mt19937_64 rng(20260101);
    for (int i = 0; i < kCorpusSize; ++i) {
        const auto m = static_cast<std::int32_t>(64 + rng() % 449);
        const auto k = static_cast<std::int32_t>(64 + rng() % 449);
        const auto seed = static_cast<std::uint64_t>(1000 + i);
        out.push_back({seed, gen_random(m, k, kCorpusSparsity[i % 4], seed)});
    }
    return out;
}

/// UFi 1..8 x UFk {1,2,4,8} x WarpTile {1,2,4} x TBS {32,64,128}, with
/// WarpTile*32 <= N and TBS <= max(N, 32).
std::vector<Schedule> grid_for(std::int32_t n) {
    std::vector<Schedule> out;
    for (int ufi = 1; ufi <= 8; ++ufi)
        for (int ufk : {1, 2, 4, 8})
            for (int wt : {1, 2, 4})
                for (int tbs : {32, 64, 128})
                    if (wt * 32 <= std::max(n, 32) && tbs <= std::max(n, 32)) out.push_back(Schedule{ufi, ufk, wt, tbs});
    return out;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Criteria 1, 3, 4 and 7 share one sweep over the corpus and schedule grid.
struct SweepOutcome {
    Verdict oracle, roundtrip, fma, branchless;
    double seconds = 0;
    std::int64_t runs = 0;
};

SweepOutcome corpus_sweep(const std::vector<CorpusEntry>& cs) {
    SweepOutcome o;
    std::int64_t oracle_fail = 0, rt_fail = 0, fma_fail = 0, cond_fail = 0, lowered = 0;
    double worst = 0;
    const auto t0 = Clock::now();
    const auto all = grid_for(128);
    for (std::size_t mi = 0; mi < cs.size(); ++mi) {
        const auto& a = cs[mi].a;
        std::map<std::int32_t, DenseMatrix> bs, want;
        for (auto n : kBCols) {
            bs[n] = gen_dense_random(a.cols, n, cs[mi].seed + static_cast<std::uint64_t>(n));
            want[n] = oracle_spmm(a, bs[n]);
        }
        std::map<std::pair<int, int>, EscMatrix> ts;
        for (int ufi = 1; ufi <= 8; ++ufi)
            for (int ufk : {1, 2, 4, 8}) {
                auto t = transform(a, ufi, ufk);
                if (!(reconstruct(t) == a)) ++rt_fail;
                ts.emplace(std::make_pair(ufi, ufk), std::move(t));
            }
        for (const auto& s : all) {
            const auto& t = ts.at({s.ufi, s.ufk});
            const auto ir = lower_ir(t, s);
            ++lowered;
            if (count_conditionals(ir) != 0) ++cond_fail;
            for (auto n : kBCols) {
                if (s.warp_tile * 32 > std::max(n, 32) || s.tbs > std::max(n, 32)) continue;
                const auto r = simulate(ir, t, bs[n]);
                ++o.runs;
                const auto cmp = compare(r, want[n], kRelTol);
                worst = std::max(worst, cmp.max_rel_error);
                if (!cmp.pass) {
                    if (oracle_fail++ < 3)
                        std::cerr << "  oracle mismatch: matrix " << mi << " schedule " << s.str() << " N=" << n
                                  << "\n" << cmp.str();
                }
                if (r.fma_count - r.padded_fma_count != a.nnz() * n) ++fma_fail;
            }
        }
    }
    o.seconds = seconds_since(t0);
    auto fmt = [](const char* what, std::int64_t bad, std::int64_t total) {
        std::ostringstream os;
        os << bad << "/" << total << " " << what;
        return os.str();
    };
    std::ostringstream d1;
    d1 << fmt("runs failed", oracle_fail, o.runs) << ", max_rel_error=" << worst << ", tol=" << kRelTol
       << ", time=" << static_cast<int>(o.seconds) << "s";
    o.oracle = {oracle_fail == 0, d1.str()};
    o.roundtrip = {rt_fail == 0, fmt("transforms not bitwise reversible", rt_fail, static_cast<std::int64_t>(cs.size()) * 32)};
    o.fma = {fma_fail == 0, fmt("runs with nnz*N mismatch", fma_fail, o.runs)};
    o.branchless = {cond_fail == 0, fmt("lowered kernels with conditionals", cond_fail, lowered)};
    return o;
}

SparseMatrix from_columns(int rows, const std::vector<std::uint32_t>& masks) {
    DenseMatrix d(rows, static_cast<std::int32_t>(masks.size()));
    for (std::size_t c = 0; c < masks.size(); ++c)
        for (int r = 0; r < rows; ++r)
            if ((masks[c] >> r) & 1u) d.at(r, static_cast<std::int32_t>(c)) = 1.0f;
    return csr_from_dense(d);
}

Verdict pattern_bound(const std::vector<CorpusEntry>& cs) {
    std::int64_t bad = 0, checked = 0;
    // Every subset of the 15 non-empty 4-row column patterns.
    for (std::uint32_t subset = 0; subset < (1u << 15); ++subset) {
        std::vector<std::uint32_t> cols;
        for (std::uint32_t p = 1; p <= 15; ++p)
            if ((subset >> (p - 1)) & 1u) cols.push_back(p);
        const auto t = transform(from_columns(4, cols), 4, 1);
        ++checked;
        if (t.num_patterns() != static_cast<std::int32_t>(cols.size()) || t.num_patterns() > 15) ++bad;
    }
    std::vector<std::uint32_t> full4, full3;
    for (std::uint32_t p = 1; p <= 15; ++p) full4.push_back(p);
    for (std::uint32_t p = 1; p <= 7; ++p) full3.push_back(p);
    const auto n4 = transform(from_columns(4, full4), 4, 1).num_patterns();
    const auto n3 = transform(from_columns(3, full3), 3, 1).num_patterns();
    for (const auto& e : cs)
        for (int ufi = 1; ufi <= 8; ++ufi) {
            ++checked;
            if (transform(e.a, ufi, 1).num_patterns() > (1 << ufi) - 1) ++bad;
        }
    std::ostringstream os;
    os << "full coverage UFi=4 -> " << n4 << ", UFi=3 -> " << n3 << ", " << bad << "/" << checked << " bound violations";
    return {bad == 0 && n4 == 15 && n3 == 7, os.str()};
}

Verdict compaction(const std::vector<CorpusEntry>& cs) {
    bool ok = true;
    std::ostringstream os;
    const auto& a = cs[1].a;
    const auto b = gen_dense_random(a.cols, 64, 5);
    for (int ufi = 1; ufi <= 8; ++ufi) {
        const Schedule s{ufi, 2, 1, 32};
        const auto l = lower(a, s);
        const auto plain = emit(l.ir, l.t, false);
        const auto comp = emit(l.ir, l.t, true);
        const auto lp = line_count(plain).kernel, lc = line_count(comp).kernel;
        bool row = comp.body_count == ufi && plain.body_count == (1 << ufi) - 1;
        if (ufi >= 2) row = row && lc < lp;
        const auto r0 = simulate(l.ir, l.t, b);
        const auto r1 = simulate(pass_compact(l.ir), l.t, b);
        row = row && r0.c == r1.c;
        if (!row) os << "UFi=" << ufi << " failed; ";
        ok = ok && row;
        if (ufi == 8) os << "UFi=8 bodies " << comp.body_count << " vs " << plain.body_count << ", kernel lines " << lc << " vs " << lp;
    }
    return {ok, os.str()};
}

Verdict storage() {
    std::vector<double> sp;
    for (int i = 0; i <= 6; ++i) sp.push_back(kSweepLow + 0.05 * i);
    sp.push_back(kSweepReversal);
    const auto rows = size_sweep(512, 512, sp, 4, 2, 77);
    bool ok = true;
    std::ostringstream os;
    for (const auto& r : rows) {
        const bool want_esc_smaller = r.sparsity <= kSweepHigh + 1e-9;
        const bool good = want_esc_smaller ? r.esc_over_dense < r.csr_over_dense : r.esc_over_dense > r.csr_over_dense;
        if (!good) os << "sparsity " << r.sparsity << " wrong side; ";
        ok = ok && good;
    }
    // Byte formulas against serialized lengths.
    const auto a = gen_random(512, 512, 0.7, 77);
    const auto t = transform(a, 4, 2);
    const bool bytes = storage_bytes(t) == serialize(t).size() &&
                       storage_bytes(StorageKind::Csr, a) == 8u * static_cast<std::uint64_t>(a.nnz()) + 4u * 513u &&
                       storage_bytes(StorageKind::Dense, a) == 4u * 512u * 512u;
    if (!bytes) os << "byte formula mismatch; ";
    os << "esc/dense " << rows.front().esc_over_dense << " vs csr/dense " << rows.front().csr_over_dense << " at 0.5, "
       << rows.back().esc_over_dense << " vs " << rows.back().csr_over_dense << " at 0.99";
    return {ok && bytes, os.str()};
}

std::string fingerprint(const SparseMatrix& a, const Schedule& s, std::uint64_t seed) {
    const auto t = transform(a, s.ufi, s.ufk);
    const auto ir = lower_ir(t, s);
    const auto art = emit(ir, t, true);
    const auto r = simulate(ir, t, gen_dense_random(a.cols, 64, seed));
    std::string c(reinterpret_cast<const char*>(r.c.data.data()), r.c.data.size() * sizeof(float));
    return sha256_hex(serialize(t)) + sha256_hex(to_string(ir)) + sha256_hex(art.kernel_source) +
           sha256_hex(art.host_source) + sha256_hex(art.transformer_source) + sha256_hex(c) + report(r);
}

Verdict determinism(const std::vector<CorpusEntry>& cs) {
    int bad = 0, n = 0;
    for (std::size_t i = 0; i < cs.size(); i += 7) {
        for (const char* text : {"4-7-1-32", "3-8-2-64", "8-2-4-128"}) {
            const auto s = Schedule::parse(text);
            const auto a0 = gen_random(cs[i].a.rows, cs[i].a.cols, kCorpusSparsity[i % 4], cs[i].seed);
            const auto a1 = gen_random(cs[i].a.rows, cs[i].a.cols, kCorpusSparsity[i % 4], cs[i].seed);
            ++n;
            if (fingerprint(a0, s, 9) != fingerprint(a1, s, 9)) ++bad;
        }
    }
    return {bad == 0, std::to_string(bad) + "/" + std::to_string(n) + " fingerprints differed"};
}

double mean_transform_seconds(std::int32_t m, std::int32_t k) {
    const auto a = gen_random(m, k, 0.9, 3);
    (void)transform(a, 4, 2); // warm-up
    double total = 0;
    for (int i = 0; i < kTimingTrials; ++i) {
        const auto t0 = Clock::now();
        const auto t = transform(a, 4, 2);
        total += seconds_since(t0);
        if (t.rows != m) std::abort();
    }
    return total / kTimingTrials;
}

Verdict linear_cost() {
    bool ok = true;
    std::ostringstream os;
    for (auto [m, k] : {std::pair{1024, 1024}, {2048, 2048}}) {
        const double base = mean_transform_seconds(m, k);
        const double twice = mean_transform_seconds(m, 2 * k);
        const double ratio = twice / base;
        os << m << "x" << k << " -> " << m << "x" << 2 * k << ": ratio " << ratio << "; ";
        ok = ok && ratio <= kMaxGrowth;
    }
    os << "limit " << kMaxGrowth;
    return {ok, os.str()};
}

Verdict tuner(const std::vector<CorpusEntry>& cs) {
    bool ok = true;
    std::ostringstream os;
    for (const char* text : {"4-7-1-32", "3-7-2-32", "3-8-2-64"}) {
        try {
            const auto s = Schedule::parse(text);
            const auto l = lower(cs[0].a, s);
            verify(l.ir);
        } catch (const std::exception& e) {
            ok = false;
            os << text << " failed: " << e.what() << "; ";
        }
    }
    const auto arch = ArchModel::a100();
    int worse = 0;
    double gain = 0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const auto n = kBCols[i % 3];
        const auto r = tune(cs[i].a, n, arch);
        const auto def = evaluate_schedule(cs[i].a, n, default_schedule(n), arch);
        if (r.best.cost > def.cost) ++worse;
        gain += def.cost / std::max(r.best.cost, 1.0);
    }
    ok = ok && worse == 0;
    os << worse << "/" << cs.size() << " matrices where tuned cost exceeds default, mean default/tuned "
       << gain / static_cast<double>(cs.size());
    return {ok, os.str()};
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto want = [&](int c) { return only.empty() || only.count(c) != 0; };

    std::map<int, std::pair<std::string, Verdict>> results;
    auto record = [&](int id, const char* name, const std::function<Verdict()>& fn) {
        if (!want(id)) return;
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        results[id] = {name, v};
        std::printf("criterion %2d %-24s %s  %s\n", id, name, v.pass ? "PASS" : "FAIL", v.detail.c_str());
        std::fflush(stdout);
    };

    const auto cs = corpus();
    if (want(1) || want(3) || want(4) || want(7)) {
        SweepOutcome sw;
        bool threw = false;
        std::string why;
        try {
            sw = corpus_sweep(cs);
        } catch (const std::exception& e) {
            threw = true;
            why = e.what();
        }
        auto from = [&](const Verdict& v) { return threw ? Verdict{false, "exception: " + why} : v; };
        record(1, "oracle-equivalence", [&] { return from(sw.oracle); });
        record(3, "roundtrip", [&] { return from(sw.roundtrip); });
        record(4, "fma-conservation", [&] { return from(sw.fma); });
        record(7, "no-divergence", [&] { return from(sw.branchless); });
    }
    record(2, "pattern-count-bound", [&] { return pattern_bound(cs); });
    record(5, "compaction", [&] { return compaction(cs); });
    record(6, "storage-study", [&] { return storage(); });
    record(8, "determinism", [&] { return determinism(cs); });
    record(9, "linear-transform-cost", [&] { return linear_cost(); });
    record(10, "tuner-sanity", [&] { return tuner(cs); });

    int failed = 0;
    for (const auto& [id, r] : results) failed += r.second.pass ? 0 : 1;
    std::printf("%zu criteria, %d failed\n", results.size(), failed);
    return failed == 0 ? 0 : 1;
}
