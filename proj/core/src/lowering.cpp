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

#include "esc/lowering.hpp"

#include <algorithm>
#include <map>
#include <iterator>
#include <utility>

#include "esc/error.hpp"

namespace esc {

namespace {

std::string acc_name(std::int64_t r, std::int64_t t) {
    if (r < 10 && t < 10) return "c" + std::to_string(r) + std::to_string(t);
    return "c" + std::to_string(r) + "_" + std::to_string(t);
}

void drop_loop(KernelIR& ir, int li) {
    ir.loops.erase(ir.loops.begin() + li);
    for (auto& s : ir.stmts)
        if (s.scope > li) --s.scope;
}

int require_loop(const KernelIR& ir, const char* iter, const char* pass) {
    const int li = ir.loop_index(iter);
    if (li < 0) throw IrError(std::string(pass) + ": loop '" + iter + "' not found");
    return li;
}

int rank_of(std::uint32_t bits, std::int64_t row) {
    return std::popcount(bits & ((1u << row) - 1u));
}

} // namespace

KernelIR pass_enumerate(const KernelIR& ir, std::int32_t ufi) {
    if (ufi < 1 || ufi > kMaxUnroll) throw ScheduleError("pass_enumerate: UFi out of range");
    const int li = require_loop(ir, "i", "pass_enumerate");
    if (ir.loops[static_cast<std::size_t>(li)].step != ufi)
        throw IrError("pass_enumerate: i must be unrolled by UFi first");
    if (ir.key_kind != KeyKind::None) throw IrError("pass_enumerate: IR is already enumerated");

    // Guarded FMAs indexed by their row offset.
    std::map<std::int64_t, const Fma*> rows;
    int scope = -1;
    std::size_t first = ir.stmts.size();
    for (std::size_t n = 0; n < ir.stmts.size(); ++n) {
        const auto* f = std::get_if<Fma>(&ir.stmts[n].op);
        if (!f || f->guard.empty()) continue;
        if (!f->dst_c || f->dst_c->idx.size() != 2) throw IrError("pass_enumerate: unexpected FMA shape");
        const auto r = f->dst_c->idx[0].constant;
        if (r < 0 || r >= ufi || rows.count(r)) throw IrError("pass_enumerate: unexpected row offset");
        rows[r] = f;
        scope = ir.stmts[n].scope;
        first = std::min(first, n);
    }
    if (static_cast<std::int32_t>(rows.size()) != ufi)
        throw IrError("pass_enumerate: expected one guarded FMA per unrolled row");

    KernelIR out = ir.shell();
    std::vector<Stmt> blocks;
    for (std::uint32_t bits = 1; bits < (1u << ufi); ++bits) {
        std::vector<Predicate> guard;
        for (std::int64_t q = 0; q < ufi; ++q) guard.push_back(Predicate{rows[q]->a, ((bits >> q) & 1u) != 0});
        for (std::int64_t r = 0; r < ufi; ++r) {
            if (!((bits >> r) & 1u)) continue;
            Fma f = *rows[r];
            f.guard = guard;
            blocks.push_back(Stmt{scope, bits, f});
        }
    }
    for (std::size_t n = 0; n < ir.stmts.size(); ++n) {
        if (n == first) out.stmts.insert(out.stmts.end(), blocks.begin(), blocks.end());
        const auto* f = std::get_if<Fma>(&ir.stmts[n].op);
        if (f && !f->guard.empty()) continue;
        out.stmts.push_back(ir.stmts[n]);
    }
    out.key_kind = KeyKind::Pattern;
    out.ufi = ufi;
    return out;
}

KernelIR pass_block_map(const KernelIR& ir, const EscMatrix& t) {
    if (ir.key_kind != KeyKind::Pattern) throw IrError("pass_block_map: IR is not enumerated");
    if (ir.decode != BlockDecode::None) throw IrError("pass_block_map: blocks are already bound");
    if (ir.loop_index("i") != 0) throw IrError("pass_block_map: i must be the outermost loop");
    if (t.ufi != ir.ufi) throw ScheduleError("pass_block_map: format UFi does not match the IR");
    KernelIR out = ir;
    drop_loop(out, 0);

    const int ki = require_loop(out, "k", "pass_block_map");
    const int ji = require_loop(out, "j", "pass_block_map");
    auto& k = out.loops[static_cast<std::size_t>(ki)];
    k.domain = Domain::GroupColumns;
    k.lower = Bound{Affine::lit(0), {}};
    k.upper = Bound{Affine::var("g"), {}};
    if (ki < ji) {
        const int inner = static_cast<int>(out.loops.size());
        for (const auto& s : out.stmts)
            if (s.scope != inner) throw IrError("pass_block_map: cannot interchange an imperfect nest");
        std::swap(out.loops[static_cast<std::size_t>(ki)], out.loops[static_cast<std::size_t>(ji)]);
    }
    for (auto& s : out.stmts)
        if (auto* f = std::get_if<Fma>(&s.op)) f->guard.clear();
    out.stmts.insert(out.stmts.begin(), Stmt{0, 0, Dispatch{}});

    out.decode = BlockDecode::Enumerated;
    out.grid_size = grid_size(t);
    out.num_patterns = t.num_patterns();
    return out;
}

KernelIR pass_thread_map(const KernelIR& ir, const Schedule& s) {
    s.validate();
    if (ir.decode != BlockDecode::Enumerated) throw IrError("pass_thread_map: IR is not block-mapped");
    KernelIR mapped = map_iter(ir, "j", Binding::Lane, static_cast<std::int64_t>(s.warp_tile) * s.tbs, s.warp_tile);
    if (s.warp_tile == 1) return mapped;

    // Column groups j+tid+32*t, replicated run by run (t outer, rows inner).
    const std::vector<Stmt> src = std::move(mapped.stmts);
    KernelIR out = std::move(mapped);
    out.stmts.clear();
    out.stmts.reserve(src.size() * static_cast<std::size_t>(s.warp_tile));
    std::size_t n = 0;
    auto uses_j = [](const Stmt& st) {
        const auto* f = std::get_if<Fma>(&st.op);
        return f && ((f->dst_c && f->dst_c->uses("j")) || f->b.uses("j"));
    };
    while (n < src.size()) {
        if (!uses_j(src[n])) {
            out.stmts.push_back(src[n++]);
            continue;
        }
        std::size_t e = n;
        while (e < src.size() && src[e].scope == src[n].scope && src[e].key == src[n].key && uses_j(src[e])) ++e;
        for (std::int32_t tt = 0; tt < s.warp_tile; ++tt) {
            const Affine repl = Affine::var("j") + 32 * tt;
            for (std::size_t q = n; q < e; ++q) {
                Stmt st = src[q];
                auto& f = std::get<Fma>(st.op);
                if (f.dst_c) f.dst_c = f.dst_c->substitute("j", repl);
                f.b = f.b.substitute("j", repl);
                out.stmts.push_back(std::move(st));
            }
        }
        n = e;
    }
    return out;
}

KernelIR pass_coarsen(const KernelIR& ir, const Schedule& s) {
    s.validate();
    if (!ir.thread) throw IrError("pass_coarsen: IR is not thread-mapped");
    if (s.ufi != ir.ufi) throw ScheduleError("pass_coarsen: schedule UFi does not match the IR");
    KernelIR un = unroll(ir, "k", s.ufk);
    const int inner = static_cast<int>(un.loops.size());

    struct AccInfo {
        Access c;
    };
    std::map<std::uint32_t, std::map<std::pair<std::int64_t, std::int64_t>, AccInfo>> accs;
    std::vector<Stmt> head, body, tail;
    bool seen_body = false;
    for (auto& st : un.stmts) {
        if (st.scope < inner) {
            (seen_body ? tail : head).push_back(std::move(st));
            continue;
        }
        seen_body = true;
        Stmt x = std::move(st);
        if (auto* f = std::get_if<Fma>(&x.op); f && f->dst_c) {
            const auto r = f->dst_c->idx[0].constant;
            const auto tt = f->dst_c->idx[1].constant / 32;
            f->acc = acc_name(r, tt);
            accs[x.key].emplace(std::make_pair(r, tt), AccInfo{*f->dst_c});
            f->dst_c.reset();
        }
        body.push_back(std::move(x));
    }

    KernelIR out = un.shell();
    out.stmts = std::move(head);
    out.stmts.reserve(un.stmts.size() + 2 * body.size());
    for (const auto& [key, m] : accs)
        for (const auto& [rt, info] : m) out.stmts.push_back(Stmt{inner - 1, key, Declare{acc_name(rt.first, rt.second)}});
    std::move(body.begin(), body.end(), std::back_inserter(out.stmts));
    for (const auto& [key, m] : accs)
        for (const auto& [rt, info] : m)
            out.stmts.push_back(Stmt{inner - 1, key, AtomicAdd{info.c, acc_name(rt.first, rt.second)}});
    std::move(tail.begin(), tail.end(), std::back_inserter(out.stmts));
    out.schedule = s;
    return out;
}

KernelIR pass_data_transform(const KernelIR& ir, const EscMatrix& t) {
    if (!ir.schedule) throw IrError("pass_data_transform: IR is not coarsened");
    const auto& s = *ir.schedule;
    if (t.ufi != s.ufi || t.ufk != s.ufk)
        throw ScheduleError("schedule/format mismatch: schedule " + s.str() + " vs format UFi=" +
                            std::to_string(t.ufi) + " UFk=" + std::to_string(t.ufk));
    const int ki = require_loop(ir, "k", "pass_data_transform");
    if (ki + 1 != static_cast<int>(ir.loops.size())) throw IrError("pass_data_transform: k must be innermost");
    if (ir.loops[static_cast<std::size_t>(ki)].domain != Domain::GroupColumns)
        throw IrError("pass_data_transform: k does not walk group columns");

    KernelIR out = ir.shell();
    auto& k = out.loops[static_cast<std::size_t>(ki)];
    k.domain = Domain::Range;
    k.lower = Bound{Affine::var("g"), Array::RPP};
    k.upper = Bound{Affine::var("g") + 1, Array::RPP};

    const int inner = ki + 1;
    std::vector<Stmt> pre, body, post;
    bool seen_body = false;
    for (const auto& st : ir.stmts) {
        if (st.scope < inner)
            (seen_body ? post : pre).push_back(st);
        else
            seen_body = true;
    }

    out.stmts = std::move(pre);
    out.stmts.reserve(ir.stmts.size() + static_cast<std::size_t>(s.ufk) + 64);
    out.stmts.push_back(Stmt{inner - 1, 0, Let{"t_nnz", Access{Array::NPP, {Affine::var("g")}}}});
    for (std::int32_t u = 0; u < s.ufk; ++u) {
        Affine at = Affine::var("k") + u;
        at.show_zero = true;
        out.stmts.push_back(Stmt{inner, 0, Let{"br" + std::to_string(u), Access{Array::Cols, {at}}}});
    }
    std::vector<std::uint32_t> keys;
    for (const auto& st : ir.stmts) {
        if (st.scope < inner) continue;
        Stmt x = st;
        if (auto* f = std::get_if<Fma>(&x.op)) {
            const auto row = f->a.idx[0].constant;
            const auto u = f->a.idx[1].constant;
            const int p = std::popcount(x.key);
            Affine at = Affine::var("t_nnz") + (u * p + rank_of(x.key, row));
            at.show_zero = true;
            f->a = Access{Array::ANNZ, {at}};
            f->b.idx[0] = Affine::var("br" + std::to_string(u));
            if (keys.empty() || keys.back() != x.key) keys.push_back(x.key);
        }
        out.stmts.push_back(std::move(x));
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    for (auto key : keys)
        out.stmts.push_back(Stmt{inner, key, Advance{"t_nnz", static_cast<std::int64_t>(std::popcount(key)) * s.ufk}});
    std::move(post.begin(), post.end(), std::back_inserter(out.stmts));
    out.data_transformed = true;
    return out;
}

KernelIR pass_compact(const KernelIR& ir) {
    if (!ir.data_transformed || ir.key_kind != KeyKind::Pattern)
        throw IrError("pass_compact: requires a data-transformed, pattern-keyed IR");
    if (ir.ufi == 1) return ir;
    KernelIR out = ir.shell();
    const Stmt* dispatch = nullptr;
    for (const auto& st : ir.stmts)
        if (std::holds_alternative<Dispatch>(st.op)) dispatch = &st;
    if (dispatch) out.stmts.push_back(*dispatch);
    for (std::int32_t p = 1; p <= ir.ufi; ++p) {
        for (std::int32_t q = 0; q < p; ++q) {
            Affine at = Affine::var("g", ir.ufi) + q;
            at.show_zero = true;
            out.stmts.push_back(Stmt{0, static_cast<std::uint32_t>(p),
                                     Let{"ro" + std::to_string(q), Access{Array::RowOff, {at}}}});
        }
    }
    for (const auto& st : ir.stmts) {
        if (std::holds_alternative<Dispatch>(st.op)) continue;
        if (st.key == 0) {
            out.stmts.push_back(st);
            continue;
        }
        const int p = std::popcount(st.key);
        if (st.key != (1u << p) - 1u) continue;
        Stmt x = st;
        x.key = static_cast<std::uint32_t>(p);
        if (auto* a = std::get_if<AtomicAdd>(&x.op)) {
            auto& row = a->c.idx[0];
            const auto r = row.constant;
            row = Affine::var("i") + Affine::var("ro" + std::to_string(r));
        }
        out.stmts.push_back(std::move(x));
    }
    out.key_kind = KeyKind::Popcount;
    out.compacted = true;
    return out;
}

KernelIR lower_ir(const EscMatrix& t, const Schedule& s) {
    s.validate();
    if (t.ufi != s.ufi || t.ufk != s.ufk) throw ScheduleError("schedule/format mismatch");
    try {
        KernelIR ir = build_spmm_ir();
        ir = unroll(ir, "i", s.ufi);
        ir = pass_enumerate(ir, s.ufi);
        ir = pass_block_map(ir, t);
        ir = pass_thread_map(ir, s);
        ir = pass_coarsen(ir, s);
        ir = pass_data_transform(ir, t);
        return ir;
    } catch (const IrError& e) {
        throw InternalError(std::string("lowering pipeline: ") + e.what());
    }
}

Lowered lower(const SparseMatrix& a, const Schedule& s) {
    s.validate();
    Lowered out{transform(a, s.ufi, s.ufk), {}};
    out.ir = lower_ir(out.t, s);
    return out;
}

std::vector<std::int32_t> row_offset_table(const EscMatrix& t) {
    std::vector<std::int32_t> ro(static_cast<std::size_t>(t.num_groups()) * t.ufi, 0);
    for (std::int32_t g = 0; g < t.num_groups(); ++g) {
        const auto rows = t.groups[g].pattern.rows();
        for (std::size_t q = 0; q < rows.size(); ++q) ro[static_cast<std::size_t>(g) * t.ufi + q] = rows[q];
    }
    return ro;
}

KernelIR lower_k_lane_baseline() {
    KernelIR ir = map_iter(build_spmm_ir(), "i", Binding::Block);
    // k, j -> j, k so every lane of a warp shares one output C[i][j].
    std::swap(ir.loops[0], ir.loops[1]);
    auto f = std::get<Fma>(ir.stmts.at(0).op);
    const Access c = *f.dst_c;
    f.dst_c.reset();
    f.acc = "acc";
    ir.stmts = {Stmt{1, 0, Declare{"acc"}}, Stmt{2, 0, f}, Stmt{1, 0, WarpReduce{c, "acc"}}};
    return map_iter(ir, "k", Binding::Lane, 32, 1);
}

} // namespace esc
