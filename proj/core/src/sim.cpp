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

#include "esc/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>

#include "esc/error.hpp"
#include "esc/lowering.hpp"

namespace esc {

namespace {

constexpr int kLanes = 32;
constexpr std::uint32_t kAll = 0xffffffffu;

std::uint32_t lane_span(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return 0;
    if (hi - lo >= kLanes) return kAll;
    return ((1u << (hi - lo)) - 1u) << lo;
}

/// Lanes l for which 0 <= u + tc * l < extent.
std::uint32_t range_mask(std::int64_t u, std::int64_t tc, std::int64_t extent) {
    if (tc == 0) return (u >= 0 && u < extent) ? kAll : 0;
    if (tc == 1) return lane_span(std::max<std::int64_t>(0, -u), std::min<std::int64_t>(kLanes, extent - u));
    std::uint32_t m = 0;
    for (int l = 0; l < kLanes; ++l) {
        const auto v = u + tc * l;
        if (v >= 0 && v < extent) m |= 1u << l;
    }
    return m;
}

struct CAff {
    int n = 0;
    int slot[4] = {0, 0, 0, 0};
    std::int64_t coef[4] = {0, 0, 0, 0};
    std::int64_t c = 0;
    std::int64_t tid = 0;

    std::int64_t eval(const std::int64_t* v, std::int64_t tid_base) const {
        std::int64_t r = c + tid * tid_base;
        for (int q = 0; q < n; ++q) r += coef[q] * v[slot[q]];
        return r;
    }
};

struct CAcc {
    Array arr = Array::A;
    int nd = 0;
    CAff d[2];
    int gc_dim = -1;
};

/// An access evaluated for one warp: per-dimension uniform part and lane
/// coefficient, the lanes it is in bounds for, and whether it went through a
/// padding slot of Cols.
struct Res {
    std::int64_t u[2] = {0, 0};
    std::int64_t tc[2] = {0, 0};
    std::uint32_t mask = 0;
    bool pad = false;
    bool uniform() const { return tc[0] == 0 && tc[1] == 0; }
};

enum class Op : std::uint8_t { Fma, Declare, Atomic, Reduce, Dispatch, Let, Advance };

struct CStmt {
    Op op = Op::Dispatch;
    CAcc a, b, c;
    bool has_c = false;
    int acc = -1;
    std::vector<std::pair<CAcc, bool>> guard;
    int var = -1;
    std::int64_t amount = 0;
    int a_id = -1;
    int b_id = -1;
    int pad_var = -1;
};

struct Node {
    struct Item {
        int stmt = -1;
        int loop = -1;
        int child = -1;
    };
    std::vector<Item> items;
};

struct Program {
    std::vector<CStmt> stmts;
    std::vector<Node> nodes;
    std::vector<bool> operand_is_b;
    std::int32_t declares = 0;
};

struct CBound {
    CAff e;
    bool load = false;
    Array arr = Array::RPP;
};

class Simulator {
public:
    Simulator(const KernelIR& ir, const EscMatrix& t, const DenseMatrix& b, const SimOptions& opt)
        : ir_(ir), t_(t), b_(b), opt_(opt) {}

    SimResult run();

private:
    int slot_of(const std::string& name) const {
        auto it = slots_.find(name);
        if (it == slots_.end()) throw IrError("unbound iterator '" + name + "'");
        return it->second;
    }
    int intern(const std::string& name) {
        auto [it, fresh] = slots_.emplace(name, static_cast<int>(slots_.size()));
        (void)fresh;
        return it->second;
    }
    CAff compile(const Affine& a) const;
    CAcc compile(const Access& a) const;
    const Program& program(std::uint32_t key);
    int build_nodes(Program& p, const std::vector<Stmt>& src, std::size_t level, std::size_t b, std::size_t e);

    Res resolve(const CAcc& a) const;
    float a_value(const CAcc& acc, const Res& r, int lane) const;
    std::int32_t int_array(Array arr, std::int64_t idx) const;
    std::uint32_t guard_mask(const CStmt& s) const;

    void exec(const Program& p, int node);
    void step(const Program& p, const CStmt& s);
    void flush(const Program& p);

    const KernelIR& ir_;
    const EscMatrix& t_;
    const DenseMatrix& b_;
    SimOptions opt_;

    std::map<std::string, int> slots_;
    std::map<std::string, int> accs_;
    std::vector<int> loop_slot_;
    std::vector<CBound> lower_, upper_;
    std::string gc_iter_;
    std::map<std::uint32_t, Program> programs_;

    std::vector<std::int64_t> vals_;
    std::vector<std::uint8_t> pad_;
    std::vector<float> accv_;
    std::vector<float> dense_a_;
    std::vector<std::uint8_t> present_a_;
    std::vector<std::int32_t> rowoff_;
    std::vector<std::uint32_t> opmask_;
    std::vector<int> touched_;

    std::int64_t m_ = 0, n_ = 0, k_ = 0;
    std::int64_t tid_base_ = 0;
    std::uint32_t thread_mask_ = 0;
    std::int64_t g_ = -1, gstart_ = 0, gend_ = 0;
    SimResult res_;
};

CAff Simulator::compile(const Affine& a) const {
    CAff c;
    c.c = a.constant;
    for (const auto& [name, coef] : a.terms) {
        if (name == "tid") {
            if (!ir_.thread) throw IrError("unbound iterator 'tid'");
            c.tid += coef;
            continue;
        }
        if (c.n == 4) throw IrError("affine expression has too many terms: " + a.str());
        c.slot[c.n] = slot_of(name);
        c.coef[c.n] = coef;
        ++c.n;
    }
    return c;
}

CAcc Simulator::compile(const Access& a) const {
    CAcc c;
    c.arr = a.target;
    c.nd = static_cast<int>(a.idx.size());
    const int want = (a.target == Array::A || a.target == Array::B || a.target == Array::C) ? 2 : 1;
    if (c.nd != want) throw IrError("wrong number of dimensions in " + a.str());
    for (int d = 0; d < c.nd; ++d) c.d[d] = compile(a.idx[static_cast<std::size_t>(d)]);
    if (!gc_iter_.empty()) {
        if (a.target == Array::A && a.idx[1].uses(gc_iter_)) c.gc_dim = 1;
        if (a.target == Array::B && a.idx[0].uses(gc_iter_)) c.gc_dim = 0;
    }
    return c;
}

int Simulator::build_nodes(Program& p, const std::vector<Stmt>& src, std::size_t level, std::size_t b,
                           std::size_t e) {
    const int id = static_cast<int>(p.nodes.size());
    p.nodes.emplace_back();
    std::size_t i = b;
    while (i < e) {
        if (static_cast<std::size_t>(src[i].scope) <= level) {
            p.nodes[static_cast<std::size_t>(id)].items.push_back({static_cast<int>(i), -1, -1});
            ++i;
            continue;
        }
        if (level >= ir_.loops.size()) throw IrError("statement nested deeper than the loop chain");
        std::size_t j = i;
        while (j < e && static_cast<std::size_t>(src[j].scope) > level) ++j;
        const int child = build_nodes(p, src, level + 1, i, j);
        p.nodes[static_cast<std::size_t>(id)].items.push_back({-1, static_cast<int>(level), child});
        i = j;
    }
    return id;
}

const Program& Simulator::program(std::uint32_t key) {
    auto it = programs_.find(key);
    if (it != programs_.end()) return it->second;
    Program p;
    std::vector<Stmt> src;
    for (const auto& s : ir_.stmts)
        // Keys select a body only once blocks are bound to patterns; before
        // that the guards alone decide what runs.
        if (s.key == 0 || s.key == key || ir_.decode != BlockDecode::Enumerated) src.push_back(s);

    std::map<std::string, int> operands;
    auto operand = [&](const Access& a) {
        auto [pos, fresh] = operands.emplace(a.str(), static_cast<int>(operands.size()));
        if (fresh) p.operand_is_b.push_back(a.target == Array::B);
        return pos->second;
    };
    auto acc_slot = [&](const std::string& name) {
        auto [pos, fresh] = accs_.emplace(name, static_cast<int>(accs_.size()));
        (void)fresh;
        return pos->second;
    };
    std::map<std::string, bool> cols_vars;
    for (const auto& s : ir_.stmts)
        if (const auto* l = std::get_if<Let>(&s.op)) cols_vars[l->var] = l->src.target == Array::Cols;

    for (const auto& s : src) {
        CStmt c;
        if (const auto* f = std::get_if<Fma>(&s.op)) {
            c.op = Op::Fma;
            c.a = compile(f->a);
            c.b = compile(f->b);
            if (f->dst_c) {
                c.has_c = true;
                c.c = compile(*f->dst_c);
            } else {
                c.acc = acc_slot(f->acc);
            }
            for (const auto& g : f->guard) {
                if (g.a.target != Array::A) throw IrError("guards may only test A");
                c.guard.emplace_back(compile(g.a), g.positive);
            }
            c.a_id = operand(f->a);
            c.b_id = operand(f->b);
            for (const auto& [name, coef] : f->b.idx[0].terms)
                if (cols_vars.count(name) && cols_vars[name]) c.pad_var = slot_of(name);
        } else if (const auto* d = std::get_if<Declare>(&s.op)) {
            c.op = Op::Declare;
            c.acc = acc_slot(d->acc);
            ++p.declares;
        } else if (const auto* a = std::get_if<AtomicAdd>(&s.op)) {
            c.op = Op::Atomic;
            c.c = compile(a->c);
            c.acc = acc_slot(a->acc);
        } else if (const auto* w = std::get_if<WarpReduce>(&s.op)) {
            c.op = Op::Reduce;
            c.c = compile(w->c);
            c.acc = acc_slot(w->acc);
        } else if (const auto* l = std::get_if<Let>(&s.op)) {
            c.op = Op::Let;
            c.var = slot_of(l->var);
            c.a = compile(l->src);
        } else if (const auto* v = std::get_if<Advance>(&s.op)) {
            c.op = Op::Advance;
            c.var = slot_of(v->var);
            c.amount = v->amount;
        } else {
            c.op = Op::Dispatch;
        }
        p.stmts.push_back(std::move(c));
    }
    build_nodes(p, src, 0, 0, src.size());
    if (opmask_.size() < p.operand_is_b.size()) opmask_.resize(p.operand_is_b.size(), 0);
    return programs_.emplace(key, std::move(p)).first->second;
}

std::int32_t Simulator::int_array(Array arr, std::int64_t idx) const {
    const std::vector<std::int32_t>* v = nullptr;
    switch (arr) {
    case Array::Cols: v = &t_.col_index; break;
    case Array::RPP: v = &t_.rpp; break;
    case Array::NPP: v = &t_.npp; break;
    case Array::RowOff: v = &rowoff_; break;
    default: throw IrError(std::string("not an index array: ") + array_name(arr));
    }
    if (idx < 0 || idx >= static_cast<std::int64_t>(v->size()))
        throw IrError(std::string("index array read out of range: ") + array_name(arr) + "[" + std::to_string(idx) +
                      "]");
    return (*v)[static_cast<std::size_t>(idx)];
}

Res Simulator::resolve(const CAcc& a) const {
    Res r;
    r.mask = kAll;
    const auto* v = vals_.data();
    for (int d = 0; d < a.nd; ++d) {
        r.u[d] = a.d[d].eval(v, tid_base_);
        r.tc[d] = a.d[d].tid;
    }
    if (a.gc_dim >= 0) {
        if (r.tc[a.gc_dim] != 0) throw IrError("lane-dependent group column position");
        const auto pos = r.u[a.gc_dim];
        if (pos < 0 || pos >= gend_ - gstart_) {
            r.mask = 0;
            return r;
        }
        const auto slot = static_cast<std::int32_t>(gstart_ + pos);
        r.u[a.gc_dim] = t_.col_index[static_cast<std::size_t>(slot)];
        r.pad = t_.is_padding_slot(static_cast<std::int32_t>(g_), slot);
    }
    switch (a.arr) {
    case Array::A:
        r.mask = range_mask(r.u[0], r.tc[0], m_) & range_mask(r.u[1], r.tc[1], k_);
        break;
    case Array::B:
        r.mask = range_mask(r.u[0], r.tc[0], k_) & range_mask(r.u[1], r.tc[1], n_);
        break;
    case Array::C:
        r.mask = range_mask(r.u[0], r.tc[0], m_) & range_mask(r.u[1], r.tc[1], n_);
        break;
    case Array::ANNZ:
        if (range_mask(r.u[0], r.tc[0], static_cast<std::int64_t>(t_.annz.size())) != kAll)
            throw IrError("ANNZ read out of range at " + std::to_string(r.u[0]));
        break;
    default: break;
    }
    return r;
}

float Simulator::a_value(const CAcc& acc, const Res& r, int lane) const {
    if (acc.arr == Array::ANNZ) return t_.annz[static_cast<std::size_t>(r.u[0] + r.tc[0] * lane)];
    if (r.pad) return 0.0f;
    const auto row = r.u[0] + r.tc[0] * lane;
    const auto col = r.u[1] + r.tc[1] * lane;
    return dense_a_[static_cast<std::size_t>(row * k_ + col)];
}

std::uint32_t Simulator::guard_mask(const CStmt& s) const {
    std::uint32_t m = kAll;
    for (const auto& [acc, positive] : s.guard) {
        const Res r = resolve(acc);
        std::uint32_t present = 0;
        if (r.uniform()) {
            if (r.mask && !r.pad && present_a_[static_cast<std::size_t>(r.u[0] * k_ + r.u[1])]) present = kAll;
        } else {
            for (std::uint32_t bits = r.mask; bits; bits &= bits - 1) {
                const int l = std::countr_zero(bits);
                const auto row = r.u[0] + r.tc[0] * l;
                const auto col = r.u[1] + r.tc[1] * l;
                if (!r.pad && present_a_[static_cast<std::size_t>(row * k_ + col)]) present |= 1u << l;
            }
        }
        m &= positive ? present : ~present;
    }
    return m;
}

void Simulator::flush(const Program& p) {
    for (int id : touched_) {
        const auto n = std::popcount(opmask_[static_cast<std::size_t>(id)]);
        if (p.operand_is_b[static_cast<std::size_t>(id)])
            res_.load_count_b += n;
        else
            res_.load_count_a += n;
        opmask_[static_cast<std::size_t>(id)] = 0;
    }
    touched_.clear();
}

void Simulator::step(const Program& p, const CStmt& s) {
    (void)p;
    ++res_.statement_count;
    switch (s.op) {
    case Op::Dispatch: return;
    case Op::Advance: vals_[static_cast<std::size_t>(s.var)] += s.amount; return;
    case Op::Let: {
        const Res r = resolve(s.a);
        if (!r.uniform()) throw IrError("lane-dependent index load");
        vals_[static_cast<std::size_t>(s.var)] = int_array(s.a.arr, r.u[0]);
        pad_[static_cast<std::size_t>(s.var)] =
            s.a.arr == Array::Cols && g_ >= 0 && t_.is_padding_slot(static_cast<std::int32_t>(g_), static_cast<std::int32_t>(r.u[0]));
        return;
    }
    case Op::Declare:
        std::fill_n(accv_.begin() + static_cast<std::ptrdiff_t>(s.acc) * kLanes, kLanes, 0.0f);
        return;
    case Op::Atomic: {
        const Res c = resolve(s.c);
        const std::uint32_t m = c.mask & thread_mask_;
        res_.atomic_count += std::popcount(m);
        if (opt_.counters_only) return;
        const float* acc = &accv_[static_cast<std::size_t>(s.acc) * kLanes];
        for (std::uint32_t bits = m; bits; bits &= bits - 1) {
            const int l = std::countr_zero(bits);
            const auto row = c.u[0] + c.tc[0] * l;
            const auto col = c.u[1] + c.tc[1] * l;
            res_.c.data[static_cast<std::size_t>(row * n_ + col)] += acc[l];
        }
        return;
    }
    case Op::Reduce: {
        const Res c = resolve(s.c);
        if (!c.uniform()) throw IrError("warp reduction into a lane-dependent address");
        ++res_.reduce_count;
        if (opt_.counters_only || !c.mask) return;
        const float* acc = &accv_[static_cast<std::size_t>(s.acc) * kLanes];
        float sum = 0.0f;
        for (std::uint32_t bits = thread_mask_; bits; bits &= bits - 1) sum += acc[std::countr_zero(bits)];
        res_.c.data[static_cast<std::size_t>(c.u[0] * n_ + c.u[1])] += sum;
        return;
    }
    case Op::Fma: break;
    }

    const Res a = resolve(s.a);
    const Res b = resolve(s.b);
    std::uint32_t m = thread_mask_ & a.mask & b.mask;
    Res c;
    if (s.has_c) {
        c = resolve(s.c);
        m &= c.mask;
    }
    if (m && !s.guard.empty()) m &= guard_mask(s);
    if (!m) return;
    const int cnt = std::popcount(m);
    res_.fma_count += cnt;
    if (a.pad || b.pad || (s.pad_var >= 0 && pad_[static_cast<std::size_t>(s.pad_var)])) res_.padded_fma_count += cnt;
    auto& am = opmask_[static_cast<std::size_t>(s.a_id)];
    if (!am) touched_.push_back(s.a_id);
    am |= m;
    auto& bm = opmask_[static_cast<std::size_t>(s.b_id)];
    if (!bm) touched_.push_back(s.b_id);
    bm |= m;
    if (opt_.counters_only) return;

    const float* bd = b_.data.data();
    float* cd = res_.c.data.data();
    const bool fast = a.uniform() && b.tc[0] == 0 && b.tc[1] == 1 && (!s.has_c || (c.tc[0] == 0 && c.tc[1] == 1));
    if (fast) {
        const float av = a_value(s.a, a, 0);
        const float* brow = bd + b.u[0] * n_ + b.u[1];
        float* dst = s.has_c ? cd + c.u[0] * n_ + c.u[1] : &accv_[static_cast<std::size_t>(s.acc) * kLanes];
        if (m == kAll) {
            for (int l = 0; l < kLanes; ++l) dst[l] += av * brow[l];
        } else {
            for (std::uint32_t bits = m; bits; bits &= bits - 1) {
                const int l = std::countr_zero(bits);
                dst[l] += av * brow[l];
            }
        }
        return;
    }
    for (std::uint32_t bits = m; bits; bits &= bits - 1) {
        const int l = std::countr_zero(bits);
        const float av = a_value(s.a, a, l);
        const float bv = bd[(b.u[0] + b.tc[0] * l) * n_ + b.u[1] + b.tc[1] * l];
        if (s.has_c)
            cd[(c.u[0] + c.tc[0] * l) * n_ + c.u[1] + c.tc[1] * l] += av * bv;
        else
            accv_[static_cast<std::size_t>(s.acc) * kLanes + static_cast<std::size_t>(l)] += av * bv;
    }
}

void Simulator::exec(const Program& p, int node) {
    for (const auto& it : p.nodes[static_cast<std::size_t>(node)].items) {
        if (it.stmt >= 0) {
            step(p, p.stmts[static_cast<std::size_t>(it.stmt)]);
            continue;
        }
        const auto li = static_cast<std::size_t>(it.loop);
        const auto& loop = ir_.loops[li];
        std::int64_t lo = 0, hi = 0;
        if (loop.domain == Domain::GroupColumns) {
            hi = gend_ - gstart_;
        } else {
            lo = lower_[li].e.eval(vals_.data(), 0);
            hi = upper_[li].e.eval(vals_.data(), 0);
            if (lower_[li].load) lo = int_array(lower_[li].arr, lo);
            if (upper_[li].load) hi = int_array(upper_[li].arr, hi);
        }
        const auto slot = static_cast<std::size_t>(loop_slot_[li]);
        for (std::int64_t v = lo; v < hi; v += loop.step) {
            vals_[slot] = v;
            flush(p);
            exec(p, it.child);
        }
        flush(p);
    }
}

SimResult Simulator::run() {
    if (b_.rows != t_.cols) throw ShapeError("B has " + std::to_string(b_.rows) + " rows, A has " +
                                             std::to_string(t_.cols) + " columns");
    if (b_.cols < 1) throw ShapeError("B must have at least one column");
    if (b_.data.size() != static_cast<std::size_t>(b_.rows) * static_cast<std::size_t>(b_.cols))
        throw ShapeError("B data length does not match its shape");
    m_ = t_.rows;
    k_ = t_.cols;
    n_ = b_.cols;

    if (ir_.decode == BlockDecode::Enumerated) {
        if (ir_.ufi != t_.ufi || ir_.num_patterns != t_.num_patterns() ||
            (ir_.schedule && ir_.schedule->ufk != t_.ufk))
            throw ScheduleError("schedule/format mismatch between the kernel IR and the compressed matrix");
    }

    for (const char* s : {"M", "N", "K", "g", "i"}) intern(s);
    if (ir_.decode == BlockDecode::Direct) intern(ir_.block_iter);
    for (const auto& l : ir_.loops) {
        if (l.domain == Domain::GroupColumns) {
            if (ir_.decode != BlockDecode::Enumerated) throw IrError("group-column loop outside an enumerated grid");
            gc_iter_ = l.iter;
        }
        loop_slot_.push_back(intern(l.iter));
    }
    for (const auto& s : ir_.stmts)
        if (const auto* l = std::get_if<Let>(&s.op)) intern(l->var);
    for (const auto& l : ir_.loops) {
        lower_.push_back(CBound{compile(l.lower.expr), l.lower.load.has_value(), l.lower.load.value_or(Array::RPP)});
        upper_.push_back(CBound{compile(l.upper.expr), l.upper.load.has_value(), l.upper.load.value_or(Array::RPP)});
        if (lower_.back().e.tid || upper_.back().e.tid) throw IrError("lane-dependent loop bound");
    }
    vals_.assign(slots_.size(), 0);
    pad_.assign(slots_.size(), 0);
    vals_[0] = m_;
    vals_[1] = n_;
    vals_[2] = k_;

    bool reads_a = false;
    for (const auto& s : ir_.stmts)
        if (const auto* f = std::get_if<Fma>(&s.op)) reads_a |= f->a.target == Array::A || !f->guard.empty();
    if (reads_a) {
        const SparseMatrix a = reconstruct(t_);
        dense_a_.assign(static_cast<std::size_t>(m_ * k_), 0.0f);
        present_a_.assign(static_cast<std::size_t>(m_ * k_), 0);
        for (std::int32_t r = 0; r < a.rows; ++r) {
            for (auto p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) {
                const auto at = static_cast<std::size_t>(r) * a.cols + a.col_idx[p];
                dense_a_[at] = a.values[p];
                present_a_[at] = 1;
            }
        }
    }
    if (ir_.key_kind == KeyKind::Popcount) rowoff_ = row_offset_table(t_);

    res_.c = DenseMatrix(t_.rows, b_.cols);

    std::int64_t grid = 1;
    if (ir_.decode == BlockDecode::Direct) {
        const auto extent = compile(ir_.block_extent).eval(vals_.data(), 0);
        grid = extent <= 0 ? 0 : (extent + ir_.block_stride - 1) / ir_.block_stride;
    } else if (ir_.decode == BlockDecode::Enumerated) {
        grid = grid_size(t_);
    }
    const std::int32_t threads = ir_.thread ? ir_.thread->threads : 1;
    const std::int32_t wt = ir_.thread ? ir_.thread->warp_tile : 1;
    const std::int32_t warps = (threads + kLanes - 1) / kLanes;
    const auto np = t_.num_patterns();

    for (std::int64_t blk = 0; blk < grid; ++blk) {
        std::uint32_t key = 0;
        if (ir_.decode == BlockDecode::Enumerated) {
            g_ = blk;
            gstart_ = t_.rpp[static_cast<std::size_t>(blk)];
            gend_ = t_.rpp[static_cast<std::size_t>(blk) + 1];
            if (gstart_ == gend_) continue; // empty group retires at block entry
            vals_[3] = blk;
            vals_[4] = (blk / np) * t_.ufi;
            const auto pat = t_.patterns[static_cast<std::size_t>(blk % np)];
            if (ir_.key_kind == KeyKind::Pattern) key = pat.bits;
            if (ir_.key_kind == KeyKind::Popcount) key = static_cast<std::uint32_t>(pat.popcount());
        } else if (ir_.decode == BlockDecode::Direct) {
            vals_[static_cast<std::size_t>(slot_of(ir_.block_iter))] = blk * ir_.block_stride;
        }
        const Program& p = program(key);
        if (accv_.size() < accs_.size() * kLanes) accv_.resize(accs_.size() * kLanes, 0.0f);
        ++res_.blocks_executed;
        res_.max_accumulators_live = std::max(res_.max_accumulators_live, p.declares);
        for (std::int32_t w = 0; w < warps; ++w) {
            tid_base_ = static_cast<std::int64_t>(w) * kLanes * wt;
            thread_mask_ = lane_span(0, std::min<std::int64_t>(kLanes, threads - static_cast<std::int64_t>(w) * kLanes));
            exec(p, 0);
            flush(p);
        }
    }
    return std::move(res_);
}

} // namespace

double SimResult::reuse_factor_b() const {
    if (load_count_b == 0) return 1.0;
    return static_cast<double>(fma_count) / static_cast<double>(load_count_b);
}

SimResult simulate(const KernelIR& ir, const EscMatrix& t, const DenseMatrix& b, const SimOptions& opt) {
    Simulator sim(ir, t, b, opt);
    return sim.run();
}

DenseMatrix oracle_spmm(const SparseMatrix& a, const DenseMatrix& b) {
    if (b.rows != a.cols) throw ShapeError("oracle_spmm: B rows do not match A columns");
    DenseMatrix c(a.rows, b.cols);
    for (std::int32_t i = 0; i < a.rows; ++i) {
        float* crow = &c.data[static_cast<std::size_t>(i) * b.cols];
        for (auto p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
            const float av = a.values[p];
            const float* brow = &b.data[static_cast<std::size_t>(a.col_idx[p]) * b.cols];
            for (std::int32_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

CompareReport compare(const DenseMatrix& got, const DenseMatrix& want, double rel_tol, std::size_t max_offenders) {
    if (got.rows != want.rows || got.cols != want.cols) throw ShapeError("compare: shapes differ");
    CompareReport r;
    r.rel_tol = rel_tol;
    std::vector<Offender> all;
    for (std::int32_t i = 0; i < got.rows; ++i) {
        for (std::int32_t j = 0; j < got.cols; ++j) {
            const double g = got.at(i, j);
            const double w = want.at(i, j);
            double e = std::abs(g - w) / std::max(std::abs(w), 1.0);
            if (std::isnan(e)) e = INFINITY;
            r.max_rel_error = std::max(r.max_rel_error, e);
            if (e > rel_tol) all.push_back(Offender{i, j, got.at(i, j), want.at(i, j), e});
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const Offender& x, const Offender& y) { return x.error > y.error; });
    if (all.size() > max_offenders) all.resize(max_offenders);
    r.worst = std::move(all);
    r.pass = r.max_rel_error <= rel_tol;
    return r;
}

std::string CompareReport::str() const {
    std::ostringstream os;
    os.precision(9);
    os << (pass ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error << " rel_tol=" << rel_tol << '\n';
    for (const auto& o : worst)
        os << "  C[" << o.row << "][" << o.col << "] got=" << o.got << " want=" << o.want << " rel_error=" << o.error
           << '\n';
    return os.str();
}

std::string report(const SimResult& r) {
    std::ostringstream os;
    os << "fma_count=" << r.fma_count << '\n'
       << "padded_fma_count=" << r.padded_fma_count << '\n'
       << "load_count_a=" << r.load_count_a << '\n'
       << "load_count_b=" << r.load_count_b << '\n'
       << "atomic_count=" << r.atomic_count << '\n'
       << "reduce_count=" << r.reduce_count << '\n'
       << "statement_count=" << r.statement_count << '\n'
       << "blocks_executed=" << r.blocks_executed << '\n'
       << "max_accumulators_live=" << r.max_accumulators_live << '\n';
    os.precision(6);
    os << std::fixed << "reuse_factor_b=" << r.reuse_factor_b() << '\n';
    return os.str();
}

} // namespace esc
