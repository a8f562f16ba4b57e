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

#include "esc/ir.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

#include "esc/error.hpp"
#include "esc/esc_format.hpp"

namespace esc {

namespace {

constexpr std::int32_t kMaxUfk = 64;
constexpr std::int32_t kMaxWarpTile = 32;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool guard_uses(const std::vector<Predicate>& g, const std::string& name) {
    return std::any_of(g.begin(), g.end(), [&](const Predicate& p) { return p.a.uses(name); });
}

bool stmt_uses(const Stmt& s, const std::string& name) {
    return std::visit(overloaded{
                          [&](const Fma& f) {
                              return (f.dst_c && f.dst_c->uses(name)) || f.a.uses(name) || f.b.uses(name) ||
                                     guard_uses(f.guard, name);
                          },
                          [&](const AtomicAdd& a) { return a.c.uses(name); },
                          [&](const WarpReduce& w) { return w.c.uses(name); },
                          [&](const Let& l) { return l.src.uses(name); },
                          [](const auto&) { return false; },
                      },
                      s.op);
}

Stmt stmt_substitute(const Stmt& s, const std::string& name, const Affine& repl) {
    Stmt out = s;
    std::visit(overloaded{
                   [&](Fma& f) {
                       if (f.dst_c) f.dst_c = f.dst_c->substitute(name, repl);
                       f.a = f.a.substitute(name, repl);
                       f.b = f.b.substitute(name, repl);
                       for (auto& p : f.guard) p.a = p.a.substitute(name, repl);
                   },
                   [&](AtomicAdd& a) { a.c = a.c.substitute(name, repl); },
                   [&](WarpReduce& w) { w.c = w.c.substitute(name, repl); },
                   [&](Let& l) { l.src = l.src.substitute(name, repl); },
                   [](auto&) {},
               },
               out.op);
    return out;
}

void visit_accesses(const Stmt& s, const auto& fn) {
    std::visit(overloaded{
                   [&](const Fma& f) {
                       if (f.dst_c) fn(*f.dst_c);
                       fn(f.a);
                       fn(f.b);
                       for (const auto& p : f.guard) fn(p.a);
                   },
                   [&](const AtomicAdd& a) { fn(a.c); },
                   [&](const WarpReduce& w) { fn(w.c); },
                   [&](const Let& l) { fn(l.src); },
                   [](const auto&) {},
               },
               s.op);
}

std::string key_label(const KernelIR& ir, std::uint32_t key) {
    if (key == 0) return {};
    if (ir.key_kind == KeyKind::Popcount) return "[p" + std::to_string(key) + "] ";
    return "[" + PatternId{key}.binary(ir.ufi) + "] ";
}

void print_range(const KernelIR& ir, std::ostringstream& os, std::size_t level, std::size_t b, std::size_t e) {
    std::size_t i = b;
    while (i < e) {
        const auto& s = ir.stmts[i];
        if (static_cast<std::size_t>(s.scope) <= level) {
            os << std::string(level, ' ') << key_label(ir, s.key);
            if (std::holds_alternative<Dispatch>(s.op))
                os << (ir.key_kind == KeyKind::Popcount ? "switch(popcount)" : "switch(pattern)") << '\n';
            else
                os << to_string(s) << '\n';
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < e && static_cast<std::size_t>(ir.stmts[j].scope) > level) ++j;
        const auto& l = ir.loops.at(level);
        os << std::string(level, ' ') << "for (" << l.iter << " = ";
        if (l.domain == Domain::GroupColumns)
            os << "0; " << l.iter << " < cols(g)";
        else
            os << l.lower.str() << "; " << l.iter << " < " << l.upper.str();
        os << "; " << l.iter << " += " << l.step << ")" << (l.lane ? " // lane" : "") << '\n';
        print_range(ir, os, level + 1, i, j);
        i = j;
    }
}

} // namespace

// ---------------------------------------------------------------- Schedule

void Schedule::validate() const {
    if (ufi < 1 || ufi > kMaxUnroll) throw ScheduleError("UFi must be in [1, " + std::to_string(kMaxUnroll) + "]");
    if (ufk < 1 || ufk > kMaxUfk) throw ScheduleError("UFk must be in [1, " + std::to_string(kMaxUfk) + "]");
    if (warp_tile < 1 || warp_tile > kMaxWarpTile)
        throw ScheduleError("WarpTile must be in [1, " + std::to_string(kMaxWarpTile) + "]");
    if (tbs < 32 || tbs % 32 != 0) throw ScheduleError("ThreadBlockSize must be a positive multiple of 32");
}

std::string Schedule::str() const {
    return std::to_string(ufi) + "-" + std::to_string(ufk) + "-" + std::to_string(warp_tile) + "-" +
           std::to_string(tbs);
}

Schedule Schedule::parse(const std::string& text) {
    std::int32_t v[4];
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int n = 0; n < 4; ++n) {
        auto [q, ec] = std::from_chars(p, end, v[n]);
        if (ec != std::errc() || (n < 3 && (q == end || *q != '-')) || (n == 3 && q != end))
            throw ScheduleError("invalid schedule string '" + text + "' (expected UFi-UFk-WarpTile-TBS)");
        p = q + 1;
    }
    Schedule s{v[0], v[1], v[2], v[3]};
    try {
        s.validate();
    } catch (const ScheduleError& e) {
        throw ScheduleError("invalid schedule string '" + text + "': " + e.what());
    }
    return s;
}

// ------------------------------------------------------------------ Affine

Affine Affine::var(std::string name, std::int64_t coef) {
    Affine a;
    if (coef != 0) a.terms.emplace_back(std::move(name), coef);
    return a;
}

Affine Affine::lit(std::int64_t c) {
    Affine a;
    a.constant = c;
    return a;
}

std::int64_t Affine::coef(const std::string& name) const {
    for (const auto& [n, c] : terms)
        if (n == name) return c;
    return 0;
}

Affine& Affine::add(const std::string& name, std::int64_t c) {
    for (auto it = terms.begin(); it != terms.end(); ++it) {
        if (it->first == name) {
            it->second += c;
            if (it->second == 0) terms.erase(it);
            return *this;
        }
    }
    if (c != 0) terms.emplace_back(name, c);
    return *this;
}

Affine Affine::operator+(const Affine& rhs) const {
    Affine out = *this;
    for (const auto& [n, c] : rhs.terms) out.add(n, c);
    out.constant += rhs.constant;
    out.show_zero = show_zero || rhs.show_zero;
    return out;
}

Affine Affine::operator+(std::int64_t c) const {
    Affine out = *this;
    out.constant += c;
    return out;
}

Affine Affine::substitute(const std::string& name, const Affine& repl) const {
    const std::int64_t c = coef(name);
    if (c == 0) return *this;
    Affine out;
    out.constant = constant;
    out.show_zero = show_zero || repl.show_zero;
    for (const auto& [n, k] : terms) {
        if (n == name) {
            for (const auto& [rn, rk] : repl.terms) out.add(rn, rk * c);
            out.constant += repl.constant * c;
        } else {
            out.add(n, k);
        }
    }
    return out;
}

std::string Affine::str() const {
    std::string s;
    for (const auto& [n, c] : terms) {
        if (c < 0)
            s += "-";
        else if (!s.empty())
            s += "+";
        const auto mag = c < 0 ? -c : c;
        if (mag != 1) s += std::to_string(mag) + "*";
        s += n;
    }
    if (s.empty()) return std::to_string(constant);
    if (constant > 0 || (constant == 0 && show_zero)) s += "+" + std::to_string(constant);
    if (constant < 0) s += std::to_string(constant);
    return s;
}

const char* array_name(Array a) {
    switch (a) {
    case Array::A: return "A";
    case Array::B: return "B";
    case Array::C: return "C";
    case Array::ANNZ: return "ANNZ";
    case Array::Cols: return "Cols";
    case Array::RPP: return "RPP";
    case Array::NPP: return "NPP";
    case Array::RowOff: return "RowOff";
    }
    return "?";
}

bool Access::uses(const std::string& name) const {
    return std::any_of(idx.begin(), idx.end(), [&](const Affine& a) { return a.uses(name); });
}

Access Access::substitute(const std::string& name, const Affine& repl) const {
    Access out{target, {}};
    out.idx.reserve(idx.size());
    for (const auto& a : idx) out.idx.push_back(a.substitute(name, repl));
    return out;
}

std::string Access::str() const {
    std::string s = array_name(target);
    for (const auto& a : idx) s += "[" + a.str() + "]";
    return s;
}

std::string Bound::str() const {
    if (load) return std::string(array_name(*load)) + "[" + expr.str() + "]";
    return expr.str();
}

// ------------------------------------------------------------------ KernelIR

const Loop* KernelIR::find_loop(const std::string& iter) const {
    const int i = loop_index(iter);
    return i < 0 ? nullptr : &loops[static_cast<std::size_t>(i)];
}

int KernelIR::loop_index(const std::string& iter) const {
    for (std::size_t i = 0; i < loops.size(); ++i)
        if (loops[i].iter == iter) return static_cast<int>(i);
    return -1;
}

std::string to_string(const Stmt& s) {
    return std::visit(overloaded{
                          [](const Fma& f) {
                              std::string out;
                              if (!f.guard.empty()) {
                                  out = "if(";
                                  for (std::size_t i = 0; i < f.guard.size(); ++i) {
                                      if (i) out += " && ";
                                      if (!f.guard[i].positive) out += "!";
                                      out += f.guard[i].a.str();
                                  }
                                  out += ") ";
                              }
                              out += f.dst_c ? f.dst_c->str() : f.acc;
                              return out + "+=" + f.a.str() + "*" + f.b.str() + ";";
                          },
                          [](const Declare& d) { return "float " + d.acc + "=0;"; },
                          [](const AtomicAdd& a) { return "AtomicAdd(" + a.c.str() + "," + a.acc + ");"; },
                          [](const WarpReduce& w) { return "WarpReduce(" + w.c.str() + "," + w.acc + ");"; },
                          [](const Dispatch&) { return std::string("switch(body)"); },
                          [](const Let& l) { return "int " + l.var + "=" + l.src.str() + ";"; },
                          [](const Advance& a) { return a.var + "+=" + std::to_string(a.amount) + ";"; },
                      },
                      s.op);
}

std::string to_string(const KernelIR& ir) {
    std::ostringstream os;
    switch (ir.decode) {
    case BlockDecode::None: break;
    case BlockDecode::Direct:
        os << "int " << ir.block_iter << " = blockIdx.x * " << ir.block_stride << ";\n";
        break;
    case BlockDecode::Enumerated:
        os << "// grid = " << ir.grid_size << " blocks, num_patterns = " << ir.num_patterns << "\n";
        os << "int g = blockIdx.x;\n";
        os << "int i = (g / num_patterns) * " << ir.ufi << ";\n";
        os << "int pattern = patterns[g % num_patterns];\n";
        break;
    }
    if (ir.thread) {
        if (ir.thread->warp_tile == 1)
            os << "int tid = threadIdx.x;\n";
        else
            os << "int tid = (threadIdx.x / 32) * " << 32 * ir.thread->warp_tile << " + threadIdx.x % 32;\n";
    }
    print_range(ir, os, 0, 0, ir.stmts.size());
    return os.str();
}

std::vector<std::uint32_t> body_keys(const KernelIR& ir) {
    std::set<std::uint32_t> keys;
    for (const auto& s : ir.stmts)
        if (s.key != 0) keys.insert(s.key);
    return {keys.begin(), keys.end()};
}

std::size_t count_conditionals(const KernelIR& ir) {
    return static_cast<std::size_t>(std::count_if(ir.stmts.begin(), ir.stmts.end(), [](const Stmt& s) {
        const auto* f = std::get_if<Fma>(&s.op);
        return f && !f->guard.empty();
    }));
}

void verify(const KernelIR& ir) {
    std::set<std::string> bound = {"M", "N", "K"};
    for (const auto& l : ir.loops) bound.insert(l.iter);
    if (ir.thread) bound.insert("tid");
    if (ir.decode == BlockDecode::Direct) bound.insert(ir.block_iter);
    if (ir.decode == BlockDecode::Enumerated) bound.insert({"g", "i"});
    std::set<std::string> indirect;
    for (const auto& s : ir.stmts)
        if (const auto* l = std::get_if<Let>(&s.op)) indirect.insert(l->var);
    bound.insert(indirect.begin(), indirect.end());

    for (const auto& s : ir.stmts) {
        if (s.scope < 0 || static_cast<std::size_t>(s.scope) > ir.loops.size())
            throw IrError("statement scope out of range: " + to_string(s));
        visit_accesses(s, [&](const Access& a) {
            std::set<std::string> offsets;
            for (const auto& dim : a.idx) {
                for (const auto& [n, c] : dim.terms) {
                    if (!bound.count(n)) throw IrError("unbound iterator '" + n + "' in " + a.str());
                    if (indirect.count(n)) offsets.insert(n);
                }
            }
            if (offsets.size() > 1) throw IrError("access has more than one offset variable: " + a.str());
        });
        if (const auto* f = std::get_if<Fma>(&s.op)) {
            if (f->a.target != Array::A && f->a.target != Array::ANNZ)
                throw IrError("FMA must read A or ANNZ: " + to_string(s));
            if (f->b.target != Array::B) throw IrError("FMA must read B: " + to_string(s));
            if (f->dst_c && f->dst_c->target != Array::C) throw IrError("FMA must write C: " + to_string(s));
            if (!f->dst_c && f->acc.empty()) throw IrError("FMA without destination");
        }
    }

    auto keys = body_keys(ir);
    if (keys.empty()) keys.push_back(0);
    for (auto key : keys) {
        std::map<std::string, int> declared;
        std::map<std::string, int> flushed;
        for (const auto& s : ir.stmts) {
            if (s.key != 0 && s.key != key) continue;
            if (const auto* d = std::get_if<Declare>(&s.op)) {
                if (declared[d->acc]++) throw IrError("accumulator " + d->acc + " declared twice");
            } else if (const auto* f = std::get_if<Fma>(&s.op)) {
                if (!f->dst_c && !declared.count(f->acc))
                    throw IrError("accumulator " + f->acc + " used before declaration");
                if (!f->dst_c && flushed.count(f->acc))
                    throw IrError("accumulator " + f->acc + " updated after its flush");
            } else if (const auto* a = std::get_if<AtomicAdd>(&s.op)) {
                if (!declared.count(a->acc)) throw IrError("flush of undeclared accumulator " + a->acc);
                ++flushed[a->acc];
            } else if (const auto* w = std::get_if<WarpReduce>(&s.op)) {
                if (!declared.count(w->acc)) throw IrError("flush of undeclared accumulator " + w->acc);
                ++flushed[w->acc];
            }
        }
        for (const auto& [acc, n] : declared)
            if (flushed[acc] != 1)
                throw IrError("accumulator " + acc + " flushed " + std::to_string(flushed[acc]) + " times");
    }
}

// ------------------------------------------------------------------ passes

KernelIR build_spmm_ir() {
    KernelIR ir;
    auto range = [](const char* it, const char* ub) {
        return Loop{it, Bound{Affine::lit(0), {}}, Bound{Affine::var(ub), {}}, 1, Domain::Range, false};
    };
    ir.loops = {range("i", "M"), range("k", "K"), range("j", "N")};
    const auto i = Affine::var("i");
    const auto j = Affine::var("j");
    const auto k = Affine::var("k");
    Fma f;
    f.dst_c = Access{Array::C, {i, j}};
    f.a = Access{Array::A, {i, k}};
    f.b = Access{Array::B, {k, j}};
    f.guard = {Predicate{f.a, true}};
    ir.stmts.push_back(Stmt{3, 0, f});
    return ir;
}

KernelIR KernelIR::shell() const {
    KernelIR out;
    out.loops = loops;
    out.decode = decode;
    out.block_iter = block_iter;
    out.block_stride = block_stride;
    out.block_extent = block_extent;
    out.thread = thread;
    out.key_kind = key_kind;
    out.ufi = ufi;
    out.schedule = schedule;
    out.compacted = compacted;
    out.data_transformed = data_transformed;
    out.grid_size = grid_size;
    out.num_patterns = num_patterns;
    return out;
}

KernelIR unroll(const KernelIR& ir, const std::string& iter, std::int32_t uf) {
    const int li = ir.loop_index(iter);
    if (li < 0) throw IrError("unroll: unknown iterator '" + iter + "'");
    if (uf < 1) throw IrError("unroll: factor must be >= 1");
    if (uf == 1) return ir;
    KernelIR out = ir.shell();
    auto& loop = out.loops[static_cast<std::size_t>(li)];
    const std::int64_t old_step = loop.step;
    loop.step *= uf;
    out.stmts.reserve(ir.stmts.size() * static_cast<std::size_t>(uf));
    std::size_t i = 0;
    while (i < ir.stmts.size()) {
        const auto& s = ir.stmts[i];
        if (!stmt_uses(s, iter)) {
            out.stmts.push_back(s);
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < ir.stmts.size() && ir.stmts[j].scope == s.scope && ir.stmts[j].key == s.key &&
               stmt_uses(ir.stmts[j], iter))
            ++j;
        for (std::int32_t c = 0; c < uf; ++c) {
            Affine repl = Affine::var(iter) + c * old_step;
            repl.show_zero = true;
            for (std::size_t t = i; t < j; ++t) out.stmts.push_back(stmt_substitute(ir.stmts[t], iter, repl));
        }
        i = j;
    }
    return out;
}

KernelIR map_iter(const KernelIR& ir, const std::string& iter, Binding binding, std::int64_t stride,
                  std::int32_t warp_tile) {
    const bool block_bound = ir.decode == BlockDecode::Direct && ir.block_iter == iter;
    const bool lane_bound = ir.thread && ir.thread->iter == iter;
    if (block_bound || lane_bound) throw IrError("map_iter: iterator '" + iter + "' is already bound");
    const int li = ir.loop_index(iter);
    if (li < 0) throw IrError("map_iter: unknown iterator '" + iter + "'");
    KernelIR out = ir;
    if (binding == Binding::Block) {
        if (ir.decode != BlockDecode::None) throw IrError("map_iter: blocks are already bound");
        if (li != 0) throw IrError("map_iter: block binding requires the outermost loop");
        const auto& l = ir.loops[0];
        if (l.lower.load || l.lower.expr != Affine::lit(0) || l.upper.load || l.domain != Domain::Range)
            throw IrError("map_iter: block binding requires a 0-based range loop");
        out.decode = BlockDecode::Direct;
        out.block_iter = iter;
        out.block_stride = l.step;
        out.block_extent = l.upper.expr;
        out.loops.erase(out.loops.begin());
        for (auto& s : out.stmts)
            if (s.scope > 0) --s.scope;
        return out;
    }
    if (ir.thread) throw IrError("map_iter: a lane binding already exists");
    if (warp_tile < 1 || stride <= 0 || stride % (32 * warp_tile) != 0)
        throw IrError("map_iter: lane stride must be a positive multiple of 32 * WarpTile");
    auto& l = out.loops[static_cast<std::size_t>(li)];
    l.step = stride;
    l.lane = true;
    out.thread = ThreadBinding{iter, static_cast<std::int32_t>(stride / warp_tile), warp_tile};
    const Affine repl = Affine::var(iter) + Affine::var("tid");
    for (auto& s : out.stmts) s = stmt_substitute(s, iter, repl);
    return out;
}

} // namespace esc
