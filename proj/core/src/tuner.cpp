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

#include "esc/tuner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "esc/error.hpp"
#include "esc/esc_format.hpp"
#include "esc/lowering.hpp"
#include "esc/sim.hpp"

namespace esc {

void ArchModel::validate() const {
    if (warp_size != 32) throw Error("arch: warp_size is fixed at 32");
    if (registers_per_sm <= 0 || max_threads_per_sm < 32 || sm_count <= 0)
        throw Error("arch: register, thread and SM counts must be positive");
    if (!(occupancy_floor_ufi > 0) || !(occupancy_floor_ufk > 0)) throw Error("arch: occupancy floors must be positive");
    if (max_unroll < 1 || max_unroll > kMaxUnroll) throw Error("arch: max_unroll out of range");
    if (reg_a < 0 || reg_b < 0 || w_loads < 0 || w_atomics < 0 || w_grid < 0)
        throw Error("arch: model constants must be non-negative");
}

ArchModel parse_arch(std::istream& in) {
    ArchModel a;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", no);
        const auto key = trim(line.substr(0, eq));
        const auto val = trim(line.substr(eq + 1));
        auto num = [&]() {
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(val, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != val.size() || !std::isfinite(v))
                throw ParseError("value of '" + key + "' is not a number", no);
            return v;
        };
        auto integer = [&]() {
            const double v = num();
            if (v != std::floor(v)) throw ParseError("value of '" + key + "' must be an integer", no);
            return static_cast<std::int64_t>(v);
        };
        if (key == "name")
            a.name = val;
        else if (key == "registers_per_sm")
            a.registers_per_sm = integer();
        else if (key == "max_threads_per_sm")
            a.max_threads_per_sm = integer();
        else if (key == "warp_size")
            a.warp_size = static_cast<std::int32_t>(integer());
        else if (key == "sm_count")
            a.sm_count = static_cast<std::int32_t>(integer());
        else if (key == "occupancy_floor_ufi")
            a.occupancy_floor_ufi = num();
        else if (key == "occupancy_floor_ufk")
            a.occupancy_floor_ufk = num();
        else if (key == "reg_a")
            a.reg_a = num();
        else if (key == "reg_b")
            a.reg_b = num();
        else if (key == "max_unroll")
            a.max_unroll = static_cast<std::int32_t>(integer());
        else if (key == "w_loads")
            a.w_loads = num();
        else if (key == "w_atomics")
            a.w_atomics = num();
        else if (key == "w_grid")
            a.w_grid = num();
        else
            throw ParseError("unknown key '" + key + "'", no);
    }
    a.validate();
    return a;
}

ArchModel load_arch(const std::string& source) {
    std::string upper = source;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    if (upper == "A100") return ArchModel::a100();
    std::ifstream in(source);
    if (!in) throw Error("cannot open arch config '" + source + "'");
    return parse_arch(in);
}

std::string to_string(const ArchModel& a) {
    std::ostringstream os;
    os << "name=" << a.name << '\n'
       << "registers_per_sm=" << a.registers_per_sm << '\n'
       << "max_threads_per_sm=" << a.max_threads_per_sm << '\n'
       << "warp_size=" << a.warp_size << '\n'
       << "sm_count=" << a.sm_count << '\n'
       << "occupancy_floor_ufi=" << a.occupancy_floor_ufi << '\n'
       << "occupancy_floor_ufk=" << a.occupancy_floor_ufk << '\n'
       << "reg_a=" << a.reg_a << '\n'
       << "reg_b=" << a.reg_b << '\n'
       << "max_unroll=" << a.max_unroll << '\n'
       << "w_loads=" << a.w_loads << '\n'
       << "w_atomics=" << a.w_atomics << '\n'
       << "w_grid=" << a.w_grid << '\n';
    return os.str();
}

double estimate_occupancy(const Schedule& s, const ArchModel& arch) {
    const double regs = arch.reg_a * s.ufi * s.warp_tile * s.ufk + arch.reg_b;
    const double ceiling = static_cast<double>(arch.max_threads_per_sm / arch.warp_size);
    if (regs <= 0) return ceiling;
    const double blocks = std::floor(static_cast<double>(arch.registers_per_sm) / (regs * s.tbs));
    return std::min(ceiling, blocks * s.tbs / arch.warp_size);
}

std::vector<Schedule> search_space(std::int32_t n, const ArchModel& arch) {
    if (n < 1) throw ShapeError("search_space: N must be >= 1");
    const std::int32_t cap = std::max(n, 32);
    std::vector<Schedule> out;
    for (std::int32_t ufi = 1; ufi <= arch.max_unroll; ++ufi) {
        for (std::int32_t ufk = 1; ufk <= arch.max_unroll; ++ufk) {
            for (std::int32_t wt = 1; wt * 32 <= cap; wt *= 2) {
                for (std::int32_t tbs = 32; tbs <= cap; tbs *= 2) {
                    const Schedule s{ufi, ufk, wt, tbs};
                    if (estimate_occupancy(Schedule{ufi, 1, wt, tbs}, arch) < arch.occupancy_floor_ufi) continue;
                    if (estimate_occupancy(s, arch) < arch.occupancy_floor_ufk) continue;
                    out.push_back(s);
                }
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Schedule default_schedule(std::int32_t n) {
    if (n < 1) throw ShapeError("default_schedule: N must be >= 1");
    if (n <= 32) return Schedule{4, 7, 1, 32};
    if (n <= 64) return Schedule{3, 7, 2, 32};
    return Schedule{3, 8, 2, 64};
}

namespace {

CostReport evaluate_on(const EscMatrix& t, const DenseMatrix& b, const Schedule& s, const ArchModel& arch) {
    const KernelIR ir = lower_ir(t, s);
    const SimResult r = simulate(ir, t, b, SimOptions{true});
    CostReport c;
    c.schedule = s;
    c.components.fma = r.fma_count;
    c.components.loads = r.load_count_a + r.load_count_b;
    c.components.atomics = r.atomic_count;
    c.components.grid_size = grid_size(t);
    c.components.occupancy = estimate_occupancy(s, arch);
    const double shortfall =
        std::max<double>(0.0, 2.0 * arch.sm_count - static_cast<double>(c.components.grid_size));
    c.cost = arch.w_loads * static_cast<double>(c.components.loads) +
             arch.w_atomics * static_cast<double>(c.components.atomics) + arch.w_grid * shortfall;
    return c;
}

} // namespace

CostReport evaluate_schedule(const SparseMatrix& a, std::int32_t n, const Schedule& s, const ArchModel& arch,
                             std::uint64_t seed) {
    s.validate();
    const DenseMatrix b = gen_dense_random(a.cols, n, seed);
    return evaluate_on(transform(a, s.ufi, s.ufk), b, s, arch);
}

TuneResult tune_candidates(const SparseMatrix& a, std::int32_t n, std::vector<Schedule> candidates,
                           const ArchModel& arch, std::uint64_t seed) {
    if (n < 1) throw ShapeError("tune: N must be >= 1");
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    if (candidates.empty()) throw ScheduleError("tune: empty search space");
    const DenseMatrix b = gen_dense_random(a.cols, n, seed);
    std::map<std::pair<std::int32_t, std::int32_t>, EscMatrix> transforms;
    TuneResult out;
    for (const auto& s : candidates) {
        s.validate();
        auto key = std::make_pair(s.ufi, s.ufk);
        auto it = transforms.find(key);
        if (it == transforms.end()) it = transforms.emplace(key, transform(a, s.ufi, s.ufk)).first;
        out.ranked.push_back(evaluate_on(it->second, b, s, arch));
    }
    std::stable_sort(out.ranked.begin(), out.ranked.end(),
                     [](const CostReport& x, const CostReport& y) { return x.cost < y.cost; });
    out.best = out.ranked.front();
    return out;
}

TuneResult tune(const SparseMatrix& a, std::int32_t n, const ArchModel& arch, std::uint64_t seed) {
    auto cands = search_space(n, arch);
    cands.push_back(default_schedule(n));
    return tune_candidates(a, n, std::move(cands), arch, seed);
}

} // namespace esc
