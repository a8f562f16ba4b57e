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

#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>

#include "esc/emit.hpp"
#include "esc/error.hpp"
#include "esc/esc_format.hpp"
#include "esc/lowering.hpp"
#include "esc/matrix.hpp"
#include "esc/metrics.hpp"
#include "esc/sim.hpp"
#include "esc/tuner.hpp"

namespace escgen {

namespace {

struct TransformArgs {
    std::string input;
    std::string out;
    std::int32_t ufi = 4;
    std::int32_t ufk = 2;
};

struct GenerateArgs {
    std::string input;
    std::string schedule;
    std::string out_dir;
    std::string name = "esc";
    bool no_compaction = false;
};

struct SimulateArgs {
    std::string input;
    std::string schedule;
    std::int32_t bcols = 32;
    std::uint64_t seed = 1;
    double tol = 1e-4;
};

struct TuneArgs {
    std::string input;
    std::int32_t bcols = 32;
    std::string arch = "A100";
    std::uint64_t seed = 1;
    std::size_t top = 10;
};

struct AnalyzeArgs {
    bool sweep = false;
    bool compaction = false;
    std::int32_t m = 512;
    std::int32_t k = 512;
    std::int32_t ufi = 4;
    std::int32_t ufk = 2;
    std::uint64_t seed = 1;
    std::vector<double> sparsities{0.0, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99};
    std::string input;
    std::vector<std::string> schedules;
    std::string out;
};

// Pattern-only inputs get seeded values so products are not all ones.
esc::SparseMatrix load_with_values(const std::string& path, std::uint64_t seed) {
    auto a = esc::load_matrix(path);
    if (a.synthetic_values) esc::randomize_values(a, seed);
    return a;
}

int cmd_transform(const TransformArgs& args, std::ostream& out) {
    const auto a = esc::load_matrix(args.input);
    const auto t = esc::transform(a, args.ufi, args.ufk);
    std::ofstream file(args.out, std::ios::binary);
    if (!file) throw esc::Error("cannot open " + args.out + " for writing");
    esc::serialize(t, file);
    file.flush();
    if (!file) throw esc::Error("cannot write " + args.out);

    std::int64_t slots = 0, padding = 0;
    for (std::int32_t g = 0; g < t.num_groups(); ++g) {
        slots += t.groups[static_cast<std::size_t>(g)].padded_cols;
        padding += t.groups[static_cast<std::size_t>(g)].padded_cols - t.real_cols(g);
    }
    out << "rows=" << t.rows << '\n'
        << "cols=" << t.cols << '\n'
        << "nnz=" << a.nnz() << '\n'
        << "ufi=" << t.ufi << '\n'
        << "ufk=" << t.ufk << '\n'
        << "groups=" << t.num_groups() << '\n'
        << "num_patterns=" << t.num_patterns() << '\n'
        << "grid_size=" << esc::grid_size(t) << '\n'
        << "padding_slots=" << padding << '\n'
        << "padding_fraction=" << std::fixed << std::setprecision(6)
        << (slots ? static_cast<double>(padding) / static_cast<double>(slots) : 0.0) << '\n'
        << "bytes=" << esc::serialized_size(t) << '\n';
    return kOk;
}

int cmd_generate(const GenerateArgs& args, std::ostream& out) {
    const auto s = esc::Schedule::parse(args.schedule);
    const auto a = esc::load_matrix(args.input);
    const auto l = esc::lower(a, s);
    const auto art = esc::emit(l.ir, l.t, !args.no_compaction);
    esc::write_artifact(art, args.out_dir, args.name);
    const auto lines = esc::line_count(art);
    out << "schedule=" << s.str() << '\n'
        << "compaction=" << (art.compacted ? "on" : "off") << '\n'
        << "bodies=" << art.body_count << '\n'
        << "lines=" << lines.total() << '\n'
        << "kernel_sha256=" << esc::sha256_hex(art.kernel_source) << '\n'
        << "out_dir=" << args.out_dir << '\n';
    return kOk;
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out) {
    const auto s = esc::Schedule::parse(args.schedule);
    if (args.bcols < 1) throw esc::ShapeError("--bcols must be >= 1");
    if (!(args.tol >= 0)) throw esc::Error("--tol must be >= 0");
    const auto a = load_with_values(args.input, args.seed);
    const auto b = esc::gen_dense_random(a.cols, args.bcols, args.seed + 1);
    const auto l = esc::lower(a, s);
    const auto r = esc::simulate(l.ir, l.t, b);
    const auto cmp = esc::compare(r, esc::oracle_spmm(a, b), args.tol);
    out << "schedule=" << s.str() << '\n' << esc::report(r) << cmp.str() << (cmp.pass ? "PASS" : "FAIL") << '\n';
    return cmp.pass ? kOk : kUserError;
}

int cmd_tune(const TuneArgs& args, std::ostream& out) {
    std::string arch_spec = args.arch;
    if (const char* env = std::getenv("ESC_ARCH_CONFIG"); env != nullptr && *env != '\0') arch_spec = env;
    const auto arch = esc::load_arch(arch_spec);
    const auto a = load_with_values(args.input, args.seed);
    const auto res = esc::tune(a, args.bcols, arch, args.seed);
    out << "arch=" << arch.name << " sm_count=" << arch.sm_count << '\n'
        << "candidates=" << res.ranked.size() << '\n'
        << "rank schedule cost loads atomics grid occupancy\n";
    const std::size_t shown = args.top == 0 ? res.ranked.size() : std::min(args.top, res.ranked.size());
    for (std::size_t i = 0; i < shown; ++i) {
        const auto& c = res.ranked[i];
        out << i + 1 << ' ' << c.schedule.str() << ' ' << std::fixed << std::setprecision(0) << c.cost << ' '
            << c.components.loads << ' ' << c.components.atomics << ' ' << c.components.grid_size << ' '
            << std::setprecision(1) << c.components.occupancy << '\n';
    }
    const auto def = esc::default_schedule(args.bcols);
    const auto it = std::find_if(res.ranked.begin(), res.ranked.end(),
                                 [&](const esc::CostReport& c) { return c.schedule == def; });
    if (it != res.ranked.end())
        out << "default=" << def.str() << " cost=" << std::setprecision(0) << it->cost << '\n';
    out << "best=" << res.best.schedule.str() << '\n';
    return kOk;
}

int cmd_analyze(const AnalyzeArgs& args, std::ostream& out) {
    if (args.sweep == args.compaction) throw esc::Error("analyze: give exactly one of --sweep or --compaction");
    std::string csv;
    if (args.sweep) {
        if (args.m < 1 || args.k < 1) throw esc::ShapeError("--m and --k must be >= 1");
        for (double s : args.sparsities)
            if (!(s >= 0.0 && s <= 1.0)) throw esc::Error("sparsity must lie in [0, 1]");
        csv = esc::sweep_csv(esc::size_sweep(args.m, args.k, args.sparsities, args.ufi, args.ufk, args.seed));
    } else {
        if (args.input.empty() || args.schedules.empty())
            throw esc::Error("analyze --compaction needs --input and at least one --schedule");
        std::vector<esc::Schedule> scheds;
        for (const auto& s : args.schedules) scheds.push_back(esc::Schedule::parse(s));
        csv = esc::compaction_csv(esc::compaction_study(esc::load_matrix(args.input), scheds));
    }
    if (args.out.empty()) {
        out << csv;
    } else {
        std::ofstream file(args.out, std::ios::binary);
        file << csv;
        if (!file) throw esc::Error("cannot write " + args.out);
        out << "wrote " << args.out << '\n';
    }
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Kernel generator for enumerated, sparse-coarsened SPMM"};
    app.name("escgen");
    app.require_subcommand(1);
    std::function<int()> action;

    TransformArgs ta;
    auto* tr = app.add_subcommand("transform", "Convert a sparse matrix to the ESC container");
    tr->add_option("--input", ta.input, "Matrix file (.smtx or .mtx)")->required();
    tr->add_option("--ufi", ta.ufi, "Row unroll factor")->capture_default_str();
    tr->add_option("--ufk", ta.ufk, "Column unroll factor")->capture_default_str();
    tr->add_option("--out", ta.out, "Output container")->required();
    tr->callback([&] { action = [&] { return cmd_transform(ta, out); }; });

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Emit kernel, host and transformer sources");
    gen->add_option("--input", ga.input, "Matrix file")->required();
    gen->add_option("--schedule", ga.schedule, "UFi-UFk-WarpTile-TBS")->required();
    gen->add_flag("--no-compaction", ga.no_compaction, "One body per pattern");
    gen->add_option("--out-dir", ga.out_dir, "Output directory")->required();
    gen->add_option("--name", ga.name, "Artifact name for the manifest")->capture_default_str();
    gen->callback([&] { action = [&] { return cmd_generate(ga, out); }; });

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Run the lowered kernel in the simulator and check it");
    sim->add_option("--input", sa.input, "Matrix file")->required();
    sim->add_option("--schedule", sa.schedule, "UFi-UFk-WarpTile-TBS")->required();
    sim->add_option("--bcols", sa.bcols, "Columns of B")->capture_default_str();
    sim->add_option("--seed", sa.seed, "Seed for B and synthetic A values")->capture_default_str();
    sim->add_option("--tol", sa.tol, "Max relative error")->capture_default_str();
    sim->callback([&] { action = [&] { return cmd_simulate(sa, out); }; });

    TuneArgs tu;
    auto* tune = app.add_subcommand("tune", "Search schedules under the occupancy model");
    tune->add_option("--input", tu.input, "Matrix file")->required();
    tune->add_option("--bcols", tu.bcols, "Columns of B")->capture_default_str();
    tune->add_option("--arch", tu.arch, "A100 or a key=value config (ESC_ARCH_CONFIG wins)")->capture_default_str();
    tune->add_option("--seed", tu.seed, "Seed for B")->capture_default_str();
    tune->add_option("--top", tu.top, "Rows to print, 0 for all")->capture_default_str();
    tune->callback([&] { action = [&] { return cmd_tune(tu, out); }; });

    AnalyzeArgs an;
    auto* ana = app.add_subcommand("analyze", "Storage and code-size studies");
    ana->add_flag("--sweep", an.sweep, "Storage sweep over sparsities");
    ana->add_flag("--compaction", an.compaction, "Line counts with and without compaction");
    ana->add_option("--m", an.m, "Rows")->capture_default_str();
    ana->add_option("--k", an.k, "Columns")->capture_default_str();
    ana->add_option("--ufi", an.ufi, "Row unroll factor")->capture_default_str();
    ana->add_option("--ufk", an.ufk, "Column unroll factor")->capture_default_str();
    ana->add_option("--seed", an.seed, "Base seed")->capture_default_str();
    ana->add_option("--sparsities", an.sparsities, "Sparsity list")->delimiter(',');
    ana->add_option("--input", an.input, "Matrix file for --compaction");
    ana->add_option("--schedule", an.schedules, "Schedules for --compaction");
    ana->add_option("--out", an.out, "CSV path, stdout if absent");
    ana->callback([&] { action = [&] { return cmd_analyze(an, out); }; });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "escgen: " << e.what() << '\n';
        return kUserError;
    }

    try {
        return action();
    } catch (const esc::Error& e) {
        err << "escgen: " << e.what() << '\n';
        return kUserError;
    } catch (const esc::InternalError& e) {
        err << "escgen: internal error: " << e.what() << '\n';
        return kInternalError;
    } catch (const std::exception& e) {
        err << "escgen: internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

} // namespace escgen
