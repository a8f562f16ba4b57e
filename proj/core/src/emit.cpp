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

#include "esc/emit.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include "esc/error.hpp"
#include "esc/lowering.hpp"

namespace esc {

namespace {

class Writer {
public:
    void line(const std::string& s) { os_ << std::string(static_cast<std::size_t>(2 * depth_), ' ') << s << '\n'; }
    void open(const std::string& s) {
        line(s);
        ++depth_;
    }
    void close(const std::string& s = "}") {
        --depth_;
        line(s);
    }
    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
    int depth_ = 0;
};

std::string code(const Access& a) {
    switch (a.target) {
    case Array::B: return "ldB(B, " + a.idx.at(0).str() + ", " + a.idx.at(1).str() + ", N)";
    case Array::A:
    case Array::C: throw IrError("emit: dense " + std::string(array_name(a.target)) + " access in a lowered body");
    default: return std::string(array_name(a.target)) + "[" + a.idx.at(0).str() + "]";
    }
}

std::string bound_code(const Bound& b) {
    if (b.load) return std::string(array_name(*b.load)) + "[" + b.expr.str() + "]";
    return b.expr.str();
}

void emit_range(Writer& w, const KernelIR& ir, const std::vector<Stmt>& src, std::size_t level, std::size_t b,
                std::size_t e, int per_line) {
    std::size_t i = b;
    while (i < e) {
        const auto& s = src[i];
        if (static_cast<std::size_t>(s.scope) > level) {
            std::size_t j = i;
            while (j < e && static_cast<std::size_t>(src[j].scope) > level) ++j;
            const auto& l = ir.loops.at(level);
            if (l.domain != Domain::Range) throw IrError("emit: loop '" + l.iter + "' is not data-transformed");
            w.open("for (int " + l.iter + " = " + bound_code(l.lower) + "; " + l.iter + " < " + bound_code(l.upper) +
                   "; " + l.iter + " += " + std::to_string(l.step) + ") {");
            emit_range(w, ir, src, level + 1, i, j, per_line);
            w.close();
            i = j;
            continue;
        }
        // Declarations and flushes: one line per accumulator row.
        if (std::holds_alternative<Declare>(s.op) || std::holds_alternative<AtomicAdd>(s.op)) {
            const bool decl = std::holds_alternative<Declare>(s.op);
            std::string text;
            int n = 0;
            while (i < e && static_cast<std::size_t>(src[i].scope) == level &&
                   (decl ? std::holds_alternative<Declare>(src[i].op) : std::holds_alternative<AtomicAdd>(src[i].op))) {
                if (decl) {
                    text += (n ? ", " : "float ") + std::get<Declare>(src[i].op).acc + " = 0.0f";
                } else {
                    const auto& a = std::get<AtomicAdd>(src[i].op);
                    text += std::string(n ? " " : "") + "flush(C, " + a.c.idx.at(0).str() + ", " + a.c.idx.at(1).str() +
                            ", N, " + a.acc + ");";
                }
                ++i;
                if (++n == per_line) {
                    w.line(decl ? text + ";" : text);
                    text.clear();
                    n = 0;
                }
            }
            if (n) w.line(decl ? text + ";" : text);
            continue;
        }
        if (const auto* f = std::get_if<Fma>(&s.op)) {
            if (!f->guard.empty() || f->dst_c) throw IrError("emit: FMA is not coarsened");
            w.line(f->acc + " += " + code(f->a) + " * " + code(f->b) + ";");
        } else if (const auto* l = std::get_if<Let>(&s.op)) {
            w.line("int " + l->var + " = " + code(l->src) + ";");
        } else if (const auto* a = std::get_if<Advance>(&s.op)) {
            w.line(a->var + " += " + std::to_string(a->amount) + ";");
        } else if (std::holds_alternative<WarpReduce>(s.op)) {
            throw IrError("emit: warp reductions are simulation-only");
        }
        ++i;
    }
}

std::vector<Stmt> body_stmts(const KernelIR& ir, std::uint32_t key) {
    std::vector<Stmt> out;
    for (const auto& s : ir.stmts)
        if ((s.key == 0 || s.key == key) && !std::holds_alternative<Dispatch>(s.op)) out.push_back(s);
    return out;
}

const char* kParams = "const float* __restrict__ ANNZ, const int* __restrict__ Cols, const int* __restrict__ RPP, "
                      "const int* __restrict__ NPP, const int* __restrict__ RowOff";

std::string kernel_source(const KernelIR& ir, std::int32_t& bodies) {
    const auto& s = *ir.schedule;
    Writer w;
    w.line("// Generated SPMM kernel. Schedule UFi-UFk-WarpTile-ThreadBlockSize = " + s.str() + ".");
    w.line(ir.compacted ? "// Compacted: one body per popcount class, rows come from RowOff."
                        : "// One body per row pattern, selected by switch(pattern).");
    w.line("");
    w.line("#define ESC_UFI " + std::to_string(s.ufi));
    w.line("#define ESC_UFK " + std::to_string(s.ufk));
    w.line("#define ESC_WARP_TILE " + std::to_string(s.warp_tile));
    w.line("#define ESC_TBS " + std::to_string(s.tbs));
    w.line("");
    w.line("// Columns past N belong to idle lanes of the last j step.");
    w.open("__device__ __forceinline__ float ldB(const float* __restrict__ B, int row, int col, int N) {");
    w.line("return col < N ? B[row * N + col] : 0.0f;");
    w.close();
    w.open("__device__ __forceinline__ void flush(float* __restrict__ C, int row, int col, int N, float v) {");
    w.line("if (col < N) atomicAdd(&C[row * N + col], v);");
    w.close();
    if (ir.compacted) {
        w.open("__device__ __forceinline__ int esc_popcount(unsigned v) {");
        w.line("int n = 0;");
        w.line("for (; v != 0u; v &= v - 1u) ++n;");
        w.line("return n;");
        w.close();
    }
    w.line("");

    const auto keys = body_keys(ir);
    bodies = static_cast<std::int32_t>(keys.size());
    const std::size_t top = 0;
    auto tid_line = [&] {
        if (s.warp_tile == 1) return std::string("const int tid = threadIdx.x;");
        return "const int tid = (threadIdx.x / 32) * " + std::to_string(32 * s.warp_tile) + " + threadIdx.x % 32;";
    };

    if (ir.compacted) {
        for (auto key : keys) {
            w.open("__device__ __forceinline__ void esc_body_p" + std::to_string(key) + "(" + kParams +
                   ", const float* __restrict__ B, float* __restrict__ C, int N, int g, int i, int tid) {");
            w.line("// body begin p" + std::to_string(key));
            const auto src = body_stmts(ir, key);
            emit_range(w, ir, src, top, 0, src.size(), s.warp_tile);
            w.line("// body end");
            w.close();
        }
        w.line("");
    }

    w.open(std::string("extern \"C\" __global__ void spmm_esc(") + kParams +
           ", const unsigned* __restrict__ patterns, int num_patterns, const float* __restrict__ B, "
           "float* __restrict__ C, int N) {");
    w.line("const int g = blockIdx.x;");
    w.line("if (RPP[g] == RPP[g + 1]) return;");
    w.line("const int i = (g / num_patterns) * ESC_UFI;");
    w.line("const unsigned pattern = patterns[g % num_patterns];");
    w.line(tid_line());
    if (ir.compacted) {
        w.open("switch (esc_popcount(pattern)) {");
        for (auto key : keys)
            w.line("case " + std::to_string(key) + ": esc_body_p" + std::to_string(key) +
                   "(ANNZ, Cols, RPP, NPP, RowOff, B, C, N, g, i, tid); break;");
        w.line("default: break;");
        w.close();
    } else {
        w.open("switch (pattern) {");
        for (auto key : keys) {
            w.open("case " + std::to_string(key) + "u: {");
            w.line("// body begin " + PatternId{key}.binary(ir.ufi));
            const auto src = body_stmts(ir, key);
            emit_range(w, ir, src, top, 0, src.size(), s.warp_tile);
            w.line("// body end");
            w.line("break;");
            w.close();
        }
        w.line("default: break;");
        w.close();
    }
    w.close();
    return w.str();
}

std::string host_source(const Schedule& s) {
    Writer w;
    w.line("// Host launcher for spmm_esc. Schedule " + s.str() + ".");
    w.line("#include <cstddef>");
    w.line("#include <cuda_runtime.h>");
    w.line("");
    w.line(std::string("extern \"C\" __global__ void spmm_esc(") + kParams +
           ", const unsigned* __restrict__ patterns, int num_patterns, const float* __restrict__ B, "
           "float* __restrict__ C, int N);");
    w.line("");
    w.line("// Device copy of the compressed matrix produced by dataTransformer.");
    w.open("struct EscDeviceMatrix {");
    w.line("const float* ANNZ;");
    w.line("const int* Cols;");
    w.line("const int* RPP;");
    w.line("const int* NPP;");
    w.line("const int* RowOff;");
    w.line("const unsigned* patterns;");
    w.line("int num_patterns;");
    w.line("int M;");
    w.line("int K;");
    w.close("};");
    w.line("");
    w.line("// One block per (row panel, pattern) pair. C is cleared first since blocks");
    w.line("// accumulate into it with atomic adds.");
    w.open("inline cudaError_t esc_spmm(const EscDeviceMatrix& TA, const float* B, float* C, int N, "
           "cudaStream_t stream = 0) {");
    w.line("const int panels = (TA.M + " + std::to_string(s.ufi - 1) + ") / " + std::to_string(s.ufi) + ";");
    w.line("const int blockNo = TA.num_patterns * panels;");
    w.line("cudaError_t err = cudaMemsetAsync(C, 0, sizeof(float) * static_cast<std::size_t>(TA.M) * N, stream);");
    w.line("if (err != cudaSuccess || blockNo == 0) return err;");
    w.line("spmm_esc<<<blockNo, " + std::to_string(s.tbs) +
           ", 0, stream>>>(TA.ANNZ, TA.Cols, TA.RPP, TA.NPP, TA.RowOff, TA.patterns, TA.num_patterns, B, C, N);");
    w.line("return cudaGetLastError();");
    w.close();
    return w.str();
}

} // namespace

std::string emit_transformer(const Schedule& s) {
    s.validate();
    std::string src = R"(// Data transformer for UFi=@UFI@, UFk=@UFK@. Converts a CSR matrix into the
// enumerated compressed layout consumed by spmm_esc:
//   groups are (row panel, pattern) pairs, panel-major, one per pattern ordinal;
//   Cols lists each group's columns ascending, padded to a multiple of UFk by
//   repeating the last column; ANNZ is column-major within a group with the
//   pattern rows ascending and 0.0 in padding slots.
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <vector>

namespace esc_generated {

constexpr int kUFi = @UFI@;
constexpr int kUFk = @UFK@;

struct CompressedA {
  int M = 0;
  int K = 0;
  std::vector<std::uint32_t> patterns;
  std::vector<std::int32_t> group_panel;
  std::vector<std::uint32_t> group_pattern;
  std::vector<std::int32_t> group_cols;
  std::vector<std::int32_t> RPP{0};
  std::vector<std::int32_t> Cols;
  std::vector<std::int32_t> NPP{0};
  std::vector<float> ANNZ;
  std::vector<std::int32_t> RowOff;
};

inline CompressedA dataTransformer(int M, int K, const int* row_ptr, const int* col_idx, const float* values) {
  CompressedA t;
  t.M = M;
  t.K = K;
  const int panels = M == 0 ? 0 : (M + kUFi - 1) / kUFi;
  std::vector<std::uint32_t> mask(static_cast<std::size_t>(K), 0u);
  std::vector<float> vals(static_cast<std::size_t>(K) * kUFi, 0.0f);
  std::vector<char> seen(std::size_t{1} << kUFi, 0);

  // Pass 1: every pattern present anywhere in A gets a global ordinal.
  for (int p = 0; p < panels; ++p) {
    for (int r = 0; r < kUFi && p * kUFi + r < M; ++r)
      for (int q = row_ptr[p * kUFi + r]; q < row_ptr[p * kUFi + r + 1]; ++q) mask[col_idx[q]] |= 1u << r;
    for (int c = 0; c < K; ++c) {
      if (mask[c] != 0u) seen[mask[c]] = 1;
      mask[c] = 0u;
    }
  }
  std::vector<int> ordinal(std::size_t{1} << kUFi, -1);
  for (std::uint32_t b = 1; b < (1u << kUFi); ++b) {
    if (seen[b]) {
      ordinal[b] = static_cast<int>(t.patterns.size());
      t.patterns.push_back(b);
    }
  }
  const int np = static_cast<int>(t.patterns.size());
  if (np == 0) return t;

  // Pass 2: one group per (panel, ordinal).
  std::vector<std::vector<int>> bucket(static_cast<std::size_t>(np));
  for (int p = 0; p < panels; ++p) {
    for (int r = 0; r < kUFi && p * kUFi + r < M; ++r) {
      for (int q = row_ptr[p * kUFi + r]; q < row_ptr[p * kUFi + r + 1]; ++q) {
        mask[col_idx[q]] |= 1u << r;
        vals[static_cast<std::size_t>(col_idx[q]) * kUFi + r] = values[q];
      }
    }
    for (auto& b : bucket) b.clear();
    for (int c = 0; c < K; ++c)
      if (mask[c] != 0u) bucket[ordinal[mask[c]]].push_back(c);
    for (int o = 0; o < np; ++o) {
      const std::uint32_t pat = t.patterns[o];
      const auto& cols = bucket[o];
      const int real = static_cast<int>(cols.size());
      const int padded = (real + kUFk - 1) / kUFk * kUFk;
      for (int s = 0; s < padded; ++s) {
        const bool pad = s >= real;
        const int c = cols[pad ? real - 1 : s];
        t.Cols.push_back(c);
        for (int r = 0; r < kUFi; ++r)
          if ((pat >> r) & 1u) t.ANNZ.push_back(pad ? 0.0f : vals[static_cast<std::size_t>(c) * kUFi + r]);
      }
      t.group_panel.push_back(p);
      t.group_pattern.push_back(pat);
      t.group_cols.push_back(padded);
      t.RPP.push_back(static_cast<std::int32_t>(t.Cols.size()));
      t.NPP.push_back(static_cast<std::int32_t>(t.ANNZ.size()));
      int rank = 0;
      for (int r = 0; r < kUFi; ++r) t.RowOff.push_back(0);
      for (int r = 0; r < kUFi; ++r)
        if ((pat >> r) & 1u) t.RowOff[t.RowOff.size() - kUFi + rank++] = r;
    }
    for (const auto& b : bucket)
      for (int c : b) mask[c] = 0u;
  }
  return t;
}

inline void put_u32(std::FILE* out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  std::fwrite(b, 1, 4, out);
}

// Binary ESC1 container (little-endian u32 fields).
inline void serialize(const CompressedA& t, std::FILE* out) {
  std::fwrite("ESC1", 1, 4, out);
  const std::uint32_t groups = static_cast<std::uint32_t>(t.group_panel.size());
  const std::uint32_t header[7] = {static_cast<std::uint32_t>(t.M), static_cast<std::uint32_t>(t.K), kUFi, kUFk,
                                   groups, static_cast<std::uint32_t>(t.patterns.size()), 0u};
  for (std::uint32_t v : header) put_u32(out, v);
  for (std::uint32_t g = 0; g < groups; ++g) {
    put_u32(out, static_cast<std::uint32_t>(t.group_panel[g]));
    put_u32(out, t.group_pattern[g]);
    put_u32(out, static_cast<std::uint32_t>(t.group_cols[g]));
  }
  for (auto v : t.RPP) put_u32(out, static_cast<std::uint32_t>(v));
  for (auto v : t.Cols) put_u32(out, static_cast<std::uint32_t>(v));
  for (auto v : t.NPP) put_u32(out, static_cast<std::uint32_t>(v));
  for (float v : t.ANNZ) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }
}

} // namespace esc_generated

#ifdef ESC_TRANSFORMER_MAIN
int main() {
  int M = 0, K = 0, nnz = 0;
  if (std::scanf("%d %d %d", &M, &K, &nnz) != 3) return 1;
  std::vector<int> row_ptr(static_cast<std::size_t>(M) + 1), col_idx(static_cast<std::size_t>(nnz));
  std::vector<float> values(static_cast<std::size_t>(nnz));
  for (auto& v : row_ptr)
    if (std::scanf("%d", &v) != 1) return 1;
  for (auto& v : col_idx)
    if (std::scanf("%d", &v) != 1) return 1;
  for (auto& v : values) {
    unsigned bits = 0;
    if (std::scanf("%x", &bits) != 1) return 1;
    std::memcpy(&v, &bits, 4);
  }
  const auto t = esc_generated::dataTransformer(M, K, row_ptr.data(), col_idx.data(), values.data());
  esc_generated::serialize(t, stdout);
  return 0;
}
#endif
)";
    auto replace_all = [&](const std::string& key, const std::string& value) {
        for (auto pos = src.find(key); pos != std::string::npos; pos = src.find(key, pos + value.size()))
            src.replace(pos, key.size(), value);
    };
    replace_all("@UFI@", std::to_string(s.ufi));
    replace_all("@UFK@", std::to_string(s.ufk));
    return src;
}

EmittedArtifact emit(const KernelIR& ir, const EscMatrix& t, bool compaction) {
    if (!ir.data_transformed || !ir.schedule) throw IrError("emit: IR is not fully lowered");
    if (t.ufi != ir.schedule->ufi || t.ufk != ir.schedule->ufk)
        throw ScheduleError("emit: schedule/format mismatch");
    const KernelIR body = (compaction && !ir.compacted) ? pass_compact(ir) : ir;
    EmittedArtifact a;
    a.schedule = *ir.schedule;
    a.compacted = body.compacted;
    a.kernel_source = kernel_source(body, a.body_count);
    a.host_source = host_source(a.schedule);
    a.transformer_source = emit_transformer(a.schedule);
    return a;
}

std::int64_t line_count(std::string_view text) {
    std::int64_t n = 0;
    bool blank = true;
    for (char c : text) {
        if (c == '\n') {
            if (!blank) ++n;
            blank = true;
        } else if (c != ' ' && c != '\t' && c != '\r') {
            blank = false;
        }
    }
    if (!blank) ++n;
    return n;
}

LineCounts line_count(const EmittedArtifact& a) {
    return LineCounts{line_count(a.kernel_source), line_count(a.host_source), line_count(a.transformer_source)};
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw InternalError("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string manifest(const EmittedArtifact& a, const std::string& name) {
    const auto lc = line_count(a);
    std::ostringstream os;
    os << "name=" << name << '\n'
       << "schedule=" << a.schedule.str() << '\n'
       << "compaction=" << (a.compacted ? "on" : "off") << '\n'
       << "body_count=" << a.body_count << '\n'
       << "kernel_file=" << name << "_kernel.cu\n"
       << "kernel_lines=" << lc.kernel << '\n'
       << "kernel_sha256=" << sha256_hex(a.kernel_source) << '\n'
       << "host_file=" << name << "_host.cu\n"
       << "host_lines=" << lc.host << '\n'
       << "host_sha256=" << sha256_hex(a.host_source) << '\n'
       << "transformer_file=" << name << "_transformer.cpp\n"
       << "transformer_lines=" << lc.transformer << '\n'
       << "transformer_sha256=" << sha256_hex(a.transformer_source) << '\n';
    return os.str();
}

void write_artifact(const EmittedArtifact& a, const std::filesystem::path& dir, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    auto put = [&](const std::string& file, const std::string& text) {
        std::ofstream out(dir / file, std::ios::binary);
        out << text;
        if (!out) throw Error("cannot write " + (dir / file).string());
    };
    put(name + "_kernel.cu", a.kernel_source);
    put(name + "_host.cu", a.host_source);
    put(name + "_transformer.cpp", a.transformer_source);
    put("manifest.txt", manifest(a, name));
}

} // namespace esc
