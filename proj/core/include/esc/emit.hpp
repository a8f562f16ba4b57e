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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "esc/esc_format.hpp"
#include "esc/ir.hpp"

namespace esc {

struct EmittedArtifact {
    std::string kernel_source;
    std::string host_source;
    std::string transformer_source;
    Schedule schedule;
    bool compacted = false;
    /// Distinct kernel bodies: 2^UFi - 1 uncompacted, UFi compacted.
    std::int32_t body_count = 0;
};

struct LineCounts {
    std::int64_t kernel = 0;
    std::int64_t host = 0;
    std::int64_t transformer = 0;
    std::int64_t total() const { return kernel + host + transformer; }
};

/// Emits kernel, host launcher and data transformer sources for a fully
/// lowered IR. With compaction the pattern bodies are folded into one body per
/// popcount class (a no-op for UFi = 1). Every body is delimited by
/// "// body begin <label>" and "// body end" lines.
EmittedArtifact emit(const KernelIR& ir, const EscMatrix& t, bool compaction);

/// Standalone C++ data transformer for the schedule's UFi and UFk. Defining
/// ESC_TRANSFORMER_MAIN adds a stdin/stdout driver: input "M K nnz", M+1 row
/// pointers, nnz column indices and nnz values as hex IEEE-754 bit patterns;
/// output the binary ESC1 container.
std::string emit_transformer(const Schedule& s);

/// Non-blank lines per file.
LineCounts line_count(const EmittedArtifact& a);
std::int64_t line_count(std::string_view text);

std::string sha256_hex(std::string_view data);

/// key=value manifest: name, schedule, compaction, body count, file names,
/// line counts and SHA-256 digests.
std::string manifest(const EmittedArtifact& a, const std::string& name);

/// Writes esc_kernel.cu, esc_host.cu, esc_transformer.cpp and manifest.txt.
void write_artifact(const EmittedArtifact& a, const std::filesystem::path& dir, const std::string& name);

} // namespace esc
