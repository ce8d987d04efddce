// SPDX-License-Identifier: Apache-2.0
#pragma once

/// \file cli.hpp
/// \brief The `bbpose` command line: encode, parse, eval, synth, render.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbpose/codec.hpp"

namespace bbpose::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
};

/// Runs one command line (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes the encoded tensors of `maps` plus the background map and a
/// manifest into `dir`. Returns the manifest.
nlohmann::json write_tensor_set(const std::filesystem::path& dir, const SceneAnnotation& scene,
                                const EncoderConfig& cfg, const FieldMaps& maps);

struct TensorSet {
    nlohmann::json manifest;
    FieldMaps maps;
    FieldGrid background;
};

/// Reads a directory written by write_tensor_set. Throws io::DataError on
/// missing files or shape disagreement with the manifest.
TensorSet read_tensor_set(const std::filesystem::path& dir);

/// Worker count: the BBPOSE_THREADS environment variable when set to a
/// positive integer, otherwise the hardware concurrency.
int default_thread_count();

}  // namespace bbpose::cli
