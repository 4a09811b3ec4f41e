#pragma once

// Checkpoint file: a text manifest (format line, the run configuration, then
// one "name<TAB>shape<TAB>offset" line per parameter, offsets counted in
// doubles) closed by an "end" line, followed by the flat little-endian
// 64-bit float payload.

#include <filesystem>

#include "rcdt/config.hpp"
#include "rcdt/model.hpp"

namespace rcdt {

void save_checkpoint(const ParameterStore& params, const RunConfig& cfg, const std::filesystem::path& path);

struct CheckpointContents {
    RunConfig config;
    std::vector<NamedParameter> parameters;
};

CheckpointContents read_checkpoint(const std::filesystem::path& path);

// Copies values into an existing store. Missing, unexpected or
// shape-incompatible parameters throw CheckpointError listing all of them.
void load_parameters(ParameterStore& store, const CheckpointContents& contents);

struct LoadedModel {
    RunConfig config;
    ChangeDetector model;
};

LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace rcdt
