#pragma once

// Non-overlapping patch tiling of large bi-temporal pairs and the on-disk
// dataset layout: PPM frames, PGM labels and a tab-separated manifest.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rcdt/synth.hpp"

namespace rcdt {

struct PatchRecord {
    std::string split;
    std::string source;  // id of the source pair the patch was cut from
    std::string before;  // paths relative to the manifest directory
    std::string after;
    std::string gt;
    int origin_y = 0;
    int origin_x = 0;
    int patch = 0;
    int source_h = 0;
    int source_w = 0;

    bool operator==(const PatchRecord&) const = default;
};

struct DatasetManifest {
    std::vector<PatchRecord> records;

    std::vector<PatchRecord> split(const std::string& name) const;
    std::vector<std::string> split_names() const;
};

// Row-major (y, x) origins of the non-overlapping patches of an h x w source.
std::vector<std::pair<int, int>> tile_origins(int h, int w, int patch);

// Number of patches a split of `pairs` sources of h x w yields; needs only the
// dimensions.
long long count_patches(long long pairs, int h, int w, int patch);

struct TiledSplit {
    DatasetManifest manifest;
    std::vector<SamplePair> patches;  // parallel to manifest.records
};

// Cuts every source into patches. Source ids are "<split>-<index>" and file
// names "<split>/<source>_<y>_<x>_{a.ppm,b.ppm,gt.pgm}".
TiledSplit tile_patches(const std::vector<SamplePair>& pairs, int patch, const std::string& split = "train");

SamplePair extract_patch(const SamplePair& source, int origin_y, int origin_x, int patch);

// Inverse of tiling for one source; patches in tile_origins order.
SamplePair reassemble(const std::vector<SamplePair>& patches, int h, int w);

std::string manifest_text(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& text);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Throws ConfigError when a source id appears in more than one split.
void check_disjoint_splits(const DatasetManifest& m);

struct DatasetSpec {
    std::uint64_t seed = 2024;
    int source_size = 128;
    int patch = 64;
    int train_sources = 128;
    int val_sources = 16;
    int test_sources = 16;
    Difficulty difficulty;
};

// Generates, tiles and writes a whole dataset under root; returns the manifest
// (also written to root/manifest.tsv).
DatasetManifest write_dataset(const DatasetSpec& spec, const std::filesystem::path& root);

struct LoadedSample {
    PatchRecord record;
    SamplePair pair;
};

// Reads every patch of one split; images map bytes to [0, 1].
std::vector<LoadedSample> load_split(const std::filesystem::path& manifest_path, const std::string& split);

}  // namespace rcdt
