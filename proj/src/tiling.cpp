#include "rcdt/tiling.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rcdt/errors.hpp"
#include "rcdt/imageio.hpp"

namespace rcdt {

namespace {

void check_divisible(int h, int w, int patch) {
    if (patch <= 0) throw ConfigError("patch size must be positive");
    if (h <= 0 || w <= 0 || h % patch != 0 || w % patch != 0)
        throw ConfigError("source size " + std::to_string(h) + "x" + std::to_string(w) +
                          " is not divisible by patch size " + std::to_string(patch));
}

constexpr const char* kColumns[] = {"split",    "source",   "before", "after",    "gt",
                                    "origin_y", "origin_x", "patch",  "source_h", "source_w"};
constexpr int kColumnCount = 10;

int parse_field_int(const std::string& v, int line, const char* column) {
    try {
        std::size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ParseError("manifest line " + std::to_string(line) + ": column " + column + " is not an integer: '" + v +
                     "'");
}

}  // namespace

std::vector<PatchRecord> DatasetManifest::split(const std::string& name) const {
    std::vector<PatchRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [&](const PatchRecord& r) { return r.split == name; });
    return out;
}

std::vector<std::string> DatasetManifest::split_names() const {
    std::vector<std::string> out;
    for (const auto& r : records)
        if (std::find(out.begin(), out.end(), r.split) == out.end()) out.push_back(r.split);
    return out;
}

std::vector<std::pair<int, int>> tile_origins(int h, int w, int patch) {
    check_divisible(h, w, patch);
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < h; y += patch)
        for (int x = 0; x < w; x += patch) out.emplace_back(y, x);
    return out;
}

long long count_patches(long long pairs, int h, int w, int patch) {
    check_divisible(h, w, patch);
    return pairs * (h / patch) * (w / patch);
}

SamplePair extract_patch(const SamplePair& s, int oy, int ox, int patch) {
    const int h = s.gt.height, w = s.gt.width;
    if (oy < 0 || ox < 0 || oy + patch > h || ox + patch > w)
        throw DimensionError("patch at (" + std::to_string(oy) + ", " + std::to_string(ox) + ") exceeds the source");
    auto crop = [&](const Tensor& img) {
        const int c = img.dim(0);
        Tensor out(Shape{c, patch, patch});
        auto dst = out.data();
        const auto src = img.data();
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < patch; ++y)
                std::copy_n(src.begin() + (static_cast<std::size_t>(ch) * h + oy + y) * w + ox, patch,
                            dst.begin() + (static_cast<std::size_t>(ch) * patch + y) * patch);
        return out;
    };
    SamplePair out;
    out.seed = s.seed;
    out.before = crop(s.before);
    out.after = crop(s.after);
    out.gt = Mask(patch, patch);
    for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x) out.gt.at(y, x) = s.gt.at(oy + y, ox + x);
    return out;
}

SamplePair reassemble(const std::vector<SamplePair>& patches, int h, int w) {
    if (patches.empty()) throw DimensionError("reassemble: no patches");
    const int patch = patches.front().gt.height;
    const auto origins = tile_origins(h, w, patch);
    if (origins.size() != patches.size())
        throw DimensionError("reassemble: expected " + std::to_string(origins.size()) + " patches, got " +
                             std::to_string(patches.size()));
    const int c = patches.front().before.dim(0);
    SamplePair out;
    out.seed = patches.front().seed;
    out.before = Tensor(Shape{c, h, w});
    out.after = Tensor(Shape{c, h, w});
    out.gt = Mask(h, w);
    for (std::size_t k = 0; k < origins.size(); ++k) {
        const auto [oy, ox] = origins[k];
        const SamplePair& p = patches[k];
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x) {
                    const std::size_t src = (static_cast<std::size_t>(ch) * patch + y) * patch + x;
                    const std::size_t dst = (static_cast<std::size_t>(ch) * h + oy + y) * w + ox + x;
                    out.before.data()[dst] = p.before[src];
                    out.after.data()[dst] = p.after[src];
                }
        for (int y = 0; y < patch; ++y)
            for (int x = 0; x < patch; ++x) out.gt.at(oy + y, ox + x) = p.gt.at(y, x);
    }
    return out;
}

TiledSplit tile_patches(const std::vector<SamplePair>& pairs, int patch, const std::string& split) {
    TiledSplit out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const SamplePair& s = pairs[i];
        const int h = s.gt.height, w = s.gt.width;
        const std::string source = split + "-" + std::to_string(i);
        for (const auto& [oy, ox] : tile_origins(h, w, patch)) {
            const std::string stem = split + "/" + source + "_" + std::to_string(oy) + "_" + std::to_string(ox);
            out.manifest.records.push_back(
                {split, source, stem + "_a.ppm", stem + "_b.ppm", stem + "_gt.pgm", oy, ox, patch, h, w});
            out.patches.push_back(extract_patch(s, oy, ox, patch));
        }
    }
    return out;
}

std::string manifest_text(const DatasetManifest& m) {
    std::string out;
    for (int i = 0; i < kColumnCount; ++i) out += std::string(i ? "\t" : "# ") + kColumns[i];
    out += "\n";
    for (const auto& r : m.records) {
        out += r.split + "\t" + r.source + "\t" + r.before + "\t" + r.after + "\t" + r.gt + "\t" +
               std::to_string(r.origin_y) + "\t" + std::to_string(r.origin_x) + "\t" + std::to_string(r.patch) +
               "\t" + std::to_string(r.source_h) + "\t" + std::to_string(r.source_w) + "\n";
    }
    return out;
}

DatasetManifest parse_manifest(const std::string& text) {
    DatasetManifest m;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, '\t')) f.push_back(item);
        if (f.size() != kColumnCount)
            throw ParseError("manifest line " + std::to_string(lineno) + ": expected " +
                             std::to_string(kColumnCount) + " tab-separated fields, got " + std::to_string(f.size()));
        m.records.push_back({f[0], f[1], f[2], f[3], f[4], parse_field_int(f[5], lineno, kColumns[5]),
                             parse_field_int(f[6], lineno, kColumns[6]), parse_field_int(f[7], lineno, kColumns[7]),
                             parse_field_int(f[8], lineno, kColumns[8]), parse_field_int(f[9], lineno, kColumns[9])});
    }
    return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << manifest_text(m);
    if (!out) throw IoError("failed writing " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str());
}

void check_disjoint_splits(const DatasetManifest& m) {
    std::map<std::string, std::string> owner;
    for (const auto& r : m.records) {
        const auto [it, inserted] = owner.emplace(r.source, r.split);
        if (!inserted && it->second != r.split)
            throw ConfigError("source '" + r.source + "' appears in splits '" + it->second + "' and '" + r.split +
                              "'");
    }
}

DatasetManifest write_dataset(const DatasetSpec& spec, const std::filesystem::path& root) {
    DatasetManifest all;
    const std::pair<const char*, int> splits[] = {
        {"train", spec.train_sources}, {"val", spec.val_sources}, {"test", spec.test_sources}};
    std::uint64_t split_index = 0;
    for (const auto& [name, count] : splits) {
        ++split_index;
        std::filesystem::create_directories(root / name);
        std::vector<SamplePair> sources;
        sources.reserve(count);
        for (int i = 0; i < count; ++i)
            sources.push_back(generate_pair(spec.seed * 1000003ULL + split_index * 100000ULL + i, spec.source_size,
                                            spec.source_size, spec.difficulty));
        TiledSplit tiled = tile_patches(sources, spec.patch, name);
        for (std::size_t k = 0; k < tiled.patches.size(); ++k) {
            const PatchRecord& r = tiled.manifest.records[k];
            write_pnm(to_raster(tiled.patches[k].before), root / r.before);
            write_pnm(to_raster(tiled.patches[k].after), root / r.after);
            write_pnm(mask_to_raster(tiled.patches[k].gt), root / r.gt);
        }
        all.records.insert(all.records.end(), tiled.manifest.records.begin(), tiled.manifest.records.end());
    }
    check_disjoint_splits(all);
    write_manifest(all, root / "manifest.tsv");
    return all;
}

std::vector<LoadedSample> load_split(const std::filesystem::path& manifest_path, const std::string& split) {
    const DatasetManifest m = read_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    std::vector<LoadedSample> out;
    for (const auto& r : m.split(split)) {
        LoadedSample s;
        s.record = r;
        s.pair.before = to_tensor(read_pnm(root / r.before));
        s.pair.after = to_tensor(read_pnm(root / r.after));
        s.pair.gt = raster_to_mask(read_pnm(root / r.gt));
        if (s.pair.before.shape() != s.pair.after.shape() || s.pair.gt.height != s.pair.before.dim(1) ||
            s.pair.gt.width != s.pair.before.dim(2))
            throw InputError("patch " + r.before + ": frame and label sizes differ");
        out.push_back(std::move(s));
    }
    if (out.empty()) throw ConfigError("split '" + split + "' is empty or missing in " + manifest_path.string());
    return out;
}

}  // namespace rcdt
