#include "rcdt/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rcdt/errors.hpp"

namespace rcdt {

namespace {

constexpr const char* kMagic = "rcdt-checkpoint 1";

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

std::string shape_field(const Shape& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out;
}

Shape parse_shape(const std::string& text, const std::filesystem::path& path) {
    Shape s;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, 'x')) {
        try {
            s.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw CheckpointError(path.string() + ": bad shape '" + text + "'");
        }
    }
    return s;
}

}  // namespace

void save_checkpoint(const ParameterStore& params, const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const std::string config_text = to_config_text(cfg);
    std::size_t config_lines = 0;
    for (char c : config_text) config_lines += c == '\n';
    out << kMagic << "\n" << "config " << config_lines << "\n" << config_text;
    out << "parameters " << params.entries().size() << "\n";
    std::size_t offset = 0;
    for (const auto& p : params.entries()) {
        out << p.name << "\t" << shape_field(p.value.shape()) << "\t" << offset << "\n";
        offset += p.value.numel();
    }
    out << "end\n";
    for (const auto& p : params.entries()) {
        const auto data = p.value.data();
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    }
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

CheckpointContents read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw CheckpointError(path.string() + ": not a checkpoint (missing '" + kMagic + "' header)");
    std::size_t n = 0;
    if (!std::getline(in, line) || std::sscanf(line.c_str(), "config %zu", &n) != 1)
        throw CheckpointError(path.string() + ": missing config section");
    std::string config_text;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw CheckpointError(path.string() + ": truncated config section");
        config_text += line + "\n";
    }
    CheckpointContents out;
    out.config = parse_config_text(config_text);
    if (!std::getline(in, line) || std::sscanf(line.c_str(), "parameters %zu", &n) != 1)
        throw CheckpointError(path.string() + ": missing parameter table");
    struct Entry {
        std::string name;
        Shape shape;
        std::size_t offset;
    };
    std::vector<Entry> entries;
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw CheckpointError(path.string() + ": truncated parameter table");
        std::stringstream ss(line);
        std::string name, shape, offset;
        if (!std::getline(ss, name, '\t') || !std::getline(ss, shape, '\t') || !std::getline(ss, offset))
            throw CheckpointError(path.string() + ": malformed parameter line '" + line + "'");
        Entry e{name, parse_shape(shape, path), std::stoull(offset)};
        if (e.offset != total) throw CheckpointError(path.string() + ": non-contiguous offset for '" + name + "'");
        total += numel(e.shape);
        entries.push_back(std::move(e));
    }
    if (!std::getline(in, line) || line != "end") throw CheckpointError(path.string() + ": missing 'end' line");
    std::vector<double> payload(total);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(total * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != total * sizeof(double))
        throw CheckpointError(path.string() + ": payload truncated, expected " + std::to_string(total * sizeof(double)) +
                              " bytes, got " + std::to_string(in.gcount()));
    for (const auto& e : entries) {
        const auto begin = payload.begin() + static_cast<std::ptrdiff_t>(e.offset);
        out.parameters.push_back(
            {e.name, Tensor(e.shape, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(numel(e.shape))))});
    }
    return out;
}

void load_parameters(ParameterStore& store, const CheckpointContents& contents) {
    std::vector<std::string> problems;
    for (const auto& p : store.entries()) {
        const auto it = std::find_if(contents.parameters.begin(), contents.parameters.end(),
                                     [&](const NamedParameter& q) { return q.name == p.name; });
        if (it == contents.parameters.end())
            problems.push_back(p.name + " (missing)");
        else if (it->value.shape() != p.value.shape())
            problems.push_back(p.name + " (model " + shape_str(p.value.shape()) + ", checkpoint " +
                               shape_str(it->value.shape()) + ")");
    }
    for (const auto& q : contents.parameters)
        if (!store.contains(q.name)) problems.push_back(q.name + " (unexpected)");
    if (!problems.empty()) {
        std::string msg = "checkpoint does not match the model:";
        for (const auto& s : problems) msg += "\n  " + s;
        throw CheckpointError(msg);
    }
    for (const auto& q : contents.parameters) {
        Tensor dst = store.get(q.name);
        std::copy(q.value.data().begin(), q.value.data().end(), dst.data().begin());
    }
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
    CheckpointContents contents = read_checkpoint(path);
    LoadedModel out{contents.config, ChangeDetector(contents.config.model, contents.config.seed)};
    load_parameters(out.model.parameters(), contents);
    return out;
}

}  // namespace rcdt
