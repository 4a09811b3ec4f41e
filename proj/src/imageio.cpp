#include "rcdt/imageio.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace rcdt {

namespace {

void validate(const RasterImage& img) {
    if (img.channels != 1 && img.channels != 3)
        throw InputError("raster image must have 1 or 3 channels, got " + std::to_string(img.channels));
    if (img.width <= 0 || img.height <= 0) throw InputError("raster image has empty extent");
    if (img.samples.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
        throw InputError("raster sample count does not match " + std::to_string(img.width) + "x" +
                         std::to_string(img.height) + "x" + std::to_string(img.channels));
}

class HeaderReader {
   public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }

    // Skips whitespace and '#' comments that run to end of line.
    void skip_separators() {
        while (pos_ < bytes_.size()) {
            const auto c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
            } else if (std::isspace(c)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    int read_uint(const char* what) {
        skip_separators();
        const std::size_t start = pos_;
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000'000) fail(std::string(what) + " out of range", start);
            ++pos_;
        }
        if (pos_ == start) fail(std::string("expected ") + what, start);
        return static_cast<int>(value);
    }

    void expect_single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("expected whitespace after maxval", pos_);
        ++pos_;
    }

    [[noreturn]] static void fail(const std::string& what, std::size_t at) {
        throw ParseError("pnm header: " + what + " at byte offset " + std::to_string(at));
    }

   private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_pnm(const RasterImage& img) {
    validate(img);
    const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width) +
                               " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.samples.begin(), img.samples.end());
    return out;
}

RasterImage decode_pnm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        HeaderReader::fail("magic number is not P5 or P6", 0);
    const int channels = bytes[1] == '6' ? 3 : 1;
    HeaderReader reader(bytes.subspan(2));
    const int width = reader.read_uint("width");
    const int height = reader.read_uint("height");
    const std::size_t maxval_at = reader.offset() + 2;
    const int maxval = reader.read_uint("maxval");
    if (maxval != 255)
        throw UnsupportedFormatError("pnm: maxval " + std::to_string(maxval) + " at byte offset " +
                                     std::to_string(maxval_at) + " is not supported (only 255)");
    reader.expect_single_whitespace();
    if (width <= 0 || height <= 0) HeaderReader::fail("zero image extent", 2);
    const std::size_t start = reader.offset() + 2;
    const std::size_t expected = static_cast<std::size_t>(width) * height * channels;
    const std::size_t actual = bytes.size() - start;
    if (actual < expected)
        throw ParseError("pnm payload truncated: expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(actual));
    RasterImage img(width, height, channels);
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(start), expected, img.samples.begin());
    return img;
}

RasterImage read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_pnm(bytes);
    } catch (const ParseError& e) {
        if (dynamic_cast<const UnsupportedFormatError*>(&e)) throw UnsupportedFormatError(path.string() + ": " + e.what());
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_pnm(const RasterImage& img, const std::filesystem::path& path) {
    const auto bytes = encode_pnm(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

std::uint8_t to_byte(double v) {
    if (!(v > 0.0)) return 0;
    if (v >= 1.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

RasterImage to_raster(const Tensor& image) {
    if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
        throw DimensionError("to_raster: expected 1xHxW or 3xHxW, got " + shape_str(image.shape()));
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    RasterImage img(w, h, c);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t p = 0; p < plane; ++p)
        for (int ch = 0; ch < c; ++ch) img.samples[p * c + ch] = to_byte(image[ch * plane + p]);
    return img;
}

Tensor to_tensor(const RasterImage& img) {
    validate(img);
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    std::vector<double> values(plane * img.channels);
    for (std::size_t p = 0; p < plane; ++p)
        for (int ch = 0; ch < img.channels; ++ch) values[ch * plane + p] = img.samples[p * img.channels + ch] / 255.0;
    return Tensor(Shape{img.channels, img.height, img.width}, std::move(values));
}

RasterImage mask_to_raster(const Mask& m) {
    RasterImage img(m.width, m.height, 1);
    for (std::size_t i = 0; i < m.size(); ++i) img.samples[i] = m.values[i] ? 255 : 0;
    return img;
}

Mask raster_to_mask(const RasterImage& img) {
    if (img.channels != 1) throw InputError("mask raster must be single-channel");
    Mask m(img.height, img.width);
    for (std::size_t i = 0; i < m.size(); ++i) m.values[i] = img.samples[i] ? 1 : 0;
    return m;
}

}  // namespace rcdt
