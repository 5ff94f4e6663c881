#include "medvqa/imaging/png.hpp"

#include <png.h>

#include <cstring>
#include <memory>

#include "medvqa/error.hpp"
#include "medvqa/util/files.hpp"

namespace medvqa::imaging {

namespace {

struct ImageGuard {
    png_image* img;
    ~ImageGuard() { png_image_free(img); }
};

}  // namespace

GrayImage decode_png(std::string_view bytes) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    ImageGuard guard{&img};
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        fail(ErrorKind::Parse, std::string("png: ") + img.message);
    img.format = PNG_FORMAT_GRAY;
    if (img.width < 1 || img.height < 1) fail(ErrorKind::Dimension, "png: empty image");
    GrayImage out(static_cast<int>(img.width), static_cast<int>(img.height));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr))
        fail(ErrorKind::Parse, std::string("png: ") + img.message);
    return out;
}

GrayImage read_png(const std::filesystem::path& path) {
    try {
        return decode_png(util::read_file(path));
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

std::string encode_png(const GrayImage& image) {
    if (image.empty()) fail(ErrorKind::Dimension, "png: empty image");
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_GRAY;
    ImageGuard guard{&img};
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(img, size, 0, image.pixels.data(), 0, nullptr))
        fail(ErrorKind::Io, std::string("png: ") + img.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr))
        fail(ErrorKind::Io, std::string("png: ") + img.message);
    out.resize(size);
    return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
    util::write_file_atomic(path, encode_png(image));
}

BinaryMask mask_from_gray(const GrayImage& image) {
    std::vector<std::uint8_t> bits(image.pixels.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = image.pixels[i] > 127 ? 1 : 0;
    return BinaryMask(image.width, image.height, std::move(bits));
}

GrayImage mask_to_gray(const BinaryMask& mask) {
    GrayImage out(mask.width(), mask.height());
    auto bits = mask.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) out.pixels[i] = bits[i] ? 255 : 0;
    return out;
}

BinaryMask read_mask(const std::filesystem::path& path) { return mask_from_gray(read_png(path)); }

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
    write_png(path, mask_to_gray(mask));
}

}  // namespace medvqa::imaging
