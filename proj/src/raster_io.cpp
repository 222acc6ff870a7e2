#include "pageseg/raster_io.hpp"

#include "pageseg/errors.hpp"

#include <png.h>

#include <array>
#include <cstdio>
#include <csetjmp>
#include <cstring>
#include <vector>

// libpng reports internal errors via longjmp. Every object with a
// nontrivial destructor is constructed before setjmp, so the jump back
// crosses no live scopes; the failure becomes an exception once control
// is back in this frame. Contract violations we detect ourselves are
// thrown directly (RAII wrappers clean up libpng state).

namespace pageseg {

namespace {

struct PngRead {
    FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;

    ~PngRead() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWrite {
    FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;

    ~PngWrite() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

void open_reader(PngRead& r, const std::filesystem::path& path) {
    r.fp = std::fopen(path.string().c_str(), "rb");
    if (!r.fp) throw IoError("cannot open " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, r.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw CorruptFileError(path.string() + " is not a PNG file");
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png_create_info_struct failed");
    png_init_io(r.png, r.fp);
    png_set_sig_bytes(r.png, 8);
}

void open_writer(PngWrite& w, const std::filesystem::path& path) {
    w.fp = std::fopen(path.string().c_str(), "wb");
    if (!w.fp) throw IoError("cannot write " + path.string());
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!w.png) throw IoError("png_create_write_struct failed");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw IoError("png_create_info_struct failed");
    png_init_io(w.png, w.fp);
    // Fixed settings keep the byte stream deterministic across runs.
    png_set_compression_level(w.png, 1);
    png_set_filter(w.png, 0, PNG_FILTER_NONE);
}

struct Decoded {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // interleaved 8-bit samples
    std::array<Rgb, 256> palette{}; // Mode::palette only
    int palette_size = 0;
};

enum class Mode { palette, gray, rgb };

Decoded decode_png(const std::filesystem::path& path, Mode mode) {
    PngRead r;
    open_reader(r, path);

    Decoded out;
    std::vector<png_bytep> rows;

    if (setjmp(png_jmpbuf(r.png)))
        throw CorruptFileError("failed to decode " + path.string());

    png_read_info(r.png, r.info);
    const png_uint_32 width = png_get_image_width(r.png, r.info);
    const png_uint_32 height = png_get_image_height(r.png, r.info);
    const int color_type = png_get_color_type(r.png, r.info);
    const int bit_depth = png_get_bit_depth(r.png, r.info);
    if (width == 0 || height == 0 || width > (1u << 24) || height > (1u << 24))
        throw CorruptFileError(path.string() + ": unreasonable dimensions");

    int channels = 1;
    switch (mode) {
    case Mode::palette: {
        if (color_type != PNG_COLOR_TYPE_PALETTE)
            throw CorruptFileError(path.string() +
                                   " is not an indexed-palette raster");
        if (bit_depth < 8) png_set_packing(r.png);
        png_colorp plte = nullptr;
        int n = 0;
        if (!png_get_PLTE(r.png, r.info, &plte, &n) || n <= 0)
            throw CorruptFileError(path.string() + ": missing palette");
        out.palette_size = n;
        for (int i = 0; i < n; ++i)
            out.palette[static_cast<std::size_t>(i)] =
                Rgb{plte[i].red, plte[i].green, plte[i].blue};
        break;
    }
    case Mode::gray: {
        if (color_type != PNG_COLOR_TYPE_GRAY &&
            color_type != PNG_COLOR_TYPE_GRAY_ALPHA)
            throw CorruptFileError(path.string() +
                                   " is not an 8-bit grayscale raster");
        if (bit_depth == 16) png_set_strip_16(r.png);
        if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
        if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(r.png);
        break;
    }
    case Mode::rgb: {
        if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
        if (color_type == PNG_COLOR_TYPE_GRAY ||
            color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
            if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
            png_set_gray_to_rgb(r.png);
        }
        if (bit_depth == 16) png_set_strip_16(r.png);
        png_set_strip_alpha(r.png);
        channels = 3;
        break;
    }
    }
    png_set_interlace_handling(r.png);
    png_read_update_info(r.png, r.info);

    const std::size_t rowbytes = png_get_rowbytes(r.png, r.info);
    if (rowbytes != static_cast<std::size_t>(width) * channels)
        throw CorruptFileError(path.string() + ": unexpected decoded layout");

    out.width = static_cast<int>(width);
    out.height = static_cast<int>(height);
    out.data.resize(rowbytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y)
        rows[y] = out.data.data() + y * rowbytes;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return out;
}

void encode_png(const std::filesystem::path& path, int width, int height,
                int color_type, const LabelSchema* schema,
                const std::uint8_t* data, std::size_t stride) {
    PngWrite w;
    open_writer(w, path);

    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(data + y * stride);
    std::array<png_color, 256> palette{};

    if (setjmp(png_jmpbuf(w.png)))
        throw IoError("failed to encode " + path.string());

    png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        for (std::size_t i = 0; i < schema->class_count(); ++i) {
            Rgb c = schema->class_at(i).color;
            palette[i] = png_color{c.r, c.g, c.b};
        }
        png_set_PLTE(w.png, w.info, palette.data(),
                     static_cast<int>(schema->class_count()));
    }
    png_write_info(w.png, w.info);
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

} // namespace

IndexedLabelImage load_indexed(const std::filesystem::path& path, SchemaPtr schema) {
    if (!schema) throw InvalidArgumentError("load_indexed requires a schema");
    Decoded d = decode_png(path, Mode::palette);

    // Palette index -> schema index; 0xFF marks an entry with no schema color.
    std::array<std::uint8_t, 256> map{};
    map.fill(0xFF);
    for (int i = 0; i < d.palette_size; ++i) {
        auto idx = schema->index_of_color(d.palette[static_cast<std::size_t>(i)]);
        if (idx) map[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(*idx);
    }

    IndexedLabelImage img(d.width, d.height, std::move(schema));
    auto out = img.labels();
    for (std::size_t i = 0; i < d.data.size(); ++i) {
        const std::uint8_t raw = d.data[i];
        if (raw >= d.palette_size)
            throw CorruptFileError(path.string() + ": pixel references palette entry " +
                                   std::to_string(raw) + " beyond palette size " +
                                   std::to_string(d.palette_size));
        const std::uint8_t mapped = map[raw];
        if (mapped == 0xFF) {
            const int x = static_cast<int>(i % static_cast<std::size_t>(d.width));
            const int y = static_cast<int>(i / static_cast<std::size_t>(d.width));
            throw UnknownColorError(
                path.string() + ": palette color " + to_string(d.palette[raw]) +
                " at pixel (" + std::to_string(x) + "," + std::to_string(y) +
                ") is not in the '" + std::string(img.schema().task_name()) +
                "' palette");
        }
        out[i] = mapped;
    }
    return img;
}

void save_indexed(const IndexedLabelImage& img, const std::filesystem::path& path) {
    encode_png(path, img.width(), img.height(), PNG_COLOR_TYPE_PALETTE,
               &img.schema(), img.labels().data(),
               static_cast<std::size_t>(img.width()));
}

ScanImage load_gray(const std::filesystem::path& path) {
    Decoded d = decode_png(path, Mode::gray);
    ScanImage img(d.width, d.height);
    std::memcpy(img.pixels().data(), d.data.data(), d.data.size());
    return img;
}

void save_gray(const ScanImage& img, const std::filesystem::path& path) {
    encode_png(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, nullptr,
               img.pixels().data(), static_cast<std::size_t>(img.width()));
}

RgbImage load_rgb(const std::filesystem::path& path) {
    Decoded d = decode_png(path, Mode::rgb);
    RgbImage img(d.width, d.height);
    std::memcpy(img.bytes().data(), d.data.data(), d.data.size());
    return img;
}

void save_rgb(const RgbImage& img, const std::filesystem::path& path) {
    encode_png(path, img.width(), img.height(), PNG_COLOR_TYPE_RGB, nullptr,
               img.bytes().data(), static_cast<std::size_t>(img.width()) * 3);
}

} // namespace pageseg
