#include "pageseg/image.hpp"

#include "pageseg/errors.hpp"

#include <string>

namespace pageseg {

namespace {

void check_dimensions(int width, int height) {
    if (width < 1 || height < 1)
        throw InvalidArgumentError("image dimensions must be >= 1, got " +
                                   std::to_string(width) + "x" +
                                   std::to_string(height));
}

} // namespace

IndexedLabelImage::IndexedLabelImage(int width, int height, SchemaPtr schema,
                                     std::uint8_t fill)
    : width_(width), height_(height), schema_(std::move(schema)) {
    check_dimensions(width, height);
    if (!schema_) throw InvalidArgumentError("label image requires a schema");
    if (fill >= schema_->class_count())
        throw InvalidArgumentError("fill index " + std::to_string(fill) +
                                   " outside schema");
    labels_.assign(static_cast<std::size_t>(width_) * height_, fill);
}

void IndexedLabelImage::set(int x, int y, std::uint8_t value) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_)
        throw InvalidArgumentError("pixel (" + std::to_string(x) + "," +
                                   std::to_string(y) + ") outside image");
    if (value >= schema_->class_count())
        throw InvalidArgumentError("class index " + std::to_string(value) +
                                   " outside schema of " +
                                   std::to_string(schema_->class_count()) +
                                   " classes");
    labels_[static_cast<std::size_t>(y) * width_ + x] = value;
}

ScanImage::ScanImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
    check_dimensions(width, height);
    pixels_.assign(static_cast<std::size_t>(width_) * height_, fill);
}

RgbImage::RgbImage(int width, int height) : width_(width), height_(height) {
    check_dimensions(width, height);
    data_.assign(static_cast<std::size_t>(width_) * height_ * 3, 255);
}

IndexedLabelImage rgb_to_indexed(const RgbImage& rgb, SchemaPtr schema,
                                 const ScanImage* mask, MaskPolicy policy) {
    if (!schema) throw InvalidArgumentError("rgb_to_indexed requires a schema");
    if (mask && (mask->width() != rgb.width() || mask->height() != rgb.height()))
        throw DimensionMismatchError(
            "mask " + std::to_string(mask->width()) + "x" +
            std::to_string(mask->height()) + " does not match annotation " +
            std::to_string(rgb.width()) + "x" + std::to_string(rgb.height()));

    // Tiny palette: a 256^3 lookup table would be wasteful, linear probe of
    // <= 4 entries with a one-entry memo is faster in practice.
    IndexedLabelImage out(rgb.width(), rgb.height(), schema);
    Rgb last_color = schema->class_at(0).color;
    std::uint8_t last_index = 0;

    for (int y = 0; y < rgb.height(); ++y) {
        auto row = out.row(y);
        for (int x = 0; x < rgb.width(); ++x) {
            Rgb c = rgb.at(x, y);
            std::uint8_t index;
            if (c == last_color) {
                index = last_index;
            } else {
                auto found = schema->index_of_color(c);
                if (!found)
                    throw UnknownColorError(
                        "color " + to_string(c) + " at pixel (" + std::to_string(x) +
                        "," + std::to_string(y) + ") is not in the '" +
                        std::string(schema->task_name()) + "' palette");
                index = static_cast<std::uint8_t>(*found);
                last_color = c;
                last_index = index;
            }
            if (policy == MaskPolicy::ignore_on_black && mask &&
                index != LabelSchema::kBackgroundIndex && mask->at(x, y) == 0)
                index = LabelSchema::kBackgroundIndex;
            row[x] = index;
        }
    }
    return out;
}

} // namespace pageseg
