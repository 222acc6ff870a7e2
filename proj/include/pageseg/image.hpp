#ifndef PAGESEG_IMAGE_HPP
#define PAGESEG_IMAGE_HPP

#include "pageseg/schema.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace pageseg {

/// Row-major grid of class indices bound to a LabelSchema. The universal
/// currency of the pipeline. Immutable by convention once built by an
/// operation; mutation is only used while constructing a result.
class IndexedLabelImage {
public:
    IndexedLabelImage(int width, int height, SchemaPtr schema,
                      std::uint8_t fill = 0);

    int width() const { return width_; }
    int height() const { return height_; }
    const LabelSchema& schema() const { return *schema_; }
    const SchemaPtr& schema_ptr() const { return schema_; }

    std::uint8_t at(int x, int y) const {
        return labels_[static_cast<std::size_t>(y) * width_ + x];
    }
    /// Bounds- and range-checked write; throws on an index outside the schema.
    void set(int x, int y, std::uint8_t value);

    std::span<const std::uint8_t> labels() const { return labels_; }
    std::span<std::uint8_t> labels() { return labels_; }
    std::span<const std::uint8_t> row(int y) const {
        return {labels_.data() + static_cast<std::size_t>(y) * width_,
                static_cast<std::size_t>(width_)};
    }
    std::span<std::uint8_t> row(int y) {
        return {labels_.data() + static_cast<std::size_t>(y) * width_,
                static_cast<std::size_t>(width_)};
    }

    bool same_dimensions(const IndexedLabelImage& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

private:
    int width_;
    int height_;
    SchemaPtr schema_;
    std::vector<std::uint8_t> labels_;
};

/// 8-bit grayscale scan raster (holds binarizer output; binarization
/// itself happens upstream of this toolkit).
class ScanImage {
public:
    ScanImage(int width, int height, std::uint8_t fill = 255);

    int width() const { return width_; }
    int height() const { return height_; }

    std::uint8_t at(int x, int y) const {
        return pixels_[static_cast<std::size_t>(y) * width_ + x];
    }
    void set(int x, int y, std::uint8_t value) {
        pixels_[static_cast<std::size_t>(y) * width_ + x] = value;
    }

    std::span<const std::uint8_t> pixels() const { return pixels_; }
    std::span<std::uint8_t> pixels() { return pixels_; }

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> pixels_;
};

/// Interleaved 8-bit RGB raster, only used as ingestion input.
class RgbImage {
public:
    RgbImage(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }

    Rgb at(int x, int y) const {
        std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
        return {data_[i], data_[i + 1], data_[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
        data_[i] = c.r;
        data_[i + 1] = c.g;
        data_[i + 2] = c.b;
    }

    std::span<const std::uint8_t> bytes() const { return data_; }
    std::span<std::uint8_t> bytes() { return data_; }

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> data_;
};

enum class MaskPolicy { ignore_on_black, none };

/// Converts an RGB annotation layer to indexed form by exact palette
/// match; any other color raises UnknownColorError naming the offending
/// pixel. With MaskPolicy::ignore_on_black, annotated pixels that lie on
/// black pixels (value 0) of the binarized scan are dropped to BACKGROUND.
IndexedLabelImage rgb_to_indexed(const RgbImage& rgb, SchemaPtr schema,
                                 const ScanImage* mask = nullptr,
                                 MaskPolicy policy = MaskPolicy::ignore_on_black);

} // namespace pageseg

#endif
