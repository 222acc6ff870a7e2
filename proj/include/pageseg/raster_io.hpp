#ifndef PAGESEG_RASTER_IO_HPP
#define PAGESEG_RASTER_IO_HPP

#include "pageseg/image.hpp"

#include <filesystem>

namespace pageseg {

/// Loads an indexed-palette PNG whose palette maps into the schema palette.
/// Palette entries actually referenced by pixels must be schema colors
/// (UnknownColorError otherwise); unused padding entries are tolerated
/// because common editors fill palettes up to 256 slots.
IndexedLabelImage load_indexed(const std::filesystem::path& path, SchemaPtr schema);

/// Writes an 8-bit palette PNG with the schema palette in class order.
/// Encoding is deterministic: two saves of the same image are byte-identical.
void save_indexed(const IndexedLabelImage& img, const std::filesystem::path& path);

/// 8-bit grayscale PNG pair for scans.
ScanImage load_gray(const std::filesystem::path& path);
void save_gray(const ScanImage& img, const std::filesystem::path& path);

/// Reads any PNG as RGB (palette/gray expanded, alpha stripped); used by
/// annotation ingestion.
RgbImage load_rgb(const std::filesystem::path& path);
void save_rgb(const RgbImage& img, const std::filesystem::path& path);

} // namespace pageseg

#endif
