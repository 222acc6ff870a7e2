#ifndef PAGESEG_GT_POST_HPP
#define PAGESEG_GT_POST_HPP

#include "pageseg/image.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pageseg {

/// Line-height metadata for one annotated block, supplied by an external
/// OCR engine via the sidecar file. The bounding box is half-open
/// (x1, y1 exclusive).
struct BlockStats {
    int block_id = 0;
    double line_height_px = 0.0;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// Sidecar of block stats keyed by page id. Plain-text records:
///   block <page_id> <block_id> <line_height_px> <x0> <y0> <x1> <y1>
std::map<std::string, std::vector<BlockStats>> load_block_stats(
    const std::filesystem::path& path);
void save_block_stats(const std::map<std::string, std::vector<BlockStats>>& stats,
                      const std::filesystem::path& path);

/// 8-connected component labeling of a class mask. label is -1 outside the
/// mask, otherwise a component id in [0, count).
struct ComponentMap {
    int count = 0;
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> label;
};

ComponentMap connected_components(const IndexedLabelImage& img,
                                  std::size_t class_idx);

/// Morphological closing (dilate then erode, square structuring element of
/// side 2*radius+1) of a region class, turning sparse manual strokes into
/// solid shapes. A closing that would merge two pre-existing components is
/// undone for that merged group unless every pair of involved blocks has a
/// line-height ratio <= height_ratio_limit; blocks without stats never
/// auto-merge. Closing fills BACKGROUND pixels only; labels of the class
/// itself are never removed and other classes are never overwritten.
IndexedLabelImage close_blocks(const IndexedLabelImage& img, std::size_t class_idx,
                               int radius, const std::vector<BlockStats>& stats,
                               double height_ratio_limit);

/// Bridges broken separator lines: a pair of components whose nearest
/// endpoints are at most max_gap apart and whose principal directions
/// differ by at most angle_tol_deg gets connected with a 1-px segment of
/// the same class. Only BACKGROUND pixels are written.
IndexedLabelImage reconnect_separators(const IndexedLabelImage& img,
                                       std::size_t class_idx, double max_gap,
                                       double angle_tol_deg);

bool is_region_class(const LabelSchema& schema, std::size_t class_idx);
bool is_separator_class(const LabelSchema& schema, std::size_t class_idx);

} // namespace pageseg

#endif
