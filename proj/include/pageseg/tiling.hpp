#ifndef PAGESEG_TILING_HPP
#define PAGESEG_TILING_HPP

#include "pageseg/image.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pageseg {

/// h = vertical strips arranged horizontally, v = horizontal strips stacked
/// vertically, hv = 2-D grid. Tiles of a multi-tile axis always overlap.
enum class TilePattern { none, h, v, hv };

std::string_view to_string(TilePattern pattern);
std::optional<TilePattern> parse_pattern(std::string_view text); // "-", "h", "v", "hv"

/// A named tiling configuration: working resolution of the whole page plus
/// the tile layout cut from it.
struct TileConfig {
    std::string name;
    int total_w = 0;
    int total_h = 0;
    TilePattern pattern = TilePattern::none;
    int tiles_x = 1;
    int tiles_y = 1;
    int tile_w = 0;
    int tile_h = 0;

    std::int64_t total_pixels() const {
        return static_cast<std::int64_t>(total_w) * total_h;
    }
    std::int64_t tile_pixels() const {
        return static_cast<std::int64_t>(tile_w) * tile_h;
    }
    int tile_count() const { return tiles_x * tiles_y; }
};

/// Throws on violated config invariants (coverage, pattern/count coherence).
void validate(const TileConfig& config);

/// The nine benchmark configurations, keyed by the shorthand
/// "<total megapixels>/<pattern>": 0.3/-, 0.6/h, 0.9/v, 1.1/h, 1.1/v,
/// 1.1/hv, 1.1/-, 3.0/v, 3.9/hv.
const std::vector<TileConfig>& builtin_configs();
const TileConfig& builtin_config(std::string_view name);

struct TilePlacement {
    int index = 0;
    int x0 = 0;
    int y0 = 0;
};

/// Computed tile origins plus the seam coordinates used at stitch time.
/// Along a tiled axis with n tiles of extent t over total T:
///   origin_i = round(i * (T - t) / (n - 1))
///   seam between tiles i and i+1 = round((origin_i + origin_{i+1} + t) / 2)
/// (round half-up). The seam is the midpoint of the overlap, so stitching
/// gives each side of an overlap to the nearer tile.
struct TileGrid {
    TileConfig config;
    std::vector<TilePlacement> placements; // row-major from top-left
    std::vector<int> seams_x;
    std::vector<int> seams_y;
};

TileGrid compute_grid(const TileConfig& config);

/// Exact crops at the grid placements, row-major order.
std::vector<IndexedLabelImage> split_image(const IndexedLabelImage& img,
                                           const TileGrid& grid);
std::vector<ScanImage> split_image(const ScanImage& img, const TileGrid& grid);

/// Reassembles tile predictions: every output pixel is copied from the
/// unique tile owning its seam cell (pixels strictly before a seam belong
/// to the earlier tile). stitch(split(img)) == img for any valid grid.
IndexedLabelImage stitch_tiles(const std::vector<IndexedLabelImage>& tiles,
                               const TileGrid& grid);

struct Resolution {
    int width = 0;
    int height = 0;
};

/// Largest trainable resolution under a GPU pixel budget: maximizes w*h
/// subject to w and h being multiples of 64, w*h <= max_pixels and
/// |h/w - aspect| <= tolerance. Ties break toward aspect closeness, then
/// the smaller width. Defaults follow the corpus page aspect ratio of 1.45.
Resolution plan_budget(std::int64_t max_pixels, double aspect = 1.45,
                       double tolerance = 0.15);

} // namespace pageseg

#endif
