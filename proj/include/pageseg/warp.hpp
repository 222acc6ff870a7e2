#ifndef PAGESEG_WARP_HPP
#define PAGESEG_WARP_HPP

#include "pageseg/image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pageseg {

/// Dense per-pixel displacement map interpolated from a pseudorandom
/// control-point grid with separable natural cubic splines. The same field
/// is applied to a scan and its label image so the pair stays in
/// per-pixel correspondence.
struct WarpField {
    int width = 0;
    int height = 0;
    int grid_cols = 0;
    int grid_rows = 0;
    double amplitude = 0.0;
    std::uint64_t seed = 0;
    std::vector<float> dx; // row-major, width*height
    std::vector<float> dy;
};

/// Builds a warp field. Control offsets are drawn uniformly from
/// [-amplitude, +amplitude) per axis with a seeded generator; the dense
/// field interpolates them exactly at the control points and is clamped to
/// the amplitude everywhere. Deterministic per (w, h, grid, amplitude, seed).
///
/// Throws DegenerateGridError for grids smaller than 2x2 or larger than the
/// image (coincident control points).
WarpField make_warp_field(int width, int height, int grid_cols, int grid_rows,
                          double amplitude, std::uint64_t seed);

/// Pixel coordinates of the control points (shared by both axes' splines).
std::vector<int> warp_knot_positions(int length, int knots);

/// Resamples labels through the inverse displacement with the
/// label-weighted area rule. Output dimensions equal input dimensions.
IndexedLabelImage apply_warp_labels(const IndexedLabelImage& img,
                                    const WarpField& field);

/// Scan counterpart with area-mean resampling.
ScanImage apply_warp_gray(const ScanImage& img, const WarpField& field);

/// Binary sidecar (magic header, dims, seed, raw little-endian float32
/// pairs) so a scan and its label image can be warped in separate runs.
void save_warp_field(const WarpField& field, const std::filesystem::path& path);
WarpField load_warp_field(const std::filesystem::path& path);

struct AugmentSpec {
    double max_rotation_deg = 10.0;
    double contrast_probability = 0.9;
    std::uint64_t seed = 0;
};

struct AugmentParams {
    double rotation_deg = 0.0;
    bool apply_contrast = false;
};

/// The seeded draws behind augment_photometric, exposed so a label image
/// can be rotated consistently with its scan.
AugmentParams draw_augment_params(const AugmentSpec& spec);

/// Rotation about the image center with area resampling; uncovered border
/// regions read as white. angle 0 is the identity.
ScanImage rotate_gray(const ScanImage& img, double angle_deg);

/// Label rotation with the weighted-area rule; borders become BACKGROUND.
IndexedLabelImage rotate_labels(const IndexedLabelImage& img, double angle_deg);

/// Linear stretch to the full 0..255 range; constant images pass through.
ScanImage contrast_stretch(const ScanImage& img);

/// Training-time photometric augmentation: rotation by a seeded uniform
/// angle in [-max_rotation_deg, +max_rotation_deg) always applied, contrast
/// stretch applied with the configured probability. Never touches label
/// images.
ScanImage augment_photometric(const ScanImage& img, const AugmentSpec& spec);

} // namespace pageseg

#endif
