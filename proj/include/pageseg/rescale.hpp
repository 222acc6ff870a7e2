#ifndef PAGESEG_RESCALE_HPP
#define PAGESEG_RESCALE_HPP

#include "pageseg/image.hpp"

namespace pageseg {

/// Downscales a label image with the label-weighted area filter.
///
/// Each destination pixel covers a real-valued source rectangle. Per class,
/// the covered area times the class scale weight is summed; the class with
/// the highest sum wins. Ties break toward the higher weight, then the
/// lower class index. Interpolating filters would destroy index values and
/// unweighted voting would erase thin separator lines, which is why
/// separator classes carry weights > 1.
///
/// Throws UpscaleRequestedError if a target dimension exceeds the source.
IndexedLabelImage downscale_labels(const IndexedLabelImage& img, int target_w,
                                   int target_h);

/// Plain area filter for scans: each destination pixel is the area-weighted
/// mean of the covered source pixels, rounded half-up.
ScanImage downscale_gray(const ScanImage& img, int target_w, int target_h);

} // namespace pageseg

#endif
