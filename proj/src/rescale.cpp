#include "pageseg/rescale.hpp"

#include "pageseg/errors.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace pageseg {

namespace {

constexpr std::size_t kMaxClasses = 16;

void check_target(int src_w, int src_h, int dst_w, int dst_h) {
    if (dst_w < 1 || dst_h < 1)
        throw InvalidArgumentError("target dimensions must be >= 1");
    if (dst_w > src_w || dst_h > src_h)
        throw UpscaleRequestedError(
            "target " + std::to_string(dst_w) + "x" + std::to_string(dst_h) +
            " exceeds source " + std::to_string(src_w) + "x" +
            std::to_string(src_h) + " (this filter only downscales)");
}

// Coverage of source cells by one destination index along one axis.
// Cell boundaries are the exact rationals d*src/dst evaluated in double.
struct AxisSpans {
    std::vector<std::size_t> offset; // per destination index, into cells/coverage
    std::vector<int> cell;
    std::vector<double> coverage;
};

AxisSpans make_spans(int src, int dst) {
    AxisSpans spans;
    spans.offset.reserve(static_cast<std::size_t>(dst) + 1);
    spans.offset.push_back(0);
    for (int d = 0; d < dst; ++d) {
        const double lo =
            static_cast<double>(static_cast<std::int64_t>(d) * src) / dst;
        const double hi =
            static_cast<double>((static_cast<std::int64_t>(d) + 1) * src) / dst;
        int c0 = static_cast<int>(std::floor(lo));
        int c1 = static_cast<int>(std::ceil(hi));
        if (c1 > src) c1 = src;
        for (int c = c0; c < c1; ++c) {
            const double cover =
                std::min(hi, static_cast<double>(c) + 1.0) - std::max(lo, static_cast<double>(c));
            if (cover > 0.0) {
                spans.cell.push_back(c);
                spans.coverage.push_back(cover);
            }
        }
        spans.offset.push_back(spans.cell.size());
    }
    return spans;
}

} // namespace

IndexedLabelImage downscale_labels(const IndexedLabelImage& img, int target_w,
                                   int target_h) {
    check_target(img.width(), img.height(), target_w, target_h);
    if (target_w == img.width() && target_h == img.height()) return img;

    const LabelSchema& schema = img.schema();
    const std::size_t k = schema.class_count();
    if (k > kMaxClasses)
        throw InvalidArgumentError("schema exceeds supported class count");

    std::array<double, kMaxClasses> weight{};
    for (std::size_t c = 0; c < k; ++c) weight[c] = schema.class_at(c).scale_weight;

    const AxisSpans xs = make_spans(img.width(), target_w);
    const AxisSpans ys = make_spans(img.height(), target_h);

    IndexedLabelImage out(target_w, target_h, img.schema_ptr());
    std::array<double, kMaxClasses> area{};

    for (int dy = 0; dy < target_h; ++dy) {
        auto out_row = out.row(dy);
        for (int dx = 0; dx < target_w; ++dx) {
            area.fill(0.0);
            for (std::size_t yi = ys.offset[dy]; yi < ys.offset[dy + 1]; ++yi) {
                const double wy = ys.coverage[yi];
                auto src_row = img.row(ys.cell[yi]);
                for (std::size_t xi = xs.offset[dx]; xi < xs.offset[dx + 1]; ++xi)
                    area[src_row[static_cast<std::size_t>(xs.cell[xi])]] +=
                        wy * xs.coverage[xi];
            }
            std::uint8_t best = 0;
            double best_score = -1.0;
            double best_weight = -1.0;
            for (std::size_t c = 0; c < k; ++c) {
                const double score = area[c] * weight[c];
                if (score > best_score ||
                    (score == best_score && weight[c] > best_weight)) {
                    best = static_cast<std::uint8_t>(c);
                    best_score = score;
                    best_weight = weight[c];
                }
            }
            out_row[dx] = best;
        }
    }
    return out;
}

ScanImage downscale_gray(const ScanImage& img, int target_w, int target_h) {
    check_target(img.width(), img.height(), target_w, target_h);
    if (target_w == img.width() && target_h == img.height()) return img;

    const AxisSpans xs = make_spans(img.width(), target_w);
    const AxisSpans ys = make_spans(img.height(), target_h);

    ScanImage out(target_w, target_h);
    for (int dy = 0; dy < target_h; ++dy) {
        for (int dx = 0; dx < target_w; ++dx) {
            double sum = 0.0;
            double total = 0.0;
            for (std::size_t yi = ys.offset[dy]; yi < ys.offset[dy + 1]; ++yi) {
                const double wy = ys.coverage[yi];
                const int sy = ys.cell[yi];
                for (std::size_t xi = xs.offset[dx]; xi < xs.offset[dx + 1]; ++xi) {
                    const double a = wy * xs.coverage[xi];
                    sum += a * img.at(xs.cell[xi], sy);
                    total += a;
                }
            }
            out.set(dx, dy,
                    static_cast<std::uint8_t>(std::floor(sum / total + 0.5)));
        }
    }
    return out;
}

} // namespace pageseg
