#include "pageseg/warp.hpp"

#include "pageseg/errors.hpp"
#include "pageseg/rng.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

namespace pageseg {

namespace {

constexpr std::size_t kMaxClasses = 16;

/// Natural cubic spline through strictly increasing integer knots.
/// eval_at_int returns the knot value bit-exactly when x hits a knot.
class NaturalCubicSpline {
public:
    NaturalCubicSpline(const std::vector<int>& xs, const std::vector<double>& ys)
        : xs_(xs), ys_(ys), m_(xs.size(), 0.0) {
        const std::size_t n = xs_.size();
        if (n < 2) throw InvalidArgumentError("spline needs >= 2 knots");
        if (n == 2) return; // linear segment, second derivatives stay 0

        // Thomas algorithm for the natural-boundary tridiagonal system.
        std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = static_cast<double>(xs_[i] - xs_[i - 1]);
            const double h1 = static_cast<double>(xs_[i + 1] - xs_[i]);
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((ys_[i + 1] - ys_[i]) / h1 - (ys_[i] - ys_[i - 1]) / h0);
        }
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double h0 = static_cast<double>(xs_[i] - xs_[i - 1]);
            const double factor = h0 / diag[i - 1];
            diag[i] -= factor * upper[i - 1];
            rhs[i] -= factor * rhs[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
            if (i == 1) break;
        }
    }

    /// Samples the spline at x = 0 .. length-1 into out.
    void sample(int length, std::vector<double>& out) const {
        out.resize(static_cast<std::size_t>(length));
        std::size_t seg = 0;
        for (int x = 0; x < length; ++x) {
            while (seg + 2 < xs_.size() && x >= xs_[seg + 1]) ++seg;
            if (x == xs_[seg]) {
                out[static_cast<std::size_t>(x)] = ys_[seg];
                continue;
            }
            if (x == xs_[seg + 1]) {
                out[static_cast<std::size_t>(x)] = ys_[seg + 1];
                continue;
            }
            const double h = static_cast<double>(xs_[seg + 1] - xs_[seg]);
            const double a = static_cast<double>(xs_[seg + 1] - x);
            const double b = static_cast<double>(x - xs_[seg]);
            out[static_cast<std::size_t>(x)] =
                (m_[seg] * a * a * a + m_[seg + 1] * b * b * b) / (6.0 * h) +
                (ys_[seg] / h - m_[seg] * h / 6.0) * a +
                (ys_[seg + 1] / h - m_[seg + 1] * h / 6.0) * b;
        }
    }

private:
    std::vector<int> xs_;
    std::vector<double> ys_;
    std::vector<double> m_; // second derivatives at knots
};

/// Quantizes to float32 without letting rounding push the value beyond the
/// amplitude bound.
float quantize_to_amplitude(double v, double amplitude) {
    float f = static_cast<float>(v);
    while (std::abs(static_cast<double>(f)) > amplitude)
        f = std::nextafter(f, 0.0f);
    return f;
}

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Bilinear sample of the field at a continuous image point (pixel centers
/// sit at x+0.5, y+0.5); coordinates clamp at the border.
Vec2 sample_field(const WarpField& f, double px, double py) {
    double gx = px - 0.5;
    double gy = py - 0.5;
    if (gx < 0.0) gx = 0.0;
    if (gy < 0.0) gy = 0.0;
    if (gx > f.width - 1.0) gx = f.width - 1.0;
    if (gy > f.height - 1.0) gy = f.height - 1.0;
    int x0 = static_cast<int>(gx);
    int y0 = static_cast<int>(gy);
    if (x0 > f.width - 2) x0 = f.width > 1 ? f.width - 2 : 0;
    if (y0 > f.height - 2) y0 = f.height > 1 ? f.height - 2 : 0;
    const double tx = gx - x0;
    const double ty = gy - y0;
    const int x1 = f.width > 1 ? x0 + 1 : x0;
    const int y1 = f.height > 1 ? y0 + 1 : y0;
    auto at = [&](int x, int y) {
        const std::size_t i = static_cast<std::size_t>(y) * f.width + x;
        return Vec2{static_cast<double>(f.dx[i]), static_cast<double>(f.dy[i])};
    };
    const Vec2 v00 = at(x0, y0), v10 = at(x1, y0), v01 = at(x0, y1), v11 = at(x1, y1);
    return {(v00.x * (1 - tx) + v10.x * tx) * (1 - ty) +
                (v01.x * (1 - tx) + v11.x * tx) * ty,
            (v00.y * (1 - tx) + v10.y * tx) * (1 - ty) +
                (v01.y * (1 - tx) + v11.y * tx) * ty};
}

/// Source point for an output pixel center: three fixed-point iterations of
/// s = q - d(s), then clamp so the unit footprint stays inside the image.
Vec2 inverse_map(const WarpField& f, double qx, double qy) {
    Vec2 s{qx, qy};
    for (int it = 0; it < 3; ++it) {
        const Vec2 d = sample_field(f, s.x, s.y);
        s.x = qx - d.x;
        s.y = qy - d.y;
    }
    if (s.x < 0.5) s.x = 0.5;
    if (s.y < 0.5) s.y = 0.5;
    if (s.x > f.width - 0.5) s.x = f.width - 0.5;
    if (s.y > f.height - 0.5) s.y = f.height - 0.5;
    return s;
}

/// Unit-square footprint centered at a source point: at most four cells
/// with bilinear coverage weights. Cells outside the image carry the fill
/// share instead.
struct Footprint {
    std::array<int, 4> cx{};
    std::array<int, 4> cy{};
    std::array<double, 4> area{};
    int cells = 0;
    double fill_area = 0.0; // uncovered share (outside the image)
};

Footprint unit_footprint(double sx, double sy, int width, int height) {
    Footprint fp;
    const double x_lo = sx - 0.5, y_lo = sy - 0.5;
    const int x0 = static_cast<int>(std::floor(x_lo));
    const int y0 = static_cast<int>(std::floor(y_lo));
    const double fx = x_lo - x0; // coverage split between columns x0, x0+1
    const double fy = y_lo - y0;
    const double wx[2] = {1.0 - fx, fx};
    const double wy[2] = {1.0 - fy, fy};
    double covered = 0.0;
    for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
            const double a = wx[i] * wy[j];
            if (a <= 0.0) continue;
            const int cx = x0 + i;
            const int cy = y0 + j;
            if (cx < 0 || cy < 0 || cx >= width || cy >= height) continue;
            fp.cx[fp.cells] = cx;
            fp.cy[fp.cells] = cy;
            fp.area[fp.cells] = a;
            ++fp.cells;
            covered += a;
        }
    }
    fp.fill_area = 1.0 - covered;
    if (fp.fill_area < 0.0) fp.fill_area = 0.0;
    return fp;
}

std::uint8_t pick_label(const Footprint& fp, const IndexedLabelImage& img,
                        const std::array<double, kMaxClasses>& weight,
                        std::size_t k) {
    std::array<double, kMaxClasses> area{};
    for (int i = 0; i < fp.cells; ++i)
        area[img.at(fp.cx[i], fp.cy[i])] += fp.area[i];
    area[LabelSchema::kBackgroundIndex] += fp.fill_area;
    std::uint8_t best = 0;
    double best_score = -1.0;
    double best_weight = -1.0;
    for (std::size_t c = 0; c < k; ++c) {
        const double score = area[c] * weight[c];
        if (score > best_score || (score == best_score && weight[c] > best_weight)) {
            best = static_cast<std::uint8_t>(c);
            best_score = score;
            best_weight = weight[c];
        }
    }
    return best;
}

std::uint8_t pick_gray(const Footprint& fp, const ScanImage& img,
                       double fill_value) {
    double sum = fill_value * fp.fill_area;
    for (int i = 0; i < fp.cells; ++i)
        sum += fp.area[i] * img.at(fp.cx[i], fp.cy[i]);
    return static_cast<std::uint8_t>(std::floor(sum + 0.5));
}

void check_field(const WarpField& field, int width, int height) {
    if (field.width != width || field.height != height)
        throw DimensionMismatchError(
            "warp field " + std::to_string(field.width) + "x" +
            std::to_string(field.height) + " does not match image " +
            std::to_string(width) + "x" + std::to_string(height));
}

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t read_u64(const unsigned char* p) {
    return static_cast<std::uint64_t>(read_u32(p)) |
           (static_cast<std::uint64_t>(read_u32(p + 4)) << 32);
}

constexpr char kFieldMagic[8] = {'P', 'S', 'E', 'G', 'W', 'F', '0', '1'};

} // namespace

std::vector<int> warp_knot_positions(int length, int knots) {
    std::vector<int> xs(static_cast<std::size_t>(knots));
    for (int j = 0; j < knots; ++j)
        xs[static_cast<std::size_t>(j)] = static_cast<int>(std::llround(
            static_cast<double>(j) * (length - 1) / (knots - 1)));
    return xs;
}

WarpField make_warp_field(int width, int height, int grid_cols, int grid_rows,
                          double amplitude, std::uint64_t seed) {
    if (grid_cols < 2 || grid_rows < 2)
        throw DegenerateGridError("control grid must be at least 2x2, got " +
                                  std::to_string(grid_cols) + "x" +
                                  std::to_string(grid_rows));
    if (width < grid_cols || height < grid_rows)
        throw DegenerateGridError("control grid " + std::to_string(grid_cols) + "x" +
                                  std::to_string(grid_rows) +
                                  " has coincident points on a " +
                                  std::to_string(width) + "x" +
                                  std::to_string(height) + " image");
    if (amplitude < 0.0)
        throw InvalidArgumentError("amplitude must be >= 0");

    WarpField field;
    field.width = width;
    field.height = height;
    field.grid_cols = grid_cols;
    field.grid_rows = grid_rows;
    field.amplitude = amplitude;
    field.seed = seed;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    field.dx.resize(n);
    field.dy.resize(n);

    // Control offsets, quantized to the float32 the field stores.
    SplitMix64 rng(seed);
    const std::size_t cells = static_cast<std::size_t>(grid_cols) * grid_rows;
    std::vector<double> off_x(cells), off_y(cells);
    for (std::size_t i = 0; i < cells; ++i) {
        off_x[i] = quantize_to_amplitude(rng.next_symmetric(amplitude), amplitude);
        off_y[i] = quantize_to_amplitude(rng.next_symmetric(amplitude), amplitude);
    }

    const std::vector<int> knots_x = warp_knot_positions(width, grid_cols);
    const std::vector<int> knots_y = warp_knot_positions(height, grid_rows);

    auto interpolate = [&](const std::vector<double>& offsets, std::vector<float>& dst) {
        // Pass 1: spline along x for each control row.
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(grid_rows));
        std::vector<double> knot_vals(static_cast<std::size_t>(grid_cols));
        for (int r = 0; r < grid_rows; ++r) {
            for (int c = 0; c < grid_cols; ++c)
                knot_vals[static_cast<std::size_t>(c)] =
                    offsets[static_cast<std::size_t>(r) * grid_cols + c];
            NaturalCubicSpline s(knots_x, knot_vals);
            s.sample(width, rows[static_cast<std::size_t>(r)]);
        }
        // Pass 2: spline along y per column.
        std::vector<double> col_vals(static_cast<std::size_t>(grid_rows));
        std::vector<double> column;
        for (int x = 0; x < width; ++x) {
            for (int r = 0; r < grid_rows; ++r)
                col_vals[static_cast<std::size_t>(r)] =
                    rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(x)];
            NaturalCubicSpline s(knots_y, col_vals);
            s.sample(height, column);
            for (int y = 0; y < height; ++y) {
                double v = column[static_cast<std::size_t>(y)];
                if (v > amplitude) v = amplitude;
                if (v < -amplitude) v = -amplitude;
                dst[static_cast<std::size_t>(y) * width + x] =
                    quantize_to_amplitude(v, amplitude);
            }
        }
    };
    interpolate(off_x, field.dx);
    interpolate(off_y, field.dy);
    return field;
}

IndexedLabelImage apply_warp_labels(const IndexedLabelImage& img,
                                    const WarpField& field) {
    check_field(field, img.width(), img.height());
    const LabelSchema& schema = img.schema();
    const std::size_t k = schema.class_count();
    if (k > kMaxClasses)
        throw InvalidArgumentError("schema exceeds supported class count");
    std::array<double, kMaxClasses> weight{};
    for (std::size_t c = 0; c < k; ++c) weight[c] = schema.class_at(c).scale_weight;

    IndexedLabelImage out(img.width(), img.height(), img.schema_ptr());
    for (int y = 0; y < img.height(); ++y) {
        auto out_row = out.row(y);
        for (int x = 0; x < img.width(); ++x) {
            const Vec2 s = inverse_map(field, x + 0.5, y + 0.5);
            const Footprint fp = unit_footprint(s.x, s.y, img.width(), img.height());
            out_row[x] = pick_label(fp, img, weight, k);
        }
    }
    return out;
}

ScanImage apply_warp_gray(const ScanImage& img, const WarpField& field) {
    check_field(field, img.width(), img.height());
    ScanImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Vec2 s = inverse_map(field, x + 0.5, y + 0.5);
            const Footprint fp = unit_footprint(s.x, s.y, img.width(), img.height());
            out.set(x, y, pick_gray(fp, img, 255.0));
        }
    }
    return out;
}

void save_warp_field(const WarpField& field, const std::filesystem::path& path) {
    std::string blob;
    blob.reserve(40 + field.dx.size() * 8);
    blob.append(kFieldMagic, sizeof kFieldMagic);
    append_u32(blob, static_cast<std::uint32_t>(field.width));
    append_u32(blob, static_cast<std::uint32_t>(field.height));
    append_u32(blob, static_cast<std::uint32_t>(field.grid_cols));
    append_u32(blob, static_cast<std::uint32_t>(field.grid_rows));
    std::uint64_t amp_bits;
    static_assert(sizeof amp_bits == sizeof field.amplitude);
    std::memcpy(&amp_bits, &field.amplitude, sizeof amp_bits);
    append_u64(blob, amp_bits);
    append_u64(blob, field.seed);
    for (std::size_t i = 0; i < field.dx.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &field.dx[i], 4);
        append_u32(blob, bits);
        std::memcpy(&bits, &field.dy[i], 4);
        append_u32(blob, bits);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write warp field " + path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("failed writing warp field " + path.string());
}

WarpField load_warp_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open warp field " + path.string());
    std::string blob((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    if (blob.size() < 40 || std::memcmp(blob.data(), kFieldMagic, 8) != 0)
        throw CorruptFileError(path.string() + " is not a warp field file");
    const unsigned char* p = reinterpret_cast<const unsigned char*>(blob.data()) + 8;
    WarpField field;
    field.width = static_cast<int>(read_u32(p));
    field.height = static_cast<int>(read_u32(p + 4));
    field.grid_cols = static_cast<int>(read_u32(p + 8));
    field.grid_rows = static_cast<int>(read_u32(p + 12));
    const std::uint64_t amp_bits = read_u64(p + 16);
    std::memcpy(&field.amplitude, &amp_bits, sizeof field.amplitude);
    field.seed = read_u64(p + 24);
    if (field.width < 1 || field.height < 1)
        throw CorruptFileError(path.string() + ": bad dimensions");
    const std::size_t n = static_cast<std::size_t>(field.width) * field.height;
    if (blob.size() != 40 + n * 8)
        throw CorruptFileError(path.string() + ": truncated displacement data");
    field.dx.resize(n);
    field.dy.resize(n);
    const unsigned char* q = p + 32;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = read_u32(q);
        std::memcpy(&field.dx[i], &bits, 4);
        bits = read_u32(q + 4);
        std::memcpy(&field.dy[i], &bits, 4);
        q += 8;
    }
    return field;
}

AugmentParams draw_augment_params(const AugmentSpec& spec) {
    if (spec.max_rotation_deg < 0.0)
        throw InvalidArgumentError("max_rotation_deg must be >= 0");
    if (spec.contrast_probability < 0.0 || spec.contrast_probability > 1.0)
        throw InvalidArgumentError("contrast_probability must be in [0, 1]");
    SplitMix64 rng(spec.seed);
    AugmentParams params;
    params.rotation_deg = rng.next_symmetric(spec.max_rotation_deg);
    params.apply_contrast = rng.next_unit() < spec.contrast_probability;
    return params;
}

namespace {

struct RotationMap {
    double cos_t, sin_t, cx, cy;

    Vec2 source_of(double qx, double qy) const {
        const double rx = qx - cx;
        const double ry = qy - cy;
        // inverse rotation (by -angle)
        return {cx + cos_t * rx + sin_t * ry, cy - sin_t * rx + cos_t * ry};
    }
};

RotationMap rotation_map(double angle_deg, int width, int height) {
    const double rad = angle_deg * std::numbers::pi / 180.0;
    return {std::cos(rad), std::sin(rad), width / 2.0, height / 2.0};
}

} // namespace

ScanImage rotate_gray(const ScanImage& img, double angle_deg) {
    if (angle_deg == 0.0) return img;
    const RotationMap map = rotation_map(angle_deg, img.width(), img.height());
    ScanImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Vec2 s = map.source_of(x + 0.5, y + 0.5);
            const Footprint fp = unit_footprint(s.x, s.y, img.width(), img.height());
            out.set(x, y, pick_gray(fp, img, 255.0));
        }
    }
    return out;
}

IndexedLabelImage rotate_labels(const IndexedLabelImage& img, double angle_deg) {
    if (angle_deg == 0.0) return img;
    const LabelSchema& schema = img.schema();
    const std::size_t k = schema.class_count();
    if (k > kMaxClasses)
        throw InvalidArgumentError("schema exceeds supported class count");
    std::array<double, kMaxClasses> weight{};
    for (std::size_t c = 0; c < k; ++c) weight[c] = schema.class_at(c).scale_weight;

    const RotationMap map = rotation_map(angle_deg, img.width(), img.height());
    IndexedLabelImage out(img.width(), img.height(), img.schema_ptr());
    for (int y = 0; y < img.height(); ++y) {
        auto out_row = out.row(y);
        for (int x = 0; x < img.width(); ++x) {
            const Vec2 s = map.source_of(x + 0.5, y + 0.5);
            const Footprint fp = unit_footprint(s.x, s.y, img.width(), img.height());
            out_row[x] = pick_label(fp, img, weight, k);
        }
    }
    return out;
}

ScanImage contrast_stretch(const ScanImage& img) {
    std::uint8_t lo = 255, hi = 0;
    for (std::uint8_t v : img.pixels()) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
    }
    if (lo >= hi) return img;
    ScanImage out(img.width(), img.height());
    const double scale = 255.0 / (hi - lo);
    auto dst = out.pixels();
    auto src = img.pixels();
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = static_cast<std::uint8_t>(std::floor((src[i] - lo) * scale + 0.5));
    return out;
}

ScanImage augment_photometric(const ScanImage& img, const AugmentSpec& spec) {
    const AugmentParams params = draw_augment_params(spec);
    ScanImage out = rotate_gray(img, params.rotation_deg);
    if (params.apply_contrast) out = contrast_stretch(out);
    return out;
}

} // namespace pageseg
