#include "pageseg/gt_post.hpp"

#include "pageseg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace pageseg {

namespace {

std::vector<std::uint8_t> class_mask(const IndexedLabelImage& img,
                                     std::size_t class_idx) {
    auto labels = img.labels();
    std::vector<std::uint8_t> mask(labels.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
        mask[i] = labels[i] == class_idx ? 1 : 0;
    return mask;
}

ComponentMap label_components(const std::vector<std::uint8_t>& mask, int w, int h) {
    ComponentMap cm;
    cm.width = w;
    cm.height = h;
    cm.label.assign(mask.size(), -1);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || cm.label[start] >= 0) continue;
        const std::int32_t id = cm.count++;
        cm.label[start] = id;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            const int x = static_cast<int>(i % static_cast<std::size_t>(w));
            const int y = static_cast<int>(i / static_cast<std::size_t>(w));
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t j =
                        static_cast<std::size_t>(ny) * w + nx;
                    if (mask[j] && cm.label[j] < 0) {
                        cm.label[j] = id;
                        stack.push_back(j);
                    }
                }
            }
        }
    }
    return cm;
}

// Separable binary dilation/erosion with a square window via prefix sums.
std::vector<std::uint8_t> window_pass(const std::vector<std::uint8_t>& in, int w,
                                      int h, int radius, bool require_all) {
    std::vector<std::uint8_t> mid(in.size()), out(in.size());
    std::vector<int> prefix;
    // horizontal
    prefix.assign(static_cast<std::size_t>(w) + 1, 0);
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* row = in.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + row[x];
        std::uint8_t* dst = mid.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            const int lo = std::max(0, x - radius);
            const int hi = std::min(w, x + radius + 1);
            const int ones = prefix[hi] - prefix[lo];
            dst[x] = require_all ? (ones == hi - lo) : (ones > 0);
        }
    }
    // vertical
    prefix.assign(static_cast<std::size_t>(h) + 1, 0);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y)
            prefix[y + 1] = prefix[y] + mid[static_cast<std::size_t>(y) * w + x];
        for (int y = 0; y < h; ++y) {
            const int lo = std::max(0, y - radius);
            const int hi = std::min(h, y + radius + 1);
            const int ones = prefix[hi] - prefix[lo];
            out[static_cast<std::size_t>(y) * w + x] =
                require_all ? (ones == hi - lo) : (ones > 0);
        }
    }
    return out;
}

std::vector<std::uint8_t> morphological_close(const std::vector<std::uint8_t>& mask,
                                              int w, int h, int radius) {
    const auto dilated = window_pass(mask, w, h, radius, false);
    return window_pass(dilated, w, h, radius, true);
}

struct Box {
    int x0 = INT32_MAX, y0 = INT32_MAX, x1 = INT32_MIN, y1 = INT32_MIN;

    void extend(int x, int y) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x + 1);
        y1 = std::max(y1, y + 1);
    }
};

std::int64_t box_intersection(const Box& b, const BlockStats& s) {
    const std::int64_t w = std::min(b.x1, s.x1) - std::max(b.x0, s.x0);
    const std::int64_t h = std::min(b.y1, s.y1) - std::max(b.y0, s.y0);
    return (w > 0 && h > 0) ? w * h : 0;
}

} // namespace

bool is_region_class(const LabelSchema& schema, std::size_t class_idx) {
    if (class_idx >= schema.class_count()) return false;
    const std::string& name = schema.class_at(class_idx).name;
    return name == "TXT" || name == "TAB" || name == "ILLUSTRATION";
}

bool is_separator_class(const LabelSchema& schema, std::size_t class_idx) {
    if (class_idx >= schema.class_count()) return false;
    const std::string& name = schema.class_at(class_idx).name;
    return name == "H" || name == "V" || name == "T";
}

ComponentMap connected_components(const IndexedLabelImage& img,
                                  std::size_t class_idx) {
    return label_components(class_mask(img, class_idx), img.width(), img.height());
}

std::map<std::string, std::vector<BlockStats>> load_block_stats(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open block stats " + path.string());
    std::map<std::string, std::vector<BlockStats>> result;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string kind, page;
        BlockStats s;
        if (!(fields >> kind >> page >> s.block_id >> s.line_height_px >> s.x0 >>
              s.y0 >> s.x1 >> s.y1) ||
            kind != "block")
            throw CorruptFileError(path.string() + ":" + std::to_string(line_no) +
                                   ": expected 'block <page> <id> <line_height> "
                                   "<x0> <y0> <x1> <y1>'");
        if (s.line_height_px <= 0.0)
            throw CorruptFileError(path.string() + ":" + std::to_string(line_no) +
                                   ": line height must be > 0");
        result[page].push_back(s);
    }
    return result;
}

void save_block_stats(const std::map<std::string, std::vector<BlockStats>>& stats,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write block stats " + path.string());
    out << "# pageseg block stats v1\n";
    for (const auto& [page, blocks] : stats)
        for (const BlockStats& s : blocks)
            out << "block " << page << " " << s.block_id << " " << s.line_height_px
                << " " << s.x0 << " " << s.y0 << " " << s.x1 << " " << s.y1 << "\n";
    if (!out) throw IoError("failed writing block stats " + path.string());
}

IndexedLabelImage close_blocks(const IndexedLabelImage& img, std::size_t class_idx,
                               int radius, const std::vector<BlockStats>& stats,
                               double height_ratio_limit) {
    if (!is_region_class(img.schema(), class_idx))
        throw NotARegionClassError("class index " + std::to_string(class_idx) +
                                   " is not a region class of task '" +
                                   std::string(img.schema().task_name()) + "'");
    if (radius < 1) throw InvalidArgumentError("radius must be >= 1");
    if (height_ratio_limit < 1.0)
        throw InvalidArgumentError("height_ratio_limit must be >= 1");

    const int w = img.width();
    const int h = img.height();
    const auto mask = class_mask(img, class_idx);
    const ComponentMap before = label_components(mask, w, h);
    const auto closed = morphological_close(mask, w, h, radius);
    const ComponentMap after = label_components(closed, w, h);

    // Original components inside each closed component, plus their boxes.
    std::vector<std::set<std::int32_t>> members(
        static_cast<std::size_t>(after.count));
    std::vector<Box> boxes(static_cast<std::size_t>(before.count));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (before.label[i] < 0) continue;
            boxes[static_cast<std::size_t>(before.label[i])].extend(x, y);
            members[static_cast<std::size_t>(after.label[i])].insert(
                before.label[i]);
        }
    }

    // Line height per original component: stats entry with the largest
    // bounding-box overlap. Components without stats stay unknown.
    std::vector<double> line_height(static_cast<std::size_t>(before.count), 0.0);
    for (std::int32_t c = 0; c < before.count; ++c) {
        std::int64_t best_overlap = 0;
        for (const BlockStats& s : stats) {
            const std::int64_t overlap =
                box_intersection(boxes[static_cast<std::size_t>(c)], s);
            if (overlap > best_overlap) {
                best_overlap = overlap;
                line_height[static_cast<std::size_t>(c)] = s.line_height_px;
            }
        }
    }

    // A merged group keeps its closing only if every pair of merged blocks
    // has compatible line heights.
    std::vector<bool> keep(static_cast<std::size_t>(after.count), true);
    for (std::int32_t g = 0; g < after.count; ++g) {
        const auto& group = members[static_cast<std::size_t>(g)];
        if (group.size() < 2) continue;
        for (auto a = group.begin(); a != group.end() && keep[g]; ++a) {
            for (auto b = std::next(a); b != group.end(); ++b) {
                const double ha = line_height[static_cast<std::size_t>(*a)];
                const double hb = line_height[static_cast<std::size_t>(*b)];
                if (ha <= 0.0 || hb <= 0.0 ||
                    std::max(ha, hb) / std::min(ha, hb) > height_ratio_limit) {
                    keep[static_cast<std::size_t>(g)] = false;
                    break;
                }
            }
        }
    }

    IndexedLabelImage out = img;
    for (int y = 0; y < h; ++y) {
        auto row = out.row(y);
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (!closed[i] || mask[i]) continue;
            if (!keep[static_cast<std::size_t>(after.label[i])]) continue;
            if (row[x] == LabelSchema::kBackgroundIndex)
                row[x] = static_cast<std::uint8_t>(class_idx);
        }
    }
    return out;
}

namespace {

struct SeparatorComponent {
    std::int32_t id = 0;
    Box box;
    // endpoints: extreme pixels along the principal direction
    int ax = 0, ay = 0, bx = 0, by = 0;
    double angle_deg = 0.0; // axial, in [0, 180)
    bool has_direction = false;
};

double axial_difference(double a, double b) {
    double d = std::fmod(std::abs(a - b), 180.0);
    return std::min(d, 180.0 - d);
}

} // namespace

IndexedLabelImage reconnect_separators(const IndexedLabelImage& img,
                                       std::size_t class_idx, double max_gap,
                                       double angle_tol_deg) {
    if (!is_separator_class(img.schema(), class_idx))
        throw NotASeparatorClassError("class index " + std::to_string(class_idx) +
                                      " is not a separator class of task '" +
                                      std::string(img.schema().task_name()) + "'");
    if (max_gap < 0.0) throw InvalidArgumentError("max_gap must be >= 0");

    const int w = img.width();
    const int h = img.height();
    const ComponentMap comps = connected_components(img, class_idx);
    if (comps.count < 2) return img;

    // First and second moments per component.
    std::vector<double> sx(comps.count, 0), sy(comps.count, 0), sxx(comps.count, 0),
        syy(comps.count, 0), sxy(comps.count, 0);
    std::vector<std::int64_t> n(comps.count, 0);
    std::vector<SeparatorComponent> parts(static_cast<std::size_t>(comps.count));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::int32_t c =
                comps.label[static_cast<std::size_t>(y) * w + x];
            if (c < 0) continue;
            sx[c] += x;
            sy[c] += y;
            sxx[c] += static_cast<double>(x) * x;
            syy[c] += static_cast<double>(y) * y;
            sxy[c] += static_cast<double>(x) * y;
            ++n[c];
            parts[static_cast<std::size_t>(c)].box.extend(x, y);
        }
    }
    for (std::int32_t c = 0; c < comps.count; ++c) {
        parts[static_cast<std::size_t>(c)].id = c;
        if (n[c] < 2) continue;
        const double inv = 1.0 / static_cast<double>(n[c]);
        const double mx = sx[c] * inv;
        const double my = sy[c] * inv;
        const double cxx = sxx[c] * inv - mx * mx;
        const double cyy = syy[c] * inv - my * my;
        const double cxy = sxy[c] * inv - mx * my;
        if (cxx == 0.0 && cyy == 0.0 && cxy == 0.0) continue;
        double angle = 0.5 * std::atan2(2.0 * cxy, cxx - cyy) * 180.0 /
                       std::numbers::pi;
        if (angle < 0.0) angle += 180.0;
        parts[static_cast<std::size_t>(c)].angle_deg = angle;
        parts[static_cast<std::size_t>(c)].has_direction = true;
    }

    // Endpoints: extreme projections onto the principal axis (or onto the
    // longer bbox axis for direction-less blobs).
    std::vector<double> min_proj(comps.count, 1e300), max_proj(comps.count, -1e300);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::int32_t c =
                comps.label[static_cast<std::size_t>(y) * w + x];
            if (c < 0) continue;
            SeparatorComponent& part = parts[static_cast<std::size_t>(c)];
            const double rad = part.angle_deg * std::numbers::pi / 180.0;
            const double proj = x * std::cos(rad) + y * std::sin(rad);
            if (proj < min_proj[c]) {
                min_proj[c] = proj;
                part.ax = x;
                part.ay = y;
            }
            if (proj > max_proj[c]) {
                max_proj[c] = proj;
                part.bx = x;
                part.by = y;
            }
        }
    }

    IndexedLabelImage out = img;
    auto draw_segment = [&](int x0, int y0, int x1, int y1) {
        // Bresenham; endpoints themselves are existing class pixels.
        int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        int stepx = x0 < x1 ? 1 : -1, stepy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        int x = x0, y = y0;
        while (!(x == x1 && y == y1)) {
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x += stepx;
            }
            if (e2 <= dx) {
                err += dx;
                y += stepy;
            }
            if (out.at(x, y) == LabelSchema::kBackgroundIndex)
                out.set(x, y, static_cast<std::uint8_t>(class_idx));
        }
    };

    for (std::int32_t a = 0; a < comps.count; ++a) {
        for (std::int32_t b = a + 1; b < comps.count; ++b) {
            const SeparatorComponent& pa = parts[static_cast<std::size_t>(a)];
            const SeparatorComponent& pb = parts[static_cast<std::size_t>(b)];
            // cheap reject on bounding-box distance
            const double gx = std::max(
                {0, pb.box.x0 - pa.box.x1 + 1, pa.box.x0 - pb.box.x1 + 1});
            const double gy = std::max(
                {0, pb.box.y0 - pa.box.y1 + 1, pa.box.y0 - pb.box.y1 + 1});
            if (std::hypot(gx, gy) > max_gap + 1.0) continue;
            if (pa.has_direction && pb.has_direction &&
                axial_difference(pa.angle_deg, pb.angle_deg) > angle_tol_deg)
                continue;
            // nearest endpoint pair
            const int exa[2] = {pa.ax, pa.bx}, eya[2] = {pa.ay, pa.by};
            const int exb[2] = {pb.ax, pb.bx}, eyb[2] = {pb.ay, pb.by};
            double best = 1e300;
            int sx0 = 0, sy0 = 0, sx1 = 0, sy1 = 0;
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    const double d = std::hypot(
                        static_cast<double>(exa[i] - exb[j]),
                        static_cast<double>(eya[i] - eyb[j]));
                    if (d < best) {
                        best = d;
                        sx0 = exa[i];
                        sy0 = eya[i];
                        sx1 = exb[j];
                        sy1 = eyb[j];
                    }
                }
            }
            if (best > max_gap) continue;
            draw_segment(sx0, sy0, sx1, sy1);
        }
    }
    return out;
}

} // namespace pageseg
