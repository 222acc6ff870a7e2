#include "pageseg/manifest.hpp"

#include "pageseg/errors.hpp"
#include "pageseg/rng.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pageseg {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

int to_int(const std::string& s, const std::string& origin) {
    try {
        return std::stoi(s);
    } catch (const std::exception&) {
        throw CorruptFileError(origin + ": expected integer, got '" + s + "'");
    }
}

} // namespace

std::string manifest_to_string(const DatasetManifest& m) {
    std::ostringstream out;
    char frac[40];
    std::snprintf(frac, sizeof frac, "%.17g", m.warp.amplitude_frac);
    out << "# pageseg dataset manifest v1\n"
        << "meta\ttask=" << m.task << "\tconfig=" << m.config_name << "\ttotal="
        << m.total_w << "x" << m.total_h << "\tfold_count=" << m.fold_count
        << "\tschema=" << m.schema_path << "\twarp=" << (m.warp.enabled ? 1 : 0)
        << "\twarp_seed=" << m.warp.seed << "\twarp_grid=" << m.warp.grid_cols
        << "x" << m.warp.grid_rows << "\twarp_amplitude_frac=" << frac << "\n";
    for (const PageRecord& p : m.pages)
        out << "page\t" << p.page_id << "\t" << p.fold << "\t" << p.variant << "\t"
            << p.width << "\t" << p.height << "\t" << p.scan_path << "\t"
            << p.label_path << "\n";
    for (const TileRecord& t : m.tiles)
        out << "tile\t" << t.tile_id << "\t" << t.page_id << "\t" << t.fold << "\t"
            << t.variant << "\t" << t.tile_index << "\t" << t.x0 << "\t" << t.y0
            << "\t" << t.width << "\t" << t.height << "\t" << t.scan_path << "\t"
            << t.label_path << "\n";
    return out.str();
}

DatasetManifest manifest_from_string(const std::string& text,
                                     const std::string& origin) {
    DatasetManifest m;
    std::istringstream in(text);
    std::string line;
    bool have_meta = false;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no);
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_tabs(line);
        if (fields[0] == "meta") {
            for (std::size_t i = 1; i < fields.size(); ++i) {
                const std::size_t eq = fields[i].find('=');
                if (eq == std::string::npos)
                    throw CorruptFileError(where + ": bad meta field '" + fields[i] +
                                           "'");
                const std::string key = fields[i].substr(0, eq);
                const std::string value = fields[i].substr(eq + 1);
                if (key == "task") {
                    m.task = value;
                } else if (key == "config") {
                    m.config_name = value;
                } else if (key == "total") {
                    if (std::sscanf(value.c_str(), "%dx%d", &m.total_w,
                                    &m.total_h) != 2)
                        throw CorruptFileError(where + ": bad total '" + value + "'");
                } else if (key == "fold_count") {
                    m.fold_count = to_int(value, where);
                } else if (key == "schema") {
                    m.schema_path = value;
                } else if (key == "warp") {
                    m.warp.enabled = value == "1";
                } else if (key == "warp_seed") {
                    m.warp.seed = std::strtoull(value.c_str(), nullptr, 10);
                } else if (key == "warp_grid") {
                    if (std::sscanf(value.c_str(), "%dx%d", &m.warp.grid_cols,
                                    &m.warp.grid_rows) != 2)
                        throw CorruptFileError(where + ": bad warp_grid '" + value +
                                               "'");
                } else if (key == "warp_amplitude_frac") {
                    m.warp.amplitude_frac = std::strtod(value.c_str(), nullptr);
                } else {
                    throw CorruptFileError(where + ": unknown meta key '" + key +
                                           "'");
                }
            }
            have_meta = true;
        } else if (fields[0] == "page") {
            if (fields.size() != 8)
                throw CorruptFileError(where + ": page record needs 8 fields");
            PageRecord p;
            p.page_id = fields[1];
            p.fold = to_int(fields[2], where);
            p.variant = fields[3];
            p.width = to_int(fields[4], where);
            p.height = to_int(fields[5], where);
            p.scan_path = fields[6];
            p.label_path = fields[7];
            m.pages.push_back(std::move(p));
        } else if (fields[0] == "tile") {
            if (fields.size() != 12)
                throw CorruptFileError(where + ": tile record needs 12 fields");
            TileRecord t;
            t.tile_id = fields[1];
            t.page_id = fields[2];
            t.fold = to_int(fields[3], where);
            t.variant = fields[4];
            t.tile_index = to_int(fields[5], where);
            t.x0 = to_int(fields[6], where);
            t.y0 = to_int(fields[7], where);
            t.width = to_int(fields[8], where);
            t.height = to_int(fields[9], where);
            t.scan_path = fields[10];
            t.label_path = fields[11];
            m.tiles.push_back(std::move(t));
        } else {
            throw CorruptFileError(where + ": unknown record '" + fields[0] + "'");
        }
    }
    if (!have_meta)
        throw CorruptFileError(origin + ": missing manifest meta line");
    return m;
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest " + path.string());
    const std::string text = manifest_to_string(manifest);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("failed writing manifest " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return manifest_from_string(text, path.string());
}

std::string manifest_digest(const DatasetManifest& manifest) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64,
                  fnv1a(manifest_to_string(manifest)));
    return buf;
}

} // namespace pageseg
