#include "groupreg/pipeline/series_store.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "groupreg/error.hpp"

namespace groupreg {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "rasters are stored little-endian");

namespace {

constexpr int kManifestVersion = 1;

std::string numbered(const char* stem, std::size_t i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03zu.raw", stem, i);
    return buf;
}

}  // namespace

void Series::validate() const {
    const std::size_t p = plane();
    if (p == 0) throw DataError("series: zero image size");
    if (frames.empty()) throw DataError("series: no frames");
    for (const auto& f : frames)
        if (f.size() != p) throw DataError("series: frame size does not match manifest size");
    if (has_reference() && reference.size() != p)
        throw DataError("series: reference size does not match manifest size");
    if (has_gt_fields()) {
        if (gt_fields.size() != frames.size())
            throw DataError("series: one ground-truth field per frame required");
        for (const auto& g : gt_fields)
            if (g.size() != 2 * p) throw DataError("series: ground-truth field must be [2,H,W]");
    }
}

Series series_from_phantom(const GeneratedSeries& g) {
    Series s;
    s.height = s.width = g.size;
    s.frames = g.noisy_frames;
    s.reference = g.clean_reference;
    s.gt_fields = g.gt_fields;
    s.snr_db = g.snr_db;
    s.heart = HeartLocation{g.heart_row, g.heart_col, g.heart_radius};
    return s;
}

Series clean_series_from_phantom(const GeneratedSeries& g) {
    Series s = series_from_phantom(g);
    s.frames = g.clean_frames;
    s.snr_db.reset();
    return s;
}

EvalSeries eval_view(const Series& s) {
    EvalSeries e;
    e.height = s.height;
    e.width = s.width;
    e.reference = s.reference;
    e.gt_fields = s.gt_fields;
    e.snr_db = s.snr_db;
    if (s.heart) {
        e.heart_row = s.heart->row;
        e.heart_col = s.heart->col;
        e.heart_radius = s.heart->radius;
    }
    e.frames = s.frame_count();
    return e;
}

void write_raw(const fs::path& file, std::span<const float> data) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + file.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size_bytes()));
    if (!out) throw DataError("write failed: " + file.string());
}

std::vector<float> read_raw(const fs::path& file, std::size_t count) {
    std::error_code ec;
    const auto bytes = fs::file_size(file, ec);
    if (ec) throw DataError("cannot read " + file.string());
    if (bytes != count * sizeof(float))
        throw DataError(file.string() + ": expected " + std::to_string(count * sizeof(float)) +
                        " bytes, found " + std::to_string(bytes));
    std::vector<float> v(count);
    std::ifstream in(file, std::ios::binary);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw DataError("read failed: " + file.string());
    return v;
}

void write_series(const fs::path& dir, const Series& s) {
    s.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());

    json m;
    m["version"] = kManifestVersion;
    m["size"] = {s.height, s.width};
    m["frames"] = s.frame_count();
    m["snr_db"] = s.snr_db ? json(*s.snr_db) : json(nullptr);
    m["has_reference"] = s.has_reference();
    m["has_gt_fields"] = s.has_gt_fields();
    m["byte_order"] = "little";
    m["dtype"] = "f32";
    json files = json::array(), fields = json::array();
    for (std::size_t i = 0; i < s.frame_count(); ++i) {
        files.push_back(numbered("frame", i));
        write_raw(dir / numbered("frame", i), s.frames[i]);
    }
    m["frame_files"] = files;
    if (s.has_reference()) write_raw(dir / "reference.raw", s.reference);
    for (std::size_t i = 0; i < s.gt_fields.size(); ++i) {
        fields.push_back(numbered("gt_field", i));
        write_raw(dir / numbered("gt_field", i), s.gt_fields[i]);
    }
    if (s.has_gt_fields()) m["gt_field_files"] = fields;
    if (s.heart) m["heart"] = {{"row", s.heart->row}, {"col", s.heart->col}, {"radius", s.heart->radius}};

    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
    out << m.dump(2) << '\n';
}

Series read_series(const fs::path& dir) {
    const auto path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw DataError("missing manifest: " + path.string());
    json m;
    try {
        m = json::parse(in);
        if (m.at("version").get<int>() != kManifestVersion)
            throw DataError(path.string() + ": unsupported manifest version");
        if (m.at("byte_order") != "little" || m.at("dtype") != "f32")
            throw DataError(path.string() + ": only little-endian f32 rasters are supported");
        Series s;
        s.height = m.at("size").at(0).get<std::size_t>();
        s.width = m.at("size").at(1).get<std::size_t>();
        const auto frames = m.at("frames").get<std::size_t>();
        const auto& files = m.at("frame_files");
        if (files.size() != frames)
            throw DataError(path.string() + ": frame count does not match frame_files");
        for (const auto& f : files)
            s.frames.push_back(read_raw(dir / f.get<std::string>(), s.plane()));
        if (!m.at("snr_db").is_null()) s.snr_db = m.at("snr_db").get<double>();
        if (m.at("has_reference").get<bool>()) s.reference = read_raw(dir / "reference.raw", s.plane());
        if (m.at("has_gt_fields").get<bool>()) {
            std::vector<std::string> names;
            if (m.contains("gt_field_files"))
                names = m["gt_field_files"].get<std::vector<std::string>>();
            else
                for (std::size_t i = 0; i < frames; ++i) names.push_back(numbered("gt_field", i));
            for (const auto& n : names) s.gt_fields.push_back(read_raw(dir / n, 2 * s.plane()));
        }
        if (m.contains("heart"))
            s.heart = HeartLocation{m["heart"].at("row").get<double>(), m["heart"].at("col").get<double>(),
                                    m["heart"].at("radius").get<double>()};
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": malformed manifest (" + e.what() + ")");
    }
}

std::vector<fs::path> list_series(const fs::path& root) {
    if (fs::exists(root / "manifest.json")) return {root};
    if (!fs::is_directory(root)) throw DataError("not a directory: " + root.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Series> read_dataset(const fs::path& root) {
    std::vector<Series> out;
    for (const auto& p : list_series(root)) out.push_back(read_series(p));
    if (out.empty()) throw DataError("no series found under " + root.string());
    return out;
}

}  // namespace groupreg
