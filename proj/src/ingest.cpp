#include "spotmatch/ingest.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace spotmatch {

bool natural_less(const std::string& a, const std::string& b) {
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (std::isdigit(static_cast<unsigned char>(a[i])) &&
            std::isdigit(static_cast<unsigned char>(b[j]))) {
            size_t i0 = i, j0 = j;
            while (i < a.size() && std::isdigit(static_cast<unsigned char>(a[i]))) i++;
            while (j < b.size() && std::isdigit(static_cast<unsigned char>(b[j]))) j++;
            // strip leading zeros
            size_t ia = i0, jb = j0;
            while (ia < i - 1 && a[ia] == '0') ia++;
            while (jb < j - 1 && b[jb] == '0') jb++;
            size_t la = i - ia, lb = j - jb;
            if (la != lb) return la < lb;
            int cmp = a.compare(ia, la, b, jb, lb);
            if (cmp != 0) return cmp < 0;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            i++;
            j++;
        }
    }
    return (a.size() - i) < (b.size() - j);
}

bool glob_match(const std::string& pattern, const std::string& name) {
    size_t p = 0, n = 0, star = std::string::npos, mark = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            p++;
            n++;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = n;
        } else if (star != std::string::npos) {
            p = star + 1;
            n = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') p++;
    return p == pattern.size();
}

namespace {

struct Dims {
    int width;
    int height;
};

// Reads just enough of the header to learn the frame dimensions.
Dims probe_dims(const std::string& path) {
    GrayImage img = decode_image(path);
    return {img.width, img.height};
}

}  // namespace

std::vector<VideoSequence> load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorCode::ManifestParse, "cannot open " + manifest_path);

    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ManifestParse, std::string(e.what()) + " in " + manifest_path);
    }
    if (!doc.is_array())
        throw Error(ErrorCode::ManifestParse, "manifest top level must be an array");

    std::vector<VideoSequence> sequences;
    std::set<std::string> seen_ids;
    for (const auto& entry : doc) {
        VideoSequence seq;
        try {
            seq.sequence_id = entry.at("sequence_id").get<std::string>();
            seq.camera_location_id = entry.at("camera_location_id").get<std::string>();
            seq.site_id = entry.at("site_id").get<std::string>();
            if (entry.contains("captured_at") && !entry["captured_at"].is_null())
                seq.captured_at = entry["captured_at"].get<std::string>();
            const auto frames_dir = entry.at("frames_dir").get<std::string>();
            const auto frame_glob = entry.at("frame_glob").get<std::string>();

            if (!seen_ids.insert(seq.sequence_id).second)
                throw Error(ErrorCode::DuplicateSequenceId, seq.sequence_id);

            std::vector<std::string> names;
            if (fs::is_directory(frames_dir)) {
                for (const auto& de : fs::directory_iterator(frames_dir)) {
                    if (!de.is_regular_file()) continue;
                    std::string name = de.path().filename().string();
                    if (glob_match(frame_glob, name)) names.push_back(name);
                }
            }
            if (names.empty())
                throw Error(ErrorCode::MissingFrames,
                            "sequence " + seq.sequence_id + " matched no frames in " + frames_dir);
            std::sort(names.begin(), names.end(), natural_less);

            for (size_t i = 0; i < names.size(); i++) {
                FrameRef fr;
                fr.sequence_id = seq.sequence_id;
                fr.frame_index = static_cast<int>(i);
                fr.image_path = (fs::path(frames_dir) / names[i]).string();
                Dims d = probe_dims(fr.image_path);
                fr.width = d.width;
                fr.height = d.height;
                seq.frames.push_back(std::move(fr));
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ManifestParse, e.what());
        }
        sequences.push_back(std::move(seq));
    }
    return sequences;
}

std::vector<FrameRef> sample_frames(const VideoSequence& seq, int stride, int max_frames) {
    std::vector<FrameRef> out;
    if (stride < 1 || max_frames < 1) throw Error(ErrorCode::InvalidConfig, "stride and max_frames must be >= 1");
    for (size_t i = 0; i < seq.frames.size(); i += static_cast<size_t>(stride)) {
        if (static_cast<int>(out.size()) >= max_frames) break;
        out.push_back(seq.frames[i]);
    }
    return out;
}

int stride_for_target(int n_frames, int target) {
    if (target < 1) target = 1;
    if (n_frames <= target) return 1;
    return (n_frames + target - 1) / target;
}

namespace {

void skip_pnm_whitespace(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

int read_pnm_int(std::istream& in) {
    skip_pnm_whitespace(in);
    int v = 0;
    if (!(in >> v)) throw Error(ErrorCode::CorruptImage, "truncated PNM header");
    return v;
}

GrayImage decode_pnm(std::ifstream& in, const std::string& path) {
    char p, type;
    in.get(p);
    in.get(type);
    if (p != 'P' || type < '2' || type > '6')
        throw Error(ErrorCode::UnsupportedFormat, path);
    const bool color = (type == '3' || type == '6');
    const bool binary = (type == '5' || type == '6');

    int w = read_pnm_int(in);
    int h = read_pnm_int(in);
    int maxval = read_pnm_int(in);
    if (w < 1 || h < 1) throw Error(ErrorCode::CorruptImage, "bad PNM dimensions in " + path);
    if (maxval != 255)
        throw Error(ErrorCode::UnsupportedFormat, "only 8-bit PNM supported: " + path);

    const size_t n = static_cast<size_t>(w) * h;
    const size_t samples = color ? n * 3 : n;
    std::vector<uint8_t> raw(samples);
    if (binary) {
        in.get();  // single whitespace after maxval
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(samples));
        if (static_cast<size_t>(in.gcount()) != samples)
            throw Error(ErrorCode::CorruptImage, "truncated PNM payload in " + path);
    } else {
        for (size_t i = 0; i < samples; i++) {
            int v = read_pnm_int(in);
            if (v < 0 || v > 255) throw Error(ErrorCode::CorruptImage, "PNM sample out of range");
            raw[i] = static_cast<uint8_t>(v);
        }
    }

    GrayImage img(w, h);
    if (color) {
        for (size_t i = 0; i < n; i++) {
            float y = 0.299f * raw[3 * i] + 0.587f * raw[3 * i + 1] + 0.114f * raw[3 * i + 2];
            img.pixels[i] = y / 255.0f;
        }
    } else {
        for (size_t i = 0; i < n; i++) img.pixels[i] = raw[i] / 255.0f;
    }
    return img;
}

GrayImage decode_png_file(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw Error(ErrorCode::Io, "cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw Error(ErrorCode::CorruptImage, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw Error(ErrorCode::CorruptImage, "PNG decode failed: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    color_type = png_get_color_type(png, info);
    const int channels = (color_type == PNG_COLOR_TYPE_RGB) ? 3 : 1;

    std::vector<uint8_t> row(static_cast<size_t>(w) * channels);
    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    for (png_uint_32 y = 0; y < h; y++) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; x++) {
            float v;
            if (channels == 3)
                v = 0.299f * row[3 * x] + 0.587f * row[3 * x + 1] + 0.114f * row[3 * x + 2];
            else
                v = row[x];
            img.at(static_cast<int>(x), static_cast<int>(y)) = v / 255.0f;
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

}  // namespace

GrayImage decode_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    in.seekg(0);
    if (magic[0] == 'P' && magic[1] >= '2' && magic[1] <= '6') return decode_pnm(in, path);
    if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') {
        in.close();
        return decode_png_file(path);
    }
    throw Error(ErrorCode::UnsupportedFormat, path);
}

void write_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> raw(img.pixels.size());
    for (size_t i = 0; i < img.pixels.size(); i++) {
        float v = std::clamp(img.pixels[i], 0.0f, 1.0f);
        raw[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + path);
}

GrayImage resize_nearest(const GrayImage& img, int new_w, int new_h) {
    GrayImage out(new_w, new_h);
    for (int y = 0; y < new_h; y++) {
        const int sy = std::min(img.height - 1, y * img.height / new_h);
        for (int x = 0; x < new_w; x++) {
            const int sx = std::min(img.width - 1, x * img.width / new_w);
            out.at(x, y) = img.at(sx, sy);
        }
    }
    return out;
}

namespace {

void png_append(png_structp png, png_bytep data, png_size_t len) {
    auto* buf = static_cast<std::string*>(png_get_io_ptr(png));
    buf->append(reinterpret_cast<const char*>(data), len);
}

std::string base64(const std::string& data) {
    static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 2 < data.size()) {
        uint32_t v = (static_cast<uint8_t>(data[i]) << 16) |
                     (static_cast<uint8_t>(data[i + 1]) << 8) | static_cast<uint8_t>(data[i + 2]);
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += tbl[(v >> 6) & 63];
        out += tbl[v & 63];
        i += 3;
    }
    if (i + 1 == data.size()) {
        uint32_t v = static_cast<uint8_t>(data[i]) << 16;
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == data.size()) {
        uint32_t v = (static_cast<uint8_t>(data[i]) << 16) | (static_cast<uint8_t>(data[i + 1]) << 8);
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += tbl[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

}  // namespace

std::string encode_png_base64(const GrayImage& img) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::Io, "libpng init failed");
    }
    std::string buf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::Io, "PNG encode failed");
    }
    png_set_write_fn(png, &buf, png_append, nullptr);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(img.width);
    for (int y = 0; y < img.height; y++) {
        for (int x = 0; x < img.width; x++) {
            float v = std::clamp(img.at(x, y), 0.0f, 1.0f);
            row[x] = static_cast<uint8_t>(std::lround(v * 255.0f));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return base64(buf);
}

}  // namespace spotmatch
