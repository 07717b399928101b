#include "vqi2i/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "vqi2i/error.hpp"

namespace vqi2i {

namespace {

constexpr unsigned char kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_be32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

uint32_t get_be32(const unsigned char* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const std::vector<unsigned char>& data) {
    put_be32(out, static_cast<uint32_t>(data.size()));
    size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + type_at, static_cast<uInt>(4 + data.size()));
    put_be32(out, static_cast<uint32_t>(crc));
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

void check_image_tensor(const Tensor& image, const char* what) {
    const Shape& s = image.shape();
    require(s.size() == 3 && s[0] == 3, std::string(what) + " expects a [3, h, w] image tensor");
}

}  // namespace

double byte_to_unit(int b) { return static_cast<double>(b) / 127.5 - 1.0; }

int unit_to_byte(double v) {
    double scaled = std::round((v + 1.0) * 127.5);
    if (!(scaled >= 0.0)) return 0;
    if (scaled > 255.0) return 255;
    return static_cast<int>(scaled);
}

Tensor read_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) failf("cannot open PNG file '%s'", path.c_str());
    std::vector<unsigned char> file((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (file.size() < 8 || std::memcmp(file.data(), kSignature, 8) != 0)
        failf("'%s' is not a PNG file (bad signature)", path.c_str());

    size_t pos = 8;
    bool saw_ihdr = false, saw_iend = false;
    uint32_t width = 0, height = 0;
    std::vector<unsigned char> idat;
    while (pos < file.size()) {
        if (file.size() - pos < 12) failf("'%s' is truncated inside a chunk header", path.c_str());
        uint32_t len = get_be32(&file[pos]);
        if (file.size() - pos - 12 < len) failf("'%s' is truncated inside chunk data", path.c_str());
        const unsigned char* type = &file[pos + 4];
        const unsigned char* data = &file[pos + 8];
        uint32_t stored_crc = get_be32(data + len);
        uLong crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, type, len + 4);
        if (static_cast<uint32_t>(crc) != stored_crc)
            failf("'%s' has a corrupt chunk (CRC mismatch)", path.c_str());
        std::string name(reinterpret_cast<const char*>(type), 4);
        if (!saw_ihdr) {
            if (name != "IHDR") failf("'%s' does not start with an IHDR chunk", path.c_str());
            if (len != 13) failf("'%s' has a malformed IHDR chunk", path.c_str());
            width = get_be32(data);
            height = get_be32(data + 4);
            int bit_depth = data[8], color_type = data[9], interlace = data[12];
            if (width == 0 || height == 0 || width > (1u << 20) || height > (1u << 20))
                failf("'%s' has unsupported dimensions %ux%u", path.c_str(), width, height);
            if (bit_depth != 8 || color_type != 2)
                failf("'%s' is not 8-bit RGB (bit depth %d, color type %d)", path.c_str(),
                      bit_depth, color_type);
            if (interlace != 0) failf("'%s' is interlaced, which is not supported", path.c_str());
            saw_ihdr = true;
        } else if (name == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (name == "IEND") {
            saw_iend = true;
            break;
        }
        // Ancillary chunks (tEXt, gAMA, ...) are CRC-checked above and skipped.
        pos += 12 + len;
    }
    if (!saw_ihdr) failf("'%s' has no IHDR chunk", path.c_str());
    if (!saw_iend) failf("'%s' has no IEND chunk", path.c_str());
    if (idat.empty()) failf("'%s' has no IDAT chunk", path.c_str());

    const size_t stride = 1 + 3 * static_cast<size_t>(width);
    std::vector<unsigned char> raw(static_cast<size_t>(height) * stride);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    int zrc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zrc != Z_OK || raw_len != raw.size())
        failf("'%s' has a corrupt or truncated pixel stream", path.c_str());

    // Undo per-row filtering in place (bytes-per-pixel is 3).
    for (uint32_t y = 0; y < height; ++y) {
        unsigned char* row = &raw[y * stride];
        const unsigned char* prev = y > 0 ? &raw[(y - 1) * stride] : nullptr;
        int filter = row[0];
        unsigned char* px = row + 1;
        const unsigned char* up = prev ? prev + 1 : nullptr;
        const size_t n = 3 * static_cast<size_t>(width);
        switch (filter) {
            case 0:
                break;
            case 1:
                for (size_t i = 3; i < n; ++i) px[i] = static_cast<unsigned char>(px[i] + px[i - 3]);
                break;
            case 2:
                if (up)
                    for (size_t i = 0; i < n; ++i) px[i] = static_cast<unsigned char>(px[i] + up[i]);
                break;
            case 3:
                for (size_t i = 0; i < n; ++i) {
                    int a = i >= 3 ? px[i - 3] : 0;
                    int b = up ? up[i] : 0;
                    px[i] = static_cast<unsigned char>(px[i] + (a + b) / 2);
                }
                break;
            case 4:
                for (size_t i = 0; i < n; ++i) {
                    int a = i >= 3 ? px[i - 3] : 0;
                    int b = up ? up[i] : 0;
                    int c = (up && i >= 3) ? up[i - 3] : 0;
                    px[i] = static_cast<unsigned char>(px[i] + paeth(a, b, c));
                }
                break;
            default:
                failf("'%s' uses unknown scanline filter %d", path.c_str(), filter);
        }
    }

    const int h = static_cast<int>(height), w = static_cast<int>(width);
    Tensor image = Tensor::zeros({3, h, w});
    std::vector<double>& v = image.values();
    for (int y = 0; y < h; ++y) {
        const unsigned char* px = &raw[static_cast<size_t>(y) * stride + 1];
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                v[(static_cast<size_t>(c) * h + y) * w + x] = byte_to_unit(px[x * 3 + c]);
    }
    return image;
}

void write_png(const std::string& path, const Tensor& image) {
    check_image_tensor(image, "write_png");
    const int h = image.shape()[1], w = image.shape()[2];
    const std::vector<double>& v = image.values();

    const size_t stride = 1 + 3 * static_cast<size_t>(w);
    std::vector<unsigned char> raw(static_cast<size_t>(h) * stride, 0);
    for (int y = 0; y < h; ++y) {
        unsigned char* px = &raw[static_cast<size_t>(y) * stride + 1];
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                px[x * 3 + c] = static_cast<unsigned char>(
                    unit_to_byte(v[(static_cast<size_t>(c) * h + y) * w + x]));
    }

    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    int zrc = compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()),
                        Z_DEFAULT_COMPRESSION);
    if (zrc != Z_OK) failf("deflate failed while writing '%s'", path.c_str());
    comp.resize(comp_len);

    std::vector<unsigned char> out(kSignature, kSignature + 8);
    std::vector<unsigned char> ihdr;
    put_be32(ihdr, static_cast<uint32_t>(w));
    put_be32(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: truecolor RGB
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter method
    ihdr.push_back(0);   // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", comp);
    append_chunk(out, "IEND", {});

    std::ofstream of(path, std::ios::binary | std::ios::trunc);
    if (!of) failf("cannot open '%s' for writing", path.c_str());
    of.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    of.flush();
    if (!of) failf("failed to write '%s'", path.c_str());
}

Tensor resize_nearest(const Tensor& image, int out_h, int out_w) {
    check_image_tensor(image, "resize_nearest");
    require(out_h > 0 && out_w > 0, "resize_nearest output extents must be positive");
    const int h = image.shape()[1], w = image.shape()[2];
    const std::vector<double>& src = image.values();
    Tensor out = Tensor::zeros({3, out_h, out_w});
    std::vector<double>& dst = out.values();
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < out_h; ++y) {
            int sy = static_cast<int>(static_cast<int64_t>(y) * h / out_h);
            for (int x = 0; x < out_w; ++x) {
                int sx = static_cast<int>(static_cast<int64_t>(x) * w / out_w);
                dst[(static_cast<size_t>(c) * out_h + y) * out_w + x] =
                    src[(static_cast<size_t>(c) * h + sy) * w + sx];
            }
        }
    return out;
}

Tensor render_grid(const std::vector<Tensor>& images, int rows, int cols) {
    require(!images.empty(), "render_grid needs at least one image");
    require(rows >= 1 && cols >= 1, "render_grid layout must be positive");
    require(static_cast<size_t>(rows) * cols == images.size(),
            "render_grid layout does not match the image count");
    const Shape& s0 = images[0].shape();
    check_image_tensor(images[0], "render_grid");
    for (const Tensor& t : images)
        require(t.shape() == s0, "render_grid images must all have the same shape");
    const int h = s0[1], w = s0[2], sep = 2;
    const int oh = rows * h + sep * (rows - 1);
    const int ow = cols * w + sep * (cols - 1);
    Tensor out = Tensor::full({3, oh, ow}, -1.0);
    std::vector<double>& dst = out.values();
    for (int r = 0; r < rows; ++r)
        for (int cidx = 0; cidx < cols; ++cidx) {
            const std::vector<double>& src = images[static_cast<size_t>(r) * cols + cidx].values();
            const int y0 = r * (h + sep), x0 = cidx * (w + sep);
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        dst[(static_cast<size_t>(c) * oh + y0 + y) * ow + x0 + x] =
                            src[(static_cast<size_t>(c) * h + y) * w + x];
        }
    return out;
}

}  // namespace vqi2i
