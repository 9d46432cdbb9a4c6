#include "eegkd/png.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "eegkd/errors.hpp"

namespace eegkd::png {

namespace {

uint32_t crc_table(int n) {
    uint32_t c = uint32_t(n);
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    return c;
}

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0xffffffffu) {
    static uint32_t table[256];
    static bool built = false;
    if (!built) {
        for (int n = 0; n < 256; ++n) table[n] = crc_table(n);
        built = true;
    }
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc;
}

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(uint8_t(x >> 24));
    v.push_back(uint8_t(x >> 16));
    v.push_back(uint8_t(x >> 8));
    v.push_back(uint8_t(x));
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<uint8_t>& payload) {
    std::vector<uint8_t> buf;
    put_u32(buf, uint32_t(payload.size()));
    buf.insert(buf.end(), type, type + 4);
    buf.insert(buf.end(), payload.begin(), payload.end());
    const uint32_t crc = ~crc32(buf.data() + 4, buf.size() - 4);
    put_u32(buf, crc);
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

// zlib stream with stored deflate blocks
std::vector<uint8_t> zlib_stored(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    size_t pos = 0;
    while (pos < raw.size() || raw.empty()) {
        const size_t n = std::min<size_t>(65535, raw.size() - pos);
        const bool final = pos + n == raw.size();
        z.push_back(final ? 1 : 0);
        z.push_back(uint8_t(n & 0xff));
        z.push_back(uint8_t(n >> 8));
        z.push_back(uint8_t(~n & 0xff));
        z.push_back(uint8_t((~n >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + long(pos), raw.begin() + long(pos + n));
        pos += n;
        if (final) break;
    }
    uint32_t a = 1, b = 0;
    for (uint8_t byte : raw) {
        a = (a + byte) % 65521;
        b = (b + a) % 65521;
    }
    put_u32(z, (b << 16) | a);
    return z;
}

} // namespace

Canvas::Canvas(int width, int height, Rgb bg) : w_(width), h_(height), px_(size_t(width) * height * 3) {
    for (int y = 0; y < h_; ++y)
        for (int x = 0; x < w_; ++x) set(x, y, bg);
}

void Canvas::set(int x, int y, Rgb c) {
    if (x < 0 || x >= w_ || y < 0 || y >= h_) return;
    const size_t i = (size_t(y) * size_t(w_) + size_t(x)) * 3;
    px_[i] = c.r;
    px_[i + 1] = c.g;
    px_[i + 2] = c.b;
}

void Canvas::fill_rect(int x0, int y0, int w, int h, Rgb c) {
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) set(x, y, c);
}

void Canvas::line(int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void Canvas::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write image " + path);
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    put_u32(ihdr, uint32_t(w_));
    put_u32(ihdr, uint32_t(h_));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // rgb
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(out, "IHDR", ihdr);

    std::vector<uint8_t> raw;
    raw.reserve(size_t(h_) * (size_t(w_) * 3 + 1));
    for (int y = 0; y < h_; ++y) {
        raw.push_back(0); // filter none
        const uint8_t* row = px_.data() + size_t(y) * size_t(w_) * 3;
        raw.insert(raw.end(), row, row + size_t(w_) * 3);
    }
    write_chunk(out, "IDAT", zlib_stored(raw));
    write_chunk(out, "IEND", {});
}

Rgb diverging(double value, double limit) {
    const double t = std::clamp(value / limit, -1.0, 1.0);
    if (t < 0) {
        const double u = -t;
        return {uint8_t(255 - 200 * u), uint8_t(255 - 150 * u), 255};
    }
    return {255, uint8_t(255 - 150 * t), uint8_t(255 - 200 * t)};
}

Rgb sequential(double v) {
    const double t = std::clamp(v, 0.0, 1.0);
    return {uint8_t(255 - 80 * t), uint8_t(255 - 215 * t), uint8_t(255 - 225 * t)};
}

} // namespace eegkd::png
