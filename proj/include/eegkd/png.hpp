#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eegkd::png {

struct Rgb {
    uint8_t r, g, b;
};

// Minimal deterministic raster canvas; PNG output uses stored (uncompressed)
// deflate blocks so no compression library is needed.
class Canvas {
public:
    Canvas(int width, int height, Rgb background = {255, 255, 255});

    int width() const { return w_; }
    int height() const { return h_; }

    void set(int x, int y, Rgb c);
    void fill_rect(int x0, int y0, int w, int h, Rgb c);
    void line(int x0, int y0, int x1, int y1, Rgb c);
    void save(const std::string& path) const;

private:
    int w_, h_;
    std::vector<uint8_t> px_;
};

// Diverging blue-white-red map over [-limit, limit].
Rgb diverging(double value, double limit);
// Sequential white-to-dark-red map over [0, 1].
Rgb sequential(double value01);

} // namespace eegkd::png
