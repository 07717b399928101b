#include "vqi2i/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "vqi2i/error.hpp"
#include "vqi2i/png_io.hpp"

namespace fs = std::filesystem;

namespace vqi2i {

std::vector<std::string> list_pngs(const std::string& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        failf("dataset directory '%s' does not exist", dir.c_str());
    std::vector<std::string> paths;
    for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png")
            paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

std::vector<Tensor> load_image_dir(const std::string& dir, int image_size) {
    require(image_size >= 1, "load_image_dir: image_size must be positive");
    std::vector<std::string> paths = list_pngs(dir);
    if (paths.empty()) failf("dataset directory '%s' contains no PNG files", dir.c_str());
    std::vector<Tensor> images;
    images.reserve(paths.size());
    for (const std::string& p : paths) {
        Tensor img = read_png(p);
        if (img.shape()[1] != image_size || img.shape()[2] != image_size)
            img = resize_nearest(img, image_size, image_size);
        images.push_back(std::move(img));
    }
    return images;
}

std::vector<size_t> epoch_order(size_t n, uint64_t seed, const std::string& tag, int64_t epoch) {
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, tag, static_cast<uint64_t>(epoch)));
    for (size_t i = n; i > 1; --i) {
        size_t j = static_cast<size_t>(rng.next_below(static_cast<uint64_t>(i)));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

namespace {

struct ToyShape {
    bool disc = false;
    double cx = 0, cy = 0;   // center, unit coordinates
    double ex = 0, ey = 0;   // half extents (ex doubles as the disc radius)
};

struct ToyLayout {
    std::vector<ToyShape> shapes;
};

// The layout stream is shared between the two domains so translated pairs
// genuinely share content; only the palette streams differ.
ToyLayout draw_layout(Rng& rng) {
    ToyLayout layout;
    int nshapes = 2 + static_cast<int>(rng.next_below(2));
    for (int s = 0; s < nshapes; ++s) {
        ToyShape shape;
        shape.disc = rng.next_below(2) == 1;
        shape.cx = 0.15 + 0.7 * rng.next_double();
        shape.cy = 0.15 + 0.7 * rng.next_double();
        shape.ex = 0.08 + 0.18 * rng.next_double();
        shape.ey = shape.disc ? shape.ex : 0.08 + 0.18 * rng.next_double();
        layout.shapes.push_back(shape);
    }
    return layout;
}

struct Rgb {
    double r = 0, g = 0, b = 0;
};

// Each domain paints from a fixed five-entry palette; the warm palette is
// the cool one with R and B swapped. Every entry keeps |R-B| >= 0.5 with
// the dominant channel on the domain side, so E[R-B] separates the domains
// regardless of layout.
Rgb palette_color(Rng& rng, bool warm) {
    static constexpr double kCool[5][3] = {{0.10, 0.25, 0.85},
                                           {0.15, 0.55, 0.90},
                                           {0.05, 0.40, 0.70},
                                           {0.30, 0.20, 0.80},
                                           {0.20, 0.70, 0.95}};
    const double* c = kCool[rng.next_below(5)];
    return warm ? Rgb{c[2], c[1], c[0]} : Rgb{c[0], c[1], c[2]};
}

Tensor paint(const ToyLayout& layout, const std::vector<Rgb>& colors, int size) {
    Tensor img = Tensor::zeros({3, size, size});
    std::vector<double>& v = img.values();
    auto store = [&](int y, int x, const Rgb& c) {
        const size_t n = static_cast<size_t>(size) * size;
        const size_t at = static_cast<size_t>(y) * size + x;
        v[at] = 2.0 * c.r - 1.0;
        v[n + at] = 2.0 * c.g - 1.0;
        v[2 * n + at] = 2.0 * c.b - 1.0;
    };
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double px = (x + 0.5) / size, py = (y + 0.5) / size;
            Rgb c = colors[0];
            for (size_t s = 0; s < layout.shapes.size(); ++s) {
                const ToyShape& sh = layout.shapes[s];
                bool inside;
                if (sh.disc) {
                    double dx = px - sh.cx, dy = py - sh.cy;
                    inside = dx * dx + dy * dy <= sh.ex * sh.ex;
                } else {
                    inside = std::abs(px - sh.cx) <= sh.ex && std::abs(py - sh.cy) <= sh.ey;
                }
                if (inside) c = colors[s + 1];
            }
            store(y, x, c);
        }
    return img;
}

}  // namespace

void make_toy_corpus(const std::string& dir_x, const std::string& dir_y, int count,
                     int image_size, uint64_t seed) {
    require(count >= 1 && count <= 9999, "toy corpus count must be in [1, 9999]");
    require(image_size >= 8, "toy corpus image size must be >= 8");
    std::error_code ec;
    fs::create_directories(dir_x, ec);
    fs::create_directories(dir_y, ec);
    for (int i = 0; i < count; ++i) {
        Rng geom(derive_seed(seed, "toy-geom", static_cast<uint64_t>(i)));
        ToyLayout layout = draw_layout(geom);
        for (int domain = 0; domain < 2; ++domain) {
            bool warm = domain == 1;
            Rng pal(derive_seed(seed, warm ? "toy-warm" : "toy-cool", static_cast<uint64_t>(i)));
            std::vector<Rgb> colors(layout.shapes.size() + 1);
            for (Rgb& c : colors) c = palette_color(pal, warm);
            Tensor img = paint(layout, colors, image_size);
            char name[32];
            std::snprintf(name, sizeof name, "%04d.png", i);
            write_png((fs::path(warm ? dir_y : dir_x) / name).string(), img);
        }
    }
}

double red_blue_gap(const Tensor& image) {
    const Shape& s = image.shape();
    require(s.size() == 3 && s[0] == 3, "red_blue_gap expects a [3, h, w] image");
    const std::vector<double>& v = image.values();
    const size_t n = static_cast<size_t>(s[1]) * s[2];
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += v[i] - v[2 * n + i];
    return acc / static_cast<double>(n);
}

}  // namespace vqi2i
