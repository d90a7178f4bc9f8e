#pragma once

#include "koopeq/error.hpp"

#include <Eigen/Dense>
#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace koopeq {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB raster, row 0 at the top.
class Image {
public:
    Image(std::size_t width, std::size_t height, Rgb fill = {255, 255, 255})
        : w_(width), h_(height), px_(width * height, fill) {
        require(width > 0 && height > 0, ErrorKind::invalid_input, "image dimensions must be positive");
    }

    std::size_t width() const noexcept { return w_; }
    std::size_t height() const noexcept { return h_; }

    Rgb& at(std::size_t x, std::size_t y) { return px_[y * w_ + x]; }
    const Rgb& at(std::size_t x, std::size_t y) const { return px_[y * w_ + x]; }

    void set(long x, long y, Rgb c) {
        if (x >= 0 && y >= 0 && static_cast<std::size_t>(x) < w_ && static_cast<std::size_t>(y) < h_)
            at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = c;
    }

    void line(long x0, long y0, long x1, long y1, Rgb c) {
        const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        long err = dx + dy;
        while (true) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            const long e2 = 2 * err;
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

    void dot(long x, long y, long radius, Rgb c) {
        for (long j = -radius; j <= radius; ++j)
            for (long i = -radius; i <= radius; ++i) set(x + i, y + j, c);
    }

    const std::vector<Rgb>& pixels() const noexcept { return px_; }

private:
    std::size_t w_, h_;
    std::vector<Rgb> px_;
};

/// Piecewise-linear approximation of the viridis colormap, t in [0, 1].
inline Rgb viridis(double t) {
    static constexpr std::array<std::array<double, 3>, 9> stops{{{68, 1, 84},
                                                                 {71, 44, 122},
                                                                 {59, 81, 139},
                                                                 {44, 113, 142},
                                                                 {33, 144, 141},
                                                                 {39, 173, 129},
                                                                 {92, 200, 99},
                                                                 {170, 220, 50},
                                                                 {253, 231, 37}}};
    if (!std::isfinite(t)) t = 0.0;
    t = std::clamp(t, 0.0, 1.0) * static_cast<double>(stops.size() - 1);
    const auto i = std::min(static_cast<std::size_t>(t), stops.size() - 2);
    const double f = t - static_cast<double>(i);
    auto mix = [&](int c) {
        return static_cast<std::uint8_t>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
    };
    return {mix(0), mix(1), mix(2)};
}

/// Space-time heatmap of an N x S matrix: x = time (column), y = space (row,
/// x_0 at the bottom), linear scaling to the data range. A constant field maps
/// to the middle of the colormap.
inline Image heatmap(const Eigen::MatrixXd& data, std::size_t cell_w = 0, std::size_t cell_h = 0) {
    require(data.rows() > 0 && data.cols() > 0, ErrorKind::empty_data, "heatmap needs data");
    const auto n = static_cast<std::size_t>(data.rows());
    const auto s = static_cast<std::size_t>(data.cols());
    if (cell_w == 0) cell_w = std::max<std::size_t>(1, 600 / s);
    if (cell_h == 0) cell_h = std::max<std::size_t>(1, 256 / n);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index c = 0; c < data.cols(); ++c)
        for (Eigen::Index r = 0; r < data.rows(); ++r)
            if (std::isfinite(data(r, c))) {
                lo = std::min(lo, data(r, c));
                hi = std::max(hi, data(r, c));
            }
    const double span = hi - lo;
    Image img(s * cell_w, n * cell_h);
    for (std::size_t k = 0; k < s; ++k)
        for (std::size_t i = 0; i < n; ++i) {
            const double v = data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
            const Rgb c = std::isfinite(v) ? viridis(span > 0.0 ? (v - lo) / span : 0.5) : Rgb{255, 0, 255};
            const std::size_t y0 = (n - 1 - i) * cell_h;
            for (std::size_t dy = 0; dy < cell_h; ++dy)
                for (std::size_t dx = 0; dx < cell_w; ++dx) img.at(k * cell_w + dx, y0 + dy) = c;
        }
    return img;
}

namespace detail {

struct PlotFrame {
    double x0, x1, y0, y1;
    std::size_t w, h, margin;

    long px(double x) const {
        return static_cast<long>(std::lround(margin + (x - x0) / (x1 - x0) * static_cast<double>(w - 2 * margin)));
    }
    long py(double y) const {
        return static_cast<long>(std::lround(h - margin - (y - y0) / (y1 - y0) * static_cast<double>(h - 2 * margin)));
    }
};

inline void draw_frame(Image& img, const PlotFrame& f) {
    const Rgb grey{120, 120, 120};
    const long l = static_cast<long>(f.margin), r = static_cast<long>(f.w - f.margin);
    const long t = static_cast<long>(f.margin), b = static_cast<long>(f.h - f.margin);
    img.line(l, t, r, t, grey);
    img.line(l, b, r, b, grey);
    img.line(l, t, l, b, grey);
    img.line(r, t, r, b, grey);
}

}  // namespace detail

/// Eigenvalues in the complex plane with the unit circle for reference.
inline Image spectrum_plot(const std::vector<std::complex<double>>& ev,
                           const std::vector<std::complex<double>>& reference = {}, std::size_t size = 400) {
    double extent = 1.1;
    for (const auto& z : ev)
        if (std::isfinite(std::abs(z))) extent = std::max(extent, 1.05 * std::abs(z));
    for (const auto& z : reference)
        if (std::isfinite(std::abs(z))) extent = std::max(extent, 1.05 * std::abs(z));
    Image img(size, size);
    const detail::PlotFrame f{-extent, extent, -extent, extent, size, size, 10};
    detail::draw_frame(img, f);
    const Rgb axis{200, 200, 200};
    img.line(f.px(-extent), f.py(0), f.px(extent), f.py(0), axis);
    img.line(f.px(0), f.py(-extent), f.px(0), f.py(extent), axis);
    for (int a = 0; a < 720; ++a) {
        const double th = 2.0 * 3.14159265358979323846 * a / 720.0;
        img.set(f.px(std::cos(th)), f.py(std::sin(th)), {0, 0, 0});
    }
    for (const auto& z : reference) img.dot(f.px(z.real()), f.py(z.imag()), 3, {31, 119, 180});
    for (const auto& z : ev) img.dot(f.px(z.real()), f.py(z.imag()), 2, {214, 39, 40});
    return img;
}

/// Line plot of one or more series against their index; log10 y when `log_y`.
inline Image line_plot(const std::vector<std::vector<double>>& series, bool log_y = false, std::size_t width = 600,
                       std::size_t height = 300, const std::vector<double>& x_values = {}) {
    static const std::array<Rgb, 4> colors{{{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {148, 103, 189}}};
    auto tr = [&](double v) { return log_y ? std::log10(v) : v; };
    double xmax = 1.0, ymin = std::numeric_limits<double>::infinity(), ymax = -ymin, xmin = 0.0;
    for (const auto& s : series) {
        xmax = std::max(xmax, static_cast<double>(s.size() > 1 ? s.size() - 1 : 1));
        for (double v : s)
            if (std::isfinite(tr(v))) {
                ymin = std::min(ymin, tr(v));
                ymax = std::max(ymax, tr(v));
            }
    }
    if (!x_values.empty()) {
        xmin = *std::min_element(x_values.begin(), x_values.end());
        xmax = *std::max_element(x_values.begin(), x_values.end());
        if (xmax <= xmin) xmax = xmin + 1.0;
    }
    if (!std::isfinite(ymin)) ymin = 0.0, ymax = 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;
    const double pad = 0.05 * (ymax - ymin);
    Image img(width, height);
    const detail::PlotFrame f{xmin, xmax, ymin - pad, ymax + pad, width, height, 10};
    detail::draw_frame(img, f);
    for (std::size_t si = 0; si < series.size(); ++si) {
        const Rgb c = colors[si % colors.size()];
        const auto& s = series[si];
        auto xat = [&](std::size_t i) { return x_values.empty() ? static_cast<double>(i) : x_values[i]; };
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!std::isfinite(tr(s[i]))) continue;
            img.dot(f.px(xat(i)), f.py(tr(s[i])), 1, c);
            if (i + 1 < s.size() && std::isfinite(tr(s[i + 1])))
                img.line(f.px(xat(i)), f.py(tr(s[i])), f.px(xat(i + 1)), f.py(tr(s[i + 1])), c);
        }
    }
    return img;
}

/// Writes an 8-bit RGB PNG without timestamps or text chunks, so identical
/// images produce identical files.
inline void write_png(const Image& img, const std::filesystem::path& path) {
    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    require(fp != nullptr, ErrorKind::io, "cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        std::fclose(fp);
        throw Error(ErrorKind::io, "libpng initialisation failed");
    }
    std::vector<png_byte> row(img.width() * 3);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw Error(ErrorKind::io, "libpng failed while writing '" + path.string() + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height(); ++y) {
        for (std::size_t x = 0; x < img.width(); ++x) {
            const Rgb& c = img.at(x, y);
            row[3 * x] = c.r;
            row[3 * x + 1] = c.g;
            row[3 * x + 2] = c.b;
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    const bool ok = std::fclose(fp) == 0;
    require(ok, ErrorKind::io, "closing '" + path.string() + "' failed");
}

/// Reads an 8-bit RGB PNG written by write_png (used for verification).
inline Image read_png(const std::filesystem::path& path) {
    std::FILE* fp = std::fopen(path.string().c_str(), "rb");
    require(fp != nullptr, ErrorKind::io, "cannot open '" + path.string() + "' for reading");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        std::fclose(fp);
        throw Error(ErrorKind::io, "libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw Error(ErrorKind::io, "'" + path.string() + "' is not a readable PNG");
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const auto w = png_get_image_width(png, info);
    const auto h = png_get_image_height(png, info);
    const bool rgb8 = png_get_color_type(png, info) == PNG_COLOR_TYPE_RGB && png_get_bit_depth(png, info) == 8;
    if (!rgb8) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw Error(ErrorKind::io, "'" + path.string() + "' is not 8-bit RGB");
    }
    Image img(w, h);
    std::vector<png_byte> row(static_cast<std::size_t>(w) * 3);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) img.at(x, y) = {row[3 * x], row[3 * x + 1], row[3 * x + 2]};
    }
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

}  // namespace koopeq
