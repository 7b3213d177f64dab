#include "ecinn/image_io.hpp"

#include <algorithm>
#include <cmath>

#include "binio.hpp"

namespace ecinn {

namespace {

void write_netpbm(const std::string& path, const char* format, int w, int h,
                  const std::string& pixels) {
    std::string out = std::string(format) + "\n" + std::to_string(w) + " " + std::to_string(h) +
                      "\n255\n" + pixels;
    binio::write_file(path, out, "image");
}

uint8_t to_u8(double v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void export_image(const Vec& v, Geometry geom, const std::string& path) {
    require_dim(v.size(), geom.dim(), "export_image");
    if (geom.c != 1 && geom.c != 3)
        throw ContractViolation("export_image: channels must be 1 or 3");
    std::string pixels(static_cast<size_t>(v.size()), '\0');
    // flat layout is row-major with interleaved channels
    for (Eigen::Index i = 0; i < v.size(); ++i)
        pixels[static_cast<size_t>(i)] = static_cast<char>(to_u8(v[i]));
    write_netpbm(path, geom.c == 1 ? "P5" : "P6", geom.w, geom.h, pixels);
}

void export_heatmap(const Vec& v, Geometry geom, const std::string& path) {
    require_dim(v.size(), geom.dim(), "export_heatmap");
    require_finite(v, "export_heatmap");
    const double m = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
    const double scale = m > 0.0 ? 127.0 / m : 0.0;
    std::string pixels(static_cast<size_t>(v.size()), '\0');
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const long level = std::lround(128.0 + scale * v[i]);
        pixels[static_cast<size_t>(i)] = static_cast<char>(std::clamp(level, 0L, 255L));
    }
    write_netpbm(path, "P5", geom.w, geom.h * geom.c, pixels);
}

}  // namespace ecinn
