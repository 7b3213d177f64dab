#pragma once

#include <string>

#include "ecinn/common.hpp"

namespace ecinn {

// Portable graymap/pixmap export. Values are clipped to [0,1] and scaled to
// 8 bits at export only; c=1 writes PGM (P5), c=3 writes PPM (P6).
void export_image(const Vec& v, Geometry geom, const std::string& path);

// Signed diverging export for heatmaps: level = 128 + 127*v/M with
// M = max|v| (or 1 if the map is all zero), so zero maps to mid-gray and the
// extremes reach near-black/near-white. Grayscale (PGM) regardless of c.
void export_heatmap(const Vec& v, Geometry geom, const std::string& path);

}  // namespace ecinn
