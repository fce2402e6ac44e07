#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace survwalk {

// Binary PGM (P5, maxval 255); intensities in [0,1] quantized to
// floor(v * 255 + 0.5).
void write_pgm(const std::vector<double>& pixels, size_t rows, size_t cols,
               const std::string& path);

// Frames tiled left-to-right in order, wrapping after `columns` frames, with
// 1-pixel white separators between cells.
void emit_image_grid(const std::vector<std::vector<double>>& frames, size_t rows, size_t cols,
                     size_t columns, const std::string& path);

}  // namespace survwalk
