#include "survwalk/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "survwalk/error.hpp"

namespace survwalk {

namespace {

unsigned char quantize(double v) {
    const double q = std::floor(v * 255.0 + 0.5);
    return static_cast<unsigned char>(std::clamp(q, 0.0, 255.0));
}

void write_p5(const std::vector<unsigned char>& bytes, size_t width, size_t height,
              const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_io("cannot open for writing: " + path);
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail_io("write failed: " + path);
}

}  // namespace

void write_pgm(const std::vector<double>& pixels, size_t rows, size_t cols,
               const std::string& path) {
    if (rows == 0 || cols == 0) fail_invalid("pgm: image must be non-empty");
    if (pixels.size() != rows * cols) {
        fail_invalid("pgm: " + std::to_string(pixels.size()) + " pixels do not fill " +
                     std::to_string(rows) + "x" + std::to_string(cols));
    }
    std::vector<unsigned char> bytes(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i) bytes[i] = quantize(pixels[i]);
    write_p5(bytes, cols, rows, path);
}

void emit_image_grid(const std::vector<std::vector<double>>& frames, size_t rows, size_t cols,
                     size_t columns, const std::string& path) {
    if (frames.empty()) fail_invalid("image grid: no frames");
    if (rows == 0 || cols == 0) fail_invalid("image grid: frames must be non-empty");
    if (columns == 0) fail_invalid("image grid: columns must be >= 1");
    for (size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].size() != rows * cols) {
            fail_invalid("image grid: frame " + std::to_string(i) + " has " +
                         std::to_string(frames[i].size()) + " pixels, expected " +
                         std::to_string(rows * cols));
        }
    }

    const size_t grid_cols = std::min(columns, frames.size());
    const size_t grid_rows = (frames.size() + columns - 1) / columns;
    const size_t width = grid_cols * cols + (grid_cols - 1);
    const size_t height = grid_rows * rows + (grid_rows - 1);
    std::vector<unsigned char> bytes(width * height, 255);  // separators stay white

    for (size_t f = 0; f < frames.size(); ++f) {
        const size_t cell_r = f / columns;
        const size_t cell_c = f % columns;
        const size_t r0 = cell_r * (rows + 1);
        const size_t c0 = cell_c * (cols + 1);
        for (size_t r = 0; r < rows; ++r)
            for (size_t c = 0; c < cols; ++c)
                bytes[(r0 + r) * width + c0 + c] = quantize(frames[f][r * cols + c]);
    }
    // leave any trailing empty cells black rather than white
    if (frames.size() % columns != 0 && frames.size() > columns) {
        const size_t r0 = (grid_rows - 1) * (rows + 1);
        for (size_t f = frames.size() % columns; f < grid_cols; ++f) {
            const size_t c0 = f * (cols + 1);
            for (size_t r = 0; r < rows; ++r)
                for (size_t c = 0; c < cols; ++c) bytes[(r0 + r) * width + c0 + c] = 0;
        }
    }
    write_p5(bytes, width, height, path);
}

}  // namespace survwalk
