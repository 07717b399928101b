#pragma once

#include <string>
#include <vector>

#include "vqi2i/tensor.hpp"

namespace vqi2i {

// Images are [3, h, w] tensors with values in [-1, 1]. Byte 0 maps to -1,
// byte 255 maps to +1; see byte_to_unit / unit_to_byte for the exact maps.
double byte_to_unit(int b);
int unit_to_byte(double v);

// Reads an 8-bit RGB (color type 2, non-interlaced) PNG. Anything else is an
// error naming the offending file, as is any CRC or structural corruption.
Tensor read_png(const std::string& path);

// Writes [3, h, w] in [-1, 1] as an 8-bit RGB PNG. Output bytes depend only
// on the pixel values, so identical tensors give byte-identical files.
void write_png(const std::string& path, const Tensor& image);

// Nearest-neighbour resize of a [3, h, w] image to [3, out_h, out_w].
Tensor resize_nearest(const Tensor& image, int out_h, int out_w);

// Row-major montage of rows*cols equally sized images with 2-px black
// separator bars between neighbouring tiles.
Tensor render_grid(const std::vector<Tensor>& images, int rows, int cols);

}  // namespace vqi2i
