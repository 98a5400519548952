#pragma once

#include "cctn/tensor.hpp"
#include "cctn/types.hpp"

#include <string>

namespace cctn {

// Binary portable pixmap/graymap (P6/P5, maxval 255). Images load as 3xHxW
// tensors in [0,1]; graymaps replicate to three channels.
Tensorf read_image_pnm(const std::string& path);
void write_image_ppm(const Tensorf& image, const std::string& path);

// Heat-maps serialize as 8-bit graymaps, value = round(255*p).
void write_heatmap_pgm(const MapF& map, const std::string& path);
MapF read_heatmap_pgm(const std::string& path);

}  // namespace cctn
