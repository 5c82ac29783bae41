#pragma once

#include <string>

#include "seea/tensor.hpp"

namespace seea {

/// Decodes a PNG/JPEG file to a [3,H,W] float tensor in [0,1] (RGB order).
Tensor<float> load_image_rgb(const std::string& path);

/// Decodes a mask file to [1,H,W] with values in {0,1}; pixels brighter than
/// 127/255 map to 1.
Tensor<float> load_mask(const std::string& path);

/// Encodes a [3,H,W] tensor in [0,1] (or [1,H,W] grayscale) to a PNG/JPEG
/// file chosen by extension.
void save_image(const std::string& path, const Tensor<float>& image);

/// Half-pixel-centre bilinear resample of a [C,H,W] tensor.
Tensor<float> resize_bilinear(const Tensor<float>& chw, int out_h, int out_w);

/// Nearest-neighbour resample of a [C,H,W] tensor; preserves the value set.
Tensor<float> resize_nearest(const Tensor<float>& chw, int out_h, int out_w);

/// Binarize in place at the given threshold (strictly-greater test).
void binarize(Tensor<float>& t, float threshold = 0.5f);

/// Grayscale rendering of an RGB image with the mask boundary drawn in red.
Tensor<float> overlay_mask_boundary(const Tensor<float>& image_rgb, const Tensor<float>& mask);

}  // namespace seea
