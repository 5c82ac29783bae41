#include "seea/image.hpp"

#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

namespace seea {

Tensor<float> load_image_rgb(const std::string& path) {
  cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);  // BGR, 8-bit
  if (img.empty()) {
    throw IoError("cannot decode image: " + path);
  }
  Tensor<float> out({3, img.rows, img.cols});
  const size_t plane = static_cast<size_t>(img.rows) * img.cols;
  for (int y = 0; y < img.rows; ++y) {
    const cv::Vec3b* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x) {
      const size_t i = static_cast<size_t>(y) * img.cols + x;
      out[i] = static_cast<float>(row[x][2]) / 255.0f;              // R
      out[plane + i] = static_cast<float>(row[x][1]) / 255.0f;      // G
      out[2 * plane + i] = static_cast<float>(row[x][0]) / 255.0f;  // B
    }
  }
  return out;
}

Tensor<float> load_mask(const std::string& path) {
  cv::Mat img = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (img.empty()) {
    throw IoError("cannot decode mask: " + path);
  }
  Tensor<float> out({1, img.rows, img.cols});
  for (int y = 0; y < img.rows; ++y) {
    const uint8_t* row = img.ptr<uint8_t>(y);
    for (int x = 0; x < img.cols; ++x) {
      out[static_cast<size_t>(y) * img.cols + x] = row[x] > 127 ? 1.0f : 0.0f;
    }
  }
  return out;
}

void save_image(const std::string& path, const Tensor<float>& image) {
  if (image.ndim() != 3 || (image.dim(0) != 3 && image.dim(0) != 1)) {
    throw ShapeError("save_image: expected [3,H,W] or [1,H,W], got " + shape_str(image.shape()));
  }
  const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const size_t plane = static_cast<size_t>(H) * W;
  auto to_byte = [](float v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  };
  cv::Mat img(H, W, C == 3 ? CV_8UC3 : CV_8UC1);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const size_t i = static_cast<size_t>(y) * W + x;
      if (C == 3) {
        img.at<cv::Vec3b>(y, x) =
            cv::Vec3b(to_byte(image[2 * plane + i]), to_byte(image[plane + i]), to_byte(image[i]));
      } else {
        img.at<uint8_t>(y, x) = to_byte(image[i]);
      }
    }
  }
  if (!cv::imwrite(path, img)) {
    throw IoError("cannot write image: " + path);
  }
}

Tensor<float> resize_bilinear(const Tensor<float>& chw, int out_h, int out_w) {
  if (chw.ndim() != 3) {
    throw ShapeError("resize_bilinear: expected [C,H,W], got " + shape_str(chw.shape()));
  }
  const int C = chw.dim(0), H = chw.dim(1), W = chw.dim(2);
  if (out_h == H && out_w == W) return chw;
  Tensor<float> out({C, out_h, out_w});
  const double sy = static_cast<double>(H) / out_h;
  const double sx = static_cast<double>(W) / out_w;
  for (int c = 0; c < C; ++c) {
    const float* src = chw.data() + static_cast<size_t>(c) * H * W;
    float* dst = out.data() + static_cast<size_t>(c) * out_h * out_w;
    for (int y = 0; y < out_h; ++y) {
      const double fy = (y + 0.5) * sy - 0.5;
      const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, H - 1);
      const int y1 = std::min(y0 + 1, H - 1);
      const double wy = std::clamp(fy - y0, 0.0, 1.0);
      for (int x = 0; x < out_w; ++x) {
        const double fx = (x + 0.5) * sx - 0.5;
        const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, W - 1);
        const int x1 = std::min(x0 + 1, W - 1);
        const double wx = std::clamp(fx - x0, 0.0, 1.0);
        const double top = src[y0 * W + x0] * (1.0 - wx) + src[y0 * W + x1] * wx;
        const double bot = src[y1 * W + x0] * (1.0 - wx) + src[y1 * W + x1] * wx;
        dst[static_cast<size_t>(y) * out_w + x] = static_cast<float>(top * (1.0 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Tensor<float> resize_nearest(const Tensor<float>& chw, int out_h, int out_w) {
  if (chw.ndim() != 3) {
    throw ShapeError("resize_nearest: expected [C,H,W], got " + shape_str(chw.shape()));
  }
  const int C = chw.dim(0), H = chw.dim(1), W = chw.dim(2);
  if (out_h == H && out_w == W) return chw;
  Tensor<float> out({C, out_h, out_w});
  const double sy = static_cast<double>(H) / out_h;
  const double sx = static_cast<double>(W) / out_w;
  for (int c = 0; c < C; ++c) {
    const float* src = chw.data() + static_cast<size_t>(c) * H * W;
    float* dst = out.data() + static_cast<size_t>(c) * out_h * out_w;
    for (int y = 0; y < out_h; ++y) {
      const int ys = std::min(static_cast<int>((y + 0.5) * sy), H - 1);
      for (int x = 0; x < out_w; ++x) {
        const int xs = std::min(static_cast<int>((x + 0.5) * sx), W - 1);
        dst[static_cast<size_t>(y) * out_w + x] = src[ys * W + xs];
      }
    }
  }
  return out;
}

void binarize(Tensor<float>& t, float threshold) {
  for (size_t i = 0; i < t.size(); ++i) t[i] = t[i] > threshold ? 1.0f : 0.0f;
}

Tensor<float> overlay_mask_boundary(const Tensor<float>& image_rgb, const Tensor<float>& mask) {
  if (image_rgb.ndim() != 3 || image_rgb.dim(0) != 3 || mask.ndim() != 3 || mask.dim(0) != 1 ||
      mask.dim(1) != image_rgb.dim(1) || mask.dim(2) != image_rgb.dim(2)) {
    throw ShapeError("overlay: image " + shape_str(image_rgb.shape()) + " and mask " +
                     shape_str(mask.shape()) + " are incompatible");
  }
  const int H = image_rgb.dim(1), W = image_rgb.dim(2);
  const size_t plane = static_cast<size_t>(H) * W;
  Tensor<float> out({3, H, W});
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const size_t i = static_cast<size_t>(y) * W + x;
      const float gray =
          0.299f * image_rgb[i] + 0.587f * image_rgb[plane + i] + 0.114f * image_rgb[2 * plane + i];
      out[i] = out[plane + i] = out[2 * plane + i] = gray;
    }
  }
  auto at = [&](int y, int x) { return mask[static_cast<size_t>(y) * W + x] > 0.5f; };
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (!at(y, x)) continue;
      const bool boundary = (y == 0 || !at(y - 1, x)) || (y == H - 1 || !at(y + 1, x)) ||
                            (x == 0 || !at(y, x - 1)) || (x == W - 1 || !at(y, x + 1));
      if (boundary) {
        const size_t i = static_cast<size_t>(y) * W + x;
        out[i] = 1.0f;
        out[plane + i] = 0.0f;
        out[2 * plane + i] = 0.0f;
      }
    }
  }
  return out;
}

}  // namespace seea
