#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace acnet {

enum class Domain { kSketch, kPhoto, kSynthesized };

inline const char* domain_name(Domain d) {
  switch (d) {
    case Domain::kSketch: return "sketch";
    case Domain::kPhoto: return "photo";
    case Domain::kSynthesized: return "synthesized";
  }
  return "?";
}

inline Domain domain_from_name(const std::string& s) {
  if (s == "sketch") return Domain::kSketch;
  if (s == "photo") return Domain::kPhoto;
  if (s == "synthesized") return Domain::kSynthesized;
  throw std::invalid_argument("unknown domain '" + s + "'");
}

// CHW float pixels in [-1, 1], 3 channels.
struct LabeledImage {
  std::vector<float> pixels;
  int label = 0;
  Domain domain = Domain::kPhoto;
  int side = 0;
};

struct Dataset {
  int side = 0;
  std::vector<LabeledImage> items;

  int size() const { return static_cast<int>(items.size()); }

  std::vector<int> indices(Domain domain) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i) {
      if (items[i].domain == domain) out.push_back(i);
    }
    return out;
  }

  std::vector<int> indices(Domain domain, int label) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i) {
      if (items[i].domain == domain && items[i].label == label) out.push_back(i);
    }
    return out;
  }

  std::vector<int> class_labels() const {
    std::vector<int> out;
    for (const auto& item : items) {
      bool seen = false;
      for (int l : out) seen = seen || l == item.label;
      if (!seen) out.push_back(item.label);
    }
    return out;
  }
};

// Mean per-pixel L1 distance between two images of equal size, averaged over
// all channels and positions.
inline double mean_l1_distance(const LabeledImage& a, const LabeledImage& b) {
  if (a.pixels.size() != b.pixels.size()) {
    throw std::invalid_argument("mean_l1_distance: image sizes differ");
  }
  double acc = 0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    acc += std::abs(static_cast<double>(a.pixels[i]) - b.pixels[i]);
  }
  return acc / static_cast<double>(a.pixels.size());
}

// PNG I/O. Pixels cross the file boundary as 8-bit RGB; [-1, 1] floats are
// quantized with round((v + 1) * 127.5).
void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<uint8_t>& rgb);
std::vector<uint8_t> read_png_rgb(const std::string& path, int& width, int& height);

std::vector<uint8_t> quantize_image(const std::vector<float>& chw, int side);
std::vector<float> dequantize_image(const std::vector<uint8_t>& rgb, int width,
                                    int height);

// Bilinear resample of interleaved RGB bytes.
std::vector<uint8_t> resize_rgb(const std::vector<uint8_t>& rgb, int width, int height,
                                int new_width, int new_height);

void save_image(const std::string& path, const LabeledImage& image);
LabeledImage load_image(const std::string& path, int target_side, int label,
                        Domain domain);

}  // namespace acnet
