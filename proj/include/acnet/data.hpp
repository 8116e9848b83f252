#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acnet/image.hpp"
#include "acnet/tensor.hpp"

namespace acnet {

// Procedural two-domain benchmark. Each class id maps to a fixed shape
// family (a radial boundary profile plus aspect); samples draw nuisance
// parameters (pose, jitter, texture, background) from seeded streams.
// Sketches render the outline as dark strokes on light ground; photos fill
// the same geometry with texture over a nonuniform background.
struct SyntheticShapeSpec {
  int n_classes = 12;
  int sketches_per_class = 40;
  int photos_per_class = 40;
  int side = 64;
  uint64_t seed = 1;

  void validate() const;
};

Dataset generate_synthetic_dataset(const SyntheticShapeSpec& spec);

// Render a single sample; sketch index i and photo index i share base
// geometry, so instance-paired experiments are possible.
LabeledImage render_sample(const SyntheticShapeSpec& spec, int class_id, int index,
                           Domain domain);

struct ZeroShotSplit {
  std::vector<int> seen_classes;
  std::vector<int> unseen_classes;
  std::vector<int> train_sketches;
  std::vector<int> train_photos;
  std::vector<int> test_sketches;
  std::vector<int> test_photos;
};

// Deterministic disjoint seen/unseen class partition. Every class must
// appear in both domains; training lists carry only seen labels and test
// lists only unseen ones.
ZeroShotSplit make_zero_shot_split(const Dataset& dataset, int n_unseen, uint64_t seed);

struct Batch {
  Tensor<float> sketches;  // [B, 3, side, side]
  Tensor<float> photos;
  std::vector<int> sketch_labels;
  std::vector<int> photo_labels;
};

// Class-aligned mode pairs a sketch and photo of the same label at every
// position, with labels drawn balanced over the seen classes (exactly
// balanced when batch_size divides evenly).
Batch sample_batch(const Dataset& dataset, const ZeroShotSplit& split, int batch_size,
                   uint64_t seed, bool class_aligned);

// Stack arbitrary dataset items into a [n, 3, side, side] tensor.
Tensor<float> stack_images(const Dataset& dataset, const std::vector<int>& indices);
Tensor<float> stack_images(const std::vector<LabeledImage>& images);

// On-disk layout: <dir>/images/<domain>/<label>_<index>.png plus a
// tab-separated manifest.tsv with lines "relative_path<TAB>label<TAB>domain".
void export_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_image_folder(const std::string& root, const std::string& manifest_name,
                          int side);

}  // namespace acnet
