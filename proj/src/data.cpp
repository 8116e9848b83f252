#include "acnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "acnet/rng.hpp"

namespace acnet {

namespace {

constexpr double kPi = 3.14159265358979323846;

// A class's shape family: a radial boundary profile r(theta) in [0, 1]
// scaled by aspect along x. Polygons use the polar n-gon equation, stars a
// sharpened cosine ridge, blobs a low-frequency radial modulation.
struct ShapeFamily {
  enum Kind { kPolygon, kStar, kBlob } kind = kBlob;
  int order = 3;        // vertices (polygon/star) or bump frequency (blob)
  double amp = 0.0;     // blob modulation amplitude / star depth
  double aspect = 1.0;  // x stretch
};

ShapeFamily family_for_class(int class_id) {
  switch (class_id % 12) {
    case 0: return {ShapeFamily::kPolygon, 3, 0.0, 1.0};
    case 1: return {ShapeFamily::kPolygon, 4, 0.0, 1.0};
    case 2: return {ShapeFamily::kPolygon, 5, 0.0, 1.0};
    case 3: return {ShapeFamily::kPolygon, 6, 0.0, 1.0};
    case 4: return {ShapeFamily::kBlob, 1, 0.0, 1.0};      // circle
    case 5: return {ShapeFamily::kBlob, 1, 0.0, 2.0};      // ellipse
    case 6: return {ShapeFamily::kBlob, 3, 0.30, 1.0};
    case 7: return {ShapeFamily::kBlob, 5, 0.25, 1.0};
    case 8: return {ShapeFamily::kStar, 4, 0.55, 1.0};
    case 9: return {ShapeFamily::kStar, 6, 0.50, 1.0};
    case 10: return {ShapeFamily::kBlob, 2, 0.45, 1.0};    // peanut
    default: return {ShapeFamily::kStar, 8, 0.28, 1.0};    // shallow gear
  }
}

double radial_profile(const ShapeFamily& f, double theta, int variant) {
  switch (f.kind) {
    case ShapeFamily::kPolygon: {
      const double sector = 2.0 * kPi / f.order;
      double t = std::fmod(theta, sector);
      if (t < 0) t += sector;
      return std::cos(kPi / f.order) / std::cos(t - sector / 2.0);
    }
    case ShapeFamily::kStar: {
      const double ridge = 0.5 + 0.5 * std::cos(f.order * theta);
      return (1.0 - f.amp) + f.amp * std::pow(ridge, 1.5);
    }
    case ShapeFamily::kBlob:
    default:
      // variant nudges bump phase so classes beyond the curated 12 differ
      return 1.0 + f.amp * std::cos(f.order * theta + 0.7 * variant);
  }
}

// Pose and shape parameters shared by the sketch and photo renderers of one
// sample.
struct SampleGeometry {
  ShapeFamily family;
  int variant = 0;
  double rotation = 0;
  double radius = 0;   // pixels
  double cx = 0, cy = 0;
  double aspect = 1.0;
};

SampleGeometry base_geometry(const SyntheticShapeSpec& spec, int class_id, int index) {
  Rng rng = Rng::fork(spec.seed, static_cast<uint64_t>(class_id),
                      static_cast<uint64_t>(index), 0);
  SampleGeometry g;
  g.family = family_for_class(class_id);
  g.variant = class_id / 12;
  g.rotation = rng.uniform(-0.55, 0.55);
  g.radius = spec.side * rng.uniform(0.26, 0.36);
  g.cx = spec.side * (0.5 + rng.uniform(-0.05, 0.05));
  g.cy = spec.side * (0.5 + rng.uniform(-0.05, 0.05));
  g.aspect = g.family.aspect * rng.uniform(0.86, 1.14);
  return g;
}

// Signed radial coordinate: ratio of the point's distance to the boundary
// radius along its direction; < 1 means inside.
double boundary_ratio(const SampleGeometry& g, double px, double py) {
  const double dx0 = px - g.cx;
  const double dy0 = py - g.cy;
  const double cos_r = std::cos(-g.rotation);
  const double sin_r = std::sin(-g.rotation);
  const double dx = (dx0 * cos_r - dy0 * sin_r) / g.aspect;
  const double dy = dx0 * sin_r + dy0 * cos_r;
  const double dist = std::sqrt(dx * dx + dy * dy);
  if (dist < 1e-9) return 0.0;
  const double theta = std::atan2(dy, dx);
  const double r = radial_profile(g.family, theta, g.variant) * g.radius;
  return dist / std::max(r, 1e-9);
}

std::vector<std::pair<double, double>> boundary_points(const SampleGeometry& g,
                                                       int count) {
  std::vector<std::pair<double, double>> pts(count);
  const double cos_r = std::cos(g.rotation);
  const double sin_r = std::sin(g.rotation);
  for (int k = 0; k < count; ++k) {
    const double theta = 2.0 * kPi * k / count;
    const double r = radial_profile(g.family, theta, g.variant) * g.radius;
    const double x = r * std::cos(theta) * g.aspect;
    const double y = r * std::sin(theta);
    pts[k] = {g.cx + x * cos_r - y * sin_r, g.cy + x * sin_r + y * cos_r};
  }
  return pts;
}

double dist_to_segment(double px, double py, double ax, double ay, double bx,
                       double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::max(0.0, std::min(1.0, t));
  const double dx = px - (ax + t * vx);
  const double dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

LabeledImage render_sketch(const SyntheticShapeSpec& spec, int class_id, int index,
                           const SampleGeometry& g) {
  Rng rng = Rng::fork(spec.seed, static_cast<uint64_t>(class_id),
                      static_cast<uint64_t>(index), 1);
  const int side = spec.side;
  const int n_pts = 96;
  auto pts = boundary_points(g, n_pts);

  // Hand wobble: two radial sine components per contour plus pointwise noise.
  const double j1 = rng.uniform(0.3, 1.1), p1 = rng.uniform(0, 2 * kPi);
  const double j2 = rng.uniform(0.2, 0.8), p2 = rng.uniform(0, 2 * kPi);
  for (int k = 0; k < n_pts; ++k) {
    const double along = 2.0 * kPi * k / n_pts;
    const double wobble = j1 * std::sin(3 * along + p1) + j2 * std::sin(7 * along + p2);
    const double dx = pts[k].first - g.cx;
    const double dy = pts[k].second - g.cy;
    const double norm = std::max(std::sqrt(dx * dx + dy * dy), 1e-9);
    pts[k].first += wobble * dx / norm + rng.uniform(-0.3, 0.3);
    pts[k].second += wobble * dy / norm + rng.uniform(-0.3, 0.3);
  }

  // Width tracks resolution so outlines stay sparse at small sides.
  const double stroke_width =
      std::clamp(rng.uniform(0.7, 1.2) * spec.side / 64.0, 0.4, 1.3);
  const float ink = static_cast<float>(rng.uniform(-0.9, -0.6));
  const float paper = static_cast<float>(rng.uniform(0.86, 0.95));

  LabeledImage img;
  img.side = side;
  img.label = class_id;
  img.domain = Domain::kSketch;
  img.pixels.assign(static_cast<size_t>(3) * side * side, 0.f);
  const size_t plane = static_cast<size_t>(side) * side;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double d = 1e30;
      for (int k = 0; k < n_pts; ++k) {
        const auto& a = pts[k];
        const auto& b = pts[(k + 1) % n_pts];
        d = std::min(d, dist_to_segment(px, py, a.first, a.second, b.first, b.second));
        if (d < 1e-3) break;
      }
      // Soft-edged stroke profile.
      const double cover = std::max(0.0, std::min(1.0, stroke_width + 0.5 - d));
      const float noise = static_cast<float>(rng.uniform(-0.03, 0.03));
      const float v = static_cast<float>(paper + (ink - paper) * cover) + noise;
      for (int c = 0; c < 3; ++c) {
        img.pixels[c * plane + y * side + x] = std::min(1.f, std::max(-1.f, v));
      }
    }
  }
  return img;
}

LabeledImage render_photo(const SyntheticShapeSpec& spec, int class_id, int index,
                          const SampleGeometry& g) {
  Rng rng = Rng::fork(spec.seed, static_cast<uint64_t>(class_id),
                      static_cast<uint64_t>(index), 2);
  const int side = spec.side;

  float bg_a[3], bg_b[3], fill[3];
  for (int c = 0; c < 3; ++c) bg_a[c] = static_cast<float>(rng.uniform(0.25, 0.85));
  for (int c = 0; c < 3; ++c) bg_b[c] = static_cast<float>(rng.uniform(0.25, 0.85));
  for (int c = 0; c < 3; ++c) fill[c] = static_cast<float>(rng.uniform(-0.8, -0.15));
  const double grad_angle = rng.uniform(0, 2 * kPi);
  const double gx = std::cos(grad_angle), gy = std::sin(grad_angle);
  const double stripe_angle = rng.uniform(0, kPi);
  const double stripe_freq = 2 * kPi * rng.uniform(3.0, 8.0) / side;
  const double sx = std::cos(stripe_angle) * stripe_freq;
  const double sy = std::sin(stripe_angle) * stripe_freq;
  const double stripe_phase = rng.uniform(0, 2 * kPi);
  const float stripe_amp = static_cast<float>(rng.uniform(0.08, 0.18));

  LabeledImage img;
  img.side = side;
  img.label = class_id;
  img.domain = Domain::kPhoto;
  img.pixels.assign(static_cast<size_t>(3) * side * side, 0.f);
  const size_t plane = static_cast<size_t>(side) * side;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      // 2x2 supersampled coverage for smooth silhouettes.
      double cover = 0;
      for (int su = 0; su < 2; ++su) {
        for (int sv = 0; sv < 2; ++sv) {
          const double px = x + 0.25 + 0.5 * su;
          const double py = y + 0.25 + 0.5 * sv;
          if (boundary_ratio(g, px, py) < 1.0) cover += 0.25;
        }
      }
      const double t = 0.5 + 0.5 * ((x - side / 2.0) * gx + (y - side / 2.0) * gy) / side;
      const float stripe =
          stripe_amp * static_cast<float>(std::sin(sx * x + sy * y + stripe_phase));
      for (int c = 0; c < 3; ++c) {
        const float bg = static_cast<float>(bg_a[c] * (1 - t) + bg_b[c] * t) +
                         static_cast<float>(rng.uniform(-0.03, 0.03));
        const float obj = fill[c] + stripe + static_cast<float>(rng.uniform(-0.04, 0.04));
        const float v = static_cast<float>(bg * (1 - cover) + obj * cover);
        img.pixels[c * plane + y * side + x] = std::min(1.f, std::max(-1.f, v));
      }
    }
  }
  return img;
}

}  // namespace

void SyntheticShapeSpec::validate() const {
  if (side % 4 != 0 || side < 16) {
    throw std::invalid_argument("dataset: side must be >= 16 and divisible by 4");
  }
  if (n_classes < 1 || sketches_per_class < 1 || photos_per_class < 1) {
    throw std::invalid_argument("dataset: class and per-class counts must be >= 1");
  }
}

LabeledImage render_sample(const SyntheticShapeSpec& spec, int class_id, int index,
                           Domain domain) {
  const SampleGeometry g = base_geometry(spec, class_id, index);
  return domain == Domain::kSketch ? render_sketch(spec, class_id, index, g)
                                   : render_photo(spec, class_id, index, g);
}

Dataset generate_synthetic_dataset(const SyntheticShapeSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.side = spec.side;
  ds.items.reserve(static_cast<size_t>(spec.n_classes) *
                   (spec.sketches_per_class + spec.photos_per_class));
  for (int cls = 0; cls < spec.n_classes; ++cls) {
    for (int i = 0; i < spec.sketches_per_class; ++i) {
      ds.items.push_back(render_sample(spec, cls, i, Domain::kSketch));
    }
  }
  for (int cls = 0; cls < spec.n_classes; ++cls) {
    for (int i = 0; i < spec.photos_per_class; ++i) {
      ds.items.push_back(render_sample(spec, cls, i, Domain::kPhoto));
    }
  }
  return ds;
}

ZeroShotSplit make_zero_shot_split(const Dataset& dataset, int n_unseen, uint64_t seed) {
  std::set<int> classes;
  for (const auto& item : dataset.items) classes.insert(item.label);
  if (n_unseen < 1 || n_unseen >= static_cast<int>(classes.size())) {
    throw std::invalid_argument("split: n_unseen must be in [1, n_classes)");
  }
  for (int cls : classes) {
    const bool has_sketch = !dataset.indices(Domain::kSketch, cls).empty();
    const bool has_photo = !dataset.indices(Domain::kPhoto, cls).empty();
    if (!has_sketch || !has_photo) {
      throw std::invalid_argument("split: class " + std::to_string(cls) + " lacks a " +
                                  (has_sketch ? "photo" : "sketch") + " sample");
    }
  }
  std::vector<int> order(classes.begin(), classes.end());
  Rng rng = Rng::fork(seed, 0x5eed);
  rng.shuffle(order);
  ZeroShotSplit split;
  split.unseen_classes.assign(order.begin(), order.begin() + n_unseen);
  split.seen_classes.assign(order.begin() + n_unseen, order.end());
  std::sort(split.unseen_classes.begin(), split.unseen_classes.end());
  std::sort(split.seen_classes.begin(), split.seen_classes.end());
  const std::set<int> unseen(split.unseen_classes.begin(), split.unseen_classes.end());
  for (int i = 0; i < dataset.size(); ++i) {
    const auto& item = dataset.items[i];
    const bool test = unseen.count(item.label) > 0;
    if (item.domain == Domain::kSketch) {
      (test ? split.test_sketches : split.train_sketches).push_back(i);
    } else if (item.domain == Domain::kPhoto) {
      (test ? split.test_photos : split.train_photos).push_back(i);
    }
  }
  return split;
}

Tensor<float> stack_images(const Dataset& dataset, const std::vector<int>& indices) {
  std::vector<LabeledImage> items;
  items.reserve(indices.size());
  for (int i : indices) items.push_back(dataset.items[i]);
  return stack_images(items);
}

Tensor<float> stack_images(const std::vector<LabeledImage>& images) {
  if (images.empty()) throw std::invalid_argument("stack_images: empty batch");
  const int side = images[0].side;
  const size_t per = static_cast<size_t>(3) * side * side;
  auto out = Tensor<float>::zeros({static_cast<int>(images.size()), 3, side, side});
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i].side != side) {
      throw std::invalid_argument("stack_images: mixed image sides");
    }
    std::copy(images[i].pixels.begin(), images[i].pixels.end(),
              out.values().begin() + i * per);
  }
  return out;
}

Batch sample_batch(const Dataset& dataset, const ZeroShotSplit& split, int batch_size,
                   uint64_t seed, bool class_aligned) {
  if (batch_size < 1 ||
      batch_size > static_cast<int>(split.train_sketches.size()) ||
      batch_size > static_cast<int>(split.train_photos.size())) {
    throw std::invalid_argument("sample_batch: batch_size " + std::to_string(batch_size) +
                                " exceeds available items");
  }
  Rng rng = Rng::fork(seed, 0xba7c);
  Batch batch;
  std::vector<int> sketch_idx, photo_idx;
  if (class_aligned) {
    // Per-class pools drawn with balanced labels.
    std::map<int, std::vector<int>> sketch_pool, photo_pool;
    for (int i : split.train_sketches) sketch_pool[dataset.items[i].label].push_back(i);
    for (int i : split.train_photos) photo_pool[dataset.items[i].label].push_back(i);
    std::vector<int> classes;
    for (const auto& [cls, pool] : sketch_pool) {
      if (photo_pool.count(cls)) classes.push_back(cls);
    }
    std::vector<int> label_seq;
    while (static_cast<int>(label_seq.size()) < batch_size) {
      std::vector<int> round = classes;
      rng.shuffle(round);
      for (int cls : round) {
        if (static_cast<int>(label_seq.size()) < batch_size) label_seq.push_back(cls);
      }
    }
    for (int cls : label_seq) {
      const auto& sp = sketch_pool[cls];
      const auto& pp = photo_pool[cls];
      sketch_idx.push_back(sp[rng.uniform_int(static_cast<int>(sp.size()))]);
      photo_idx.push_back(pp[rng.uniform_int(static_cast<int>(pp.size()))]);
    }
  } else {
    for (int i = 0; i < batch_size; ++i) {
      sketch_idx.push_back(
          split.train_sketches[rng.uniform_int(static_cast<int>(split.train_sketches.size()))]);
      photo_idx.push_back(
          split.train_photos[rng.uniform_int(static_cast<int>(split.train_photos.size()))]);
    }
  }
  batch.sketches = stack_images(dataset, sketch_idx);
  batch.photos = stack_images(dataset, photo_idx);
  for (int i : sketch_idx) batch.sketch_labels.push_back(dataset.items[i].label);
  for (int i : photo_idx) batch.photo_labels.push_back(dataset.items[i].label);
  return batch;
}

void export_dataset(const Dataset& dataset, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::map<std::pair<int, int>, int> counters;  // (domain, label) -> next index
  std::ostringstream manifest;
  for (const auto& item : dataset.items) {
    const int domain_key = static_cast<int>(item.domain);
    const int n = counters[{domain_key, item.label}]++;
    char name[64];
    std::snprintf(name, sizeof(name), "%d_%03d.png", item.label, n);
    const std::string rel = std::string("images/") + domain_name(item.domain) + "/" + name;
    const fs::path full = fs::path(dir) / rel;
    fs::create_directories(full.parent_path());
    save_image(full.string(), item);
    manifest << rel << '\t' << item.label << '\t' << domain_name(item.domain) << '\n';
  }
  std::ofstream out(fs::path(dir) / "manifest.tsv");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << manifest.str();
}

Dataset load_image_folder(const std::string& root, const std::string& manifest_name,
                          int side) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = fs::path(root) / manifest_name;
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  Dataset ds;
  ds.side = side;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string rel, label_str, domain_str;
    if (!std::getline(row, rel, '\t') || !std::getline(row, label_str, '\t') ||
        !std::getline(row, domain_str)) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               " is not path<TAB>label<TAB>domain: " + line);
    }
    int label = 0;
    try {
      size_t used = 0;
      label = std::stoi(label_str, &used);
      if (used != label_str.size()) throw std::invalid_argument(label_str);
    } catch (const std::exception&) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": bad label '" + label_str + "' for " + rel);
    }
    const fs::path full = fs::path(root) / rel;
    if (!fs::exists(full)) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": missing file " + full.string());
    }
    ds.items.push_back(load_image(full.string(), side, label, domain_from_name(domain_str)));
  }
  return ds;
}

}  // namespace acnet
