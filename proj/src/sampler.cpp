#include "maskseed/sampler.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "maskseed/io.hpp"

namespace maskseed {

using json = nlohmann::json;

// ------------------------------------------------------------- annotations

BBox bbox_of_mask(const std::vector<std::uint8_t>& mask, int width, int height) {
  int x0 = width, y0 = height, x1 = -1, y1 = -1;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* row = mask.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      if (!row[x]) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {0, 0, 0, 0};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

// ------------------------------------------------------------- synthetic scenes

namespace {

struct ShapeDraw {
  ShapeKind kind;
  double cx, cy, max_dim;
  double aspect;      // rect
  double inner_frac;  // annulus
  double vx[3], vy[3];  // triangle
  float color[3];
};

bool inside_shape(const ShapeDraw& s, double px, double py) {
  switch (s.kind) {
    case ShapeKind::Disk: {
      const double r = s.max_dim / 2.0;
      const double dx = px - s.cx, dy = py - s.cy;
      return dx * dx + dy * dy <= r * r;
    }
    case ShapeKind::Rect: {
      const double hw = s.max_dim / 2.0, hh = s.max_dim * s.aspect / 2.0;
      return px >= s.cx - hw && px < s.cx + hw && py >= s.cy - hh && py < s.cy + hh;
    }
    case ShapeKind::Triangle: {
      auto cross = [&](int i, int j) {
        return (s.vx[j] - s.vx[i]) * (py - s.vy[i]) - (s.vy[j] - s.vy[i]) * (px - s.vx[i]);
      };
      const double c0 = cross(0, 1), c1 = cross(1, 2), c2 = cross(2, 0);
      const bool has_neg = c0 < 0 || c1 < 0 || c2 < 0;
      const bool has_pos = c0 > 0 || c1 > 0 || c2 > 0;
      return !(has_neg && has_pos);
    }
    case ShapeKind::Annulus: {
      const double r_out = s.max_dim / 2.0;
      const double r_in = r_out * s.inner_frac;
      const double dx = px - s.cx, dy = py - s.cy;
      const double d2 = dx * dx + dy * dy;
      return d2 > r_in * r_in && d2 <= r_out * r_out;
    }
  }
  return false;
}

void pick_contrasting_color(float out[3], const float base[3], Rng& rng) {
  for (int tries = 0; tries < 64; ++tries) {
    float c[3] = {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                  static_cast<float>(rng.uniform())};
    const double d = std::fabs(c[0] - base[0]) + std::fabs(c[1] - base[1]) + std::fabs(c[2] - base[2]);
    if (d >= 0.5) {
      out[0] = c[0];
      out[1] = c[1];
      out[2] = c[2];
      return;
    }
  }
  out[0] = 1.0f - base[0];
  out[1] = 1.0f - base[1];
  out[2] = 1.0f - base[2];
}

}  // namespace

Scene generate_scene(const SyntheticSpec& spec, Rng& rng) {
  const int n = spec.image_size;
  Scene scene;
  scene.image = Tensor<float>({3, n, n});

  float bg[3];
  for (float& v : bg) v = static_cast<float>(rng.uniform(0.15, 0.85));
  for (int c = 0; c < 3; ++c) {
    float* plane = scene.image.ptr() + static_cast<std::size_t>(c) * n * n;
    std::fill(plane, plane + static_cast<std::size_t>(n) * n, bg[c]);
  }

  const int count = rng.uniform_int(spec.min_shapes, spec.max_shapes);
  std::vector<std::vector<std::uint8_t>> masks;
  std::vector<int> kinds;
  for (int si = 0; si < count; ++si) {
    ShapeDraw s;
    s.kind = static_cast<ShapeKind>(rng.uniform_int(0, 3));
    s.max_dim = rng.uniform(spec.min_size, std::min<double>(spec.max_size, n - 4));
    const double half = s.max_dim / 2.0;
    s.cx = rng.uniform(half + 1, n - half - 1);
    s.cy = rng.uniform(half + 1, n - half - 1);
    s.aspect = rng.uniform(0.4, 1.0);
    s.inner_frac = rng.uniform(0.35, 0.65);
    if (s.kind == ShapeKind::Triangle) {
      for (int attempt = 0;; ++attempt) {
        for (int v = 0; v < 3; ++v) {
          s.vx[v] = s.cx + rng.uniform(-half, half);
          s.vy[v] = s.cy + rng.uniform(-half, half);
        }
        const double area2 = std::fabs((s.vx[1] - s.vx[0]) * (s.vy[2] - s.vy[0]) -
                                       (s.vx[2] - s.vx[0]) * (s.vy[1] - s.vy[0]));
        if (area2 >= 0.3 * s.max_dim * s.max_dim || attempt > 32) break;
      }
    }
    pick_contrasting_color(s.color, bg, rng);

    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
    const int x0 = std::max(0, static_cast<int>(s.cx - half) - 1);
    const int x1 = std::min(n - 1, static_cast<int>(s.cx + half) + 1);
    const int y0 = std::max(0, static_cast<int>(s.cy - half) - 1);
    const int y1 = std::min(n - 1, static_cast<int>(s.cy + half) + 1);
    bool any = false;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!inside_shape(s, x + 0.5, y + 0.5)) continue;
        mask[static_cast<std::size_t>(y) * n + x] = 1;
        any = true;
        for (int c = 0; c < 3; ++c) scene.image.at3(c, y, x) = s.color[c];
      }
    }
    if (!any) continue;
    if (!spec.occlusion && !masks.empty()) {
      // without occlusion, reject overlapping placements
      bool overlaps = false;
      for (const auto& prev : masks) {
        for (std::size_t i = 0; i < mask.size() && !overlaps; ++i) {
          if (mask[i] && prev[i]) overlaps = true;
        }
      }
      if (overlaps) {
        // undo paint: repaint background and earlier shapes is costly; just skip
        continue;
      }
    }
    // painter's order: the new shape hides earlier pixels it covers
    for (auto& prev : masks) {
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) prev[i] = 0;
      }
    }
    masks.push_back(std::move(mask));
    kinds.push_back(static_cast<int>(s.kind));
  }

  int next_id = 1;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    long area = 0;
    for (std::uint8_t v : masks[i]) area += v;
    if (area < spec.min_visible_area) continue;
    InstanceAnnotation ann;
    ann.id = next_id++;
    ann.category_id = kinds[i];
    ann.mask = std::move(masks[i]);
    ann.bbox = bbox_of_mask(ann.mask, n, n);
    ann.area = area;
    scene.annotations.push_back(std::move(ann));
  }

  if (spec.noise_sigma > 0) {
    for (auto& v : scene.image.data) {
      v = static_cast<float>(v + rng.normal() * spec.noise_sigma);
    }
  }
  // quantize to the 8-bit grid so dataset files round-trip exactly
  for (auto& v : scene.image.data) {
    const int q = std::clamp(static_cast<int>(std::lround(v * 255.0f)), 0, 255);
    v = static_cast<float>(q) / 255.0f;
  }

  double sums[3] = {0, 0, 0};
  for (int c = 0; c < 3; ++c) {
    const float* plane = scene.image.ptr() + static_cast<std::size_t>(c) * n * n;
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * n; ++i) sums[c] += plane[i];
    scene.mean_color[c] = static_cast<float>(sums[c] / (static_cast<double>(n) * n));
  }
  return scene;
}

// ------------------------------------------------------------- patch geometry

void SamplerConfig::validate() const {
  if (canonical_max_dim <= 0) throw ConfigError("canonical_max_dim must be positive");
  if (negative_translate <= jitter_translate) {
    throw ConfigError("negative_translate must exceed jitter_translate");
  }
  if (negative_scale_exp <= jitter_scale_exp) {
    throw ConfigError("negative_scale_exp must exceed jitter_scale_exp");
  }
}

int canonical_max_dim_for_patch(int patch_size) {
  return static_cast<int>(std::lround(patch_size * 128.0 / 224.0));
}

PatchPose canonical_pose(const InstanceAnnotation& ann, int patch_size, const SamplerConfig& cfg) {
  PatchPose pose;
  pose.cx = ann.bbox.x + ann.bbox.w / 2.0;
  pose.cy = ann.bbox.y + ann.bbox.h / 2.0;
  pose.side = static_cast<double>(patch_size) * ann.bbox.max_dim() / cfg.canonical_max_dim;
  pose.flip = false;
  return pose;
}

JitterDraw draw_jitter(const SamplerConfig& cfg, Rng& rng) {
  JitterDraw d;
  d.dx = rng.uniform(-cfg.jitter_translate, cfg.jitter_translate);
  d.dy = rng.uniform(-cfg.jitter_translate, cfg.jitter_translate);
  d.scale_exp = rng.uniform(-cfg.jitter_scale_exp, cfg.jitter_scale_exp);
  d.flip = cfg.hflip && rng.bernoulli(0.5);
  return d;
}

PatchPose apply_jitter(const PatchPose& canonical, const JitterDraw& draw, int patch_size) {
  PatchPose pose = canonical;
  const double px = canonical.side / patch_size;  // scene pixels per canonical patch pixel
  pose.cx += draw.dx * px;
  pose.cy += draw.dy * px;
  pose.side = canonical.side * std::exp2(draw.scale_exp);
  pose.flip = draw.flip;
  return pose;
}

PoseDeviation pose_deviation(const PatchPose& pose, const PatchPose& canonical, int patch_size) {
  PoseDeviation d;
  const double px = canonical.side / patch_size;
  d.translate = std::max(std::fabs(pose.cx - canonical.cx), std::fabs(pose.cy - canonical.cy)) / px;
  d.scale_exp = std::fabs(std::log2(pose.side / canonical.side));
  return d;
}

// ------------------------------------------------------------- triplet extraction

namespace {

float sample_pixel(const Scene& scene, int c, int ix, int iy) {
  if (ix < 0 || iy < 0 || ix >= scene.width() || iy >= scene.height()) return scene.mean_color[c];
  return scene.image.at3(c, iy, ix);
}

float bilinear_scene(const Scene& scene, int c, double u, double v) {
  const double gx = u - 0.5, gy = v - 0.5;
  const int x0 = static_cast<int>(std::floor(gx));
  const int y0 = static_cast<int>(std::floor(gy));
  const double tx = gx - x0, ty = gy - y0;
  const double v00 = sample_pixel(scene, c, x0, y0);
  const double v01 = sample_pixel(scene, c, x0 + 1, y0);
  const double v10 = sample_pixel(scene, c, x0, y0 + 1);
  const double v11 = sample_pixel(scene, c, x0 + 1, y0 + 1);
  const double top = v00 + (v01 - v00) * tx;
  const double bot = v10 + (v11 - v10) * tx;
  return static_cast<float>(top + (bot - top) * ty);
}

}  // namespace

TrainingTriplet extract_triplet(const Scene& scene, const PatchPose& pose, int annotation_index,
                                int patch_size) {
  TrainingTriplet t;
  t.patch = Tensor<float>({3, patch_size, patch_size});
  const double step = pose.side / patch_size;
  const double sign = pose.flip ? -1.0 : 1.0;
  const InstanceAnnotation* ann =
      annotation_index >= 0 ? &scene.annotations[static_cast<std::size_t>(annotation_index)] : nullptr;
  if (ann) t.mask.assign(static_cast<std::size_t>(patch_size) * patch_size, -1);
  t.label = ann ? 1 : -1;
  for (int py = 0; py < patch_size; ++py) {
    const double v = pose.cy + (py + 0.5 - patch_size / 2.0) * step;
    for (int px = 0; px < patch_size; ++px) {
      const double u = pose.cx + sign * (px + 0.5 - patch_size / 2.0) * step;
      for (int c = 0; c < 3; ++c) t.patch.at3(c, py, px) = bilinear_scene(scene, c, u, v);
      if (ann) {
        const int ix = static_cast<int>(std::floor(u));
        const int iy = static_cast<int>(std::floor(v));
        const bool inside = ix >= 0 && iy >= 0 && ix < scene.width() && iy < scene.height() &&
                            ann->mask[static_cast<std::size_t>(iy) * scene.width() + ix];
        t.mask[static_cast<std::size_t>(py) * patch_size + px] = inside ? 1 : -1;
      }
    }
  }
  return t;
}

std::optional<EmittedSample> canonical_positive(const Scene& scene, int annotation_index,
                                                int patch_size, const SamplerConfig& cfg) {
  const auto& ann = scene.annotations[static_cast<std::size_t>(annotation_index)];
  if (ann.area <= 0 || ann.bbox.max_dim() <= 0) return std::nullopt;
  EmittedSample s;
  s.pose = canonical_pose(ann, patch_size, cfg);
  s.annotation_index = annotation_index;
  s.triplet = extract_triplet(scene, s.pose, annotation_index, patch_size);
  return s;
}

std::optional<EmittedSample> jitter_positive(const Scene& scene, int annotation_index,
                                             int patch_size, const SamplerConfig& cfg, Rng& rng) {
  const auto& ann = scene.annotations[static_cast<std::size_t>(annotation_index)];
  if (ann.area <= 0 || ann.bbox.max_dim() <= 0) return std::nullopt;
  EmittedSample s;
  const PatchPose canonical = canonical_pose(ann, patch_size, cfg);
  s.draw = draw_jitter(cfg, rng);
  s.pose = apply_jitter(canonical, s.draw, patch_size);
  s.annotation_index = annotation_index;
  s.triplet = extract_triplet(scene, s.pose, annotation_index, patch_size);
  return s;
}

std::optional<EmittedSample> sample_negative(const Scene& scene, int patch_size,
                                             const SamplerConfig& cfg, Rng& rng) {
  std::vector<PatchPose> canonicals;
  canonicals.reserve(scene.annotations.size());
  for (const auto& ann : scene.annotations) {
    canonicals.push_back(canonical_pose(ann, patch_size, cfg));
  }
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    PatchPose pose;
    if (!canonicals.empty()) {
      const auto& base = canonicals[rng.uniform_below(canonicals.size())];
      pose.side = base.side * std::exp2(rng.uniform(-1.5, 1.5));
    } else {
      pose.side = patch_size * std::exp2(rng.uniform(-1.0, 1.0));
    }
    pose.cx = rng.uniform(0, scene.width());
    pose.cy = rng.uniform(0, scene.height());
    bool ok = true;
    for (const auto& canon : canonicals) {
      const PoseDeviation dev = pose_deviation(pose, canon, patch_size);
      if (dev.translate < cfg.negative_translate && dev.scale_exp < cfg.negative_scale_exp) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    EmittedSample s;
    s.pose = pose;
    s.annotation_index = -1;
    s.triplet = extract_triplet(scene, pose, -1, patch_size);
    return s;
  }
  return std::nullopt;
}

// ------------------------------------------------------------- batches

std::vector<TrainingTriplet> make_batch(const std::vector<Scene>& scenes, Branch branch,
                                        int batch_size, int patch_size, const SamplerConfig& cfg,
                                        Rng& rng) {
  if (scenes.empty()) throw UsageError("make_batch: empty dataset");
  std::vector<std::size_t> annotated;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (!scenes[i].annotations.empty()) annotated.push_back(i);
  }
  const int want_pos = branch == Branch::Segmentation ? batch_size : batch_size / 2;
  const int want_neg = branch == Branch::Segmentation ? 0 : batch_size - batch_size / 2;
  if (want_pos > 0 && annotated.empty()) {
    throw UsageError("make_batch: need " + std::to_string(want_pos) +
                     " positives but no scene has annotations");
  }

  std::vector<TrainingTriplet> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  int emitted_pos = 0;
  for (int tries = 0; emitted_pos < want_pos; ++tries) {
    if (tries > want_pos * cfg.max_attempts) {
      throw UsageError("make_batch: exhausted attempts with " + std::to_string(emitted_pos) + "/" +
                       std::to_string(want_pos) + " positives emitted");
    }
    const Scene& scene = scenes[annotated[rng.uniform_below(annotated.size())]];
    const int ann_i = static_cast<int>(rng.uniform_below(scene.annotations.size()));
    auto s = jitter_positive(scene, ann_i, patch_size, cfg, rng);
    if (!s) continue;
    batch.push_back(std::move(s->triplet));
    ++emitted_pos;
  }
  int emitted_neg = 0;
  for (int tries = 0; emitted_neg < want_neg; ++tries) {
    if (tries > want_neg * cfg.max_attempts) {
      throw UsageError("make_batch: exhausted attempts with " + std::to_string(emitted_neg) + "/" +
                       std::to_string(want_neg) + " negatives emitted");
    }
    const Scene& scene = scenes[rng.uniform_below(scenes.size())];
    auto s = sample_negative(scene, patch_size, cfg, rng);
    if (!s) continue;
    batch.push_back(std::move(s->triplet));
    ++emitted_neg;
  }
  // Fisher-Yates
  for (std::size_t i = batch.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_below(i);
    std::swap(batch[i - 1], batch[j]);
  }
  return batch;
}

// ------------------------------------------------------------- mask RLE

std::vector<std::int64_t> rle_encode(const std::uint8_t* bits, std::size_t n) {
  std::vector<std::int64_t> runs;
  std::uint8_t current = 0;
  std::int64_t len = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t v = bits[i] ? 1 : 0;
    if (v == current) {
      ++len;
    } else {
      runs.push_back(len);
      current = v;
      len = 1;
    }
  }
  runs.push_back(len);
  return runs;
}

std::vector<std::uint8_t> rle_decode(const std::vector<std::int64_t>& runs, std::size_t n) {
  std::vector<std::uint8_t> out(n, 0);
  std::size_t pos = 0;
  std::uint8_t v = 0;
  for (std::int64_t run : runs) {
    if (run < 0 || pos + static_cast<std::size_t>(run) > n) {
      throw DataError("RLE runs exceed mask size");
    }
    if (v) std::fill(out.begin() + pos, out.begin() + pos + run, std::uint8_t(1));
    pos += static_cast<std::size_t>(run);
    v = !v;
  }
  if (pos != n) throw DataError("RLE runs do not cover the mask");
  return out;
}

long rle_area(const std::vector<std::int64_t>& runs) {
  long a = 0;
  for (std::size_t i = 1; i < runs.size(); i += 2) a += runs[i];
  return a;
}

// ------------------------------------------------------------- dataset files

void save_annotations(const std::vector<Scene>& scenes, const std::string& path,
                      bool inline_pixels) {
  json doc = json::array();
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const Scene& s = scenes[si];
    const int w = s.width(), h = s.height();
    json js;
    js["width"] = w;
    js["height"] = h;
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          const float v = s.image.at3(c, y, x);
          rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
              static_cast<std::uint8_t>(std::clamp(static_cast<int>(std::lround(v * 255.0f)), 0, 255));
        }
      }
    }
    if (inline_pixels) {
      js["pixels"] = base64_encode(rgb.data(), rgb.size());
    } else {
      const std::string img_path = path + "." + std::to_string(si) + ".ppm";
      write_ppm(img_path, rgb.data(), w, h);
      js["image_path"] = img_path;
    }
    js["annotations"] = json::array();
    for (const auto& ann : s.annotations) {
      json ja;
      ja["id"] = ann.id;
      ja["category_id"] = ann.category_id;
      ja["bbox"] = {ann.bbox.x, ann.bbox.y, ann.bbox.w, ann.bbox.h};
      ja["area"] = ann.area;
      ja["rle"] = rle_encode(ann.mask.data(), ann.mask.size());
      js["annotations"].push_back(std::move(ja));
    }
    doc.push_back(std::move(js));
  }
  atomic_write_file(path, doc.dump());
}

std::vector<Scene> load_annotations(const std::string& path,
                                    const std::vector<int>& category_allowlist) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("annotation file parse error in " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw DataError("annotation file must be a JSON list of scenes: " + path);

  std::vector<Scene> scenes;
  scenes.reserve(doc.size());
  for (std::size_t si = 0; si < doc.size(); ++si) {
    const json& js = doc[si];
    auto ctx = [&](const std::string& what) {
      return DataError("scene " + std::to_string(si) + " in " + path + ": " + what);
    };
    try {
      const int w = js.at("width").get<int>();
      const int h = js.at("height").get<int>();
      if (w <= 0 || h <= 0) throw ctx("non-positive dimensions");
      std::vector<std::uint8_t> rgb;
      if (js.contains("pixels")) {
        rgb = base64_decode(js.at("pixels").get<std::string>());
      } else if (js.contains("image_path")) {
        int rw = 0, rh = 0;
        rgb = read_ppm(js.at("image_path").get<std::string>(), rw, rh);
        if (rw != w || rh != h) throw ctx("image_path dimensions disagree with width/height");
      } else {
        throw ctx("needs 'pixels' or 'image_path'");
      }
      if (rgb.size() != static_cast<std::size_t>(w) * h * 3) {
        throw ctx("pixel payload size mismatch");
      }
      Scene scene;
      scene.image = Tensor<float>({3, h, w});
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          for (int c = 0; c < 3; ++c) {
            scene.image.at3(c, y, x) =
                static_cast<float>(rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c]) / 255.0f;
          }
        }
      }
      double sums[3] = {0, 0, 0};
      for (int c = 0; c < 3; ++c) {
        const float* plane = scene.image.ptr() + static_cast<std::size_t>(c) * h * w;
        for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) sums[c] += plane[i];
        scene.mean_color[c] = static_cast<float>(sums[c] / (static_cast<double>(h) * w));
      }
      for (const json& ja : js.at("annotations")) {
        InstanceAnnotation ann;
        ann.id = ja.at("id").get<int>();
        ann.category_id = ja.value("category_id", 0);
        if (!category_allowlist.empty() &&
            std::find(category_allowlist.begin(), category_allowlist.end(), ann.category_id) ==
                category_allowlist.end()) {
          continue;
        }
        const auto& bb = ja.at("bbox");
        if (!bb.is_array() || bb.size() != 4) throw ctx("annotation bbox must be [x,y,w,h]");
        ann.bbox = {bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
        ann.area = ja.at("area").get<long>();
        ann.mask = rle_decode(ja.at("rle").get<std::vector<std::int64_t>>(),
                              static_cast<std::size_t>(w) * h);
        const BBox measured = bbox_of_mask(ann.mask, w, h);
        long measured_area = 0;
        for (std::uint8_t v : ann.mask) measured_area += v;
        if (measured_area != ann.area) {
          throw ctx("annotation " + std::to_string(ann.id) + ": area field " +
                    std::to_string(ann.area) + " != mask pixel count " +
                    std::to_string(measured_area));
        }
        if (measured.x != ann.bbox.x || measured.y != ann.bbox.y || measured.w != ann.bbox.w ||
            measured.h != ann.bbox.h) {
          throw ctx("annotation " + std::to_string(ann.id) + ": bbox field is not the mask's tight enclosure");
        }
        scene.annotations.push_back(std::move(ann));
      }
      scenes.push_back(std::move(scene));
    } catch (const json::exception& e) {
      throw ctx(e.what());
    }
  }
  return scenes;
}

}  // namespace maskseed
