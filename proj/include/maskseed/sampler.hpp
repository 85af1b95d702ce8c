#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maskseed/model.hpp"
#include "maskseed/rng.hpp"
#include "maskseed/tensor.hpp"

namespace maskseed {

// ------------------------------------------------------------- annotations

struct BBox {
  int x = 0, y = 0, w = 0, h = 0;
  int max_dim() const { return w > h ? w : h; }
};

struct InstanceAnnotation {
  int id = 0;
  int category_id = 0;
  std::vector<std::uint8_t> mask;  // H×W of 0/1, visible pixels only
  BBox bbox;                       // tight enclosure of the mask
  long area = 0;                   // count of mask-positive pixels
};

struct Scene {
  Tensor<float> image;  // 3×H×W in [0,1]
  std::vector<InstanceAnnotation> annotations;
  float mean_color[3] = {0.5f, 0.5f, 0.5f};  // used to pad patches past the border

  int width() const { return image.dim(2); }
  int height() const { return image.dim(1); }
};

BBox bbox_of_mask(const std::vector<std::uint8_t>& mask, int width, int height);

// ------------------------------------------------------------- synthetic scenes

enum class ShapeKind { Disk, Rect, Triangle, Annulus };

struct SyntheticSpec {
  int image_size = 160;
  int min_shapes = 1;
  int max_shapes = 4;
  double min_size = 20;   // shape max dimension, pixels
  double max_size = 110;
  double noise_sigma = 0.02;  // per-pixel color noise, [0,1] units
  bool occlusion = true;
  int min_visible_area = 64;  // drop instances occluded below this
};

Scene generate_scene(const SyntheticSpec& spec, Rng& rng);

// ------------------------------------------------------------- patch geometry

// A square window of the scene mapped onto a patch_size×patch_size patch:
// centered at (cx, cy) scene pixels, covering `side` scene pixels, optionally
// mirrored horizontally.
struct PatchPose {
  double cx = 0, cy = 0;
  double side = 0;
  bool flip = false;
};

struct SamplerConfig {
  int canonical_max_dim = 37;      // object max-dim in the canonical patch
  double jitter_translate = 16;    // max |shift|, canonical patch pixels
  double jitter_scale_exp = 0.25;  // scale factor 2^±this
  bool hflip = true;
  double negative_translate = 32;  // min deviation for negatives (per axis)
  double negative_scale_exp = 1.0;
  int max_attempts = 200;

  void validate() const;
};

// canonical_max_dim scaled to a patch size, keeping the reference geometry
// ratio 128/224.
int canonical_max_dim_for_patch(int patch_size);

PatchPose canonical_pose(const InstanceAnnotation& ann, int patch_size, const SamplerConfig& cfg);

struct JitterDraw {
  double dx = 0, dy = 0;   // canonical patch pixels
  double scale_exp = 0;    // log2 of the scale factor
  bool flip = false;
};

JitterDraw draw_jitter(const SamplerConfig& cfg, Rng& rng);
PatchPose apply_jitter(const PatchPose& canonical, const JitterDraw& draw, int patch_size);

// Deviation of `pose` from `canonical`: translation as max(|dx|,|dy|) in
// canonical patch pixels, scale as |log2(side ratio)|.
struct PoseDeviation {
  double translate = 0;
  double scale_exp = 0;
};
PoseDeviation pose_deviation(const PatchPose& pose, const PatchPose& canonical, int patch_size);

// ------------------------------------------------------------- triplet extraction

struct EmittedSample {
  TrainingTriplet triplet;
  PatchPose pose;
  int annotation_index = -1;  // -1 for negatives
  JitterDraw draw;            // meaningful for jittered positives
};

// Bilinear image sampling, nearest-neighbor mask sampling; out-of-scene
// pixels take the scene mean color (mask: background).
TrainingTriplet extract_triplet(const Scene& scene, const PatchPose& pose, int annotation_index,
                                int patch_size);

std::optional<EmittedSample> canonical_positive(const Scene& scene, int annotation_index,
                                                int patch_size, const SamplerConfig& cfg);

std::optional<EmittedSample> jitter_positive(const Scene& scene, int annotation_index,
                                             int patch_size, const SamplerConfig& cfg, Rng& rng);

// Rejection-samples a pose deviating from every annotation's canonical pose by
// at least negative_translate pixels or a factor 2^negative_scale_exp.
std::optional<EmittedSample> sample_negative(const Scene& scene, int patch_size,
                                             const SamplerConfig& cfg, Rng& rng);

// ------------------------------------------------------------- batches

// Segmentation batches: positives only. Scoring batches: ⌊n/2⌋ positives and
// ⌈n/2⌉ negatives, shuffled.
std::vector<TrainingTriplet> make_batch(const std::vector<Scene>& scenes, Branch branch,
                                        int batch_size, int patch_size, const SamplerConfig& cfg,
                                        Rng& rng);

// ------------------------------------------------------------- mask RLE

// Row-major binary run-length encoding; first run counts zeros.
std::vector<std::int64_t> rle_encode(const std::uint8_t* bits, std::size_t n);
std::vector<std::uint8_t> rle_decode(const std::vector<std::int64_t>& runs, std::size_t n);
long rle_area(const std::vector<std::int64_t>& runs);

// ------------------------------------------------------------- dataset files

// JSON list of scenes: {pixels (base64 RGB8, interleaved row-major) or
// image_path (P6 PPM), width, height, annotations:[{id, category_id,
// bbox:[x,y,w,h], area, rle:[...]}]}.
void save_annotations(const std::vector<Scene>& scenes, const std::string& path,
                      bool inline_pixels = true);
std::vector<Scene> load_annotations(const std::string& path,
                                    const std::vector<int>& category_allowlist = {});

}  // namespace maskseed
