#include "maskseed/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "maskseed/io.hpp"
#include "maskseed/svg.hpp"

namespace maskseed {

using json = nlohmann::json;

// ------------------------------------------------------------- IoU

double iou_mask(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) throw UsageError("iou_mask: mask dims differ");
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool av = a[i] != 0, bv = b[i] != 0;
    inter += av && bv;
    uni += av || bv;
  }
  if (uni == 0) return 0.0;  // both empty
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou_rle(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  const auto total = [](const std::vector<std::int64_t>& r) {
    return std::accumulate(r.begin(), r.end(), std::int64_t(0));
  };
  if (total(a) != total(b)) throw UsageError("iou_rle: mask dims differ");
  std::size_t ia = 0, ib = 0;
  std::int64_t ra = a.empty() ? 0 : a[0];
  std::int64_t rb = b.empty() ? 0 : b[0];
  bool va = false, vb = false;
  long inter = 0, uni = 0;
  while (ia < a.size() && ib < b.size()) {
    const std::int64_t step = std::min(ra, rb);
    if (va || vb) {
      uni += step;
      if (va && vb) inter += step;
    }
    ra -= step;
    rb -= step;
    while (ra == 0 && ++ia < a.size()) {
      va = !va;
      ra = a[ia];
    }
    while (rb == 0 && ++ib < b.size()) {
      vb = !vb;
      rb = b[ib];
    }
    if (ra == 0 || rb == 0) break;
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou_box(const FBox& a, const FBox& b) {
  if (a.w < 0 || a.h < 0 || b.w < 0 || b.h < 0) throw UsageError("iou_box: negative dims");
  const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  if (uni <= 0) return 0.0;
  return inter / uni;
}

// ------------------------------------------------------------- matching

MatchResult match_greedy(const std::vector<std::vector<double>>& iou_matrix, std::size_t n_gts) {
  const std::size_t n_props = iou_matrix.size();
  MatchResult r;
  r.gt_best_iou.assign(n_gts, 0.0);
  r.gt_proposal.assign(n_gts, -1);
  r.proposal_consumed.assign(n_props, false);
  if (n_props == 0 || n_gts == 0) return r;

  struct Pair {
    double iou;
    int prop, gt;
  };
  std::vector<Pair> pairs;
  pairs.reserve(n_props * n_gts);
  for (std::size_t p = 0; p < n_props; ++p) {
    if (iou_matrix[p].size() != n_gts) throw UsageError("match_greedy: ragged iou matrix");
    for (std::size_t g = 0; g < n_gts; ++g) {
      if (iou_matrix[p][g] > 0) pairs.push_back({iou_matrix[p][g], static_cast<int>(p), static_cast<int>(g)});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.prop != b.prop) return a.prop < b.prop;
    return a.gt < b.gt;
  });
  std::vector<bool> gt_taken(n_gts, false);
  for (const Pair& p : pairs) {
    if (gt_taken[static_cast<std::size_t>(p.gt)] || r.proposal_consumed[static_cast<std::size_t>(p.prop)]) {
      continue;
    }
    gt_taken[static_cast<std::size_t>(p.gt)] = true;
    r.proposal_consumed[static_cast<std::size_t>(p.prop)] = true;
    r.gt_best_iou[static_cast<std::size_t>(p.gt)] = p.iou;
    r.gt_proposal[static_cast<std::size_t>(p.gt)] = p.prop;
  }
  return r;
}

// ------------------------------------------------------------- metrics

const std::vector<double>& ar_iou_thresholds() {
  static const std::vector<double> t = [] {
    std::vector<double> v;
    for (int i = 0; i < 10; ++i) v.push_back(0.50 + 0.05 * i);
    return v;
  }();
  return t;
}

const std::vector<int>& auc_budget_grid() {
  static const std::vector<int> g = {1, 2, 3, 5, 10, 20, 30, 50, 100, 200, 300, 500, 1000};
  return g;
}

std::optional<double> average_recall(const std::vector<double>& gt_best_ious) {
  if (gt_best_ious.empty()) return std::nullopt;
  const auto& thresholds = ar_iou_thresholds();
  double acc = 0.0;
  for (double t : thresholds) {
    long hit = 0;
    for (double iou : gt_best_ious) hit += iou >= t;
    acc += static_cast<double>(hit) / static_cast<double>(gt_best_ious.size());
  }
  return acc / static_cast<double>(thresholds.size());
}

std::vector<double> recall_vs_iou(const std::vector<double>& gt_best_ious,
                                  const std::vector<double>& thresholds) {
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (thresholds[i] < thresholds[i - 1]) throw UsageError("recall_vs_iou: thresholds must ascend");
  }
  std::vector<double> curve;
  curve.reserve(thresholds.size());
  for (double t : thresholds) {
    if (gt_best_ious.empty()) {
      curve.push_back(0.0);
      continue;
    }
    long hit = 0;
    for (double iou : gt_best_ious) hit += iou >= t;
    curve.push_back(static_cast<double>(hit) / static_cast<double>(gt_best_ious.size()));
  }
  return curve;
}

ScaleBucket scale_bucket(long area) {
  if (area < 32L * 32L) return ScaleBucket::Small;
  if (area <= 96L * 96L) return ScaleBucket::Medium;
  return ScaleBucket::Large;
}

// ------------------------------------------------------------- report

namespace {

// Per-gt best IoUs pooled over all images at one proposal budget; bucket
// filtering drops gts outside the bucket before matching.
std::vector<double> matched_ious_at_budget(
    const std::vector<std::vector<std::vector<double>>>& iou_matrices,  // per image: props × gts
    const std::vector<std::vector<long>>& gt_areas, int budget,
    std::optional<ScaleBucket> bucket) {
  std::vector<double> pooled;
  for (std::size_t img = 0; img < iou_matrices.size(); ++img) {
    const auto& full = iou_matrices[img];
    std::vector<std::size_t> gt_keep;
    for (std::size_t g = 0; g < gt_areas[img].size(); ++g) {
      if (!bucket || scale_bucket(gt_areas[img][g]) == *bucket) gt_keep.push_back(g);
    }
    if (gt_keep.empty()) continue;
    const std::size_t n_props = std::min(full.size(), static_cast<std::size_t>(budget));
    std::vector<std::vector<double>> truncated(n_props);
    for (std::size_t p = 0; p < n_props; ++p) {
      truncated[p].reserve(gt_keep.size());
      for (std::size_t g : gt_keep) truncated[p].push_back(full[p][g]);
    }
    MatchResult m = match_greedy(truncated, gt_keep.size());
    pooled.insert(pooled.end(), m.gt_best_iou.begin(), m.gt_best_iou.end());
  }
  return pooled;
}

}  // namespace

EvalReport evaluate(const std::vector<std::vector<Proposal>>& proposals_per_image,
                    const std::vector<Scene>& scenes, const EvalOptions& opts) {
  if (proposals_per_image.size() > scenes.size()) {
    std::string missing;
    for (std::size_t i = scenes.size(); i < proposals_per_image.size(); ++i) {
      if (!proposals_per_image[i].empty()) missing += (missing.empty() ? "" : ", ") + std::to_string(i);
    }
    if (!missing.empty()) {
      throw DataError("proposals reference image ids absent from the annotation file: [" + missing + "]");
    }
  }

  // IoU matrices once per image; budgets reuse them
  std::vector<std::vector<std::vector<double>>> iou_matrices(scenes.size());
  std::vector<std::vector<long>> gt_areas(scenes.size());
  EvalReport report;
  for (std::size_t img = 0; img < scenes.size(); ++img) {
    const Scene& scene = scenes[img];
    const auto& props = img < proposals_per_image.size() ? proposals_per_image[img]
                                                         : std::vector<Proposal>{};
    std::vector<std::vector<std::int64_t>> gt_rles;
    for (const auto& ann : scene.annotations) {
      gt_areas[img].push_back(ann.area);
      if (!opts.use_boxes) gt_rles.push_back(rle_encode(ann.mask.data(), ann.mask.size()));
      ++report.gt_count;
      switch (scale_bucket(ann.area)) {
        case ScaleBucket::Small: ++report.gt_small; break;
        case ScaleBucket::Medium: ++report.gt_medium; break;
        case ScaleBucket::Large: ++report.gt_large; break;
      }
    }
    auto& matrix = iou_matrices[img];
    matrix.resize(props.size());
    for (std::size_t p = 0; p < props.size(); ++p) {
      matrix[p].resize(scene.annotations.size());
      for (std::size_t g = 0; g < scene.annotations.size(); ++g) {
        if (opts.use_boxes) {
          const BBox& pb = props[p].box;
          const BBox& gb = scene.annotations[g].bbox;
          matrix[p][g] = iou_box({static_cast<double>(pb.x), static_cast<double>(pb.y),
                                  static_cast<double>(pb.w), static_cast<double>(pb.h)},
                                 {static_cast<double>(gb.x), static_cast<double>(gb.y),
                                  static_cast<double>(gb.w), static_cast<double>(gb.h)});
        } else {
          if (props[p].image_w != scene.width() || props[p].image_h != scene.height()) {
            throw DataError("proposal mask dims disagree with image " + std::to_string(img));
          }
          matrix[p][g] = iou_rle(props[p].rle, gt_rles[g]);
        }
      }
    }
  }

  report.budgets = auc_budget_grid();
  double auc_acc = 0, auc_s = 0, auc_m = 0, auc_l = 0;
  for (int budget : report.budgets) {
    const auto pooled = matched_ious_at_budget(iou_matrices, gt_areas, budget, std::nullopt);
    const double ar = average_recall(pooled).value_or(0.0);
    report.ar_curve.push_back(ar);
    auc_acc += ar;
    const auto pooled_s = matched_ious_at_budget(iou_matrices, gt_areas, budget, ScaleBucket::Small);
    const auto pooled_m = matched_ious_at_budget(iou_matrices, gt_areas, budget, ScaleBucket::Medium);
    const auto pooled_l = matched_ious_at_budget(iou_matrices, gt_areas, budget, ScaleBucket::Large);
    report.ar_curve_small.push_back(average_recall(pooled_s).value_or(0.0));
    report.ar_curve_medium.push_back(average_recall(pooled_m).value_or(0.0));
    report.ar_curve_large.push_back(average_recall(pooled_l).value_or(0.0));
    auc_s += report.ar_curve_small.back();
    auc_m += report.ar_curve_medium.back();
    auc_l += report.ar_curve_large.back();
  }
  const double n_budgets = static_cast<double>(report.budgets.size());
  report.auc = auc_acc / n_budgets;
  if (report.gt_small > 0) report.auc_small = auc_s / n_budgets;
  if (report.gt_medium > 0) report.auc_medium = auc_m / n_budgets;
  if (report.gt_large > 0) report.auc_large = auc_l / n_budgets;

  for (int budget : opts.report_budgets) {
    const auto pooled = matched_ious_at_budget(iou_matrices, gt_areas, budget, std::nullopt);
    report.ar_at[budget] = average_recall(pooled).value_or(0.0);
    report.recall_curves[budget] = recall_vs_iou(pooled, ar_iou_thresholds());
  }
  return report;
}

void write_report_json(const EvalReport& r, const std::string& path) {
  json j;
  json ar;
  for (const auto& [budget, v] : r.ar_at) ar[std::to_string(budget)] = v;
  j["ar_at"] = ar;
  j["auc"] = r.auc;
  if (r.auc_small) j["auc_small"] = *r.auc_small;
  if (r.auc_medium) j["auc_medium"] = *r.auc_medium;
  if (r.auc_large) j["auc_large"] = *r.auc_large;
  j["gt_count"] = r.gt_count;
  j["gt_small"] = r.gt_small;
  j["gt_medium"] = r.gt_medium;
  j["gt_large"] = r.gt_large;
  j["budgets"] = r.budgets;
  j["ar_curve"] = r.ar_curve;
  j["ar_curve_small"] = r.ar_curve_small;
  j["ar_curve_medium"] = r.ar_curve_medium;
  j["ar_curve_large"] = r.ar_curve_large;
  j["iou_thresholds"] = ar_iou_thresholds();
  json curves;
  for (const auto& [budget, curve] : r.recall_curves) curves[std::to_string(budget)] = curve;
  j["recall_vs_iou"] = curves;
  atomic_write_file(path, j.dump(2));
}

EvalReport read_report_json(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("report parse error in " + path + ": " + e.what());
  }
  EvalReport r;
  for (auto it = j.at("ar_at").begin(); it != j.at("ar_at").end(); ++it) {
    r.ar_at[std::stoi(it.key())] = it.value().get<double>();
  }
  r.auc = j.at("auc").get<double>();
  if (j.contains("auc_small")) r.auc_small = j["auc_small"].get<double>();
  if (j.contains("auc_medium")) r.auc_medium = j["auc_medium"].get<double>();
  if (j.contains("auc_large")) r.auc_large = j["auc_large"].get<double>();
  r.gt_count = j.value("gt_count", 0L);
  r.gt_small = j.value("gt_small", 0L);
  r.gt_medium = j.value("gt_medium", 0L);
  r.gt_large = j.value("gt_large", 0L);
  r.budgets = j.at("budgets").get<std::vector<int>>();
  r.ar_curve = j.at("ar_curve").get<std::vector<double>>();
  r.ar_curve_small = j.value("ar_curve_small", std::vector<double>{});
  r.ar_curve_medium = j.value("ar_curve_medium", std::vector<double>{});
  r.ar_curve_large = j.value("ar_curve_large", std::vector<double>{});
  if (j.contains("recall_vs_iou")) {
    for (auto it = j["recall_vs_iou"].begin(); it != j["recall_vs_iou"].end(); ++it) {
      r.recall_curves[std::stoi(it.key())] = it.value().get<std::vector<double>>();
    }
  }
  return r;
}

void write_report_csv(const EvalReport& r, const std::string& path) {
  std::ostringstream os;
  os << "budget,ar,ar_small,ar_medium,ar_large\n";
  for (std::size_t i = 0; i < r.budgets.size(); ++i) {
    os << r.budgets[i] << "," << r.ar_curve[i] << "," << r.ar_curve_small[i] << ","
       << r.ar_curve_medium[i] << "," << r.ar_curve_large[i] << "\n";
  }
  atomic_write_file(path, os.str());
}

void write_report_svgs(const EvalReport& r, const std::string& ar_path,
                       const std::string& recall_path) {
  {
    SvgChart chart("proposals per image", "average recall", true);
    std::vector<double> xs(r.budgets.begin(), r.budgets.end());
    chart.add_series("all", xs, r.ar_curve);
    if (r.gt_small > 0) chart.add_series("small", xs, r.ar_curve_small);
    if (r.gt_medium > 0) chart.add_series("medium", xs, r.ar_curve_medium);
    if (r.gt_large > 0) chart.add_series("large", xs, r.ar_curve_large);
    chart.write(ar_path);
  }
  {
    SvgChart chart("IoU threshold", "recall", false);
    for (const auto& [budget, curve] : r.recall_curves) {
      chart.add_series("N=" + std::to_string(budget), ar_iou_thresholds(), curve);
    }
    chart.write(recall_path);
  }
}

}  // namespace maskseed
