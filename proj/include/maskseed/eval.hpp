#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "maskseed/inference.hpp"
#include "maskseed/sampler.hpp"

namespace maskseed {

// ------------------------------------------------------------- IoU

double iou_mask(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);
// Same value computed by walking two run-length encodings of equal total size.
double iou_rle(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b);

struct FBox {
  double x = 0, y = 0, w = 0, h = 0;
};
double iou_box(const FBox& a, const FBox& b);

// ------------------------------------------------------------- matching

struct MatchResult {
  std::vector<double> gt_best_iou;     // per ground truth; 0 when unmatched
  std::vector<int> gt_proposal;        // matched proposal index or -1
  std::vector<bool> proposal_consumed;
};

// Greedy one-to-one over all (proposal, gt) pairs by descending IoU; ties go
// to the higher-ranked proposal, then the lower gt index. iou_matrix is
// n_proposals × n_gts, proposals in rank order.
MatchResult match_greedy(const std::vector<std::vector<double>>& iou_matrix, std::size_t n_gts);

// ------------------------------------------------------------- metrics

// 0.50, 0.55, …, 0.95
const std::vector<double>& ar_iou_thresholds();
// {1, 2, 3, 5, 10, 20, 30, 50, 100, 200, 300, 500, 1000}
const std::vector<int>& auc_budget_grid();

// Mean recall over the IoU threshold grid; absent for an empty gt set.
std::optional<double> average_recall(const std::vector<double>& gt_best_ious);

std::vector<double> recall_vs_iou(const std::vector<double>& gt_best_ious,
                                  const std::vector<double>& thresholds);

enum class ScaleBucket { Small, Medium, Large };
ScaleBucket scale_bucket(long area);

// ------------------------------------------------------------- report

struct EvalReport {
  std::map<int, double> ar_at;  // budget → AR over the whole gt set
  double auc = 0;
  std::optional<double> auc_small, auc_medium, auc_large;
  long gt_count = 0;
  long gt_small = 0, gt_medium = 0, gt_large = 0;
  // recall-vs-IoU curves at the reporting budgets, sampled on ar_iou_thresholds
  std::map<int, std::vector<double>> recall_curves;
  // AR per budget-grid entry, overall and per scale bucket (for CSV/plots)
  std::vector<int> budgets;
  std::vector<double> ar_curve;
  std::vector<double> ar_curve_small, ar_curve_medium, ar_curve_large;
};

struct EvalOptions {
  std::vector<int> report_budgets = {10, 100, 1000};
  bool use_boxes = false;  // rectangle IoU on enclosing boxes instead of masks
};

// Matching is recomputed from scratch at each budget (truncate-then-match).
EvalReport evaluate(const std::vector<std::vector<Proposal>>& proposals_per_image,
                    const std::vector<Scene>& scenes, const EvalOptions& opts = {});

void write_report_json(const EvalReport& report, const std::string& path);
void write_report_csv(const EvalReport& report, const std::string& path);
void write_report_svgs(const EvalReport& report, const std::string& ar_path,
                       const std::string& recall_path);
EvalReport read_report_json(const std::string& path);

}  // namespace maskseed
