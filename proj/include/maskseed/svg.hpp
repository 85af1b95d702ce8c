#pragma once

#include <string>
#include <vector>

namespace maskseed {

// Minimal line-chart writer producing plain SVG path/text elements. The y axis
// is fixed to [0,1]; the x axis is linear or log10.
class SvgChart {
 public:
  SvgChart(std::string x_label, std::string y_label, bool log_x);
  void add_series(const std::string& name, const std::vector<double>& xs,
                  const std::vector<double>& ys);
  void write(const std::string& path) const;

 private:
  struct Series {
    std::string name;
    std::vector<double> xs, ys;
  };
  std::string x_label_, y_label_;
  bool log_x_;
  std::vector<Series> series_;
};

}  // namespace maskseed
