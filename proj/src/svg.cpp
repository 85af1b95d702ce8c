#include "maskseed/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "maskseed/errors.hpp"
#include "maskseed/io.hpp"

namespace maskseed {

namespace {
constexpr int kWidth = 640, kHeight = 440;
constexpr int kLeft = 60, kRight = 30, kTop = 30, kBottom = 60;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
}  // namespace

SvgChart::SvgChart(std::string x_label, std::string y_label, bool log_x)
    : x_label_(std::move(x_label)), y_label_(std::move(y_label)), log_x_(log_x) {}

void SvgChart::add_series(const std::string& name, const std::vector<double>& xs,
                          const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw UsageError("SvgChart: series size mismatch");
  series_.push_back({name, xs, ys});
}

void SvgChart::write(const std::string& path) const {
  double x_min = 1e300, x_max = -1e300;
  for (const auto& s : series_) {
    for (double x : s.xs) {
      const double t = log_x_ ? std::log10(x) : x;
      x_min = std::min(x_min, t);
      x_max = std::max(x_max, t);
    }
  }
  if (x_min >= x_max) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) {
    const double t = log_x_ ? std::log10(x) : x;
    return kLeft + (t - x_min) / (x_max - x_min) * plot_w;
  };
  auto py = [&](double y) { return kTop + (1.0 - std::clamp(y, 0.0, 1.0)) * plot_h; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  os << "<path d=\"M" << kLeft << " " << kTop << " L" << kLeft << " " << kTop + plot_h << " L"
     << kLeft + plot_w << " " << kTop + plot_h << "\" stroke=\"black\" fill=\"none\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = i / 5.0;
    os << "<path d=\"M" << kLeft - 4 << " " << py(y) << " L" << kLeft << " " << py(y)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(y) + 4
       << "\" text-anchor=\"end\">" << y << "</text>\n";
  }
  const int x_ticks = 5;
  for (int i = 0; i <= x_ticks; ++i) {
    const double t = x_min + (x_max - x_min) * i / x_ticks;
    const double v = log_x_ ? std::pow(10.0, t) : t;
    const double xi = kLeft + (t - x_min) / (x_max - x_min) * plot_w;
    os << "<path d=\"M" << xi << " " << kTop + plot_h << " L" << xi << " " << kTop + plot_h + 4
       << "\" stroke=\"black\"/>\n";
    std::ostringstream label;
    label.precision(3);
    label << v;
    os << "<text x=\"" << xi << "\" y=\"" << kTop + plot_h + 18 << "\" text-anchor=\"middle\">"
       << label.str() << "</text>\n";
  }
  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 14
     << "\" text-anchor=\"middle\">" << x_label_ << "</text>\n";
  os << "<text x=\"16\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << kTop + plot_h / 2 << ")\">" << y_label_ << "</text>\n";

  for (std::size_t si = 0; si < series_.size(); ++si) {
    const auto& s = series_[si];
    const char* color = kColors[si % 6];
    os << "<path d=\"";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      os << (i == 0 ? "M" : "L") << px(s.xs[i]) << " " << py(s.ys[i]) << " ";
    }
    os << "\" stroke=\"" << color << "\" stroke-width=\"2\" fill=\"none\"/>\n";
    os << "<text x=\"" << kLeft + plot_w - 6 << "\" y=\"" << kTop + 16 + 16 * si
       << "\" text-anchor=\"end\" fill=\"" << color << "\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
  atomic_write_file(path, os.str());
}

}  // namespace maskseed
