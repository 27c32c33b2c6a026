#include "gml/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "gml/errors.hpp"

namespace gml {

std::string law_summary_csv(const LawFamily& law) {
  std::string out = "label,t,mean,variance,q05,q50,q95\n";
  for (int j = 0; j < law.label_count(); ++j)
    for (int k = 0; k < law.grid().points(); ++k)
      out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", law.labels()[j],
                         law.grid().t(k), law.mean(j, k), law.variance(j, k), law.quantile(j, k, 0.05),
                         law.quantile(j, k, 0.5), law.quantile(j, k, 0.95));
  return out;
}

std::string policy_csv(const PolicyField& policy) {
  std::string out = "t,label,x,alpha\n";
  const auto& labels = policy.labels();
  for (int k = 0; k < policy.time().points(); ++k)
    for (std::size_t j = 0; j < labels.size(); ++j)
      for (int g = 0; g < policy.state().points; ++g)
        out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", policy.time().t(k), labels[j], policy.state().x(g),
                           policy.has_closed_form() ? policy(policy.time().t(k), labels[j], policy.state().x(g))
                                                    : policy.at(k, static_cast<int>(j), g));
  return out;
}

std::string loglog_svg(std::string_view title, std::span<const double> x, std::span<const double> y,
                       std::span<const double> err, std::optional<LineFit> fit) {
  constexpr double W = 480, H = 360, L = 60, R = 20, T = 40, B = 50;
  std::vector<double> lx, ly, lo, hi;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0) || !std::isfinite(y[i])) continue;
    const double e = i < err.size() && std::isfinite(err[i]) ? err[i] : 0.0;
    lx.push_back(std::log10(x[i]));
    ly.push_back(std::log10(y[i]));
    lo.push_back(std::log10(std::max(y[i] - e, y[i] * 1e-3)));
    hi.push_back(std::log10(y[i] + e));
  }
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
      W, H, W, H, W / 2, title);
  if (lx.empty()) return svg + "</svg>\n";
  const auto [x0, x1] = std::minmax_element(lx.begin(), lx.end());
  double xmin = *x0 - 0.1, xmax = *x1 + 0.1;
  double ymin = *std::min_element(lo.begin(), lo.end()) - 0.1;
  double ymax = *std::max_element(hi.begin(), hi.end()) + 0.1;
  auto px = [&](double v) { return L + (v - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - ymin) / (ymax - ymin) * (H - T - B); };
  svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", L, T,
                     W - L - R, H - T - B);
  for (int d = static_cast<int>(std::ceil(xmin)); d <= static_cast<int>(std::floor(xmax)); ++d)
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" "
                       "text-anchor=\"middle\">1e{}</text>\n",
                       px(d), H - B + 16, d);
  for (int d = static_cast<int>(std::ceil(ymin)); d <= static_cast<int>(std::floor(ymax)); ++d)
    svg += fmt::format("<text x=\"{}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" "
                       "text-anchor=\"end\">1e{}</text>\n",
                       L - 4, py(d) + 4, d);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">n</text>\n",
                     (L + W - R) / 2, H - 12);
  for (std::size_t i = 0; i < lx.size(); ++i) {
    svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"gray\"/>\n", px(lx[i]),
                       py(lo[i]), py(hi[i]));
    svg += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"steelblue\"/>\n", px(lx[i]), py(ly[i]));
  }
  if (fit) {
    const double a = *x0, b = *x1;
    svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"firebrick\"/>\n", px(a),
                       py(fit->intercept + fit->slope * a), px(b), py(fit->intercept + fit->slope * b));
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\" "
                       "fill=\"firebrick\">slope {:.3f}</text>\n",
                       W - R - 6, T + 16, fit->slope);
  }
  return svg + "</svg>\n";
}

void write_text(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PreconditionError(fmt::format("cannot open '{}' for writing", path.string()));
  out << content;
  if (!out) throw PreconditionError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace gml
