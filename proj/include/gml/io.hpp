#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "gml/law_family.hpp"
#include "gml/policy.hpp"

namespace gml {

// label,t,mean,variance,q05,q50,q95 for every (label, time) marginal.
std::string law_summary_csv(const LawFamily& law);

// t,label,x,alpha on the tabulated nodes.
std::string policy_csv(const PolicyField& policy);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;  // of log y against log x
};

// Log-log scatter with error bars and an optional fitted line, as SVG.
std::string loglog_svg(std::string_view title, std::span<const double> x, std::span<const double> y,
                       std::span<const double> err, std::optional<LineFit> fit = std::nullopt);

// Writes `content`, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view content);

}  // namespace gml
