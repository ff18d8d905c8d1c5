#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spinrelax/decay_profiles.hpp"
#include "spinrelax/ensemble.hpp"
#include "spinrelax/fitting.hpp"

namespace spinrelax {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text, const std::string& source, std::size_t line);

// Decay curves: "# key=value" metadata lines, then "delay_us,<value>,sigma".
// Known keys are T_K, H_T, shots and seed; others are kept in meta.extra.
void write_decay_curve(std::ostream& os, const DecayCurve& curve, std::string_view value_column = "contrast");
DecayCurve read_decay_curve(std::istream& is, const std::string& source = "<stream>",
                            std::string_view value_column = "contrast");

void write_survival_curve(std::ostream& os, const SurvivalCurve& curve, const CurveMeta& meta = {});
SurvivalCurve read_survival_curve(std::istream& is, const std::string& source = "<stream>");

// Rate surfaces: "T_K,H_T,gamma_per_ms,sigma_per_ms,masked", masked is 0 or 1.
void write_rate_surface(std::ostream& os, const RateSurface& surface);
RateSurface read_rate_surface(std::istream& is, const std::string& source = "<stream>");

/// One row per point: T_K,H_T,direct,raman,spin_spin,cross_relax,total,masked.
void write_decomposition(std::ostream& os, std::span<const RatePoint> points,
                         std::span<const RateBreakdown> rows, const SurfaceModelConfig& cfg);

/// Residual table: delay_us,contrast,sigma,model,residual.
void write_curve_residuals(std::ostream& os, const DecayCurve& curve, const FitResult& fit);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and renames it into place.
void write_text_file(const std::filesystem::path& path, std::string_view content);

DecayCurve load_decay_curve(const std::filesystem::path& path);
RateSurface load_rate_surface(const std::filesystem::path& path);

}  // namespace spinrelax
