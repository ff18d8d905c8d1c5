#pragma once

#include <nlohmann/json.hpp>

#include "spinrelax/ensemble.hpp"
#include "spinrelax/fitting.hpp"

namespace spinrelax {

using nlohmann::json;

// Quantities are written as {"value": v, "unit": u}. Readers also accept a
// bare number; a unit that is present must match.
json quantity(double value, std::string_view unit);
double read_quantity(const json& doc, std::string_view key, std::string_view unit, double fallback);

json to_json(const SpinSystemParams& p);
SpinSystemParams spin_params_from_json(const json& doc, SpinSystemParams base = {});

json to_json(const RelaxationParams& p);
RelaxationParams relaxation_params_from_json(const json& doc, RelaxationParams base = {});

json to_json(const StretchedExpParams& p);
StretchedExpParams stretched_exp_params_from_json(const json& doc);

json to_json(const ExclusionMask& mask);
ExclusionMask exclusion_mask_from_json(const json& doc);

std::string_view branch_name(TransitionBranch b);
TransitionBranch branch_from_name(std::string_view name);

/// {"spin", "branch", "include_lac", "exclusion", "cross_relax", "free"}.
json to_json(const SurfaceModelConfig& cfg);
SurfaceModelConfig surface_config_from_json(const json& doc);

/// Parameters, covariance, chi2 statistics, diagnostics and model_config.
json to_json(const FitResult& fit);

json to_json(const BetaEstimate& b);
json to_json(const BathConfig& cfg);
BathConfig bath_config_from_json(const json& doc, BathConfig base = {});

}  // namespace spinrelax
