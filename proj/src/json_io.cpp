#include "spinrelax/json_io.hpp"

#include <cstdio>
#include <set>

namespace spinrelax {

namespace {

void require_object(const json& doc, std::string_view what) {
  if (!doc.is_object()) throw ConfigurationError(std::string(what) + " must be a JSON object");
}

void reject_unknown(const json& doc, const std::set<std::string>& known, std::string_view what) {
  for (const auto& [key, value] : doc.items())
    if (!known.contains(key)) throw ConfigurationError("unknown key '" + key + "' in " + std::string(what));
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json quantity(double value, std::string_view unit) { return {{"value", number_or_null(value)}, {"unit", unit}}; }

double read_quantity(const json& doc, std::string_view key, std::string_view unit, double fallback) {
  const std::string k(key);
  if (!doc.contains(k)) return fallback;
  const json& q = doc.at(k);
  if (q.is_number()) return q.get<double>();
  if (q.is_object() && q.contains("value") && q.at("value").is_number()) {
    if (q.contains("unit") && q.at("unit").get<std::string>() != unit)
      throw ConfigurationError("field '" + k + "' has unit '" + q.at("unit").get<std::string>() + "', expected '" +
                               std::string(unit) + "'");
    return q.at("value").get<double>();
  }
  throw ConfigurationError("field '" + k + "' must be a number or {\"value\", \"unit\"}");
}

json to_json(const SpinSystemParams& p) {
  return {{"D", quantity(p.D, "GHz")}, {"E", quantity(p.E, "GHz")}, {"g", quantity(p.g, "1")}};
}

SpinSystemParams spin_params_from_json(const json& doc, SpinSystemParams base) {
  require_object(doc, "spin parameters");
  reject_unknown(doc, {"D", "E", "g"}, "spin parameters");
  base.D = read_quantity(doc, "D", "GHz", base.D);
  base.E = read_quantity(doc, "E", "GHz", base.E);
  base.g = read_quantity(doc, "g", "1", base.g);
  base.validate();
  return base;
}

json to_json(const RelaxationParams& p) {
  json out;
  const auto a = to_array(p);
  for (int k = 0; k < 6; ++k)
    out[std::string(surface_param_name(SurfaceParam(k)))] = quantity(a[std::size_t(k)], surface_param_unit(SurfaceParam(k)));
  if (p.cross_relax)
    out["cross_relax"] = {{"amplitude", quantity(p.cross_relax->amplitude, "ms^-1")},
                          {"half_width", quantity(p.cross_relax->half_width, "T")}};
  else
    out["cross_relax"] = nullptr;
  return out;
}

RelaxationParams relaxation_params_from_json(const json& doc, RelaxationParams base) {
  require_object(doc, "relaxation parameters");
  reject_unknown(doc, {"A1", "n1", "A2", "n2", "eta", "tau_c", "cross_relax"}, "relaxation parameters");
  auto a = to_array(base);
  for (int k = 0; k < 6; ++k) {
    const auto sp = SurfaceParam(k);
    a[std::size_t(k)] = read_quantity(doc, surface_param_name(sp), surface_param_unit(sp), a[std::size_t(k)]);
  }
  RelaxationParams out = from_array(a, false);
  out.cross_relax = base.cross_relax;
  if (doc.contains("cross_relax")) {
    const json& cr = doc.at("cross_relax");
    if (cr.is_null()) {
      out.cross_relax.reset();
    } else {
      require_object(cr, "cross_relax");
      reject_unknown(cr, {"amplitude", "half_width"}, "cross_relax");
      CrossRelaxation c = base.cross_relax.value_or(CrossRelaxation{});
      c.amplitude = read_quantity(cr, "amplitude", "ms^-1", c.amplitude);
      c.half_width = read_quantity(cr, "half_width", "T", c.half_width);
      out.cross_relax = c;
    }
  }
  out.validate();
  return out;
}

json to_json(const StretchedExpParams& p) {
  return {{"C0", quantity(p.C0, "1")}, {"T1", quantity(p.T1, "us")}, {"beta", quantity(p.beta, "1")}};
}

StretchedExpParams stretched_exp_params_from_json(const json& doc) {
  require_object(doc, "curve model");
  reject_unknown(doc, {"C0", "T1", "beta"}, "curve model");
  for (const char* k : {"C0", "T1", "beta"})
    if (!doc.contains(k)) throw ConfigurationError(std::string("curve model lacks '") + k + "'");
  StretchedExpParams p;
  p.C0 = read_quantity(doc, "C0", "1", 0.0);
  p.T1 = read_quantity(doc, "T1", "us", 0.0);
  p.beta = read_quantity(doc, "beta", "1", 0.0);
  p.validate();
  return p;
}

json to_json(const ExclusionMask& mask) {
  json out = json::array();
  for (const auto& w : mask.intervals) out.push_back({{"lo", w.lo}, {"hi", w.hi}, {"unit", "T"}});
  return out;
}

ExclusionMask exclusion_mask_from_json(const json& doc) {
  if (!doc.is_array()) throw ConfigurationError("exclusion must be an array of {lo, hi} intervals");
  ExclusionMask mask;
  for (const auto& w : doc) {
    require_object(w, "exclusion interval");
    reject_unknown(w, {"lo", "hi", "unit"}, "exclusion interval");
    if (w.contains("unit") && w.at("unit") != "T") throw ConfigurationError("exclusion intervals are in T");
    const double lo = w.at("lo").get<double>(), hi = w.at("hi").get<double>();
    if (!(lo <= hi)) throw ConfigurationError("exclusion interval needs lo <= hi");
    mask.intervals.push_back({lo, hi});
  }
  return mask;
}

std::string_view branch_name(TransitionBranch b) {
  switch (b) {
    case TransitionBranch::upper:
      return "upper";
    case TransitionBranch::lower:
      return "lower";
    case TransitionBranch::both:
      return "both";
  }
  return "upper";
}

TransitionBranch branch_from_name(std::string_view name) {
  if (name == "upper") return TransitionBranch::upper;
  if (name == "lower") return TransitionBranch::lower;
  if (name == "both") return TransitionBranch::both;
  throw ConfigurationError("branch must be upper, lower or both, got '" + std::string(name) + "'");
}

json to_json(const SurfaceModelConfig& cfg) {
  json free = json::object();
  for (int k = 0; k < kSurfaceParamCount; ++k)
    if (cfg.uses(SurfaceParam(k))) free[std::string(surface_param_name(SurfaceParam(k)))] = cfg.is_free(SurfaceParam(k));
  return {{"spin", to_json(cfg.spin)},
          {"branch", branch_name(cfg.rate.branch)},
          {"include_lac", cfg.rate.include_lac},
          {"exclusion", to_json(cfg.rate.mask)},
          {"cross_relax", cfg.cross_relax},
          {"free", free}};
}

SurfaceModelConfig surface_config_from_json(const json& doc) {
  require_object(doc, "model config");
  reject_unknown(doc, {"spin", "branch", "include_lac", "exclusion", "cross_relax", "free", "fixed", "init"},
                 "model config");
  SurfaceModelConfig cfg;
  if (doc.contains("spin")) cfg.spin = spin_params_from_json(doc.at("spin"));
  if (doc.contains("branch")) cfg.rate.branch = branch_from_name(doc.at("branch").get<std::string>());
  if (doc.contains("include_lac")) cfg.rate.include_lac = doc.at("include_lac").get<bool>();
  if (doc.contains("exclusion")) cfg.rate.mask = exclusion_mask_from_json(doc.at("exclusion"));
  if (doc.contains("cross_relax")) cfg.cross_relax = doc.at("cross_relax").get<bool>();
  auto lookup = [](const std::string& name) {
    const auto sp = surface_param_from_name(name);
    if (!sp) throw ConfigurationError("unknown parameter '" + name + "'");
    return *sp;
  };
  if (doc.contains("free")) {
    require_object(doc.at("free"), "free");
    for (const auto& [name, flag] : doc.at("free").items()) cfg.free[std::size_t(lookup(name))] = flag.get<bool>();
  }
  if (doc.contains("fixed")) {
    for (const auto& name : doc.at("fixed")) cfg.fix(lookup(name.get<std::string>()));
  }
  return cfg;
}

json to_json(const FitResult& fit) {
  json params = json::array();
  for (const auto& p : fit.params)
    params.push_back({{"name", p.name},
                      {"unit", p.unit},
                      {"value", number_or_null(p.value)},
                      {"std_error", number_or_null(p.std_error)},
                      {"free", p.free}});
  json cov = json::array();
  for (Eigen::Index i = 0; i < fit.covariance.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < fit.covariance.cols(); ++j) row.push_back(number_or_null(fit.covariance(i, j)));
    cov.push_back(row);
  }
  json config;
  if (fit.surface_config) {
    config = to_json(*fit.surface_config);
  } else {
    config = {{"fixed_beta", fit.fixed_beta ? json(*fit.fixed_beta) : json(nullptr)}};
  }
  config["model"] = fit.model;
  return {{"model", fit.model},
          {"label", fit.label},
          {"parameters", params},
          {"free_parameters", fit.free_names},
          {"covariance", cov},
          {"chi2", number_or_null(fit.chi2)},
          {"chi2_reduced", number_or_null(fit.chi2_reduced)},
          {"aicc", number_or_null(aicc(fit))},
          {"n_points", fit.n_points},
          {"n_free", fit.n_free},
          {"diagnostics",
           {{"iterations", fit.n_iter},
            {"converged", fit.converged},
            {"gradient_norm", number_or_null(fit.gradient_norm)},
            {"stop_reason", fit.stop_reason},
            {"objective_trace", fit.objective_trace}}},
          {"model_config", config},
          {"data_digest", hex64(fit.data_digest)}};
}

json to_json(const BetaEstimate& b) {
  return {{"beta", b.beta}, {"std_error", b.std_error}, {"tau", b.tau}, {"n_points", b.n_points}};
}

json to_json(const BathConfig& cfg) {
  return {{"dimension", cfg.dimension},
          {"alpha", cfg.alpha},
          {"density", cfg.density},
          {"n_bath", cfg.n_bath},
          {"n_realizations", cfg.n_realizations},
          {"coupling_prefactor", cfg.coupling_prefactor},
          {"r_min", cfg.resolved_r_min()},
          {"seed", cfg.seed},
          {"threads", cfg.threads}};
}

BathConfig bath_config_from_json(const json& doc, BathConfig base) {
  require_object(doc, "bath config");
  reject_unknown(doc,
                 {"dimension", "alpha", "density", "n_bath", "n_realizations", "coupling_prefactor", "r_min", "seed",
                  "threads"},
                 "bath config");
  base.dimension = doc.value("dimension", base.dimension);
  base.alpha = doc.value("alpha", base.alpha);
  base.density = doc.value("density", base.density);
  base.n_bath = doc.value("n_bath", base.n_bath);
  base.n_realizations = doc.value("n_realizations", base.n_realizations);
  base.coupling_prefactor = doc.value("coupling_prefactor", base.coupling_prefactor);
  if (doc.contains("r_min")) base.r_min = doc.at("r_min").get<double>();
  base.seed = doc.value("seed", base.seed);
  base.threads = doc.value("threads", base.threads);
  return base;
}

}  // namespace spinrelax
