// spinrelax: synthesis, fitting and simulation front end.
//
// Every command writes <stem>.run_config.json next to its outputs; passing
// that file back through --config reproduces the run.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spinrelax/decay_profiles.hpp"
#include "spinrelax/ensemble.hpp"
#include "spinrelax/fitting.hpp"
#include "spinrelax/io.hpp"
#include "spinrelax/json_io.hpp"
#include "spinrelax/relaxation_model.hpp"
#include "spinrelax/spin_hamiltonian.hpp"

namespace fs = std::filesystem;
using namespace spinrelax;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_double(item, flag, 1));
    } catch (const ParseError&) {
      throw UsageError(flag + ": invalid number '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

/// "lo:hi" or "lo:hi:n".
std::vector<double> parse_range(const std::string& text, const std::string& flag, std::size_t parts) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      out.push_back(parse_double(item, flag, 1));
    } catch (const ParseError&) {
      throw UsageError(flag + ": invalid number '" + item + "'");
    }
  }
  if (out.size() != parts) throw UsageError(flag + ": expected " + std::to_string(parts) + " ':'-separated values");
  return out;
}

fs::path out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("SPINRELAX_OUT_DIR"); env && *env) return env;
  return ".";
}

/// --out if given, else <out-dir>/<default_name>.
fs::path output_path(const std::string& out, const std::string& dir, const std::string& default_name) {
  fs::path p = out.empty() ? out_dir(dir) / default_name : fs::path(out);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + p.parent_path().string());
  }
  return p;
}

fs::path with_suffix(fs::path stem, const std::string& suffix) {
  stem += suffix;
  return stem;
}

fs::path stem_of(const fs::path& file) {
  fs::path p = file;
  p.replace_extension();
  return p;
}

/// Flag values after parsing, defaults included, keyed by long name.
json resolved_options(const CLI::App* app) {
  json out = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    if (opt->get_type_size() == 0) {
      out[name] = opt->count() > 0 && opt->as<bool>();
    } else if (opt->count() > 0) {
      out[name] = opt->results().back();
    } else if (!opt->get_default_str().empty()) {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

void write_run_config(const fs::path& stem, const CLI::App* app, json resolved) {
  json doc = {{"command", app->get_name()}, {"options", resolved_options(app)}, {"resolved", std::move(resolved)}};
  write_text_file(with_suffix(stem, ".run_config.json"), doc.dump(2) + "\n");
}

/// Expands --config FILE into flags placed ahead of the user's own, so that
/// explicit flags win under the take-last policy.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  if (args.size() < 2) return args;
  std::string path;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigurationError(path + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigurationError(path + ": config must be a JSON object");
  if (doc.contains("options")) {
    if (doc.contains("command") && doc.at("command") != args[1])
      throw ConfigurationError(path + ": config is for command '" + doc.at("command").get<std::string>() + "'");
    doc = doc.at("options");
  }
  std::vector<std::string> injected;
  for (const auto& [key, value] : doc.items()) {
    if (key == "config") continue;
    const std::string flag = "--" + key;
    if (value.is_boolean())
      injected.push_back(flag + "=" + (value.get<bool>() ? "true" : "false"));
    else if (value.is_string())
      injected.push_back(flag + "=" + value.get<std::string>());
    else if (value.is_number())
      injected.push_back(flag + "=" + value.dump());
    else
      throw ConfigurationError(path + ": value of '" + key + "' must be a scalar");
  }
  args.insert(args.begin() + 2, injected.begin(), injected.end());
  return args;
}

struct SpinFlags {
  double D = 3.5, E = 0.0, g = 2.0;
  std::string exclusion = "0.05:0.17";
  bool include_lac = false;

  void add(CLI::App* app, bool with_mask) {
    app->add_option("--D", D, "Axial zero-field splitting (GHz)")->capture_default_str();
    app->add_option("--E", E, "Transverse zero-field splitting (GHz)")->capture_default_str();
    app->add_option("--g", g, "g-factor")->capture_default_str();
    if (with_mask) {
      app->add_option("--exclusion", exclusion, "Anti-crossing exclusion window lo:hi (T), mirrored to negative fields")
          ->capture_default_str();
      app->add_flag("--include-lac", include_lac, "Keep fields inside the exclusion windows");
    }
  }
  SpinSystemParams spin() const {
    SpinSystemParams s{D, E, g};
    s.validate();
    return s;
  }
  ExclusionMask mask() const {
    const auto r = parse_range(exclusion, "--exclusion", 2);
    return exclusion_windows(spin(), r[0], r[1]);
  }
};

// --- levels -----------------------------------------------------------------

struct LevelsCmd {
  SpinFlags spin;
  std::string field_range = "0:7";
  double step = 0.01;
  std::string out, dir;

  void add(CLI::App* app) {
    spin.add(app, true);
    app->add_option("--field-range", field_range, "Field range lo:hi (T)")->capture_default_str();
    app->add_option("--step", step, "Field step (T)")->capture_default_str();
    app->add_option("--out", out, "Output CSV");
    app->add_option("--out-dir", dir, "Output directory (default $SPINRELAX_OUT_DIR or .)");
  }

  void run(const CLI::App* app) const {
    const auto params = spin.spin();
    const auto r = parse_range(field_range, "--field-range", 2);
    if (!(step > 0) || !(r[1] >= r[0])) throw UsageError("--field-range and --step must describe a non-empty grid");
    const ExclusionMask mask = spin.mask();
    const long n = std::lround(std::floor((r[1] - r[0]) / step + 1e-9)) + 1;

    std::ostringstream os;
    os << "H_T,E0_GHz,E1_GHz,E2_GHz,f_lower_GHz,f_upper_GHz,excluded\n";
    for (long i = 0; i < n; ++i) {
      const double h = r[0] + double(i) * step;
      const auto lv = eigenlevels(params, h);
      double fl = std::numeric_limits<double>::quiet_NaN(), fu = fl;
      try {
        const auto f = transition_frequencies(params, h);
        fl = f.f_lower;
        fu = f.f_upper;
      } catch (const DegeneracyError& e) {
        std::cerr << "warning: " << e.what() << '\n';
      }
      os << format_double(h) << ',' << format_double(lv.eigenvalues(0)) << ',' << format_double(lv.eigenvalues(1))
         << ',' << format_double(lv.eigenvalues(2)) << ',' << format_double(fl) << ',' << format_double(fu) << ','
         << (mask.excludes(h) ? 1 : 0) << '\n';
    }
    const fs::path path = output_path(out, dir, "levels.csv");
    write_text_file(path, os.str());
    write_run_config(stem_of(path), app, {{"spin", to_json(params)}, {"exclusion", to_json(mask)}});
  }
};

// --- synth ------------------------------------------------------------------

struct SynthCmd {
  std::string model_json;
  std::string schedule = "default";
  double noise = 0.03;
  long long shots = 1000;
  std::uint64_t seed = 1;
  std::optional<double> T_K, H_T;
  std::string out, dir;

  void add(CLI::App* app) {
    app->add_option("--model-json", model_json, "Curve model {C0, T1 (us), beta}")->required();
    app->add_option("--schedule", schedule, "Delays: 'default' or lo:hi:n log-spaced (us)")->capture_default_str();
    app->add_option("--noise", noise, "Relative contrast noise near C = 0; 0 disables shot noise")->capture_default_str();
    app->add_option("--shots", shots, "Shots per delay")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--T-K", T_K, "Temperature recorded in the metadata (K)");
    app->add_option("--H-T", H_T, "Field recorded in the metadata (T)");
    app->add_option("--out", out, "Output CSV");
    app->add_option("--out-dir", dir, "Output directory (default $SPINRELAX_OUT_DIR or .)");
  }

  void run(const CLI::App* app) const {
    const StretchedExpParams p = stretched_exp_params_from_json(json::parse(read_text_file(model_json)));
    Eigen::VectorXd delays;
    if (schedule == "default") {
      delays = default_schedule(p.T1);
    } else {
      const auto r = parse_range(schedule, "--schedule", 3);
      delays = log_schedule(r[0], r[1], int(r[2]));
    }
    if (!(noise >= 0)) throw UsageError("--noise must be >= 0");
    const NoiseModel nm = noise > 0 ? NoiseModel::relative(noise, p.C0, shots) : NoiseModel::none();
    DecayCurve curve = synthesize_curve(p, delays, nm, seed);
    if (T_K) curve.meta.T_K = *T_K;
    if (H_T) curve.meta.H_T = *H_T;

    std::ostringstream os;
    write_decay_curve(os, curve);
    const fs::path path = output_path(out, dir, "synth.csv");
    write_text_file(path, os.str());
    write_run_config(stem_of(path), app,
                     {{"model", to_json(p)},
                      {"photons_per_shot", nm.noiseless() ? json(nullptr) : json(nm.photons_per_shot)},
                      {"shots", nm.noiseless() ? 0 : nm.shots}});
  }
};

// --- synth-surface ------------------------------------------------------------

struct SynthSurfaceCmd {
  SpinFlags spin;
  std::string model_json, temps, fields, branch = "upper";
  double noise = 0.03;
  std::uint64_t seed = 1;
  std::string out, dir;

  void add(CLI::App* app) {
    spin.add(app, true);
    app->add_option("--model-json", model_json, "Relaxation parameters JSON")->required();
    app->add_option("--temps", temps, "Comma-separated temperatures (K); default 15..250 K grid");
    app->add_option("--fields", fields, "Comma-separated fields (T); default 0..7 T grid");
    app->add_option("--branch", branch, "Transition supplying f0: upper, lower or both")->capture_default_str();
    app->add_option("--noise", noise, "Relative Gaussian noise on each rate")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--out", out, "Output CSV");
    app->add_option("--out-dir", dir, "Output directory (default $SPINRELAX_OUT_DIR or .)");
  }

  void run(const CLI::App* app) const {
    const RelaxationParams p = relaxation_params_from_json(json::parse(read_text_file(model_json)));
    SurfaceModelConfig cfg;
    cfg.spin = spin.spin();
    cfg.rate.mask = spin.mask();
    cfg.rate.include_lac = spin.include_lac;
    cfg.rate.branch = branch_from_name(branch);
    cfg.cross_relax = p.cross_relax.has_value();
    const auto t = temps.empty() ? default_surface_temperatures() : parse_list(temps, "--temps");
    const auto h = fields.empty() ? default_surface_fields() : parse_list(fields, "--fields");
    const RateSurface surface = synthesize_rate_surface(p, cfg, t, h, noise, seed);

    std::ostringstream os;
    write_rate_surface(os, surface);
    const fs::path path = output_path(out, dir, "surface.csv");
    write_text_file(path, os.str());
    write_run_config(stem_of(path), app, {{"model", to_json(p)}, {"model_config", to_json(cfg)}});
  }
};

// --- fit-curve ----------------------------------------------------------------

struct FitCurveCmd {
  std::string in;
  std::optional<double> fixed_beta;
  bool compare = false;
  std::string report, dir;

  void add(CLI::App* app) {
    app->add_option("--in", in, "Decay curve CSV")->required();
    app->add_option("--fixed-beta", fixed_beta, "Hold beta at this value");
    app->add_flag("--compare", compare, "Also fit beta = 0.5 and beta = 1 and rank the fits by AICc");
    app->add_option("--report", report, "Fit JSON (default <out-dir>/<input stem>.fit.json)");
    app->add_option("--out-dir", dir, "Output directory (default $SPINRELAX_OUT_DIR or .)");
  }

  void run(const CLI::App* app) const {
    const DecayCurve curve = load_decay_curve(in);
    CurveFitOptions opts;
    opts.fixed_beta = fixed_beta;
    const FitResult fit = fit_stretched_exp(curve, opts);
    json doc = to_json(fit);

    if (compare) {
      std::vector<FitResult> fits{fit};
      for (double b : {0.5, 1.0}) {
        CurveFitOptions o;
        o.fixed_beta = b;
        fits.push_back(fit_stretched_exp(curve, o));
      }
      json block = {{"fits", json::array()}, {"ranking", json::array()}};
      for (const auto& f : fits) block["fits"].push_back(to_json(f));
      for (const auto& r : compare_models(fits))
        block["ranking"].push_back(
            {{"label", r.label}, {"n_free", r.n_free}, {"aicc", r.aicc}, {"delta_aicc", r.delta}});
      doc["comparison"] = block;
    }

    const fs::path path = output_path(report, dir, fs::path(in).stem().string() + ".fit.json");
    write_text_file(path, doc.dump(2) + "\n");
    std::ostringstream os;
    write_curve_residuals(os, curve, fit);
    fs::path stem = stem_of(path);
    if (stem.extension() == ".fit") stem.replace_extension();
    write_text_file(with_suffix(stem, ".residuals.csv"), os.str());
    write_run_config(stem, app, {{"input", in}, {"n_points", fit.n_points}});
  }
};

// --- fit-surface ----------------------------------------------------------------

struct FitSurfaceCmd {
  SpinFlags spin;
  std::string in, model_config, branch, fix, release;
  std::optional<double> tau_c_ps, n1, n2;
  bool cross_relax = false;
  int threads = 0;
  std::string out, dir;

  void add(CLI::App* app) {
    spin.add(app, true);
    app->add_option("--in", in, "Rate surface CSV")->required();
    app->add_option("--model-config", model_config, "Model configuration JSON");
    app->add_option("--branch", branch, "Transition supplying f0: upper, lower or both");
    app->add_option("--fix", fix, "Comma-separated parameters held at their initial values");
    app->add_option("--release", release, "Comma-separated parameters to fit");
    app->add_option("--tau-c-ps", tau_c_ps, "Initial bath correlation time (ps)");
    app->add_option("--n1", n1, "Initial direct-process exponent");
    app->add_option("--n2", n2, "Initial Raman exponent");
    app->add_flag("--cross-relax", cross_relax, "Include the zero-field cross-relaxation term");
    app->add_option("--threads", threads, "Worker threads (the surface fit itself runs serially)")->capture_default_str();
    app->add_option("--out", out, "Output stem: writes <stem>.fit.json and <stem>.decomposition.csv");
    app->add_option("--out-dir", dir, "Output directory (default $SPINRELAX_OUT_DIR or .)");
  }

  void run(const CLI::App* app) const {
    const RateSurface surface = load_rate_surface(in);
    SurfaceModelConfig cfg;
    SurfaceFitOptions opts;
    cfg.spin = spin.spin();
    cfg.rate.mask = spin.mask();
    if (!model_config.empty()) {
      const json doc = json::parse(read_text_file(model_config));
      cfg = surface_config_from_json(doc);
      if (doc.contains("init")) opts.init = relaxation_params_from_json(doc.at("init"));
    }
    // explicit flags override the file
    if (app->count("--D") || app->count("--E") || app->count("--g")) cfg.spin = spin.spin();
    if (app->count("--exclusion")) cfg.rate.mask = spin.mask();
    if (spin.include_lac) cfg.rate.include_lac = true;
    if (!branch.empty()) cfg.rate.branch = branch_from_name(branch);
    if (cross_relax) cfg.cross_relax = true;
    auto names = [](const std::string& list) {
      std::vector<SurfaceParam> out;
      std::stringstream ss(list);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto sp = surface_param_from_name(item);
        if (!sp) throw UsageError("unknown parameter '" + item + "'");
        out.push_back(*sp);
      }
      return out;
    };
    for (auto sp : names(fix)) cfg.fix(sp);
    for (auto sp : names(release)) cfg.release(sp);
    if (tau_c_ps || n1 || n2) {
      RelaxationParams init = opts.init.value_or(RelaxationParams{0, 1.5, 0, 2, 0, 100, {}});
      if (tau_c_ps) init.tau_c = *tau_c_ps;
      if (n1) init.n1 = *n1;
      if (n2) init.n2 = *n2;
      opts.init = init;
    }

    const FitResult fit = fit_rate_surface(surface, cfg, opts);
    const fs::path stem = output_path(out, dir, "surface_fit");
    write_text_file(with_suffix(stem, ".fit.json"), to_json(fit).dump(2) + "\n");

    const auto rows = decompose(relaxation_params(fit), cfg, surface.points);
    std::ostringstream os;
    write_decomposition(os, surface.points, rows, cfg);
    write_text_file(with_suffix(stem, ".decomposition.csv"), os.str());
    write_run_config(stem, app, {{"input", in}, {"model_config", to_json(cfg)},
                                     {"init", opts.init ? to_json(*opts.init) : json(nullptr)}});
  }
};

// --- bath-sim -------------------------------------------------------------------

struct BathSimCmd {
  BathConfig cfg;
  std::optional<double> r_min;
  int n_times = 121;
  double p_lo = 0.05, p_hi = 0.8;
  std::string out, dir;

  void add(CLI::App* app) {
    app->add_option("--dim", cfg.dimension, "Bath dimension (2 or 3)")->capture_default_str();
    app->add_option("--alpha", cfg.alpha, "Coupling power law r^(-alpha)")->capture_default_str();
    app->add_option("--density", cfg.density, "Bath spins per unit volume or area")->capture_default_str();
    app->add_option("--n-bath", cfg.n_bath, "Bath spins per realization")->capture_default_str();
    app->add_option("--n-real", cfg.n_realizations, "Realizations")->capture_default_str();
    app->add_option("--coupling", cfg.coupling_prefactor, "Rate prefactor")->capture_default_str();
    app->add_option("--r-min", r_min, "Hard-core radius (default 0.1 x mean nearest-neighbour spacing)");
    app->add_option("--seed", cfg.seed, "Root random seed")->capture_default_str();
    app->add_option("--threads", cfg.threads, "Worker threads, 0 for all cores")->capture_default_str();
    app->add_option("--n-times", n_times, "Points on the log time grid")->capture_default_str();
    app->add_option("--window-lo", p_lo, "Lower survival bound of the beta window")->capture_default_str();
    app->add_option("--window-hi", p_hi, "Upper survival bound of the beta window")->capture_default_str();
    app->add_option("--out", out, "Output stem: writes <stem>.survival.csv and <stem>.beta.json");
    app->add_option("--out-dir", dir, "Output directory (default $SPINRELAX_OUT_DIR or .)");
  }

  void run(const CLI::App* app) {
    cfg.r_min = r_min;
    cfg.validate();
    if (n_times < 5) throw UsageError("--n-times must be >= 5");
    const Eigen::VectorXd times = default_time_grid(cfg, n_times);
    const SurvivalCurve curve = survival_curve(cfg, times);
    const BetaEstimate est = estimate_beta(curve, p_lo, p_hi);

    const fs::path stem = output_path(out, dir, "bath");
    CurveMeta meta;
    meta.seed = cfg.seed;
    meta.shots = cfg.n_realizations;
    meta.extra = {{"time_unit", "1/coupling_prefactor"}, {"dimension", std::to_string(cfg.dimension)},
                  {"alpha", format_double(cfg.alpha)}};
    std::ostringstream os;
    write_survival_curve(os, curve, meta);
    write_text_file(with_suffix(stem, ".survival.csv"), os.str());

    json doc = to_json(est);
    doc["expected_beta"] = cfg.stable_index();
    doc["characteristic_time"] = characteristic_time(cfg);
    doc["window"] = {p_lo, p_hi};
    doc["bath"] = to_json(cfg);
    write_text_file(with_suffix(stem, ".beta.json"), doc.dump(2) + "\n");
    write_run_config(stem, app, {{"bath", to_json(cfg)}});
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spin relaxation modelling: levels, synthesis, fits and bath simulation"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  LevelsCmd levels;
  SynthCmd synth;
  SynthSurfaceCmd synth_surface;
  FitCurveCmd fit_curve;
  FitSurfaceCmd fit_surface;
  BathSimCmd bath_sim;

  std::string config_unused;
  auto add = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_unused, "JSON file of flag values; explicit flags take precedence");
    cmd.add(sub);
    return sub;
  };
  CLI::App* s_levels = add("levels", "Eigenlevels and transitions against field", levels);
  CLI::App* s_synth = add("synth", "Synthesize a decay curve", synth);
  CLI::App* s_surface = add("synth-surface", "Synthesize a rate surface on a T x H grid", synth_surface);
  CLI::App* s_fit_curve = add("fit-curve", "Fit a stretched exponential to a decay curve", fit_curve);
  CLI::App* s_fit_surface = add("fit-surface", "Global fit of the relaxation model to a rate surface", fit_surface);
  CLI::App* s_bath = add("bath-sim", "Monte Carlo disorder average over a dipolar bath", bath_sim);

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(args);
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());
    try {
      app.parse(int(cargs.size()), const_cast<char**>(cargs.data()));
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << "usage error: " << e.what() << "\nRun with --help for more information.\n";
      return 2;
    }

    if (s_levels->parsed()) levels.run(s_levels);
    if (s_synth->parsed()) synth.run(s_synth);
    if (s_surface->parsed()) synth_surface.run(s_surface);
    if (s_fit_curve->parsed()) fit_curve.run(s_fit_curve);
    if (s_fit_surface->parsed()) fit_surface.run(s_fit_surface);
    if (s_bath->parsed()) bath_sim.run(s_bath);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const IdentifiabilityError& e) {
    std::cerr << "identifiability error: " << e.what() << '\n';
    return 3;
  } catch (const InsufficientDataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 4;
  } catch (const json::exception& e) {
    std::cerr << "JSON error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
