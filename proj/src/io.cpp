#include "spinrelax/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <system_error>

namespace spinrelax {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Int>
Int parse_int(std::string_view text, const std::string& source, std::size_t line) {
  text = trim(text);
  Int v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError(source, line, "invalid integer '" + std::string(text) + "'");
  return v;
}

class LineReader {
 public:
  LineReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  bool next(std::string& line) {
    if (!std::getline(is_, line)) return false;
    ++number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
  std::size_t number() const { return number_; }
  const std::string& source() const { return source_; }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(source_, number_, msg); }

 private:
  std::istream& is_;
  std::string source_;
  std::size_t number_ = 0;
};

/// Reads leading "# key=value" lines and the header; returns false on empty input.
bool read_preamble(LineReader& in, std::string_view header, CurveMeta* meta) {
  std::string line;
  while (in.next(line)) {
    const std::string_view s = trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      if (!meta) continue;
      std::string_view body = trim(s.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;  // free-form comment
      const std::string key(trim(body.substr(0, eq)));
      const std::string_view value = trim(body.substr(eq + 1));
      if (key == "T_K")
        meta->T_K = parse_double(value, in.source(), in.number());
      else if (key == "H_T")
        meta->H_T = parse_double(value, in.source(), in.number());
      else if (key == "shots")
        meta->shots = parse_int<long long>(value, in.source(), in.number());
      else if (key == "seed")
        meta->seed = parse_int<std::uint64_t>(value, in.source(), in.number());
      else
        meta->extra.emplace_back(key, std::string(value));
      continue;
    }
    if (s != header) in.fail("expected header '" + std::string(header) + "', got '" + std::string(s) + "'");
    return true;
  }
  return false;
}

std::vector<std::string_view> fields(LineReader& in, std::string_view line, std::size_t n) {
  auto f = split(line, ',');
  if (f.size() != n)
    in.fail("expected " + std::to_string(n) + " fields, got " + std::to_string(f.size()));
  return f;
}

void write_meta(std::ostream& os, const CurveMeta& meta) {
  if (!std::isnan(meta.T_K)) os << "# T_K=" << format_double(meta.T_K) << '\n';
  if (!std::isnan(meta.H_T)) os << "# H_T=" << format_double(meta.H_T) << '\n';
  os << "# shots=" << meta.shots << '\n';
  if (meta.seed) os << "# seed=" << *meta.seed << '\n';
  for (const auto& [k, v] : meta.extra) os << "# " << k << '=' << v << '\n';
}

struct Columns {
  std::vector<double> a, b, c;
};

Columns read_three_columns(LineReader& in) {
  Columns cols;
  std::string line;
  while (in.next(line)) {
    const std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto f = fields(in, s, 3);
    cols.a.push_back(parse_double(f[0], in.source(), in.number()));
    cols.b.push_back(parse_double(f[1], in.source(), in.number()));
    cols.c.push_back(parse_double(f[2], in.source(), in.number()));
  }
  return cols;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view text, const std::string& source, std::size_t line) {
  text = trim(text);
  if (text == "nan" || text == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError(source, line, "invalid number '" + std::string(text) + "'");
  return v;
}

void write_decay_curve(std::ostream& os, const DecayCurve& curve, std::string_view value_column) {
  write_meta(os, curve.meta);
  os << "delay_us," << value_column << ",sigma\n";
  for (Eigen::Index i = 0; i < curve.size(); ++i)
    os << format_double(curve.delays(i)) << ',' << format_double(curve.contrast(i)) << ','
       << format_double(curve.sigma(i)) << '\n';
}

DecayCurve read_decay_curve(std::istream& is, const std::string& source, std::string_view value_column) {
  LineReader in(is, source);
  DecayCurve curve;
  const std::string header = "delay_us," + std::string(value_column) + ",sigma";
  if (!read_preamble(in, header, &curve.meta)) throw ParseError(source, in.number(), "missing header '" + header + "'");
  const Columns c = read_three_columns(in);
  curve.delays = to_vector(c.a);
  curve.contrast = to_vector(c.b);
  curve.sigma = to_vector(c.c);
  return curve;
}

void write_survival_curve(std::ostream& os, const SurvivalCurve& curve, const CurveMeta& meta) {
  DecayCurve c{curve.times, curve.survival, curve.std_error, meta};
  write_decay_curve(os, c, "survival");
}

SurvivalCurve read_survival_curve(std::istream& is, const std::string& source) {
  DecayCurve c = read_decay_curve(is, source, "survival");
  return {c.delays, c.contrast, c.sigma};
}

void write_rate_surface(std::ostream& os, const RateSurface& surface) {
  os << "T_K,H_T,gamma_per_ms,sigma_per_ms,masked\n";
  for (const auto& p : surface.points)
    os << format_double(p.T) << ',' << format_double(p.H) << ',' << format_double(p.gamma) << ','
       << format_double(p.sigma) << ',' << (p.masked ? 1 : 0) << '\n';
}

RateSurface read_rate_surface(std::istream& is, const std::string& source) {
  LineReader in(is, source);
  const std::string header = "T_K,H_T,gamma_per_ms,sigma_per_ms,masked";
  if (!read_preamble(in, header, nullptr)) throw ParseError(source, in.number(), "missing header '" + header + "'");
  RateSurface surface;
  std::string line;
  while (in.next(line)) {
    const std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto f = fields(in, s, 5);
    RatePoint p;
    p.T = parse_double(f[0], source, in.number());
    p.H = parse_double(f[1], source, in.number());
    p.gamma = parse_double(f[2], source, in.number());
    p.sigma = parse_double(f[3], source, in.number());
    const std::string_view m = trim(f[4]);
    if (m == "0" || m == "false")
      p.masked = false;
    else if (m == "1" || m == "true")
      p.masked = true;
    else
      in.fail("masked must be 0 or 1, got '" + std::string(m) + "'");
    surface.points.push_back(p);
  }
  return surface;
}

void write_decomposition(std::ostream& os, std::span<const RatePoint> points, std::span<const RateBreakdown> rows,
                         const SurfaceModelConfig& cfg) {
  if (points.size() != rows.size()) throw DomainError("decomposition rows do not match points");
  os << "T_K,H_T,direct,raman,spin_spin,cross_relax,total,masked\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << format_double(points[i].T) << ',' << format_double(points[i].H) << ',' << format_double(r.direct) << ','
       << format_double(r.raman) << ',' << format_double(r.spin_spin) << ',' << format_double(r.cross_relax) << ','
       << format_double(r.total) << ',' << (RateSurface::excluded(points[i], cfg) ? 1 : 0) << '\n';
  }
}

void write_curve_residuals(std::ostream& os, const DecayCurve& curve, const FitResult& fit) {
  const StretchedExpParams p = stretched_exp_params(fit);
  os << "delay_us,contrast,sigma,model,residual\n";
  for (Eigen::Index i = 0; i < curve.size(); ++i)
    os << format_double(curve.delays(i)) << ',' << format_double(curve.contrast(i)) << ','
       << format_double(curve.sigma(i)) << ',' << format_double(contrast_model(p, curve.delays(i))) << ','
       << format_double(fit.residuals(i)) << '\n';
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(content.data(), std::streamsize(content.size()));
    if (!f) throw IoError("write to " + path.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot replace " + path.string());
  }
}

DecayCurve load_decay_curve(const std::filesystem::path& path) {
  std::istringstream ss(read_text_file(path));
  return read_decay_curve(ss, path.string());
}

RateSurface load_rate_surface(const std::filesystem::path& path) {
  std::istringstream ss(read_text_file(path));
  return read_rate_surface(ss, path.string());
}

}  // namespace spinrelax
