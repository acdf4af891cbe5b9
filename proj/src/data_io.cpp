#include "prodmed/data_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "prodmed/error.hpp"
#include "prodmed/format.hpp"

namespace prodmed {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

[[noreturn]] void fail(const std::string& source, int line, const std::string& msg) {
  throw InputError(source + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& s, const std::string& source, int line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || s.empty()) fail(source, line, "invalid number '" + s + "'");
  return v;
}

struct FactorSpec {
  GeometryKind kind = GeometryKind::euclidean;
  int dim = 0;
  bool declared = false;
  [[nodiscard]] int columns() const { return kind == GeometryKind::euclidean ? dim : dim * (dim + 1) / 2; }
};

FactorSpec parse_factor(const std::string& value, const std::string& source, int line) {
  const auto colon = value.find(':');
  if (colon == std::string::npos) fail(source, line, "geometry entry '" + value + "' needs kind:dimension");
  const std::string kind = value.substr(0, colon);
  FactorSpec spec;
  spec.declared = true;
  if (kind == "euclidean") {
    spec.kind = GeometryKind::euclidean;
  } else if (kind == "spd") {
    spec.kind = GeometryKind::bures_wasserstein;
  } else {
    fail(source, line, "unknown geometry kind '" + kind + "'");
  }
  const double d = parse_double(value.substr(colon + 1), source, line);
  if (!(d >= 1.0) || d != static_cast<int>(d)) fail(source, line, "factor dimension must be a positive integer");
  spec.dim = static_cast<int>(d);
  return spec;
}

FactorPoint build_point(const FactorSpec& spec, const std::vector<double>& v, const std::string& source,
                        int line) {
  if (spec.kind == GeometryKind::euclidean) {
    return FactorPoint::euclidean(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  Eigen::MatrixXd s(spec.dim, spec.dim);
  std::size_t k = 0;
  for (int i = 0; i < spec.dim; ++i) {
    for (int j = i; j < spec.dim; ++j) s(i, j) = s(j, i) = v[k++];
  }
  try {
    return FactorPoint::spd(std::move(s));
  } catch (const GeometryError& e) {
    fail(source, line, e.what());
  }
}

}  // namespace

std::vector<double> flatten(const FactorPoint& x) {
  std::vector<double> out;
  if (x.kind() == GeometryKind::euclidean) {
    for (Eigen::Index i = 0; i < x.dimension(); ++i) out.push_back(x.matrix()(i, 0));
  } else {
    for (Eigen::Index i = 0; i < x.dimension(); ++i) {
      for (Eigen::Index j = i; j < x.dimension(); ++j) out.push_back(x.matrix()(i, j));
    }
  }
  return out;
}

ProductSample read_sample_csv(std::istream& in, const std::string& source) {
  FactorSpec m_spec;
  FactorSpec n_spec;
  std::vector<std::string> header;
  std::vector<ProductPoint> points;
  int m_cols = 0;
  int n_cols = 0;
  bool single_factor = false;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string text = trim(raw);
    if (text.empty()) continue;
    if (text.front() == '#') {
      std::istringstream is(text.substr(1));
      std::string word;
      is >> word;
      if (word != "geometry") continue;
      if (!header.empty()) fail(source, line, "geometry directive must precede the header");
      while (is >> word) {
        const auto eq = word.find('=');
        if (eq == std::string::npos) fail(source, line, "malformed geometry entry '" + word + "'");
        const std::string key = word.substr(0, eq);
        if (key == "M") {
          m_spec = parse_factor(word.substr(eq + 1), source, line);
        } else if (key == "N") {
          n_spec = parse_factor(word.substr(eq + 1), source, line);
        } else {
          fail(source, line, "geometry entry must be M=... or N=...");
        }
      }
      continue;
    }
    if (header.empty()) {
      header = split(text, ',');
      bool in_n = false;
      for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& h = header[c];
        const bool is_m = h.rfind("m_", 0) == 0;
        const bool is_n = h.rfind("n_", 0) == 0;
        if (!is_m && !is_n) fail(source, line, "column '" + h + "' must be named m_<k> or n_<k>");
        if (is_m && in_n) fail(source, line, "m_ columns must precede n_ columns");
        in_n = in_n || is_n;
        const int expected = (is_m ? m_cols : n_cols) + 1;
        if (h.substr(2) != std::to_string(expected)) {
          fail(source, line, "expected column " + std::string(is_m ? "m_" : "n_") + std::to_string(expected) +
                                 ", found '" + h + "'");
        }
        (is_m ? m_cols : n_cols) = expected;
      }
      if (m_cols == 0) fail(source, line, "no m_ columns");
      if (!m_spec.declared) m_spec = {GeometryKind::euclidean, m_cols, false};
      if (n_cols == 0 && !n_spec.declared) {
        single_factor = true;
        n_spec = {GeometryKind::euclidean, 1, false};
      } else if (!n_spec.declared) {
        n_spec = {GeometryKind::euclidean, n_cols, false};
      }
      if (m_spec.columns() != m_cols) {
        fail(source, line, "M factor needs " + std::to_string(m_spec.columns()) + " columns, header has " +
                               std::to_string(m_cols));
      }
      if (!single_factor && n_spec.columns() != n_cols) {
        fail(source, line, "N factor needs " + std::to_string(n_spec.columns()) + " columns, header has " +
                               std::to_string(n_cols));
      }
      continue;
    }
    const auto fields = split(text, ',');
    if (fields.size() != header.size()) {
      fail(source, line, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> mv;
    std::vector<double> nv;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const double v = parse_double(fields[c], source, line);
      if (!std::isfinite(v)) fail(source, line, "non-finite value");
      (static_cast<int>(c) < m_cols ? mv : nv).push_back(v);
    }
    if (single_factor) nv.assign(1, 0.0);
    points.push_back({build_point(m_spec, mv, source, line), build_point(n_spec, nv, source, line)});
  }
  if (header.empty()) fail(source, line, "missing header line");
  if (points.empty()) fail(source, line, "no observations");
  const ProductGeometry geometry{{m_spec.kind, m_spec.dim, 1.0}, {n_spec.kind, n_spec.dim, 1.0}};
  return ProductSample(geometry, std::move(points));
}

ProductSample read_sample_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file " + path.string());
  return read_sample_csv(in, path.string());
}

void write_sample_csv(std::ostream& out, const ProductSample& sample) {
  const auto& g = sample.geometry();
  auto kind = [](const ManifoldDescriptor& d) {
    return std::string(d.kind == GeometryKind::euclidean ? "euclidean" : "spd") + ":" + std::to_string(d.dimension);
  };
  out << "# geometry M=" << kind(g.m) << " N=" << kind(g.n) << '\n';
  const auto cols = [](const ManifoldDescriptor& d) {
    return d.kind == GeometryKind::euclidean ? d.dimension : d.dimension * (d.dimension + 1) / 2;
  };
  for (int i = 1; i <= cols(g.m); ++i) out << (i > 1 ? "," : "") << "m_" << i;
  for (int i = 1; i <= cols(g.n); ++i) out << ",n_" << i;
  out << '\n';
  for (const auto& z : sample.points()) {
    bool first = true;
    for (double v : flatten(z.p)) {
      out << (first ? "" : ",") << format_number(v, 17);
      first = false;
    }
    for (double v : flatten(z.q)) out << ',' << format_number(v, 17);
    out << '\n';
  }
}

std::map<std::string, std::string> read_key_value_config(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> out;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) fail(source, line, "expected key = value");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) fail(source, line, "empty key");
    if (!out.emplace(key, value).second) fail(source, line, "duplicate key '" + key + "'");
  }
  return out;
}

std::map<std::string, std::string> read_key_value_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  return read_key_value_config(in, path.string());
}

}  // namespace prodmed
