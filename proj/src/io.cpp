#include "mvpp/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "mvpp/error.hpp"

namespace mvpp {

using nlohmann::json;

namespace {

Ring parse_ring(const json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + ": ring must be an array of positions");
  Ring r;
  for (const auto& pos : j) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
      throw InputError(what + ": invalid position");
    r.push_back({pos[0].get<double>(), pos[1].get<double>()});
  }
  // GeoJSON rings repeat the first vertex.
  if (r.size() > 1 && r.front().x == r.back().x && r.front().y == r.back().y) r.pop_back();
  if (r.size() < 3) throw InputError(what + ": ring needs at least 3 distinct vertices");
  return r;
}

Window polygon_from(const json& coords, const std::string& what) {
  if (!coords.is_array() || coords.empty()) throw InputError(what + ": polygon has no rings");
  Ring exterior = parse_ring(coords[0], what);
  std::vector<Ring> holes;
  for (std::size_t k = 1; k < coords.size(); ++k) holes.push_back(parse_ring(coords[k], what));
  return Window(std::move(exterior), std::move(holes));
}

Window window_from(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("type")) throw InputError(what + ": not a GeoJSON object");
  const std::string type = j["type"].get<std::string>();
  if (type == "Polygon") return polygon_from(j.value("coordinates", json()), what);
  if (type == "MultiPolygon") {
    const auto& c = j.value("coordinates", json());
    if (!c.is_array() || c.size() != 1) throw InputError(what + ": only single-part MultiPolygons are supported");
    return polygon_from(c[0], what);
  }
  if (type == "Feature") return window_from(j.value("geometry", json()), what);
  if (type == "FeatureCollection") {
    const auto& f = j.value("features", json());
    if (!f.is_array() || f.empty()) throw InputError(what + ": empty FeatureCollection");
    return window_from(f[0], what);
  }
  throw InputError(what + ": unsupported GeoJSON type '" + type + "'");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw InputError(where + ": cannot parse number '" + s + "'");
  return v;
}

}  // namespace

Window parse_geojson_window(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("GeoJSON: ") + e.what());
  }
  try {
    return window_from(j, "GeoJSON");
  } catch (const json::exception& e) {
    throw InputError(std::string("GeoJSON: ") + e.what());
  }
}

Window read_geojson_window(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_geojson_window(text);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_geojson_window(std::ostream& out, const Window& window) {
  auto ring = [](const Ring& r) {
    json a = json::array();
    for (const auto& p : r) a.push_back({p.x, p.y});
    a.push_back({r.front().x, r.front().y});
    return a;
  };
  json coords = json::array();
  coords.push_back(ring(window.exterior()));
  for (const auto& h : window.holes()) coords.push_back(ring(h));
  json j = {{"type", "Feature"},
            {"properties", json::object()},
            {"geometry", {{"type", "Polygon"}, {"coordinates", coords}}}};
  out << j.dump(1) << '\n';
}

PointPattern parse_pattern_csv(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw InputError(origin + ": empty pattern file");
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "x" || header[1] != "y" || header[2] != "mark")
    throw InputError(origin + ": header must start with x,y,mark");
  PointPattern p;
  for (std::size_t c = 3; c < header.size(); ++c) {
    if (header[c].empty()) throw InputError(origin + ": empty covariate name");
    p.covariate_names.push_back(header[c]);
  }
  std::vector<double> covs;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv(line);
    const std::string where = origin + ":" + std::to_string(lineno);
    if (f.size() != header.size())
      throw InputError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(f.size()));
    p.points.push_back({parse_double(f[0], where), parse_double(f[1], where)});
    const double m = parse_double(f[2], where);
    if (m < 0 || m != static_cast<int>(m)) throw InputError(where + ": mark must be a non-negative integer");
    p.marks.push_back(static_cast<int>(m));
    for (std::size_t c = 3; c < f.size(); ++c) covs.push_back(parse_double(f[c], where));
  }
  const auto nc = static_cast<Eigen::Index>(p.covariate_names.size());
  p.covariates.resize(static_cast<Eigen::Index>(p.points.size()), nc);
  for (Eigen::Index r = 0; r < p.covariates.rows(); ++r)
    for (Eigen::Index c = 0; c < nc; ++c) p.covariates(r, c) = covs[static_cast<std::size_t>(r * nc + c)];
  return p;
}

PointPattern read_pattern_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open pattern file " + path.string());
  return parse_pattern_csv(in, path.string());
}

void write_pattern_csv(std::ostream& out, const PointPattern& pattern) {
  out << "x,y,mark";
  for (const auto& n : pattern.covariate_names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    out << format_number(pattern.points[i].x) << ',' << format_number(pattern.points[i].y) << ','
        << pattern.marks[i];
    for (Eigen::Index c = 0; c < pattern.covariates.cols(); ++c)
      out << ',' << format_number(pattern.covariates(static_cast<Eigen::Index>(i), c));
    out << '\n';
  }
}

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text_file(path)); }

}  // namespace mvpp
