#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "mvpp/geometry.hpp"

namespace mvpp {

/// Window from a GeoJSON Polygon, a Feature wrapping one, or the first feature
/// of a FeatureCollection. Coordinates are taken as km. Throws InputError.
Window parse_geojson_window(const std::string& text);
Window read_geojson_window(const std::filesystem::path& path);
void write_geojson_window(std::ostream& out, const Window& window);

/// Pattern CSV: header `x,y,mark[,cov...]`, comma separated, decimal point.
PointPattern parse_pattern_csv(std::istream& in, const std::string& origin = "<stream>");
PointPattern read_pattern_csv(const std::filesystem::path& path);
void write_pattern_csv(std::ostream& out, const PointPattern& pattern);

/// Shortest decimal representation that round-trips.
std::string format_number(double v);

std::string read_text_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes (truncate + write); throws InputError.
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace mvpp
