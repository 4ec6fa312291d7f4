#include <doctest.h>

#include <sstream>

#include "mvpp/error.hpp"
#include "mvpp/io.hpp"

using namespace mvpp;

TEST_CASE("geojson windows") {
  const std::string poly =
      R"({"type":"Polygon","coordinates":[[[0,0],[2,0],[2,1],[0,1],[0,0]],[[0.5,0.25],[0.5,0.75],[1,0.75],[1,0.25],[0.5,0.25]]]})";
  const Window w = parse_geojson_window(poly);
  CHECK(w.area() == doctest::Approx(2.0 - 0.25));
  CHECK(w.exterior().size() == 4);
  CHECK(w.holes().size() == 1);

  const Window f = parse_geojson_window(R"({"type":"Feature","properties":{},"geometry":)" + poly + "}");
  CHECK(f.area() == doctest::Approx(w.area()));
  const Window fc =
      parse_geojson_window(R"({"type":"FeatureCollection","features":[{"type":"Feature","geometry":)" + poly + "}]}");
  CHECK(fc.area() == doctest::Approx(w.area()));

  std::ostringstream out;
  write_geojson_window(out, w);
  const Window back = parse_geojson_window(out.str());
  CHECK(back.area() == doctest::Approx(w.area()).epsilon(1e-14));
  CHECK(back.exterior() == w.exterior());

  CHECK_THROWS_AS(parse_geojson_window("{not json"), InputError);
  CHECK_THROWS_AS(parse_geojson_window(R"({"type":"Point","coordinates":[0,0]})"), InputError);
  CHECK_THROWS_AS(parse_geojson_window(R"({"type":"Polygon","coordinates":[[[0,0],[1,0],[0,0]]]})"), InputError);
  CHECK_THROWS_AS(parse_geojson_window(R"({"type":"Polygon","coordinates":[[[0,0],["a",0],[1,1]]]})"), InputError);
  CHECK_THROWS_WITH_AS(read_geojson_window("/nonexistent/w.geojson"), doctest::Contains("/nonexistent/w.geojson"),
                       InputError);
}

TEST_CASE("pattern csv") {
  std::istringstream in("x,y,mark,age\n0.1,0.2,0,30\n0.5, 0.5 ,1,41.5\r\n\n1e-1,2.5E-1,2,-3\n");
  const PointPattern p = parse_pattern_csv(in);
  REQUIRE(p.size() == 3);
  CHECK(p.marks == std::vector<int>{0, 1, 2});
  CHECK(p.covariate_names == std::vector<std::string>{"age"});
  CHECK(p.covariates(1, 0) == 41.5);
  CHECK(p.points[2].y == 0.25);

  std::ostringstream out;
  write_pattern_csv(out, p);
  std::istringstream again(out.str());
  const PointPattern q = parse_pattern_csv(again);
  CHECK(q.points == p.points);
  CHECK(q.marks == p.marks);
  CHECK(q.covariates == p.covariates);

  auto bad = [](const std::string& s) {
    std::istringstream b(s);
    return parse_pattern_csv(b, "bad.csv");
  };
  CHECK_THROWS_AS(bad(""), InputError);
  CHECK_THROWS_AS(bad("a,b,c\n"), InputError);
  CHECK_THROWS_AS(bad("x,y,mark\n1,2\n"), InputError);
  CHECK_THROWS_AS(bad("x,y,mark\n1,2,0.5\n"), InputError);
  CHECK_THROWS_AS(bad("x,y,mark\n1,2,-1\n"), InputError);
  CHECK_THROWS_WITH_AS(bad("x,y,mark\n1,2,0\n1,2;3,0\n"), doctest::Contains("bad.csv:3"), InputError);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 5.0}) {
    const std::string s = format_number(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(format_number(3.0) == "3");
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
