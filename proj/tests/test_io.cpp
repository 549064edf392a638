#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fracwave/io.hpp"

using namespace fracwave;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path d = fs::path(FRACWAVE_TEST_CACHE) / "io" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}
}  // namespace

TEST(Config, MinimalConfigTakesDefaults) {
  const io::RunConfig c = io::parse_config_text("p = 3\n");
  const io::RunConfig d;
  EXPECT_EQ(c.p, 3);
  EXPECT_EQ(io::to_text(c), io::to_text(d));
  EXPECT_EQ(c.blowup.n, 64);
  EXPECT_DOUBLE_EQ(c.blowup.weights.theta, 0.62);
  EXPECT_DOUBLE_EQ(c.blowup.weights.B, 100.0);
  EXPECT_EQ(c.b_list.size(), 4u);
}

TEST(Config, ThetaOutsideItsIntervalIsRejected) {
  try {
    io::parse_config_text("theta = 0.7\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_NE(std::string(e.what()).find("(3/5, 2/3)"), std::string::npos) << e.what();
  }
}

TEST(Config, MissingFileIsNotAParseError) {
  try {
    io::parse_config("/nonexistent/fracwave.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "not found");
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
  const std::string code = error_code([] { io::parse_config_text("p = 3\nL = wide\n", "x.cfg"); });
  EXPECT_NE(code, "not found");
  EXPECT_FALSE(code.empty());
}

TEST(Config, ErrorsNameLineAndField) {
  try {
    io::parse_config_text("p = 3\n\n# comment\npoints = 1000\n", "grid.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("points"), std::string::npos) << e.what();
  }
  try {
    io::parse_config_text("p = 3\nwidth = 2\n", "w.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "unknown key");
    EXPECT_NE(std::string(e.what()).find("w.cfg:2"), std::string::npos) << e.what();
  }
  EXPECT_EQ(error_code([] { io::parse_config_text("L = 4096\npoints = 1024\n"); }), "invalid field");
  EXPECT_EQ(error_code([] { io::parse_config_text("direction = up\n"); }), "bad direction");
  EXPECT_EQ(error_code([] { io::parse_config_text("p = 3 4\n"); }).empty(), false);
}

TEST(Config, TextRoundTrip) {
  io::RunConfig c;
  io::set_field(c, "L", "512");
  io::set_field(c, "points", "4096");
  io::set_field(c, "b_list", "0.01, 0.03,0.05 ,0.1");
  io::set_field(c, "direction", "backward");
  io::set_field(c, "theta", "0.65");
  io::set_field(c, "t_min", "0.001");
  const io::RunConfig r = io::parse_config_text(io::to_text(c));
  EXPECT_EQ(io::to_text(r), io::to_text(c));
  EXPECT_EQ(r.points, 4096u);
  EXPECT_EQ(r.blowup.direction, Direction::backward);
  ASSERT_EQ(r.b_list.size(), 4u);
  EXPECT_DOUBLE_EQ(r.b_list[1], 0.03);
  EXPECT_EQ(io::to_json(r)["theta"], "0.65");
}

TEST(Csv, RoundTripKeepsValues) {
  const fs::path d = scratch("csv");
  io::CsvTable t{{"t", "lambda", "N_eps"}, {{0.0, 1.0 / 3.0, NAN}, {1e-300, -2.5e12, INFINITY}}};
  io::write_csv(d / "a.csv", t);
  const io::CsvTable r = io::read_csv(d / "a.csv");
  EXPECT_EQ(r.header, t.header);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_NEAR(r.rows[0][1], 1.0 / 3.0, 1e-12);
  EXPECT_TRUE(std::isnan(r.rows[0][2]));
  EXPECT_TRUE(std::isinf(r.rows[1][2]));
  EXPECT_EQ(r.rows[1][0], 1e-300);
  EXPECT_EQ(r.values("lambda")[1], -2.5e12);
  EXPECT_THROW(r.column("x"), Error);
  // identical tables give identical bytes
  io::write_csv(d / "b.csv", t);
  EXPECT_EQ(io::read_text(d / "a.csv"), io::read_text(d / "b.csv"));
}

TEST(Csv, ReadingAMissingFileIsNotFound) {
  EXPECT_EQ(error_code([] { io::read_csv("/nonexistent/x.csv"); }), "not found");
}

TEST(Svg, PlotIsWellFormed) {
  io::PlotSpec p{"scale", "t", "lambda", true, true, {}};
  p.series.push_back({"lambda", {0.1, 0.2, 0.4}, {0.1, 0.21, 0.39}, false, true});
  p.series.push_back({"lambda = t", {0.1, 0.4}, {0.1, 0.4}, true, false});
  const std::string s = io::to_svg(p);
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  EXPECT_NE(s.find("lambda = t"), std::string::npos);
  EXPECT_NE(s.find("stroke-dasharray"), std::string::npos);
}

TEST(Manifest, CarriesStatusAndInputs) {
  io::RunManifest m;
  m.command = "evolve";
  m.inputs.emplace_back("q.ckpt", "abc");
  m.outputs = {"series.csv"};
  const auto j = m.to_json();
  EXPECT_EQ(j["status"], "running");
  EXPECT_EQ(j["inputs"][0]["sha256"], "abc");
  EXPECT_EQ(j["version"], FRACWAVE_VERSION);
  EXPECT_EQ(io::utc_now().size(), 20u);  // 2024-01-01T00:00:00Z
}
