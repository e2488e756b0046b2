#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qdc/cli.hpp"
#include "qdc/counts.hpp"
#include "qdc/optics.hpp"
#include "qdc/spacetime.hpp"

#include <json.hpp>

using namespace qdc;

namespace {

constexpr double kPi = std::numbers::pi;

std::string temp_dir() {
  static std::string dir = [] {
    char tmpl[] = "/tmp/qdcsim_test_XXXXXX";
    const char* made = mkdtemp(tmpl);
    REQUIRE(made != nullptr);
    return std::string(made);
  }();
  return dir;
}

std::string temp_path(const std::string& name) { return temp_dir() + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    fields.push_back(cur);
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::string make_counts_csv(const optics::NoiseModel& noise, double scale = 1e9) {
  std::vector<counts::CountRecord> records;
  for (double phi : optics::linspace(0.0, 2 * kPi, 8)) {
    for (double alpha : {0.0, kPi / 4, kPi / 2}) {
      for (double delta : {0.0, -1.4}) {
        counts::CountRecord rec;
        rec.setting = {phi, alpha, delta, 0};
        for (int bit = 0; bit < 2; ++bit) {
          optics::ExperimentSetting s = rec.setting;
          s.qrng_bit = bit;
          auto cond = optics::run_pipeline(s, noise).conditionals();
          for (int k = 0; k < 8; ++k) {
            rec.bins[static_cast<std::size_t>(bit) * 8 + k] =
                static_cast<std::uint64_t>(std::llround(scale * 0.5 * cond[k]));
          }
        }
        records.push_back(rec);
      }
    }
  }
  return counts::to_csv(records);
}

}  // namespace

TEST_CASE("surface: analytic grid with expected values") {
  const std::string path = temp_path("surface_small.csv");
  CliResult result = run_cli({"surface", "--phi", "0:6.283185307:4", "--alpha",
                              "0.785398163", "--delta", "0", "--output", path});
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("wrote 4 rows") != std::string::npos);

  const std::string csv = slurp(path);
  CHECK(csv.find("\r\n") == std::string::npos);  // LF line endings only
  auto rows = parse_csv(csv);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"phi", "alpha", "delta", "p_c_h", "p_c_v",
                                            "p_q_h", "p_q_v"});
  // first data row is phi = 0, alpha = pi/4, delta = 0
  CHECK(std::stod(rows[1][3]) ==
        doctest::Approx(optics::p_classical(0.0, kPi / 4)).epsilon(1e-8));
  CHECK(std::stod(rows[1][5]) ==
        doctest::Approx(optics::p_quantum(0.0, kPi / 4, 0.0)).epsilon(1e-8));
  // 9-decimal fixed formatting
  CHECK(rows[1][3].find('.') != std::string::npos);
  CHECK(rows[1][3].size() - rows[1][3].find('.') - 1 == 9);
}

TEST_CASE("surface: pure wave at the fringe maximum") {
  const std::string path = temp_path("surface_wave.csv");
  CliResult result = run_cli({"surface", "--phi", "3.141592653589793", "--alpha",
                              "1.570796326794897", "--delta", "0", "--noise", "1,1,1",
                              "--output", path});
  REQUIRE(result.exit_code == 0);
  auto rows = parse_csv(slurp(path));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][5] == "1.000000000");  // p_q_h
  CHECK(rows[1][3] == "1.000000000");  // p_c_h
}

TEST_CASE("surface: paper defaults produce the full published grid") {
  const std::string path = temp_path("surface_paper.csv");
  CliResult result = run_cli({"surface", "--paper-defaults", "--output", path});
  REQUIRE(result.exit_code == 0);
  auto rows = parse_csv(slurp(path));
  REQUIRE(rows.size() == 1 + 12 * 9 * 9);

  // spot-check rows against the density-matrix pipeline at the fitted noise
  const optics::NoiseModel noise{0.98, 0.90, 0.61};
  for (std::size_t i : {std::size_t(1), std::size_t(500), std::size_t(972)}) {
    const double phi = std::stod(rows[i][0]);
    const double alpha = std::stod(rows[i][1]);
    const double delta = std::stod(rows[i][2]);
    auto cond = optics::run_pipeline({phi, alpha, delta, 0}, noise).conditionals();
    using optics::AOutcome;
    using optics::COutcome;
    using optics::SOutcome;
    const double hp = cond[optics::bin_index(SOutcome::H, COutcome::Plus, AOutcome::AlphaPerp)];
    const double hm = cond[optics::bin_index(SOutcome::H, COutcome::Minus, AOutcome::AlphaPerp)];
    const double vp = cond[optics::bin_index(SOutcome::V, COutcome::Plus, AOutcome::AlphaPerp)];
    const double vm = cond[optics::bin_index(SOutcome::V, COutcome::Minus, AOutcome::AlphaPerp)];
    CHECK(std::stod(rows[i][3]) ==
          doctest::Approx((hp + hm) / (hp + hm + vp + vm)).epsilon(1e-7));
    CHECK(std::stod(rows[i][5]) == doctest::Approx(hm / (hm + vm)).epsilon(1e-7));
  }
}

TEST_CASE("surface: Monte Carlo runs are byte-identical and job-count independent") {
  const std::string path1 = temp_path("mc1.csv");
  const std::string path2 = temp_path("mc2.csv");
  const std::string path3 = temp_path("mc3.csv");
  const std::vector<std::string> base = {"surface", "--phi",   "0:6.28:3", "--alpha",
                                         "0.3,0.9", "--delta", "0",        "--trials",
                                         "20000",   "--seed",  "77"};
  auto with_output = [&](const std::string& p, const std::string& jobs) {
    std::vector<std::string> args = base;
    args.push_back("--output");
    args.push_back(p);
    if (!jobs.empty()) {
      args.push_back("--jobs");
      args.push_back(jobs);
    }
    return args;
  };
  CHECK(run_cli(with_output(path1, "")).exit_code == 0);
  CHECK(run_cli(with_output(path2, "")).exit_code == 0);
  CHECK(run_cli(with_output(path3, "4")).exit_code == 0);
  const std::string bytes = slurp(path1);
  CHECK(bytes == slurp(path2));
  CHECK(bytes == slurp(path3));

  auto rows = parse_csv(bytes);
  REQUIRE(rows.size() == 7);
  REQUIRE(rows[0].size() == 15);  // hat/err columns present
  // sampled estimates sit near the analytic values
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double exact = std::stod(rows[i][3]);
    const double hat = std::stod(rows[i][7]);
    const double err = std::stod(rows[i][8]);
    CHECK(std::abs(hat - exact) <= 6.0 * std::max(err, 1e-4));
  }
}

TEST_CASE("surface: starved bins leave empty estimate cells and a warning count") {
  // find a seed whose single trial misses every choice-0 alpha_perp bin
  const optics::ExperimentSetting setting{0.4, 0.6, 0.0, 0};
  std::uint64_t starved_seed = 0;
  bool found = false;
  for (std::uint64_t seed = 1; seed < 200 && !found; ++seed) {
    const counts::CountRecord rec =
        counts::simulate_counts(setting, {}, 1, counts::derive_seed(seed, 0));
    double perp_total = 0.0;
    for (int s = 0; s < 2; ++s) {
      for (int c = 0; c < 2; ++c) {
        perp_total += static_cast<double>(
            rec.bins[counts::count_bin(0, static_cast<optics::SOutcome>(s),
                                       static_cast<optics::COutcome>(c),
                                       optics::AOutcome::AlphaPerp)]);
      }
    }
    if (perp_total == 0.0) {
      starved_seed = seed;
      found = true;
    }
  }
  REQUIRE(found);

  const std::string path = temp_path("starved.csv");
  CliResult result = run_cli({"surface", "--phi", "0.4", "--alpha", "0.6", "--delta", "0",
                              "--trials", "1", "--seed", std::to_string(starved_seed),
                              "--output", path});
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("(1 degenerate)") != std::string::npos);
  auto rows = parse_csv(slurp(path));
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[1].size() == 15);
  for (std::size_t col = 7; col < 15; ++col) {
    CHECK(rows[1][col].empty());
  }
}

TEST_CASE("surface: config file feeds the sweep") {
  const std::string config_path = temp_path("sweep.json");
  const std::string out_path = temp_path("from_config.csv");
  nlohmann::json config;
  config["phi_grid"] = nlohmann::json{{"start", 0.0}, {"stop", 3.14}, {"count", 3}};
  config["alpha_grid"] = nlohmann::json::array({0.5});
  config["delta_grid"] = nlohmann::json::array({0.0, -0.5});
  config["noise"] = nlohmann::json{{"f1", 1.0}, {"f2", 1.0}, {"f3", 1.0}};
  config["trials"] = 0;
  spit(config_path, config.dump());
  CliResult result = run_cli({"surface", "--config", config_path, "--output", out_path});
  CHECK(result.exit_code == 0);
  CHECK(parse_csv(slurp(out_path)).size() == 1 + 3 * 1 * 2);
}

TEST_CASE("surface: degree input is rejected") {
  CliResult result = run_cli({"surface", "--phi", "45deg", "--output", temp_path("x.csv")});
  CHECK(result.exit_code == 1);
  CHECK(result.err.find("radians") != std::string::npos);
}

TEST_CASE("surface: unwritable output fails with nonzero exit") {
  CliResult result = run_cli({"surface", "--phi", "0", "--alpha", "0", "--delta", "0",
                              "--output", "/nonexistent_dir/out.csv"});
  CHECK(result.exit_code == 1);
  CHECK(result.err.find("error") != std::string::npos);
}

TEST_CASE("fit: recovers parameters from exact synthetic counts") {
  const std::string counts_path = temp_path("counts.csv");
  spit(counts_path, make_counts_csv({0.98, 0.90, 0.61}));
  CliResult result = run_cli({"fit", counts_path});
  CHECK(result.exit_code == 0);
  nlohmann::json report = nlohmann::json::parse(result.out);
  CHECK(std::abs(report["parameters"]["f1"].get<double>() - 0.98) <= 1e-6);
  CHECK(std::abs(report["parameters"]["f2"].get<double>() - 0.90) <= 1e-6);
  CHECK(std::abs(report["parameters"]["f3"].get<double>() - 0.61) <= 1e-6);
  CHECK(report["converged"].get<bool>());
}

TEST_CASE("fit: frozen mode fits only the free parameter") {
  const std::string counts_path = temp_path("counts_frozen.csv");
  spit(counts_path, make_counts_csv({1.0, 1.0, 0.61}));
  CliResult result = run_cli({"fit", counts_path, "--mode", "frozen:f1=1,f2=1"});
  CHECK(result.exit_code == 0);
  nlohmann::json report = nlohmann::json::parse(result.out);
  CHECK(report["parameters"]["f1"].get<double>() == 1.0);
  CHECK(report["parameters"]["f2"].get<double>() == 1.0);
  CHECK(report["std_errors"]["f1"].get<double>() == 0.0);
  CHECK(std::abs(report["parameters"]["f3"].get<double>() - 0.61) <= 1e-6);
}

TEST_CASE("fit: parse failures exit 1 with a line number") {
  const std::string empty_path = temp_path("empty.csv");
  spit(empty_path, "");
  CHECK(run_cli({"fit", empty_path}).exit_code == 1);

  const std::string bad_path = temp_path("bad.csv");
  spit(bad_path, "phi,alpha,delta,s,c,a,bit,count\n0.1,0.2,0.3,H,P,A,0\n");
  CliResult result = run_cli({"fit", bad_path});
  CHECK(result.exit_code == 1);
  CHECK(result.err.find("line 2") != std::string::npos);

  CHECK(run_cli({"fit", temp_path("missing.csv")}).exit_code == 1);
  CHECK(run_cli({"fit", bad_path, "--mode", "bogus"}).exit_code == 1);
}

TEST_CASE("locality: paper defaults pass, perturbed ledger fails") {
  const std::string report_path = temp_path("locality.json");
  CliResult ok = run_cli({"locality", "--paper-defaults", "--output", report_path});
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("overall: pass") != std::string::npos);
  nlohmann::json report = nlohmann::json::parse(slurp(report_path));
  CHECK(report["pass"].get<bool>());
  CHECK(report["pairs"].size() == 3);

  // move the far lab next door: time-like, exit 2
  spacetime::PaperTimelineConfig config;
  config.lab_separation_m = 1.0;
  const std::string ledger_path = temp_path("ledger_near.json");
  spit(ledger_path, spacetime::ledger_to_json(spacetime::build_paper_timeline(config)));
  CliResult fail = run_cli({"locality", "--ledger", ledger_path});
  CHECK(fail.exit_code == 2);
  CHECK(fail.out.find("FAIL") != std::string::npos);

  CliResult unknown = run_cli({"locality", "--paper-defaults", "--group-b", "F,R,X"});
  CHECK(unknown.exit_code == 1);

  const std::string garbage_path = temp_path("garbage.json");
  spit(garbage_path, "this is not json");
  CHECK(run_cli({"locality", "--ledger", garbage_path}).exit_code == 1);
}

TEST_CASE("hom: ideal dip is fitted to machine precision") {
  std::string csv = "position_mm,counts\n";
  for (int k = 0; k < 41; ++k) {
    const double x = -0.25 + 0.5 * k / 40;
    const double u = x / 0.05;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f,%.9f\n", x,
                  100.0 * (1.0 - 0.8 * std::exp(-0.5 * u * u)));
    csv += buf;
  }
  const std::string points_path = temp_path("dip.csv");
  const std::string curve_path = temp_path("dip_curve.csv");
  spit(points_path, csv);
  CliResult result = run_cli({"hom", points_path, "--curve", curve_path});
  CHECK(result.exit_code == 0);
  nlohmann::json report = nlohmann::json::parse(result.out);
  CHECK(std::abs(report["parameters"]["visibility"].get<double>() - 0.8) <= 1e-6);
  CHECK(std::abs(report["parameters"]["baseline"].get<double>() - 100.0) <= 1e-5);
  auto curve_rows = parse_csv(slurp(curve_path));
  CHECK(curve_rows.size() == 201);
  CHECK(curve_rows[0] == std::vector<std::string>{"position_mm", "model_counts"});
}

TEST_CASE("hom: line mode recovers the dip-position slope") {
  std::string csv = "phi,center_mm,sigma_mm\n";
  for (int k = 0; k < 9; ++k) {
    const double phi = 2 * kPi * k / 8;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.9f,%.9f,%.6f\n", phi, 1.0 + 0.01 * phi, 0.001);
    csv += buf;
  }
  const std::string path = temp_path("line.csv");
  spit(path, csv);
  CliResult result = run_cli({"hom", path, "--mode", "line"});
  CHECK(result.exit_code == 0);
  nlohmann::json report = nlohmann::json::parse(result.out);
  CHECK(std::abs(report["parameters"]["slope_mm_per_rad"].get<double>() - 0.01) <= 1e-9);
  CHECK(std::abs(report["parameters"]["intercept_mm"].get<double>() - 1.0) <= 1e-9);
}

TEST_CASE("hom: fewer than five points exits 1") {
  const std::string path = temp_path("short.csv");
  spit(path, "position_mm,counts\n0.0,10\n0.1,12\n0.2,9\n0.3,11\n");
  CHECK(run_cli({"hom", path}).exit_code == 1);
}

TEST_CASE("help and usage") {
  CliResult help = run_cli({"--help"});
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("surface") != std::string::npos);
  CHECK(run_cli({}).exit_code == 1);
  CHECK(run_cli({"unknown-subcommand"}).exit_code == 1);
}

TEST_CASE("relative outputs land in the configured output directory") {
  REQUIRE(setenv("QDCSIM_OUTPUT_DIR", temp_dir().c_str(), 1) == 0);
  CliResult result = run_cli({"surface", "--phi", "0", "--alpha", "0.3", "--delta", "0",
                              "--output", "env_dir.csv"});
  REQUIRE(unsetenv("QDCSIM_OUTPUT_DIR") == 0);
  CHECK(result.exit_code == 0);
  CHECK(parse_csv(slurp(temp_path("env_dir.csv"))).size() == 2);
}

TEST_CASE("built binary round trip") {
  const std::string path1 = temp_path("bin1.csv");
  const std::string path2 = temp_path("bin2.csv");
  const std::string base = std::string(QDCSIM_BINARY) +
                           " surface --phi 0:6.28:3 --alpha 0.5 --delta 0 --trials 5000"
                           " --seed 5 --output ";
  CHECK(std::system((base + path1 + " > /dev/null").c_str()) == 0);
  CHECK(std::system((base + path2 + " > /dev/null").c_str()) == 0);
  CHECK(slurp(path1) == slurp(path2));

  const int locality_ok = std::system(
      (std::string(QDCSIM_BINARY) + " locality --paper-defaults > /dev/null").c_str());
  CHECK(locality_ok == 0);
}
