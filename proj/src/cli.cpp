#include "qdc/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "qdc/counts.hpp"
#include "qdc/fitkit.hpp"
#include "qdc/optics.hpp"
#include "qdc/spacetime.hpp"

namespace qdc::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFlagged = 2;

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

double parse_radians(const std::string& token) {
  if (token.find("deg") != std::string::npos || token.find("\xc2\xb0") != std::string::npos) {
    throw UsageError("angles are radians; degree input is rejected: '" + token + "'");
  }
  std::size_t pos = 0;
  double value;
  try {
    value = std::stod(token, &pos);
  } catch (const std::exception&) {
    throw UsageError("could not parse number '" + token + "'");
  }
  if (pos != token.size()) {
    throw UsageError("trailing characters after number '" + token + "'");
  }
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

// Either "start:stop:count" or a comma-separated list of radians.
std::vector<double> parse_grid(const std::string& spec) {
  if (spec.find(':') != std::string::npos) {
    auto parts = split(spec, ':');
    if (parts.size() != 3) throw UsageError("grid triple must be start:stop:count");
    const double start = parse_radians(parts[0]);
    const double stop = parse_radians(parts[1]);
    int count;
    try {
      count = std::stoi(parts[2]);
    } catch (const std::exception&) {
      throw UsageError("grid count must be an integer");
    }
    if (count < 1) throw UsageError("grid count must be at least 1");
    return optics::linspace(start, stop, count);
  }
  std::vector<double> out;
  for (const std::string& token : split(spec, ',')) {
    out.push_back(parse_radians(token));
  }
  return out;
}

optics::NoiseModel parse_noise(const std::string& spec) {
  auto parts = split(spec, ',');
  if (parts.size() != 3) throw UsageError("noise must be f1,f2,f3");
  optics::NoiseModel noise{parse_radians(parts[0]), parse_radians(parts[1]),
                           parse_radians(parts[2])};
  noise.validate();
  return noise;
}

std::string format9(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", x);
  return buf;
}

std::string resolve_output(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* dir = std::getenv("QDCSIM_OUTPUT_DIR");
  if (dir == nullptr || *dir == '\0') return path;
  std::string out = dir;
  if (out.back() != '/') out += '/';
  return out + path;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream stream(path, std::ios::binary);
  if (!stream) throw std::runtime_error("cannot open '" + path + "' for writing");
  stream << content;
  if (!stream) throw std::runtime_error("write to '" + path + "' failed");
}

std::string read_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  return buffer.str();
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const int workers = std::max(1, jobs);
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// surface

struct SweepConfig {
  std::vector<double> phi_grid = optics::paper_phi_grid();
  std::vector<double> alpha_grid = optics::paper_alpha_grid();
  std::vector<double> delta_grid = optics::paper_delta_grid();
  optics::NoiseModel noise{};
  std::uint64_t trials = 0;  // 0 = analytic only
  std::uint64_t seed = 1;
  std::string output_path = "surface.csv";
};

std::vector<double> grid_from_json(const nlohmann::json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.is_object()) {
    return optics::linspace(j.at("start").get<double>(), j.at("stop").get<double>(),
                            j.at("count").get<int>());
  }
  throw UsageError("grid in config must be an array or {start, stop, count}");
}

void load_config_file(SweepConfig& config, const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  if (j.contains("phi_grid")) config.phi_grid = grid_from_json(j["phi_grid"]);
  if (j.contains("alpha_grid")) config.alpha_grid = grid_from_json(j["alpha_grid"]);
  if (j.contains("delta_grid")) config.delta_grid = grid_from_json(j["delta_grid"]);
  if (j.contains("noise")) {
    config.noise = {j["noise"].at("f1").get<double>(), j["noise"].at("f2").get<double>(),
                    j["noise"].at("f3").get<double>()};
    config.noise.validate();
  }
  if (j.contains("trials")) config.trials = j["trials"].get<std::uint64_t>();
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("output_path")) config.output_path = j["output_path"].get<std::string>();
}

int cmd_surface(const SweepConfig& config, int jobs, std::ostream& out) {
  if (config.phi_grid.empty() || config.alpha_grid.empty() || config.delta_grid.empty()) {
    throw UsageError("grids must be nonempty");
  }
  struct Row {
    optics::ExperimentSetting setting;
    optics::ConditionalProbabilities exact;
    std::optional<counts::ProbabilityEstimates> sampled;
    bool insufficient = false;
  };
  const std::size_t n_points =
      config.phi_grid.size() * config.alpha_grid.size() * config.delta_grid.size();
  std::vector<Row> rows(n_points);

  const std::size_t n_delta = config.delta_grid.size();
  const std::size_t n_alpha = config.alpha_grid.size();
  parallel_for(n_points, jobs, [&](std::size_t index) {
    Row& row = rows[index];
    const std::size_t pi = index / (n_alpha * n_delta);
    const std::size_t ai = (index / n_delta) % n_alpha;
    const std::size_t di = index % n_delta;
    row.setting = {config.phi_grid[pi], config.alpha_grid[ai], config.delta_grid[di], 0};
    row.exact = optics::conditional_probabilities(row.setting, config.noise);
    if (config.trials > 0) {
      counts::CountRecord rec = counts::simulate_counts(
          row.setting, config.noise, config.trials, counts::derive_seed(config.seed, index));
      try {
        row.sampled = counts::estimate_probabilities(rec);
      } catch (const counts::InsufficientCountsError&) {
        row.insufficient = true;
      }
    }
  });

  std::string csv = "phi,alpha,delta,p_c_h,p_c_v,p_q_h,p_q_v";
  if (config.trials > 0) {
    csv += ",p_c_h_hat,p_c_h_err,p_c_v_hat,p_c_v_err,p_q_h_hat,p_q_h_err,p_q_v_hat,p_q_v_err";
  }
  csv += '\n';
  std::size_t degenerate = 0;
  for (const Row& row : rows) {
    csv += format9(row.setting.phi) + "," + format9(row.setting.alpha) + "," +
           format9(row.setting.delta) + "," + format9(row.exact.p_c_h) + "," +
           format9(row.exact.p_c_v) + ",";
    if (row.exact.quantum_defined) {
      csv += format9(row.exact.p_q_h) + "," + format9(row.exact.p_q_v);
    } else {
      ++degenerate;
      csv += ",";
    }
    if (config.trials > 0) {
      if (row.sampled.has_value()) {
        const auto& est = *row.sampled;
        for (const counts::Estimate& e : {est.p_c_h, est.p_c_v, est.p_q_h, est.p_q_v}) {
          csv += "," + format9(e.value) + "," + format9(e.sigma);
        }
      } else {
        ++degenerate;
        csv += ",,,,,,,,";
      }
    }
    csv += '\n';
  }
  const std::string path = resolve_output(config.output_path);
  write_file(path, csv);
  out << "wrote " << rows.size() << " rows to " << path << " (" << degenerate
      << " degenerate)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit

fitkit::NoiseFitConfig parse_fit_mode(const std::string& mode) {
  fitkit::NoiseFitConfig config;
  if (mode == "joint") return config;
  const std::string prefix = "frozen:";
  if (mode.rfind(prefix, 0) != 0) {
    throw UsageError("mode must be 'joint' or 'frozen:f1=..[,f2=..][,f3=..]'");
  }
  for (const std::string& item : split(mode.substr(prefix.size()), ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("frozen entries look like f1=0.98");
    const std::string name = item.substr(0, eq);
    const double value = parse_radians(item.substr(eq + 1));
    int index;
    if (name == "f1") index = 0;
    else if (name == "f2") index = 1;
    else if (name == "f3") index = 2;
    else throw UsageError("unknown parameter '" + name + "'");
    if (value < 0.0 || value > 1.0) throw UsageError("frozen values must lie in [0, 1]");
    config.frozen[index] = true;
    config.frozen_values[index] = value;
  }
  return config;
}

int cmd_fit(const std::string& input, const std::string& mode, const std::string& output,
            std::ostream& out) {
  const auto records = counts::from_csv(read_file(input));
  const fitkit::FitResult result = fitkit::fit_noise_params(records, parse_fit_mode(mode));
  const std::string json = fitkit::fit_result_to_json(result);
  if (output.empty()) {
    out << json;
  } else {
    write_file(resolve_output(output), json);
    out << "wrote fit report to " << resolve_output(output) << "\n";
  }
  return result.converged ? kExitOk : kExitFlagged;
}

// ---------------------------------------------------------------------------
// locality

int cmd_locality(const std::string& ledger_path, bool paper_defaults,
                 const std::string& group_a, const std::string& group_b,
                 const std::string& output, std::ostream& out) {
  spacetime::Ledger ledger;
  if (paper_defaults) {
    ledger = spacetime::build_paper_timeline();
  } else if (!ledger_path.empty()) {
    ledger = spacetime::ledger_from_json(read_file(ledger_path));
  } else {
    throw UsageError("provide --ledger FILE or --paper-defaults");
  }
  std::vector<std::string> a, b;
  for (const std::string& s : split(group_a, ',')) {
    if (!s.empty()) a.push_back(s);
  }
  for (const std::string& s : split(group_b, ',')) {
    if (!s.empty()) b.push_back(s);
  }
  const spacetime::LocalityReport report = spacetime::check_locality(ledger, a, b);
  out << spacetime::report_to_table(report);
  if (!output.empty()) {
    write_file(resolve_output(output), spacetime::report_to_json(report));
  }
  return report.pass ? kExitOk : kExitFlagged;
}

// ---------------------------------------------------------------------------
// hom

std::vector<std::vector<double>> read_numeric_csv(const std::string& text,
                                                  const std::string& expected_header) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw std::runtime_error("CSV is empty");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header) {
    throw std::runtime_error("CSV line 1: expected header '" + expected_header + "'");
  }
  const std::size_t n_fields = split(expected_header, ',').size();
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != n_fields) {
      throw std::runtime_error("CSV line " + std::to_string(line_no) + ": expected " +
                               std::to_string(n_fields) + " fields");
    }
    std::vector<double> row;
    for (const std::string& f : fields) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(f, &pos));
        if (pos != f.size()) throw std::invalid_argument(f);
      } catch (const std::exception&) {
        throw std::runtime_error("CSV line " + std::to_string(line_no) +
                                 ": bad numeric field '" + f + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_hom(const std::string& input, const std::string& mode, const std::string& curve_path,
            const std::string& output, std::ostream& out) {
  fitkit::FitResult result;
  if (mode == "dip") {
    std::vector<fitkit::HomPoint> points;
    for (const auto& row : read_numeric_csv(read_file(input), "position_mm,counts")) {
      points.push_back({row[0], row[1]});
    }
    result = fitkit::fit_hom_dip(points);
    if (!curve_path.empty()) {
      fitkit::HomDipModel model{result.parameters[0], result.parameters[1],
                                result.parameters[2], result.parameters[3]};
      double x_min = points.front().position_mm, x_max = x_min;
      for (const auto& p : points) {
        x_min = std::min(x_min, p.position_mm);
        x_max = std::max(x_max, p.position_mm);
      }
      std::string csv = "position_mm,model_counts\n";
      for (double x : optics::linspace(x_min, x_max, 200)) {
        csv += format9(x) + "," + format9(model.value(x)) + "\n";
      }
      write_file(resolve_output(curve_path), csv);
    }
  } else if (mode == "line") {
    std::vector<fitkit::DipPositionPoint> points;
    for (const auto& row : read_numeric_csv(read_file(input), "phi,center_mm,sigma_mm")) {
      points.push_back({row[0], row[1], row[2]});
    }
    result = fitkit::fit_dip_position_vs_phi(points);
  } else {
    throw UsageError("mode must be 'dip' or 'line'");
  }
  const std::string json = fitkit::fit_result_to_json(result);
  if (output.empty()) {
    out << json;
  } else {
    write_file(resolve_output(output), json);
    out << "wrote fit report to " << resolve_output(output) << "\n";
  }
  return result.converged ? kExitOk : kExitFlagged;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Delayed-choice interferometry toolkit: sweeps, counts, fits, locality"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  int jobs = 1;
  std::string output;
  app.add_option("--seed", seed, "base seed for all pseudo-random streams");
  app.add_option("--jobs", jobs, "worker threads for grid evaluation")
      ->check(CLI::Range(1, 1024));
  app.add_option("--output", output, "output path (subcommand-specific default)");

  // surface
  auto* surface = app.add_subcommand("surface", "probability surfaces over a (phi, alpha, delta) grid");
  std::string phi_spec, alpha_spec, delta_spec, noise_spec, config_path;
  std::uint64_t trials = 0;
  bool paper_defaults_surface = false;
  surface->add_option("--config", config_path, "JSON sweep config");
  surface->add_option("--phi", phi_spec, "phi grid: start:stop:count or comma list (radians)");
  surface->add_option("--alpha", alpha_spec, "alpha grid (radians)");
  surface->add_option("--delta", delta_spec, "delta grid (radians)");
  surface->add_option("--noise", noise_spec, "noise model f1,f2,f3");
  surface->add_option("--trials", trials, "Monte Carlo trials per point (0 = analytic)");
  surface->add_flag("--paper-defaults", paper_defaults_surface,
                    "published grids and the fitted noise triple");

  // fit
  auto* fit = app.add_subcommand("fit", "fit the noise model to a counts CSV");
  std::string fit_input, fit_mode = "joint";
  fit->add_option("input", fit_input, "counts CSV")->required();
  fit->add_option("--mode", fit_mode, "joint or frozen:f1=..[,f2=..][,f3=..]");

  // locality
  auto* locality = app.add_subcommand("locality", "light-cone check of an event ledger");
  std::string ledger_path, group_a = "I", group_b = "F,R,D";
  bool paper_defaults_locality = false;
  locality->add_option("--ledger", ledger_path, "ledger JSON");
  locality->add_flag("--paper-defaults", paper_defaults_locality, "published timeline");
  locality->add_option("--group-a", group_a, "comma-separated labels");
  locality->add_option("--group-b", group_b, "comma-separated labels");

  // hom
  auto* hom = app.add_subcommand("hom", "interference-dip fits");
  std::string hom_input, hom_mode = "dip", curve_path;
  hom->add_option("input", hom_input, "points CSV")->required();
  hom->add_option("--mode", hom_mode, "dip (position_mm,counts) or line (phi,center_mm,sigma_mm)");
  hom->add_option("--curve", curve_path, "write the fitted model curve CSV here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (surface->parsed()) {
      SweepConfig config;
      if (!config_path.empty()) load_config_file(config, config_path);
      if (paper_defaults_surface) {
        config.phi_grid = optics::paper_phi_grid();
        config.alpha_grid = optics::paper_alpha_grid();
        config.delta_grid = optics::paper_delta_grid();
        config.noise = {0.98, 0.90, 0.61};
      }
      // explicit flags override both the config file and the defaults
      if (!phi_spec.empty()) config.phi_grid = parse_grid(phi_spec);
      if (!alpha_spec.empty()) config.alpha_grid = parse_grid(alpha_spec);
      if (!delta_spec.empty()) config.delta_grid = parse_grid(delta_spec);
      if (!noise_spec.empty()) config.noise = parse_noise(noise_spec);
      if (surface->count("--trials") > 0) config.trials = trials;
      if (app.count("--seed") > 0) config.seed = seed;
      if (!output.empty()) config.output_path = output;
      return cmd_surface(config, jobs, out);
    }
    if (fit->parsed()) {
      return cmd_fit(fit_input, fit_mode, output, out);
    }
    if (locality->parsed()) {
      return cmd_locality(ledger_path, paper_defaults_locality, group_a, group_b, output, out);
    }
    if (hom->parsed()) {
      return cmd_hom(hom_input, hom_mode, curve_path, output, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  err << "no subcommand given\n";
  return kExitUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace qdc::cli
