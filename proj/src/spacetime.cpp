#include "qdc/spacetime.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

namespace qdc::spacetime {

double channel_delay_ns(const ChannelSpec& spec) {
  if (spec.length_m < 0.0) {
    throw std::invalid_argument("channel length must be nonnegative");
  }
  if (spec.group_index < 1.0) {
    throw UnphysicalMediumError("group index below 1 implies superluminal signalling");
  }
  return spec.length_m * spec.group_index / kSpeedOfLightMps * 1e9;
}

const char* to_string(IntervalClass c) {
  switch (c) {
    case IntervalClass::SpaceLike: return "space_like";
    case IntervalClass::TimeLike: return "time_like";
    case IntervalClass::LightLike: return "light_like";
  }
  return "?";
}

double interval_margin_m(const SpacetimeEvent& a, const SpacetimeEvent& b) {
  double dx2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = a.position_m[k] - b.position_m[k];
    dx2 += d * d;
  }
  const double dt_s = std::abs(a.time_ns - b.time_ns) * 1e-9;
  return std::sqrt(dx2) - kSpeedOfLightMps * dt_s;
}

IntervalClass classify_interval(const SpacetimeEvent& a, const SpacetimeEvent& b) {
  const double margin = interval_margin_m(a, b);
  if (margin > kIntervalEpsilonM) return IntervalClass::SpaceLike;
  if (margin < -kIntervalEpsilonM) return IntervalClass::TimeLike;
  return IntervalClass::LightLike;
}

void Ledger::add(SpacetimeEvent event) {
  if (event.label.empty()) throw std::invalid_argument("event label must be nonempty");
  for (double x : event.position_m) {
    if (!std::isfinite(x)) throw std::invalid_argument("event position must be finite");
  }
  if (!std::isfinite(event.time_ns) || !std::isfinite(event.duration_ns) ||
      event.duration_ns < 0.0) {
    throw std::invalid_argument("event time/duration must be finite, duration nonnegative");
  }
  if (has(event.label)) {
    throw std::invalid_argument("duplicate event label '" + event.label + "'");
  }
  events_.push_back(std::move(event));
}

const SpacetimeEvent& Ledger::get(const std::string& label) const {
  for (const SpacetimeEvent& e : events_) {
    if (e.label == label) return e;
  }
  throw std::invalid_argument("unknown event label '" + label + "'");
}

bool Ledger::has(const std::string& label) const {
  return std::any_of(events_.begin(), events_.end(),
                     [&](const SpacetimeEvent& e) { return e.label == label; });
}

Ledger build_paper_timeline(const PaperTimelineConfig& config) {
  const double source_delay =
      channel_delay_ns(ChannelSpec::fiber(config.source_fiber_m, config.fiber_group_index));
  const double remote_delay =
      channel_delay_ns(ChannelSpec::fiber(config.remote_fiber_m, config.fiber_group_index));

  Ledger ledger;
  ledger.add({"G", {0.0, 0.0, 0.0}, 0.0});
  ledger.add({"I",
              {0.0, 0.0, 0.0},
              source_delay + config.local_optics_delay_ns,
              config.interference_window_ns});
  const double detect_time = remote_delay;
  ledger.add({"D", {config.lab_separation_m, 0.0, 0.0}, detect_time});
  ledger.add({"R",
              {config.lab_separation_m, 0.0, 0.0},
              detect_time - config.switch_to_detection_ns});
  ledger.add({"F",
              {config.lab_separation_m, 0.0, 0.0},
              detect_time - config.switch_to_detection_ns - config.qrng_response_ns});
  ledger.notes().push_back(
      "events F and R are pinned backwards from D (D - 88 ns - 80 ns); the absolute "
      "emission time of the free-running bit generator is not observable");
  return ledger;
}

LocalityReport check_locality(const Ledger& ledger, const std::vector<std::string>& group_a,
                              const std::vector<std::string>& group_b) {
  if (group_a.empty() || group_b.empty()) {
    throw std::invalid_argument("locality groups must be nonempty");
  }
  for (const auto& labels : {group_a, group_b}) {
    for (const std::string& label : labels) {
      if (!ledger.has(label)) {
        throw std::invalid_argument("unknown event label '" + label + "'");
      }
    }
  }

  auto window_points = [](const SpacetimeEvent& e) {
    std::vector<SpacetimeEvent> points{e};
    if (e.duration_ns > 0.0) {
      SpacetimeEvent end = e;
      end.time_ns += e.duration_ns;
      end.duration_ns = 0.0;
      points.push_back(end);
    }
    return points;
  };

  LocalityReport report;
  report.pass = true;
  for (const std::string& la : group_a) {
    for (const std::string& lb : group_b) {
      const SpacetimeEvent& ea = ledger.get(la);
      const SpacetimeEvent& eb = ledger.get(lb);
      double margin = std::numeric_limits<double>::infinity();
      for (const SpacetimeEvent& pa : window_points(ea)) {
        for (const SpacetimeEvent& pb : window_points(eb)) {
          margin = std::min(margin, interval_margin_m(pa, pb));
        }
      }
      PairReport pair;
      pair.a = la;
      pair.b = lb;
      pair.margin_m = margin;
      pair.classification = margin > kIntervalEpsilonM    ? IntervalClass::SpaceLike
                            : margin < -kIntervalEpsilonM ? IntervalClass::TimeLike
                                                          : IntervalClass::LightLike;
      pair.pass = pair.classification == IntervalClass::SpaceLike;
      report.pass = report.pass && pair.pass;
      report.pairs.push_back(std::move(pair));
    }
  }
  report.notes = ledger.notes();
  return report;
}

std::string ledger_to_json(const Ledger& ledger) {
  nlohmann::json arr = nlohmann::json::array();
  for (const SpacetimeEvent& e : ledger.events()) {
    nlohmann::json item = {{"label", e.label},
                           {"x_m", e.position_m[0]},
                           {"y_m", e.position_m[1]},
                           {"z_m", e.position_m[2]},
                           {"t_ns", e.time_ns}};
    if (e.duration_ns > 0.0) item["duration_ns"] = e.duration_ns;
    arr.push_back(std::move(item));
  }
  return arr.dump(2) + "\n";
}

Ledger ledger_from_json(const std::string& text) {
  nlohmann::json parsed = nlohmann::json::parse(text);  // throws on bad JSON
  if (!parsed.is_array()) {
    throw std::invalid_argument("ledger JSON must be an array of events");
  }
  Ledger ledger;
  for (const nlohmann::json& item : parsed) {
    SpacetimeEvent e;
    e.label = item.at("label").get<std::string>();
    e.position_m = {item.at("x_m").get<double>(), item.at("y_m").get<double>(),
                    item.at("z_m").get<double>()};
    e.time_ns = item.at("t_ns").get<double>();
    e.duration_ns = item.value("duration_ns", 0.0);
    ledger.add(std::move(e));
  }
  return ledger;
}

std::string report_to_json(const LocalityReport& report) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const PairReport& p : report.pairs) {
    pairs.push_back({{"a", p.a},
                     {"b", p.b},
                     {"classification", to_string(p.classification)},
                     {"margin_m", p.margin_m},
                     {"pass", p.pass}});
  }
  nlohmann::json out = {{"pass", report.pass}, {"pairs", std::move(pairs)},
                        {"notes", report.notes}};
  return out.dump(2) + "\n";
}

std::string report_to_table(const LocalityReport& report) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-4s %-4s %-12s %14s  %s\n", "a", "b", "interval",
                "margin_m", "verdict");
  out += buf;
  for (const PairReport& p : report.pairs) {
    std::snprintf(buf, sizeof buf, "%-4s %-4s %-12s %14.6f  %s\n", p.a.c_str(), p.b.c_str(),
                  to_string(p.classification), p.margin_m, p.pass ? "pass" : "FAIL");
    out += buf;
  }
  out += report.pass ? "overall: pass\n" : "overall: FAIL\n";
  for (const std::string& note : report.notes) {
    out += "note: " + note + "\n";
  }
  return out;
}

}  // namespace qdc::spacetime
