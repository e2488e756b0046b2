// Event ledger and light-cone arithmetic: fiber/cable delays, interval
// classification and the locality check between the interference events and
// the remote choice/projection events.
#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdc::spacetime {

inline constexpr double kSpeedOfLightMps = 299'792'458.0;
inline constexpr double kIntervalEpsilonM = 1e-6;

struct UnphysicalMediumError : std::invalid_argument {
  explicit UnphysicalMediumError(const std::string& what) : std::invalid_argument(what) {}
};

enum class Medium { Fiber, FreeSpace, Coax };

struct ChannelSpec {
  Medium kind = Medium::Fiber;
  double length_m = 0.0;
  double group_index = 1.5;

  static ChannelSpec fiber(double length_m, double group_index = 1.5) {
    return {Medium::Fiber, length_m, group_index};
  }
  static ChannelSpec free_space(double length_m, double group_index = 1.0) {
    return {Medium::FreeSpace, length_m, group_index};
  }
  static ChannelSpec coax(double length_m, double group_index = 1.5) {
    return {Medium::Coax, length_m, group_index};
  }
};

// length * group_index / c, in nanoseconds.
double channel_delay_ns(const ChannelSpec& spec);

struct SpacetimeEvent {
  std::string label;
  std::array<double, 3> position_m{0.0, 0.0, 0.0};
  double time_ns = 0.0;
  double duration_ns = 0.0;  // optional event window; 0 = instantaneous
};

enum class IntervalClass { SpaceLike, TimeLike, LightLike };

const char* to_string(IntervalClass c);

// |dx| - c|dt| in meters; positive outside the light cone.
double interval_margin_m(const SpacetimeEvent& a, const SpacetimeEvent& b);
IntervalClass classify_interval(const SpacetimeEvent& a, const SpacetimeEvent& b);

class Ledger {
 public:
  void add(SpacetimeEvent event);
  const SpacetimeEvent& get(const std::string& label) const;
  bool has(const std::string& label) const;
  const std::vector<SpacetimeEvent>& events() const { return events_; }
  std::vector<std::string>& notes() { return notes_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  std::vector<SpacetimeEvent> events_;
  std::vector<std::string> notes_;
};

struct PaperTimelineConfig {
  double source_fiber_m = 186.0;   // delay fibers for photons S and C
  double remote_fiber_m = 215.0;   // fiber carrying photon A to the far lab
  double fiber_group_index = 1.5;
  double local_optics_delay_ns = 29.0;   // short fibers and free space
  double qrng_response_ns = 80.0;        // trigger to random-bit output
  double switch_to_detection_ns = 88.0;  // bit output to detector pulse
  double lab_separation_m = 141.0;       // line of sight between labs
  double interference_window_ns = 0.0;   // optional duration for event I
};

// Events G (photon generation), I (interference), and F, R, D (bit
// generation, switch drive, detection) with the published delays. F and R
// are pinned backwards from D; the ledger carries a note recording that.
Ledger build_paper_timeline(const PaperTimelineConfig& config = {});

struct PairReport {
  std::string a;
  std::string b;
  IntervalClass classification = IntervalClass::SpaceLike;
  double margin_m = 0.0;
  bool pass = false;
};

struct LocalityReport {
  std::vector<PairReport> pairs;
  bool pass = false;
  std::vector<std::string> notes;
};

// Every cross pair (a in group_a, b in group_b) must be space-like. When an
// event has a nonzero duration the whole window is checked and the smallest
// margin is reported.
LocalityReport check_locality(const Ledger& ledger, const std::vector<std::string>& group_a,
                              const std::vector<std::string>& group_b);

// JSON array of {label, x_m, y_m, z_m, t_ns[, duration_ns]}.
std::string ledger_to_json(const Ledger& ledger);
Ledger ledger_from_json(const std::string& text);

std::string report_to_json(const LocalityReport& report);
// Aligned-column text table.
std::string report_to_table(const LocalityReport& report);

}  // namespace qdc::spacetime
