#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "intman/geometry.hpp"
#include "intman/stream.hpp"

namespace intman {

enum class RateMode {
  Static,         ///< constant per-lane rates
  RandomVarying,  ///< each lane resamples its rate every random_period seconds
  Burst,          ///< burst_high for the first part of every burst_period, then burst_low
};

/// Tracking-error buffer, communication delay and computation budgets.
struct Adaptation {
  double buffer = 0.0;  ///< b
  double delay = 0.0;   ///< delta
  double delta_p = 0.0;  ///< provisional computation bound
  double delta_c = 0.0;  ///< coordinated computation bound per robot
  int pool = 1;          ///< N_p
  bool merge_delay = false;  ///< fold v_max * delta into the buffer
  std::optional<double> explicit_length;  ///< use this effective length instead of L + 2b
};

struct Scenario {
  std::string name = "custom";

  int num_lanes = 8;
  std::vector<double> approach_length{7.0};  ///< one value applies to every lane
  std::vector<double> intersection_span{2.8};
  std::optional<std::vector<int>> conflict;

  /// Heterogeneous parameters: priorities from the distribution and
  /// lane-dependent speed bounds. Homogeneous: priority 1, uniform bound.
  bool heterogeneous_params = true;
  double v_fast = 1.5;
  double v_slow = 1.0;
  /// Explicit per-lane speed bounds; overrides v_fast/v_slow.
  std::optional<std::vector<double>> speed_limit;
  std::vector<double> priorities{1, 2, 4, 5};
  std::vector<double> priority_probs{0.5, 0.3, 0.15, 0.05};

  RateMode rate_mode = RateMode::Static;
  std::vector<double> lane_rates{0.05};  ///< one value applies to every lane
  std::vector<double> rate_grid;          ///< homogeneous rates studied by sweeps
  std::vector<double> random_rate_values{0.05, 0.06, 0.07, 0.08, 0.09, 0.10,
                                         0.11, 0.12, 0.13, 0.14, 0.15};
  double random_period = 100.0;
  double burst_high = 0.15;
  double burst_low = 0.05;
  double burst_high_duration = 10.0;
  double burst_period = 30.0;

  double robot_length = 0.75;
  double u_min = -2.0;
  double u_max = 2.0;

  double T_c = 6.0;
  double T_h = 30.0;
  double T_r = 20.0;
  double dt = 0.1;
  double stream_length = 300.0;
  double transient_cutoff = 90.0;
  unsigned long long seed = 1;
  std::size_t max_robots = 0;  ///< keep only the first robots of a stream; 0 keeps all

  int slots = 40;  ///< N_r
  Adaptation adapt;
  /// Name of the scenario whose trained policy a testing scenario uses.
  std::string trained_on;

  std::vector<double> lane_values(const std::vector<double>& v) const;
  std::vector<double> speed_limits() const;
  LaneGeometry geometry() const;
  double max_priority() const;
  double max_speed() const;
  /// Most robots the approaches can hold at rear-end spacing, summed over
  /// lanes: an upper bound on the pending set size.
  int slot_bound() const;
  /// Throws InputError on inconsistent settings.
  void validate() const;
};

/// key = value lines; '#' starts a comment; lists are comma separated.
Scenario parse_scenario(std::istream& is);
Scenario load_scenario_file(const std::string& path);
/// Inverse of parse_scenario.
void write_scenario(std::ostream& os, const Scenario& s);

/// Copy with static homogeneous rate `rate` on every lane.
Scenario with_rate(Scenario s, double rate);

struct ScenarioPair {
  std::string name;
  Scenario train;
  Scenario test;
};

/// Built-in train/test pairs sim1 ... sim9.
std::vector<ScenarioPair> builtin_scenarios();
const ScenarioPair& builtin_scenario(const std::string& name);

/// Arrival rate of `lane` at time t; `lane_state` holds the sampled
/// random-varying rates per period.
double lane_rate(const Scenario& s, int lane, double t, const std::vector<double>& lane_state);

/// Poisson arrivals per lane (thinning for time-varying rates), initial
/// speeds uniform on [0, v_max], priorities per the scenario. Ids follow
/// tentative arrival order.
std::vector<ArrivalSpec> generate_stream(const Scenario& s, unsigned long long seed);

/// Effective parameters after the tracking buffer and delay adaptations.
struct EffectiveParams {
  double buffer = 0.0;  ///< b, plus v_max * delta when merged
  double length = 0.0;  ///< effective robot length
  double provisional_lead = 0.0;  ///< start provisional planning this long before arrival
  double coordinated_lead = 0.0;  ///< start tick computations this long before kT_c
};
EffectiveParams apply_adaptations(const Scenario& s, double v_max);

/// Stream configuration for one run: generated arrivals with adapted lengths.
StreamConfig stream_config(const Scenario& s, unsigned long long seed);

}  // namespace intman
