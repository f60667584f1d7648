#include "intman/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "intman/errors.hpp"

namespace intman {

std::vector<double> Scenario::lane_values(const std::vector<double>& v) const {
  if (v.size() == 1) return std::vector<double>(static_cast<std::size_t>(num_lanes), v.front());
  if (v.size() != static_cast<std::size_t>(num_lanes))
    throw InputError("scenario '" + name + "': per-lane list needs 1 or num_lanes values");
  return v;
}

std::vector<double> Scenario::speed_limits() const {
  if (speed_limit) return lane_values(*speed_limit);
  std::vector<double> out(static_cast<std::size_t>(num_lanes), v_fast);
  if (!heterogeneous_params) return out;
  // 1.5 m/s on lanes 1, 4, 5, 8 (1-based), 1.0 m/s on 2, 3, 6, 7; repeats every 4 lanes.
  for (int l = 0; l < num_lanes; ++l)
    if (l % 4 == 1 || l % 4 == 2) out[static_cast<std::size_t>(l)] = v_slow;
  return out;
}

LaneGeometry Scenario::geometry() const {
  return make_geometry(num_lanes, lane_values(approach_length), lane_values(intersection_span),
                       speed_limits(), conflict);
}

double Scenario::max_priority() const {
  if (!heterogeneous_params) return 1.0;
  return *std::max_element(priorities.begin(), priorities.end());
}

double Scenario::max_speed() const {
  const auto v = speed_limits();
  return *std::max_element(v.begin(), v.end());
}

int Scenario::slot_bound() const {
  const auto d = lane_values(approach_length);
  int total = 0;
  for (double len : d) total += static_cast<int>(std::floor(len / robot_length + 1e-9)) + 1;
  return total;
}

void Scenario::validate() const {
  auto fail = [&](const std::string& what) { throw InputError("scenario '" + name + "': " + what); };
  if (num_lanes <= 0) fail("num_lanes must be positive");
  geometry().validate();
  for (double r : lane_values(lane_rates))
    if (r < 0) fail("rates must be non-negative");
  for (double r : rate_grid)
    if (r < 0) fail("rates must be non-negative");
  for (double r : random_rate_values)
    if (r < 0) fail("rates must be non-negative");
  if (random_rate_values.empty()) fail("random_rate_values is empty");
  if (burst_high < 0 || burst_low < 0) fail("rates must be non-negative");
  if (!(burst_period > 0) || burst_high_duration < 0 || burst_high_duration > burst_period)
    fail("burst timing is inconsistent");
  if (!(random_period > 0)) fail("random_period must be positive");
  if (priorities.empty() || priorities.size() != priority_probs.size())
    fail("priorities and priority_probs must have equal, non-zero length");
  for (double p : priorities)
    if (!(p > 0)) fail("priorities must be positive");
  for (double p : priority_probs)
    if (p < 0) fail("priority probabilities must be non-negative");
  if (!(robot_length > 0) || !(u_min < 0) || !(u_max > 0)) fail("robot limits out of range");
  if (!(dt > 0) || !(T_c > 0) || !(T_h > 0) || !(T_r > 0)) fail("time constants must be positive");
  if (T_r > T_h) fail("T_r must not exceed T_h");
  if (!(stream_length > 0)) fail("stream_length must be positive");
  if (transient_cutoff < 0 || transient_cutoff >= stream_length)
    fail("transient_cutoff must lie in [0, stream_length)");
  if (slots <= 0) fail("slots must be positive");
  if (adapt.buffer < 0 || adapt.delay < 0 || adapt.delta_p < 0 || adapt.delta_c < 0 || adapt.pool < 1)
    fail("adaptation values out of range");
  if (adapt.explicit_length && !(*adapt.explicit_length > 0)) fail("explicit_length must be positive");
}

// ---- config text -------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InputError("scenario: key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw InputError("scenario: key '" + key + "' expects a list");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InputError("scenario: key '" + key + "' expects true/false");
}

/// Shortest text that reads back to the same double.
std::string num(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string list_text(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + num(v[i]);
  return out;
}

std::string rate_mode_name(RateMode m) {
  switch (m) {
    case RateMode::Static: return "static";
    case RateMode::RandomVarying: return "random";
    case RateMode::Burst: return "burst";
  }
  return "static";
}

}  // namespace

Scenario parse_scenario(std::istream& is) {
  Scenario s;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](double& f) -> Setter { return [&f](auto& k, auto& v) { f = to_double(k, v); }; };
  auto list = [](std::vector<double>& f) -> Setter { return [&f](auto& k, auto& v) { f = to_list(k, v); }; };
  const std::map<std::string, Setter> keys{
      {"name", [&](auto&, auto& v) { s.name = v; }},
      {"num_lanes", [&](auto& k, auto& v) { s.num_lanes = static_cast<int>(to_double(k, v)); }},
      {"approach_length", list(s.approach_length)},
      {"intersection_span", list(s.intersection_span)},
      {"conflict_matrix",
       [&](auto& k, auto& v) {
         std::vector<int> c;
         for (double d : to_list(k, v)) c.push_back(static_cast<int>(d));
         s.conflict = c;
       }},
      {"params",
       [&](auto&, auto& v) {
         if (v != "homogeneous" && v != "heterogeneous")
           throw InputError("scenario: params must be homogeneous or heterogeneous");
         s.heterogeneous_params = v == "heterogeneous";
       }},
      {"v_fast", num(s.v_fast)},
      {"v_slow", num(s.v_slow)},
      {"speed_limit", [&](auto& k, auto& v) { s.speed_limit = to_list(k, v); }},
      {"priorities", list(s.priorities)},
      {"priority_probs", list(s.priority_probs)},
      {"rate_mode",
       [&](auto&, auto& v) {
         if (v == "static") s.rate_mode = RateMode::Static;
         else if (v == "random") s.rate_mode = RateMode::RandomVarying;
         else if (v == "burst") s.rate_mode = RateMode::Burst;
         else throw InputError("scenario: rate_mode must be static, random or burst");
       }},
      {"lane_rates", list(s.lane_rates)},
      {"rate_grid", list(s.rate_grid)},
      {"random_rate_values", list(s.random_rate_values)},
      {"random_period", num(s.random_period)},
      {"burst_high", num(s.burst_high)},
      {"burst_low", num(s.burst_low)},
      {"burst_high_duration", num(s.burst_high_duration)},
      {"burst_period", num(s.burst_period)},
      {"robot_length", num(s.robot_length)},
      {"u_min", num(s.u_min)},
      {"u_max", num(s.u_max)},
      {"T_c", num(s.T_c)},
      {"T_h", num(s.T_h)},
      {"T_r", num(s.T_r)},
      {"dt", num(s.dt)},
      {"stream_length", num(s.stream_length)},
      {"transient_cutoff", num(s.transient_cutoff)},
      {"seed", [&](auto& k, auto& v) { s.seed = static_cast<unsigned long long>(to_double(k, v)); }},
      {"max_robots", [&](auto& k, auto& v) { s.max_robots = static_cast<std::size_t>(to_double(k, v)); }},
      {"slots", [&](auto& k, auto& v) { s.slots = static_cast<int>(to_double(k, v)); }},
      {"buffer", num(s.adapt.buffer)},
      {"delay", num(s.adapt.delay)},
      {"delta_p", num(s.adapt.delta_p)},
      {"delta_c", num(s.adapt.delta_c)},
      {"pool", [&](auto& k, auto& v) { s.adapt.pool = static_cast<int>(to_double(k, v)); }},
      {"merge_delay", [&](auto& k, auto& v) { s.adapt.merge_delay = to_bool(k, v); }},
      {"explicit_length", [&](auto& k, auto& v) { s.adapt.explicit_length = to_double(k, v); }},
      {"trained_on", [&](auto&, auto& v) { s.trained_on = v; }},
  };
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("scenario: line " + std::to_string(lineno) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = keys.find(key);
    if (it == keys.end()) throw InputError("scenario: unknown key '" + key + "'");
    it->second(key, value);
  }
  s.validate();
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read scenario " + path);
  return parse_scenario(is);
}

void write_scenario(std::ostream& os, const Scenario& s) {
  std::ostringstream o;
  o << "name = " << s.name << '\n'
    << "num_lanes = " << s.num_lanes << '\n'
    << "approach_length = " << list_text(s.approach_length) << '\n'
    << "intersection_span = " << list_text(s.intersection_span) << '\n';
  if (s.conflict) {
    std::vector<double> c(s.conflict->begin(), s.conflict->end());
    o << "conflict_matrix = " << list_text(c) << '\n';
  }
  o << "params = " << (s.heterogeneous_params ? "heterogeneous" : "homogeneous") << '\n'
    << "v_fast = " << num(s.v_fast) << '\n'
    << "v_slow = " << num(s.v_slow) << '\n';
  if (s.speed_limit) o << "speed_limit = " << list_text(*s.speed_limit) << '\n';
  o << "priorities = " << list_text(s.priorities) << '\n'
    << "priority_probs = " << list_text(s.priority_probs) << '\n'
    << "rate_mode = " << rate_mode_name(s.rate_mode) << '\n'
    << "lane_rates = " << list_text(s.lane_rates) << '\n';
  if (!s.rate_grid.empty()) o << "rate_grid = " << list_text(s.rate_grid) << '\n';
  o << "random_rate_values = " << list_text(s.random_rate_values) << '\n'
    << "random_period = " << num(s.random_period) << '\n'
    << "burst_high = " << num(s.burst_high) << '\n'
    << "burst_low = " << num(s.burst_low) << '\n'
    << "burst_high_duration = " << num(s.burst_high_duration) << '\n'
    << "burst_period = " << num(s.burst_period) << '\n'
    << "robot_length = " << num(s.robot_length) << '\n'
    << "u_min = " << num(s.u_min) << '\n'
    << "u_max = " << num(s.u_max) << '\n'
    << "T_c = " << num(s.T_c) << '\n'
    << "T_h = " << num(s.T_h) << '\n'
    << "T_r = " << num(s.T_r) << '\n'
    << "dt = " << num(s.dt) << '\n'
    << "stream_length = " << num(s.stream_length) << '\n'
    << "transient_cutoff = " << num(s.transient_cutoff) << '\n'
    << "seed = " << s.seed << '\n'
    << "max_robots = " << s.max_robots << '\n'
    << "slots = " << s.slots << '\n'
    << "buffer = " << num(s.adapt.buffer) << '\n'
    << "delay = " << num(s.adapt.delay) << '\n'
    << "delta_p = " << num(s.adapt.delta_p) << '\n'
    << "delta_c = " << num(s.adapt.delta_c) << '\n'
    << "pool = " << s.adapt.pool << '\n'
    << "merge_delay = " << (s.adapt.merge_delay ? "true" : "false") << '\n';
  if (s.adapt.explicit_length) o << "explicit_length = " << num(*s.adapt.explicit_length) << '\n';
  if (!s.trained_on.empty()) o << "trained_on = " << s.trained_on << '\n';
  os << o.str();
}

Scenario with_rate(Scenario s, double rate) {
  s.rate_mode = RateMode::Static;
  s.lane_rates = {rate};
  return s;
}

// ---- built-in scenarios -------------------------------------------------------------------

namespace {

std::vector<double> rate_range(int from_hundredths, int to_hundredths) {
  std::vector<double> out;
  for (int i = from_hundredths; i <= to_hundredths; ++i) out.push_back(i / 100.0);
  return out;
}

Scenario base(const std::string& name, bool het_params, double T_h, double T_r,
              std::vector<double> grid) {
  Scenario s;
  s.name = name;
  s.heterogeneous_params = het_params;
  s.T_h = T_h;
  s.T_r = T_r;
  s.rate_grid = std::move(grid);
  s.lane_rates = {s.rate_grid.empty() ? 0.05 : s.rate_grid.front()};
  return s;
}

const std::vector<double> kHeterogeneousRates{0.13, 0.18, 0.08, 0.15, 0.19, 0.09, 0.05, 0.16};

}  // namespace

std::vector<ScenarioPair> builtin_scenarios() {
  const auto low = rate_range(1, 10);
  const auto high = rate_range(11, 20);
  std::vector<ScenarioPair> out;
  out.push_back({"sim1", base("sim1", true, 30, 20, low), base("sim1", true, 30, 20, low)});
  out.push_back({"sim2", base("sim2", true, 60, 30, high), base("sim2", true, 60, 30, high)});
  out.push_back({"sim3", base("sim3", false, 30, 20, low), base("sim3", false, 30, 20, low)});
  out.push_back({"sim4", base("sim4", false, 60, 30, high), base("sim4", false, 60, 30, high)});

  Scenario s5 = base("sim5", true, 60, 30, {});
  s5.lane_rates = kHeterogeneousRates;
  out.push_back({"sim5", s5, s5});

  const Scenario train2 = out[1].train;
  auto tested = [&](const std::string& name, Scenario test) {
    Scenario train = train2;
    train.name = name;
    test.name = name;
    test.trained_on = "sim2";
    out.push_back({name, train, test});
  };
  tested("sim6", base("", true, 30, 20, low));
  std::vector<double> sim7{0.125, 0.175};
  for (double r : rate_range(21, 30)) sim7.push_back(r);
  tested("sim7", base("", true, 60, 30, sim7));
  Scenario s8 = base("", true, 30, 20, {});
  s8.rate_mode = RateMode::Burst;
  tested("sim8", s8);
  Scenario s9 = base("", true, 30, 20, {});
  s9.rate_mode = RateMode::RandomVarying;
  tested("sim9", s9);
  return out;
}

const ScenarioPair& builtin_scenario(const std::string& name) {
  static const std::vector<ScenarioPair> all = builtin_scenarios();
  for (const ScenarioPair& e : all)
    if (e.name == name) return e;
  throw InputError("unknown built-in scenario '" + name + "'");
}

// ---- arrivals ---------------------------------------------------------------------

double lane_rate(const Scenario& s, int lane, double t, const std::vector<double>& lane_state) {
  switch (s.rate_mode) {
    case RateMode::Static: return s.lane_values(s.lane_rates)[static_cast<std::size_t>(lane)];
    case RateMode::Burst: {
      const double phase = std::fmod(t, s.burst_period);
      return phase < s.burst_high_duration ? s.burst_high : s.burst_low;
    }
    case RateMode::RandomVarying: {
      const auto idx = static_cast<std::size_t>(std::floor(t / s.random_period));
      return lane_state.at(std::min(idx, lane_state.size() - 1));
    }
  }
  return 0.0;
}

namespace {

std::mt19937_64 lane_rng(unsigned long long seed, int lane) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(lane), 0x5eedu};
  return std::mt19937_64(seq);
}

}  // namespace

std::vector<ArrivalSpec> generate_stream(const Scenario& s, unsigned long long seed) {
  s.validate();
  const std::vector<double> vmax = s.speed_limits();
  std::discrete_distribution<std::size_t> prio(s.priority_probs.begin(), s.priority_probs.end());
  std::vector<ArrivalSpec> all;
  for (int lane = 0; lane < s.num_lanes; ++lane) {
    std::mt19937_64 rng = lane_rng(seed, lane);
    std::vector<double> schedule;
    if (s.rate_mode == RateMode::RandomVarying) {
      std::uniform_int_distribution<std::size_t> pick(0, s.random_rate_values.size() - 1);
      const auto periods = static_cast<std::size_t>(std::ceil(s.stream_length / s.random_period));
      for (std::size_t p = 0; p < std::max<std::size_t>(periods, 1); ++p)
        schedule.push_back(s.random_rate_values[pick(rng)]);
    }
    double peak = 0.0;
    switch (s.rate_mode) {
      case RateMode::Static: peak = lane_rate(s, lane, 0.0, schedule); break;
      case RateMode::Burst: peak = std::max(s.burst_high, s.burst_low); break;
      case RateMode::RandomVarying: peak = *std::max_element(schedule.begin(), schedule.end()); break;
    }
    if (!(peak > 0)) continue;
    std::exponential_distribution<double> gap(peak);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double v_bar = vmax[static_cast<std::size_t>(lane)];
    for (double t = gap(rng); t < s.stream_length; t += gap(rng)) {
      const double accept = U(rng);
      if (accept * peak >= lane_rate(s, lane, t, schedule)) continue;
      ArrivalSpec a;
      a.lane = lane;
      a.tentative_time = t;
      a.v0 = U(rng) * v_bar;
      const std::size_t pi = prio(rng);
      a.priority = s.heterogeneous_params ? s.priorities[pi] : 1.0;
      a.v_max = v_bar;
      a.length = s.robot_length;
      a.u_min = s.u_min;
      a.u_max = s.u_max;
      all.push_back(a);
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const ArrivalSpec& a, const ArrivalSpec& b) {
    return a.tentative_time != b.tentative_time ? a.tentative_time < b.tentative_time
                                                : a.lane < b.lane;
  });
  if (s.max_robots && all.size() > s.max_robots) all.resize(s.max_robots);
  for (std::size_t i = 0; i < all.size(); ++i) all[i].id = static_cast<int>(i + 1);
  return all;
}

EffectiveParams apply_adaptations(const Scenario& s, double v_max) {
  EffectiveParams e;
  e.buffer = s.adapt.buffer + (s.adapt.merge_delay ? v_max * s.adapt.delay : 0.0);
  e.length = s.adapt.explicit_length ? *s.adapt.explicit_length : s.robot_length + 2.0 * e.buffer;
  e.provisional_lead = s.adapt.delta_p + s.adapt.delay;
  e.coordinated_lead = s.adapt.pool * s.adapt.delta_c + s.adapt.delay;
  return e;
}

StreamConfig stream_config(const Scenario& s, unsigned long long seed) {
  StreamConfig cfg;
  cfg.geometry = std::make_shared<const LaneGeometry>(s.geometry());
  cfg.T_c = s.T_c;
  cfg.T_h = s.T_h;
  cfg.dt = s.dt;
  cfg.stream_length = s.stream_length;
  cfg.arrivals = generate_stream(s, seed);
  for (ArrivalSpec& a : cfg.arrivals) a.length = apply_adaptations(s, a.v_max).length;
  return cfg;
}

}  // namespace intman
