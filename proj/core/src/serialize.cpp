#include "bussim/serialize.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "bussim/errors.hpp"
#include "json_reader.hpp"

namespace bussim::sim {

using nlohmann::json;

void to_json(json& j, const BusState& b) {
  j = json{{"bus_id", b.bus_id},
           {"dispatch_time", b.dispatch_time},
           {"acceleration", b.acceleration},
           {"speed", b.speed},
           {"position", b.position},
           {"occupancy", b.occupancy},
           {"status", std::string(to_string(b.status))},
           {"leave_stop_time", b.leave_stop_time},
           {"visited_stops", b.visited_stops()},
           {"capacity", b.capacity}};
}

void from_json(const json& j, BusState& b) {
  j.at("bus_id").get_to(b.bus_id);
  j.at("dispatch_time").get_to(b.dispatch_time);
  j.at("acceleration").get_to(b.acceleration);
  j.at("speed").get_to(b.speed);
  j.at("position").get_to(b.position);
  j.at("occupancy").get_to(b.occupancy);
  b.status = status_from_string(j.at("status").get<std::string>());
  j.at("leave_stop_time").get_to(b.leave_stop_time);
  const auto visited = j.at("visited_stops").get<std::vector<int>>();
  for (std::size_t i = 0; i < visited.size(); ++i)
    if (visited[i] != static_cast<int>(i))
      throw std::invalid_argument("state record: visited_stops must be the route prefix 0..k-1");
  b.next_stop = visited.size();
  j.at("capacity").get_to(b.capacity);
}

void to_json(json& j, const StopState& s) {
  json arrivals = json::array();
  for (const auto& a : s.arrivals) arrivals.push_back({a.bus_id, a.time});
  j = json{{"stop_id", s.stop_id},
           {"position", s.position},
           {"geofence_radius", s.geofence_radius},
           {"last_visit_time", s.last_visit_time},
           {"actual_arrival_times", std::move(arrivals)}};
}

void from_json(const json& j, StopState& s) {
  j.at("stop_id").get_to(s.stop_id);
  j.at("position").get_to(s.position);
  j.at("geofence_radius").get_to(s.geofence_radius);
  j.at("last_visit_time").get_to(s.last_visit_time);
  s.arrivals.clear();
  for (const auto& a : j.at("actual_arrival_times"))
    s.arrivals.push_back({a.at(0).get<int>(), a.at(1).get<double>()});
}

void to_json(json& j, const ModelParams& p) {
  j = json{{"arr", p.arr}, {"dep", p.dep}, {"traffic_speed", p.traffic_speed}};
}

void from_json(const json& j, ModelParams& p) {
  j.at("arr").get_to(p.arr);
  j.at("dep").get_to(p.dep);
  j.at("traffic_speed").get_to(p.traffic_speed);
}

void to_json(json& j, const StateVector& s) {
  j = json{{"record", "bussim.state"},
           {"version", 1},
           {"tick", s.tick},
           {"clock", s.clock},
           {"buses", s.buses},
           {"stops", s.stops},
           {"params", s.params},
           {"base_params", s.base_params}};
}

void from_json(const json& j, StateVector& s) {
  if (j.value("record", std::string{}) != "bussim.state")
    throw std::invalid_argument("state record: missing or wrong 'record' tag");
  j.at("tick").get_to(s.tick);
  j.at("clock").get_to(s.clock);
  j.at("buses").get_to(s.buses);
  j.at("stops").get_to(s.stops);
  j.at("params").get_to(s.params);
  j.at("base_params").get_to(s.base_params);
}

std::string state_to_text(const StateVector& s) { return json(s).dump(2); }

StateVector state_from_text(const std::string& text) { return json::parse(text).get<StateVector>(); }

void to_json(json& j, const SimConfig& c) {
  j = json{{"variant", std::string(to_string(c.variant))},
           {"fleet_size", c.fleet_size},
           {"num_stops", c.num_stops},
           {"stop_spacing", c.stop_spacing},
           {"dt", c.dt},
           {"horizon", c.horizon},
           {"headway", c.headway},
           {"theta", c.theta},
           {"acceleration", c.acceleration},
           {"dynamic_rate", c.dynamic_rate},
           {"min_demand", c.min_demand},
           {"max_demand", c.max_demand},
           {"geofence", c.geofence},
           {"capacity", c.capacity},
           {"initial_speed", c.initial_speed},
           {"rng_seed", c.rng_seed}};
}

SimConfig sim_config_from_json(const json& j, const std::string& path) {
  SimConfig c;
  detail::ObjectReader r(j, path);
  std::string variant;
  if (r.read("variant", variant)) {
    try {
      c.variant = variant_from_string(variant);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(r.field("variant"), e.what());
    }
  }
  r.read("fleet_size", c.fleet_size);
  r.read("num_stops", c.num_stops);
  r.read("stop_spacing", c.stop_spacing);
  r.read("dt", c.dt);
  r.read("horizon", c.horizon);
  r.read("headway", c.headway);
  r.read("theta", c.theta);
  r.read("acceleration", c.acceleration);
  r.read("dynamic_rate", c.dynamic_rate);
  r.read("min_demand", c.min_demand);
  r.read("max_demand", c.max_demand);
  r.read("geofence", c.geofence);
  r.read("capacity", c.capacity);
  r.read("initial_speed", c.initial_speed);
  r.read("rng_seed", c.rng_seed);
  r.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    // validate() messages start with "sim.<field> ..."
    std::string msg = e.what();
    const auto space = msg.find(' ');
    std::string field = msg.substr(0, space);
    if (field.rfind("sim.", 0) == 0) field = path + field.substr(3);
    throw ConfigError(field, space == std::string::npos ? msg : msg.substr(space + 1));
  }
  return c;
}

}  // namespace bussim::sim

namespace bussim::io {

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string fingerprint(const nlohmann::json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static constexpr char kHex[] = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = kHex[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

namespace {

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("trajectory CSV line " + std::to_string(line) + ": bad number '" +
                             std::string(s) + "'");
  return v;
}

long parse_long(std::string_view s, std::size_t line) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("trajectory CSV line " + std::to_string(line) + ": bad integer '" +
                             std::string(s) + "'");
  return v;
}

constexpr std::string_view kHeader = "time_s,bus_id,status,position_m,speed_mps,occupancy";

}  // namespace

void write_trajectory_csv(std::ostream& out, const sim::ObservationSeries& series) {
  out << kHeader << '\n';
  std::string line;
  for (std::size_t f = 0; f < series.num_frames(); ++f) {
    const std::string t = format_double(series.time(f));
    auto rows = series.frame(f);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto& r = rows[j];
      line.clear();
      line += t;
      line += ',';
      line += std::to_string(j);
      line += ',';
      line += sim::to_string(r.status);
      line += ',';
      line += format_double(r.position);
      line += ',';
      line += format_double(r.speed);
      line += ',';
      line += std::to_string(r.occupancy);
      line += '\n';
      out << line;
    }
  }
}

void write_trajectory_csv(const std::string& path, const sim::ObservationSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_trajectory_csv(out, series);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

sim::ObservationSeries read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader)
    throw std::runtime_error("trajectory CSV: expected header '" + std::string(kHeader) + "'");

  struct Parsed {
    double time;
    long bus;
    sim::ObservationRow row;
  };
  std::vector<Parsed> parsed;
  long max_bus = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string_view rest(line);
    std::string_view field[6];
    for (int k = 0; k < 6; ++k) {
      const auto comma = rest.find(',');
      if (k < 5 && comma == std::string_view::npos)
        throw std::runtime_error("trajectory CSV line " + std::to_string(line_no) + ": expected 6 fields");
      field[k] = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    Parsed p{};
    p.time = parse_double(field[0], line_no);
    p.bus = parse_long(field[1], line_no);
    p.row.status = sim::status_from_string(field[2]);
    p.row.position = parse_double(field[3], line_no);
    p.row.speed = parse_double(field[4], line_no);
    p.row.occupancy = static_cast<int>(parse_long(field[5], line_no));
    if (p.bus < 0) throw std::runtime_error("trajectory CSV: negative bus_id");
    max_bus = std::max(max_bus, p.bus);
    parsed.push_back(p);
  }
  if (parsed.empty()) return {};

  const auto fleet = static_cast<std::size_t>(max_bus + 1);
  if (parsed.size() % fleet != 0)
    throw std::runtime_error("trajectory CSV: row count is not a multiple of the fleet size");
  const std::size_t frames = parsed.size() / fleet;
  const double dt = frames > 1 ? parsed[fleet].time - parsed[0].time : parsed[0].time;
  sim::ObservationSeries series(fleet, dt);
  series.reserve(frames);
  std::vector<sim::ObservationRow> rows(fleet);
  for (std::size_t f = 0; f < frames; ++f) {
    const double t = parsed[f * fleet].time;
    for (std::size_t j = 0; j < fleet; ++j) {
      const Parsed& p = parsed[f * fleet + j];
      if (p.time != t || static_cast<std::size_t>(p.bus) != j)
        throw std::runtime_error("trajectory CSV: frame " + std::to_string(f) +
                                 " is not ordered by bus_id with a shared timestamp");
      rows[j] = p.row;
    }
    series.append(t, rows);
  }
  return series;
}

sim::ObservationSeries read_trajectory_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_trajectory_csv(in);
}

}  // namespace bussim::io
