#pragma once

// Simulated GPS message stream at a fixed rate, with the attacker's message
// injection point. The attacker can overwrite a message's coordinate; the
// channel itself only adds Gaussian horizontal noise.

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "uavsim/geo.hpp"
#include "uavsim/world.hpp"

namespace uavsim::gps {

using geo::FlatEarthFrame;
using geo::GeoCoord;
using geo::LocalPos;

struct GpsMessage {
  double t = 0.0;
  GeoCoord coord{};
  double h_acc = 0.0;  // reported horizontal accuracy, m
  std::uint64_t seq = 0;
};

struct GpsNoiseModel {
  double sigma = 0.0;  // m, std per horizontal axis
  std::uint64_t seed = 0;
};

/// Deterministic per-(seed, seq) noise: each message draws from an RNG keyed
/// on the seed and the sequence number, so replays are bit-identical.
inline GpsMessage sample_gps(const world::UavState& truth, const FlatEarthFrame& frame,
                             const GpsNoiseModel& noise, double t, std::uint64_t seq) {
  LocalPos p = truth.pos;
  if (noise.sigma > 0.0) {
    std::mt19937_64 rng(noise.seed ^ (seq * 0x9e3779b97f4a7c15ULL + 1));
    std::normal_distribution<double> n(0.0, noise.sigma);
    p.x_east_m += n(rng);
    p.y_north_m += n(rng);
  }
  GpsMessage msg;
  msg.t = t;
  msg.coord = geo::local_to_geodetic(p, frame);
  msg.h_acc = noise.sigma;
  msg.seq = seq;
  return msg;
}

/// Additive spoof: shifts the message coordinate by `offset` meters.
inline GpsMessage inject_spoof(const GpsMessage& msg, const LocalPos& offset,
                               const FlatEarthFrame& frame) {
  GpsMessage out = msg;
  out.coord = geo::local_to_geodetic(geo::geodetic_to_local(msg.coord, frame) + offset,
                                     frame);
  return out;
}

/// Full overwrite: the attacker replaces the coordinate with a position of its
/// own choosing (the signal of the spoofing strategy).
inline GpsMessage overwrite_position(const GpsMessage& msg, const LocalPos& signal,
                                     const FlatEarthFrame& frame) {
  GpsMessage out = msg;
  out.coord = geo::local_to_geodetic(signal, frame);
  return out;
}

inline constexpr const char* kLogHeader = "seq,t,lat_deg,lon_deg,alt_m,h_acc";

inline std::string format_log_line(const GpsMessage& m) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%llu,%.3f,%.9f,%.9f,%.3f,%.3f",
                static_cast<unsigned long long>(m.seq), m.t, m.coord.lat_deg,
                m.coord.lon_deg, m.coord.alt_m, m.h_acc);
  return buf;
}

inline GpsMessage parse_log_line(const std::string& line) {
  GpsMessage m;
  std::istringstream ss(line);
  char comma;
  ss >> m.seq >> comma >> m.t >> comma >> m.coord.lat_deg >> comma >>
      m.coord.lon_deg >> comma >> m.coord.alt_m >> comma >> m.h_acc;
  if (ss.fail()) throw std::runtime_error("malformed GPS log line: " + line);
  return m;
}

inline void write_log(const std::vector<GpsMessage>& msgs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open GPS log for writing: " + path);
  out << kLogHeader << "\n";
  for (const auto& m : msgs) out << format_log_line(m) << "\n";
}

inline std::vector<GpsMessage> read_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open GPS log: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<GpsMessage> msgs;
  while (std::getline(in, line)) {
    if (!line.empty()) msgs.push_back(parse_log_line(line));
  }
  return msgs;
}

}  // namespace uavsim::gps
