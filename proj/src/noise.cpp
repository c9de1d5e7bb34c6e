#include "gsde/noise.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gsde/errors.hpp"
#include "gsde/rng.hpp"

namespace gsde {

namespace {

void fnv_mix(std::uint64_t& h, std::uint64_t word) {
  for (int i = 0; i < 8; ++i) {
    h ^= (word >> (8 * i)) & 0xFFu;
    h *= 0x100000001B3ULL;
  }
}

void fnv_mix_double(std::uint64_t& h, double d) { fnv_mix(h, std::bit_cast<std::uint64_t>(d)); }

int checked_steps(double T, double h) {
  if (!(T > 0.0) || !(h > 0.0))
    throw InvalidDiscretization("horizon and step must both be positive");
  double ratio = T / h;
  int steps = static_cast<int>(std::llround(ratio));
  if (steps < 1 || std::abs(steps - ratio) > 1e-9 * std::max(1.0, ratio))
    throw InvalidDiscretization("step does not divide the horizon");
  return steps;
}

}  // namespace

std::uint64_t NoiseRealization::checksum() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  fnv_mix(h, static_cast<std::uint64_t>(steps));
  fnv_mix(h, static_cast<std::uint64_t>(wiener_dim));
  fnv_mix(h, static_cast<std::uint64_t>(jumps.size()));
  fnv_mix_double(h, horizon);
  fnv_mix_double(h, step);
  for (int i = 0; i < steps; ++i)
    for (int k = 0; k < wiener_dim; ++k) fnv_mix_double(h, increments(i, k));
  for (const JumpEvent& e : jumps) {
    fnv_mix_double(h, e.time);
    for (int i = 0; i < e.mark.size(); ++i) fnv_mix_double(h, e.mark[i]);
  }
  return h;
}

NoiseRealization generate_noise(const SeedSpec& seed, double T, double h, int m,
                                const JumpMeasure& measure) {
  if (m < 0) throw InvalidDiscretization("wiener dimension must be non-negative");
  NoiseRealization r;
  r.horizon = T;
  r.step = h;
  r.steps = checked_steps(T, h);
  r.wiener_dim = m;
  r.seed = seed;

  std::mt19937_64 gen = rng::make_stream(seed.master_seed, seed.stream_index);
  const double sqrt_h = std::sqrt(h);
  r.increments.resize(r.steps, m);
  for (int i = 0; i < r.steps; ++i)
    for (int k = 0; k < m; ++k) r.increments(i, k) = sqrt_h * rng::normal(gen);

  if (measure.intensity > 0.0) {
    double t = 0.0;
    for (;;) {
      t += rng::exponential(gen, measure.intensity);
      if (t > T) break;
      JumpEvent e;
      e.time = t;
      e.mark = measure.sampler(gen);
      r.jumps.push_back(std::move(e));
    }
  }
  return r;
}

NoiseRealization refine_noise(double coarse_h, const NoiseRealization& fine) {
  double ratio_d = coarse_h / fine.step;
  int ratio = static_cast<int>(std::llround(ratio_d));
  if (ratio < 1 || std::abs(ratio - ratio_d) > 1e-9 * std::max(1.0, ratio_d))
    throw InvalidDiscretization("coarse step must be an integer multiple of the fine step");
  if (fine.steps % ratio != 0)
    throw InvalidDiscretization("fine step count is not divisible by the coarsening ratio");

  NoiseRealization c;
  c.horizon = fine.horizon;
  c.step = coarse_h;
  c.steps = fine.steps / ratio;
  c.wiener_dim = fine.wiener_dim;
  c.seed = fine.seed;
  c.increments = Mat::Zero(c.steps, c.wiener_dim);
  for (int i = 0; i < c.steps; ++i)
    for (int j = 0; j < ratio; ++j) c.increments.row(i) += fine.increments.row(i * ratio + j);
  c.jumps = fine.jumps;
  return c;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_noise_csv(const NoiseRealization& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "# noise v1\n";
  out << "meta," << r.seed.master_seed << "," << r.seed.stream_index << ","
      << fmt17(r.horizon) << "," << fmt17(r.step) << "," << r.steps << ","
      << r.wiener_dim << "," << r.jumps.size() << "\n";
  for (int i = 0; i < r.steps; ++i) {
    out << "w," << i;
    for (int k = 0; k < r.wiener_dim; ++k) out << "," << fmt17(r.increments(i, k));
    out << "\n";
  }
  for (const JumpEvent& e : r.jumps) {
    out << "j," << fmt17(e.time);
    for (int i = 0; i < e.mark.size(); ++i) out << "," << fmt17(e.mark[i]);
    out << "\n";
  }
}

NoiseRealization load_noise_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path + " for reading");
  std::string line;
  NoiseRealization r;
  std::size_t jump_count = 0;
  bool have_meta = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string tag;
    std::getline(row, tag, ',');
    std::vector<std::string> fields;
    std::string f;
    while (std::getline(row, f, ',')) fields.push_back(f);
    if (tag == "meta") {
      if (fields.size() != 7) throw Error("malformed noise meta line");
      r.seed.master_seed = std::stoull(fields[0]);
      r.seed.stream_index = std::stoull(fields[1]);
      r.horizon = std::stod(fields[2]);
      r.step = std::stod(fields[3]);
      r.steps = std::stoi(fields[4]);
      r.wiener_dim = std::stoi(fields[5]);
      jump_count = std::stoull(fields[6]);
      r.increments.resize(r.steps, r.wiener_dim);
      r.jumps.reserve(jump_count);
      have_meta = true;
    } else if (tag == "w") {
      if (!have_meta) throw Error("noise data before meta line");
      int i = std::stoi(fields.at(0));
      if (i < 0 || i >= r.steps || static_cast<int>(fields.size()) != r.wiener_dim + 1)
        throw Error("malformed noise increment row");
      for (int k = 0; k < r.wiener_dim; ++k) r.increments(i, k) = std::stod(fields[k + 1]);
    } else if (tag == "j") {
      if (!have_meta) throw Error("noise data before meta line");
      JumpEvent e;
      e.time = std::stod(fields.at(0));
      e.mark.resize(static_cast<Eigen::Index>(fields.size()) - 1);
      for (std::size_t i = 1; i < fields.size(); ++i) e.mark[i - 1] = std::stod(fields[i]);
      r.jumps.push_back(std::move(e));
    } else {
      throw Error("unknown noise row tag: " + tag);
    }
  }
  if (!have_meta) throw Error("noise file has no meta line");
  if (r.jumps.size() != jump_count) throw Error("noise file jump count mismatch");
  return r;
}

std::string checksum_hex(const NoiseRealization& r) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(r.checksum()));
  return buf;
}

}  // namespace gsde
