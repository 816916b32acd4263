#include "bitload/channel.hpp"

#include "bitload/detail/format.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bitload {

double ChannelModelConfig::normalization() const {
  double sum = 0.0;
  for (int n = 0; n < num_taps; ++n) {
    sum += std::exp(-n * decay_factor);
  }
  return 1.0 / sum;
}

double ChannelModelConfig::tap_variance(int tap_index) const {
  return normalization() * std::exp(-tap_index * decay_factor);
}

void ChannelModelConfig::validate() const {
  if (num_taps < 1) {
    throw std::invalid_argument("channel.num_taps: must be a positive integer");
  }
  if (num_subcarriers < 1) {
    throw std::invalid_argument("channel.num_subcarriers: must be a positive integer");
  }
  if (num_taps > num_subcarriers) {
    throw std::invalid_argument(
        "channel.num_taps: must not exceed the number of subcarriers");
  }
  if (decay_factor < 0.0) {
    throw std::invalid_argument("channel.decay_factor: must be nonnegative");
  }
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t trial_index) {
  std::uint64_t z = master_seed + (trial_index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::complex<double> complex_gaussian(std::mt19937_64& rng, double variance) {
  // u1 in (0, 1] keeps the logarithm finite.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  const double radius = std::sqrt(-std::log(u1) * variance);
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

Eigen::ArrayXcd generate_impulse_response(const ChannelModelConfig& cfg,
                                          std::mt19937_64& rng) {
  cfg.validate();
  Eigen::ArrayXcd taps(cfg.num_taps);
  const double sigma_h2 = cfg.normalization();
  for (int n = 0; n < cfg.num_taps; ++n) {
    taps[n] = complex_gaussian(rng, sigma_h2 * std::exp(-n * cfg.decay_factor));
  }
  return taps;
}

Eigen::ArrayXcd frequency_response(const Eigen::ArrayXcd& taps, int num_subcarriers) {
  if (taps.size() > num_subcarriers) {
    throw std::invalid_argument("frequency_response: more taps than subcarriers");
  }
  // Twiddle table keeps the angle arguments in [0, 2 pi).
  Eigen::ArrayXcd twiddle(num_subcarriers);
  for (int k = 0; k < num_subcarriers; ++k) {
    const double angle = -2.0 * std::numbers::pi * k / num_subcarriers;
    twiddle[k] = std::polar(1.0, angle);
  }
  Eigen::ArrayXcd gains = Eigen::ArrayXcd::Zero(num_subcarriers);
  for (int i = 0; i < num_subcarriers; ++i) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index n = 0; n < taps.size(); ++n) {
      acc += taps[n] * twiddle[(static_cast<long>(n) * i) % num_subcarriers];
    }
    gains[i] = acc;
  }
  return gains;
}

Eigen::ArrayXd channel_to_noise(const Eigen::ArrayXcd& gains, double noise_variance) {
  if (!(noise_variance > 0.0)) {
    throw std::domain_error("channel_to_noise: noise_variance must be positive");
  }
  return gains.abs2() / noise_variance;
}

ChannelRealization realize_channel(const ChannelModelConfig& cfg, std::uint64_t seed,
                                   double noise_variance) {
  std::mt19937_64 rng(seed);
  const Eigen::ArrayXcd taps = generate_impulse_response(cfg, rng);
  ChannelRealization ch;
  ch.gains = frequency_response(taps, cfg.num_subcarriers);
  ch.cnrs = channel_to_noise(ch.gains, noise_variance);
  return ch;
}

ChannelRealization realization_from_gains(Eigen::ArrayXcd gains, double noise_variance) {
  ChannelRealization ch;
  ch.cnrs = channel_to_noise(gains, noise_variance);
  ch.gains = std::move(gains);
  return ch;
}

using detail::format_g17;

void write_channel_table(std::ostream& os, const Eigen::ArrayXcd& gains) {
  os << "index,re_h,im_h\n";
  for (Eigen::Index i = 0; i < gains.size(); ++i) {
    os << i << ',' << format_g17(gains[i].real()) << ',' << format_g17(gains[i].imag())
       << '\n';
  }
}

void write_channel_table(const std::filesystem::path& path, const Eigen::ArrayXcd& gains,
                         const std::vector<std::string>& header_comments) {
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot open channel table for writing: " + path.string());
  }
  for (const auto& line : header_comments) {
    os << "# " << line << '\n';
  }
  write_channel_table(os, gains);
  if (!os) {
    throw std::runtime_error("failed writing channel table: " + path.string());
  }
}

Eigen::ArrayXcd read_channel_table(std::istream& is) {
  std::vector<std::complex<double>> rows;
  std::string line;
  long expected_index = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (line.rfind("index,", 0) == 0) {
      continue;  // header row
    }
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    const long index = std::stol(field);
    if (index != expected_index) {
      throw std::runtime_error("channel table: subcarrier indices must be sequential");
    }
    std::getline(row, field, ',');
    const double re = std::stod(field);
    if (!std::getline(row, field, ',')) {
      throw std::runtime_error("channel table: row is missing the imaginary column");
    }
    const double im = std::stod(field);
    rows.emplace_back(re, im);
    ++expected_index;
  }
  if (rows.empty()) {
    throw std::runtime_error("channel table: no subcarrier rows found");
  }
  Eigen::ArrayXcd gains(static_cast<Eigen::Index>(rows.size()));
  for (Eigen::Index i = 0; i < gains.size(); ++i) {
    gains[i] = rows[static_cast<std::size_t>(i)];
  }
  return gains;
}

Eigen::ArrayXcd read_channel_table(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open channel table: " + path.string());
  }
  return read_channel_table(is);
}

}  // namespace bitload
