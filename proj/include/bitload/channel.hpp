#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>

// Frequency-selective fading generator: i.i.d. circularly-symmetric complex
// Gaussian taps with an exponential power delay profile, normalized so the
// expected energy per subcarrier is one, followed by a DFT to per-subcarrier
// gains. Generation is deterministic per seed; independent trials derive
// their seeds with derive_seed so they can run in any order.

namespace bitload {

struct ChannelModelConfig {
  int num_taps = 5;          // impulse-response length
  double decay_factor = 0.2; // exponent of the tap-power decay
  int num_subcarriers = 128;

  /// sigma_h^2 = 1 / sum_n exp(-n * decay_factor); makes E{|H_i|^2} = 1.
  double normalization() const;

  /// E{|h(n)|^2} = sigma_h^2 * exp(-n * decay_factor).
  double tap_variance(int tap_index) const;

  void validate() const;
};

/// One fading draw: complex gains H_i and the ratios C_i = |H_i|^2 / sigma_n^2
/// for the noise variance it was built with.
struct ChannelRealization {
  Eigen::ArrayXcd gains;
  Eigen::ArrayXd cnrs;  // per watt

  int size() const { return static_cast<int>(gains.size()); }
};

/// SplitMix64 mix of master seed and trial index; the per-trial seeding rule
/// recorded in output metadata.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t trial_index);

/// Uniform double in [0, 1) from the top 53 bits of the generator output.
double uniform01(std::mt19937_64& rng);

/// Circularly-symmetric complex Gaussian with E{|z|^2} = variance
/// (real and imaginary parts each N(0, variance / 2), via Box-Muller).
std::complex<double> complex_gaussian(std::mt19937_64& rng, double variance);

/// Impulse response draw: num_taps independent taps, tap n with variance
/// sigma_h^2 * exp(-n * decay_factor).
Eigen::ArrayXcd generate_impulse_response(const ChannelModelConfig& cfg,
                                          std::mt19937_64& rng);

/// DFT of the zero-padded impulse response:
/// gains[i] = sum_n taps[n] * exp(-j 2 pi n i / N).
Eigen::ArrayXcd frequency_response(const Eigen::ArrayXcd& taps, int num_subcarriers);

/// Elementwise |H_i|^2 / noise_variance.
Eigen::ArrayXd channel_to_noise(const Eigen::ArrayXcd& gains, double noise_variance);

/// Full draw for one trial.
ChannelRealization realize_channel(const ChannelModelConfig& cfg, std::uint64_t seed,
                                   double noise_variance);

/// Wraps externally supplied gains (e.g. read from a channel table).
ChannelRealization realization_from_gains(Eigen::ArrayXcd gains, double noise_variance);

// Text-table exchange format: one row per subcarrier with columns
// index,re_h,im_h. Lines starting with '#' are comments.
void write_channel_table(std::ostream& os, const Eigen::ArrayXcd& gains);
void write_channel_table(const std::filesystem::path& path, const Eigen::ArrayXcd& gains,
                         const std::vector<std::string>& header_comments = {});
Eigen::ArrayXcd read_channel_table(std::istream& is);
Eigen::ArrayXcd read_channel_table(const std::filesystem::path& path);

inline constexpr char kRngDescription[] =
    "mt19937_64 with Box-Muller transform (53-bit uniforms)";
inline constexpr char kSeedDerivationRule[] =
    "trial_seed = splitmix64(master_seed + (trial_index + 1) * 0x9E3779B97F4A7C15)";

}  // namespace bitload
