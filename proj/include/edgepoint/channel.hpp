#pragma once

#include <cstdint>
#include <vector>

#include "edgepoint/rng.hpp"

namespace edgepoint::channel {

struct ChannelConfig {
    double snr_db = 20.0;       // signal-to-noise ratio P / sigma^2, in dB
    double bandwidth_hz = 1e4;  // W
    double power = 1.0;         // average per-symbol power constraint P
};

/// Per-symbol noise variance sigma^2 = P / 10^(snr_db / 10).
double noise_variance(const ChannelConfig& cfg);
double noise_variance(double snr_db, double power);

/// z * sqrt(d * P) / ||z||, so the mean square of the output equals P.
/// Throws DomainError on a zero vector.
std::vector<double> power_normalize(const std::vector<double>& z, double power);

/// y = x + n with n ~ iid Gaussian(0, sigma^2). The noise carries no
/// parameters; in the autodiff path gradients pass through unchanged.
std::vector<double> awgn_transmit(const std::vector<double>& x, const ChannelConfig& cfg,
                                  rng::Xoshiro256& gen);

/// C = W * log2(1 + 10^(snr_db/10)) in bits per second. Digital baselines
/// use this as their idealised data rate.
double shannon_capacity(const ChannelConfig& cfg);

/// Real symbols at the Nyquist rate: 2W symbols per second.
double symbol_rate(const ChannelConfig& cfg);

}  // namespace edgepoint::channel
