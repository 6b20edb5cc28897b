#include "edgepoint/channel.hpp"

#include <cmath>

#include "edgepoint/errors.hpp"

namespace edgepoint::channel {

double noise_variance(double snr_db, double power) {
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    return power / std::pow(10.0, snr_db / 10.0);
}

double noise_variance(const ChannelConfig& cfg) { return noise_variance(cfg.snr_db, cfg.power); }

std::vector<double> power_normalize(const std::vector<double>& z, double power) {
    double sq = 0.0;
    for (double v : z) sq += v * v;
    if (!(sq > 0.0)) throw DomainError("power_normalize: zero vector");
    const double factor = std::sqrt(static_cast<double>(z.size()) * power) / std::sqrt(sq);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * factor;
    return out;
}

std::vector<double> awgn_transmit(const std::vector<double>& x, const ChannelConfig& cfg,
                                  rng::Xoshiro256& gen) {
    const double sigma = std::sqrt(noise_variance(cfg));
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = x[i] + (sigma > 0.0 ? sigma * gen.gaussian() : 0.0);
    return y;
}

double shannon_capacity(const ChannelConfig& cfg) {
    return cfg.bandwidth_hz * std::log2(1.0 + std::pow(10.0, cfg.snr_db / 10.0));
}

double symbol_rate(const ChannelConfig& cfg) { return 2.0 * cfg.bandwidth_hz; }

}  // namespace edgepoint::channel
