#include "hcpo/dcs.hpp"

#include <cmath>
#include <stdexcept>

namespace hcpo {

double lambda_at(long u, const DcsSchedule& s) {
    if (u < 0 || u > s.total_steps) throw std::out_of_range("lambda_at: u outside [0, T]");
    double frac = static_cast<double>(u) / (s.alpha * static_cast<double>(s.total_steps));
    return s.lambda_max * std::min(1.0, frac);
}

std::vector<double> expbias_pmf(double lambda, int window) {
    if (window < 0) throw std::invalid_argument("expbias_pmf: negative window");
    std::vector<double> pmf(window + 1);
    double mx = std::max(0.0, lambda * window);
    double z = 0.0;
    for (int t = 0; t <= window; ++t) {
        pmf[t] = std::exp(lambda * t - mx);
        z += pmf[t];
    }
    for (double& p : pmf) p /= z;
    return pmf;
}

std::vector<double> uniform_pmf(int window) {
    if (window < 0) throw std::invalid_argument("uniform_pmf: negative window");
    return std::vector<double>(window + 1, 1.0 / (window + 1));
}

int sample_tau(std::span<const double> pmf, Rng& rng) { return rng.categorical(pmf); }

}  // namespace hcpo
