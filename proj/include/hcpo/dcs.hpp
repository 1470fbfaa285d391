#pragma once

#include <vector>

#include "hcpo/rng.hpp"

namespace hcpo {

struct DcsSchedule {
    double lambda_max = 2.0;
    double alpha = 1.0 / 3.0;
    long total_steps = 1;   // T
    int window = 2;         // N, tau support {0..N}
};

// lambda(u) = lambda_max * min(1, u / (alpha * T))
double lambda_at(long u, const DcsSchedule& s);

// P(tau) = exp(lambda * tau) / sum_j exp(lambda * j), j in {0..N};
// computed with max-subtraction.
std::vector<double> expbias_pmf(double lambda, int window);

std::vector<double> uniform_pmf(int window);

int sample_tau(std::span<const double> pmf, Rng& rng);

}  // namespace hcpo
