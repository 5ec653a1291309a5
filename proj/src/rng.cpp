#include "dapt/rng.hpp"

#include <cmath>

namespace dapt {

double Rng::normal(double mu, double sigma) {
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return mu + sigma * r * std::cos(2.0 * M_PI * u2);
}

}  // namespace dapt
