#include "dapt/gradcheck.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace dapt {

double finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<double>& theta,
                         const std::vector<double>& analytic_grad, double eps, int threads) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps must be positive");
  if (theta.size() != analytic_grad.size())
    throw std::invalid_argument("finite_diff_check: gradient length mismatch");

  const size_t n = theta.size();
  std::vector<double> err(n, 0.0);
  std::atomic<size_t> cursor{0};

  auto worker = [&]() {
    std::vector<double> point = theta;
    for (;;) {
      size_t i = cursor.fetch_add(1);
      if (i >= n) break;
      double saved = point[i];
      point[i] = saved + eps;
      double fp = f(point);
      point[i] = saved - eps;
      double fm = f(point);
      point[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw std::runtime_error("finite_diff_check: non-finite function value at coordinate " +
                                 std::to_string(i));
      double central = (fp - fm) / (2.0 * eps);
      err[i] = std::abs(analytic_grad[i] - central) / std::max(1.0, std::abs(central));
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mu;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&]() {
        try {
          worker();
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  double worst = 0.0;
  for (double e : err) worst = std::max(worst, e);
  return worst;
}

}  // namespace dapt
