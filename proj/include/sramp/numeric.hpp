#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>
#include <vector>

#include "sramp/errors.hpp"

namespace sramp::numeric {

struct RootResult {
  double root = 0.0;
  std::size_t iterations = 0;
};

/// Bisection for a sign change of `f` on [lo, hi]. Stops once the bracket is
/// narrower than `tol` or can no longer be split in double precision.
template <class F>
RootResult bisect(F&& f, double lo, double hi, double tol) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return {lo, 0};
  if (fhi == 0.0) return {hi, 0};
  if (!(std::signbit(flo) != std::signbit(fhi)) || std::isnan(flo) || std::isnan(fhi)) {
    std::ostringstream os;
    os << "no sign change in bracket [" << lo << ", " << hi << "] (f(lo)=" << flo
       << ", f(hi)=" << fhi << ")";
    throw NumericFailure(os.str());
  }
  std::size_t it = 0;
  while (hi - lo > tol) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    ++it;
    if (fm == 0.0) return {mid, it};
    if (std::signbit(fm) == std::signbit(flo)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return {lo + 0.5 * (hi - lo), it};
}

struct MaxResult {
  double x = 0.0;
  double value = -std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
};

/// Golden-section search for the maximum of a unimodal `f` on [lo, hi].
/// Values of -inf are allowed; ties between two -inf probes shrink toward
/// `lo`, which suits objectives that become infeasible at large arguments.
template <class F>
MaxResult golden_section_max(F&& f, double lo, double hi, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  std::size_t it = 0;
  while (hi - lo > tol) {
    ++it;
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  return fc >= fd ? MaxResult{c, fc, it} : MaxResult{d, fd, it};
}

/// Mean of g(theta) over one period [0, 2pi) by the midpoint rule. For smooth
/// periodic integrands this converges spectrally.
template <class G>
double period_average(G&& g, std::size_t points = 1024) {
  const double h = 2.0 * std::numbers::pi / static_cast<double>(points);
  double sum = 0.0;
  for (std::size_t k = 0; k < points; ++k) sum += g((static_cast<double>(k) + 0.5) * h);
  return sum / static_cast<double>(points);
}

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads. Each index
/// is visited exactly once; callers write results to index-addressed slots.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min(hw, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace sramp::numeric
