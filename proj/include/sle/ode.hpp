#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace sle::ode {

template <std::size_t N>
using Vec = std::array<double, N>;

struct Tolerances {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_min = 1e-14;
};

// Dormand-Prince 5(4) with FSAL. The caller owns the stepping loop, which lets
// the Loewner solvers clip steps at driver knots, cap them near the singular
// point and root-find on single steps.
template <std::size_t N, class Rhs>
class DormandPrince {
 public:
  DormandPrince(Rhs rhs, Tolerances tol) : rhs_(std::move(rhs)), tol_(tol) {}

  void reset(double t, const Vec<N>& y) {
    t_ = t;
    y_ = y;
    rhs_(t_, y_, k1_);
    ++evals_;
  }

  double t() const { return t_; }
  const Vec<N>& y() const { return y_; }
  const Vec<N>& slope() const { return k1_; }
  long evaluations() const { return evals_; }
  const Tolerances& tolerances() const { return tol_; }

  // Computes the step of size h from the current state without committing it.
  // Returns the scaled error norm of the embedded estimate.
  double attempt(double h) {
    Vec<N> tmp;
    auto stage = [&](std::initializer_list<double> a, std::initializer_list<const Vec<N>*> ks) {
      for (std::size_t i = 0; i < N; ++i) {
        double s = 0.0;
        auto ai = a.begin();
        for (const Vec<N>* k : ks) s += *ai++ * (*k)[i];
        tmp[i] = y_[i] + h * s;
      }
    };
    stage({1.0 / 5}, {&k1_});
    rhs_(t_ + h / 5, tmp, k2_);
    stage({3.0 / 40, 9.0 / 40}, {&k1_, &k2_});
    rhs_(t_ + 3 * h / 10, tmp, k3_);
    stage({44.0 / 45, -56.0 / 15, 32.0 / 9}, {&k1_, &k2_, &k3_});
    rhs_(t_ + 4 * h / 5, tmp, k4_);
    stage({19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
          {&k1_, &k2_, &k3_, &k4_});
    rhs_(t_ + 8 * h / 9, tmp, k5_);
    stage({9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
          {&k1_, &k2_, &k3_, &k4_, &k5_});
    rhs_(t_ + h, tmp, k6_);
    for (std::size_t i = 0; i < N; ++i)
      y_new_[i] = y_[i] + h * (35.0 / 384 * k1_[i] + 500.0 / 1113 * k3_[i] +
                               125.0 / 192 * k4_[i] - 2187.0 / 6784 * k5_[i] +
                               11.0 / 84 * k6_[i]);
    rhs_(t_ + h, y_new_, k7_);
    evals_ += 6;
    h_new_ = h;

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double e = h * (71.0 / 57600 * k1_[i] - 71.0 / 16695 * k3_[i] + 71.0 / 1920 * k4_[i] -
                            17253.0 / 339200 * k5_[i] + 22.0 / 525 * k6_[i] - 1.0 / 40 * k7_[i]);
      const double sc = tol_.atol + tol_.rtol * std::max(std::abs(y_[i]), std::abs(y_new_[i]));
      err = std::max(err, std::abs(e) / sc);
    }
    return std::isfinite(err) ? err : INFINITY;
  }

  // State produced by the last attempt().
  const Vec<N>& proposal() const { return y_new_; }

  // Commits the last attempt (FSAL: its final stage becomes the next first stage).
  void accept() {
    t_ += h_new_;
    y_ = y_new_;
    k1_ = k7_;
  }

  // Removes rounding drift after a step that was meant to land on `t`.
  void snap_time(double t) { t_ = t; }

  // Step-size factor from an error norm, clamped to [0.2, 5].
  static double growth(double err) {
    if (err == 0.0) return 5.0;
    return std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
  }

 private:
  Rhs rhs_;
  Tolerances tol_;
  double t_ = 0.0;
  double h_new_ = 0.0;
  long evals_ = 0;
  Vec<N> y_{}, y_new_{}, k1_{}, k2_{}, k3_{}, k4_{}, k5_{}, k6_{}, k7_{};
};

}  // namespace sle::ode
