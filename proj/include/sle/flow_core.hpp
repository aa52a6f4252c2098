#pragma once

// Shared machinery for the Loewner-type ODE solvers: a piecewise-linear view
// of a driver (optionally time-reversed) and the knot-aware stepping loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <vector>

#include "sle/errors.hpp"
#include "sle/ode.hpp"

namespace sle::flow {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Driver seen from the integration variable s: value at original time
// origin + s, or origin - s when reversed.
struct DriverView {
  const double* values = nullptr;
  std::size_t count = 0;
  double step = 1.0;
  double origin = 0.0;
  bool reversed = false;

  double time_of(double s) const { return reversed ? origin - s : origin + s; }

  double at(double s) const {
    const double u = std::clamp(time_of(s), 0.0, step * static_cast<double>(count - 1));
    const double x = u / step;
    auto k = static_cast<std::size_t>(x);
    if (k + 1 >= count) return values[count - 1];
    const double w = x - static_cast<double>(k);
    return values[k] + w * (values[k + 1] - values[k]);
  }

  // First knot strictly after s in the integration variable.
  double next_knot(double s) const {
    const double x = time_of(s) / step;
    if (!reversed) {
      const double k = std::floor(x + 1e-9) + 1.0;
      if (k > static_cast<double>(count - 1)) return kInf;
      return k * step - origin;
    }
    const double k = std::ceil(x - 1e-9) - 1.0;
    if (k < 0.0) return kInf;
    return origin - k * step;
  }
};

struct StepControl {
  ode::Tolerances tol;
  // Step cap near the pole: fraction * |Z|^2 / a.
  double singular_fraction = 0.25;
  // > 0 switches to fixed steps of (driver step) / fixed_substeps.
  int fixed_substeps = 0;
  long max_steps = 20'000'000;
};

// Loewner vector field on [Re h, Im h, Re log h', Im log h'].
// sign = +1 gives dg = a / (g - U), sign = -1 gives dh = -a / (h - U).
struct LoewnerRhs {
  DriverView drv;
  double a = 2.0;
  double sign = 1.0;

  void operator()(double s, const ode::Vec<4>& y, ode::Vec<4>& dy) const {
    const double zx = y[0] - drv.at(s);
    const double zy = y[1];
    const double r2 = zx * zx + zy * zy;
    const double ix = zx / r2;
    const double iy = -zy / r2;
    const double sa = sign * a;
    dy[0] = sa * ix;
    dy[1] = sa * iy;
    dy[2] = -sa * (ix * ix - iy * iy);
    dy[3] = -sa * 2.0 * ix * iy;
  }
};

inline void stall(double s, double h) {
  std::ostringstream msg;
  msg << "step " << h << " underflowed at s = " << s;
  throw Error(ErrorKind::solver_stall, msg.str());
}

// Advances `st` to exactly `target`, never stepping across a driver knot.
// `cap(s, y)` bounds the step from the current state; `stop(s, y)` ends the run
// early (returns false in that case). `h` carries the step size across calls.
template <class Stepper, class Cap, class Stop>
bool advance_to(Stepper& st, double target, double& h, const DriverView& drv,
                const StepControl& ctl, Cap&& cap, Stop&& stop, long& steps) {
  const double fixed = ctl.fixed_substeps > 0 ? drv.step / ctl.fixed_substeps : 0.0;
  while (st.t() < target) {
    const double limit = std::min(target, drv.next_knot(st.t()));
    const double room = limit - st.t();
    double hh;
    if (fixed > 0.0) {
      hh = std::min(fixed, room);
      if (room - hh < 1e-12 * fixed) hh = room;
    } else {
      hh = std::min({h, room, cap(st.t(), st.y())});
      if (hh < ctl.tol.h_min && hh < room) stall(st.t(), hh);
    }
    if (++steps > ctl.max_steps) throw Error(ErrorKind::solver_stall, "step budget exhausted");
    const double err = st.attempt(hh);
    if (fixed > 0.0 || err <= 1.0) {
      st.accept();
      if (hh == room) st.snap_time(limit);
      if (fixed == 0.0) {
        const double grown = hh * Stepper::growth(err);
        h = hh < h ? std::max(h, grown) : grown;
      }
      for (double v : st.y())
        if (!std::isfinite(v)) throw Error(ErrorKind::nan_detected, "non-finite flow state");
      if (stop(st.t(), st.y())) return false;
    } else {
      if (!std::isfinite(err) && hh <= ctl.tol.h_min) stall(st.t(), hh);
      h = hh * Stepper::growth(err);
    }
  }
  return true;
}

}  // namespace sle::flow
