#include <algorithm>
#include <cmath>

#include "ssrecon/enhance.hpp"
#include "ssrecon/error.hpp"

namespace ssrecon::enhance {

void RetinexConfig::validate() const {
  if (smooth_grad_weight < 0 || smooth_lap_weight < 0 || reflect_grad_weight < 0 || reflect_lap_weight < 0) {
    throw Error(ErrorKind::Config, "retinex weights must be non-negative");
  }
  if (iterations < 1) throw Error(ErrorKind::Config, "retinex iterations must be >= 1");
  if (!(gamma > 0)) throw Error(ErrorKind::Config, "retinex gamma must be positive");
  if (!(white_level > 0)) throw Error(ErrorKind::Config, "retinex white_level must be positive");
}

namespace ops {

Plane grad_x(const Plane& u) {
  Plane g(u.width(), u.height());
  for (int y = 0; y < u.height(); ++y)
    for (int x = 0; x + 1 < u.width(); ++x) g(x, y) = u(x + 1, y) - u(x, y);
  return g;
}

Plane grad_y(const Plane& u) {
  Plane g(u.width(), u.height());
  for (int y = 0; y + 1 < u.height(); ++y)
    for (int x = 0; x < u.width(); ++x) g(x, y) = u(x, y + 1) - u(x, y);
  return g;
}

Plane grad_adjoint(const Plane& px, const Plane& py) {
  const int w = px.width();
  const int h = px.height();
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      if (x >= 1) v += px(x - 1, y);
      if (x + 1 < w) v -= px(x, y);
      if (y >= 1) v += py(x, y - 1);
      if (y + 1 < h) v -= py(x, y);
      out(x, y) = v;
    }
  }
  return out;
}

Plane laplacian(const Plane& u) {
  Plane out(u.width(), u.height());
  for (int y = 0; y < u.height(); ++y) {
    for (int x = 0; x < u.width(); ++x) {
      out(x, y) = u.clamped(x - 1, y) + u.clamped(x + 1, y) + u.clamped(x, y - 1) +
                  u.clamped(x, y + 1) - 4.0 * u(x, y);
    }
  }
  return out;
}

Plane max_filter(const Plane& u, int size) {
  const int r = size / 2;
  Plane rows(u.width(), u.height());
  for (int y = 0; y < u.height(); ++y) {
    for (int x = 0; x < u.width(); ++x) {
      double m = u(x, y);
      for (int k = -r; k <= r; ++k) m = std::max(m, u.clamped(x + k, y));
      rows(x, y) = m;
    }
  }
  Plane out(u.width(), u.height());
  for (int y = 0; y < u.height(); ++y) {
    for (int x = 0; x < u.width(); ++x) {
      double m = rows(x, y);
      for (int k = -r; k <= r; ++k) m = std::max(m, rows.clamped(x, y + k));
      out(x, y) = m;
    }
  }
  return out;
}

}  // namespace ops

namespace {

using ops::grad_adjoint;
using ops::grad_x;
using ops::grad_y;
using ops::laplacian;

constexpr double kCgTolerance = 1e-6;
constexpr int kCgMaxIterations = 2000;
constexpr int kShrinkageRounds = 6;

double dot(const Plane& a, const Plane& b) {
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return s;
}

void axpy(double a, const Plane& x, Plane& y) {
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < xv.size(); ++i) yv[i] += a * xv[i];
}

// A(u) = u + a * (grad^T grad) u + b * lap(lap(u)); grad^T grad = -lap.
Plane apply_system(const Plane& u, double a, double b) {
  Plane out = u;
  if (a == 0.0 && b == 0.0) return out;
  const Plane lap = laplacian(u);
  if (a != 0.0) axpy(-a, lap, out);
  if (b != 0.0) axpy(b, laplacian(lap), out);
  return out;
}

// Conjugate gradients from the warm start `x`. Each CG iterate lowers the
// quadratic energy x^T A x - 2 b^T x, which is what the alternating scheme
// relies on for monotone descent.
void conjugate_gradient(const Plane& rhs, double a, double b, Plane& x) {
  Plane r = rhs;
  axpy(-1.0, apply_system(x, a, b), r);
  const double rhs_norm = std::sqrt(std::max(dot(rhs, rhs), 1e-300));
  double rr = dot(r, r);
  if (std::sqrt(rr) <= kCgTolerance * rhs_norm) return;
  Plane p = r;
  for (int it = 0; it < kCgMaxIterations; ++it) {
    const Plane ap = apply_system(p, a, b);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double step = rr / pap;
    axpy(step, p, x);
    axpy(-step, ap, r);
    const double rr_next = dot(r, r);
    if (std::sqrt(rr_next) <= kCgTolerance * rhs_norm) break;
    const double beta = rr_next / rr;
    rr = rr_next;
    auto pv = p.values();
    auto rv = r.values();
    for (std::size_t i = 0; i < pv.size(); ++i) pv[i] = rv[i] + beta * pv[i];
  }
}

double l1(const Plane& p) {
  double s = 0.0;
  for (double v : p.values()) s += std::abs(v);
  return s;
}

double l2sq(const Plane& p) { return dot(p, p); }

Plane shrink(const Plane& v, double threshold) {
  Plane out(v.width(), v.height());
  auto in = v.values();
  auto o = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double m = std::abs(in[i]) - threshold;
    o[i] = m > 0.0 ? std::copysign(m, in[i]) : 0.0;
  }
  return out;
}

Plane minus(const Plane& a, const Plane& b) {
  Plane out = a;
  axpy(-1.0, b, out);
  return out;
}

void project_nonpositive(Plane& r) {
  for (double& v : r.values()) v = std::min(v, 0.0);
}

// Reflectance sub-problem:
//   min_r |t - r|^2 + g1 |grad r|_1 + g2 |lap r|_1   s.t. r <= 0
// by half-quadratic splitting with a geometric penalty schedule. The best
// iterate (including the incoming r) is returned so the outer objective
// cannot increase.
Plane solve_reflectance(const Plane& log_lum, const Plane& log_illum, const Plane& r_prev,
                        const RetinexConfig& cfg) {
  const Plane target = minus(log_lum, log_illum);
  const double g1 = cfg.reflect_grad_weight;
  const double g2 = cfg.reflect_lap_weight;

  auto objective = [&](const Plane& r) { return retinex_objective(log_lum, log_illum, r, cfg); };

  Plane best = r_prev;
  double best_value = objective(r_prev);

  Plane r = target;
  project_nonpositive(r);
  if (g1 == 0.0 && g2 == 0.0) {
    const double value = objective(r);
    return value <= best_value ? r : best;
  }
  const double v0 = objective(r);
  if (v0 <= best_value) {
    best = r;
    best_value = v0;
  }

  double rho = 2.0 * std::max(g1, g2);
  rho = std::max(rho, 0.05);
  for (int round = 0; round < kShrinkageRounds; ++round) {
    Plane rhs = target;
    double a = 0.0;
    double b = 0.0;
    if (g1 > 0.0) {
      const Plane gx = shrink(grad_x(r), g1 / (2.0 * rho));
      const Plane gy = shrink(grad_y(r), g1 / (2.0 * rho));
      axpy(rho, grad_adjoint(gx, gy), rhs);
      a = rho;
    }
    if (g2 > 0.0) {
      const Plane hl = shrink(laplacian(r), g2 / (2.0 * rho));
      axpy(rho, laplacian(hl), rhs);
      b = rho;
    }
    conjugate_gradient(rhs, a, b, r);
    project_nonpositive(r);
    const double value = objective(r);
    if (value <= best_value) {
      best = r;
      best_value = value;
    }
    rho *= 2.0;
  }
  return best;
}

bool all_finite(const Plane& p) {
  return std::ranges::all_of(p.values(), [](double v) { return std::isfinite(v); });
}

}  // namespace

double retinex_objective(const Plane& log_luminance, const Plane& log_illumination,
                         const Plane& log_reflectance, const RetinexConfig& cfg) {
  Plane residual = minus(log_luminance, log_illumination);
  axpy(-1.0, log_reflectance, residual);
  double value = l2sq(residual);
  if (cfg.smooth_grad_weight > 0.0) {
    value += cfg.smooth_grad_weight * (l2sq(grad_x(log_illumination)) + l2sq(grad_y(log_illumination)));
  }
  if (cfg.smooth_lap_weight > 0.0) value += cfg.smooth_lap_weight * l2sq(laplacian(log_illumination));
  if (cfg.reflect_grad_weight > 0.0) {
    value += cfg.reflect_grad_weight * (l1(grad_x(log_reflectance)) + l1(grad_y(log_reflectance)));
  }
  if (cfg.reflect_lap_weight > 0.0) value += cfg.reflect_lap_weight * l1(laplacian(log_reflectance));
  return value;
}

RetinexDecomposition retinex_decompose(const Plane& luminance, const RetinexConfig& cfg) {
  cfg.validate();
  if (luminance.empty()) throw Error(ErrorKind::TooSmall, "retinex on an empty plane");

  Plane floored = luminance;
  for (double& v : floored.values()) v = std::max(v, kLogFloor);

  Plane log_lum = floored;
  for (double& v : log_lum.values()) v = std::log(v);

  Plane log_illum = ops::max_filter(floored, kInitMaxFilterSize);
  for (double& v : log_illum.values()) v = std::log(v);
  Plane log_refl = minus(log_lum, log_illum);

  RetinexDecomposition out;
  double previous = retinex_objective(log_lum, log_illum, log_refl, cfg);
  out.objective_trace.push_back(previous);

  for (int it = 0; it < cfg.iterations; ++it) {
    // Illumination: quadratic, solved by CG from the current estimate.
    const Plane rhs = minus(log_lum, log_refl);
    Plane candidate = log_illum;
    conjugate_gradient(rhs, cfg.smooth_grad_weight, cfg.smooth_lap_weight, candidate);
    // Keep illumination above the observation.
    for (std::size_t k = 0; k < candidate.size(); ++k) {
      candidate.values()[k] = std::max(candidate.values()[k], log_lum.values()[k]);
    }
    if (retinex_objective(log_lum, candidate, log_refl, cfg) <= previous) log_illum = std::move(candidate);

    log_refl = solve_reflectance(log_lum, log_illum, log_refl, cfg);

    if (!all_finite(log_illum) || !all_finite(log_refl)) {
      throw Error(ErrorKind::NonFinite, "retinex solver produced non-finite values");
    }
    const double value = retinex_objective(log_lum, log_illum, log_refl, cfg);
    if (!std::isfinite(value)) throw Error(ErrorKind::NonFinite, "retinex objective is not finite");
    out.objective_trace.push_back(value);
    previous = value;
  }

  out.illumination = std::move(log_illum);
  out.reflectance = std::move(log_refl);
  for (double& v : out.illumination.values()) v = std::exp(v);
  for (double& v : out.reflectance.values()) v = std::exp(v);
  return out;
}

Plane gamma_adjust(const Plane& illumination, double gamma, double white) {
  if (!(gamma > 0.0) || !(white > 0.0)) {
    throw Error(ErrorKind::Config, "gamma and white level must be positive");
  }
  Plane out = illumination;
  if (gamma == 1.0) return out;
  const double inv = 1.0 / gamma;
  for (double& v : out.values()) v = white * std::pow(std::max(v, 0.0) / white, inv);
  return out;
}

}  // namespace ssrecon::enhance
