#include "pamlab/covariance.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "pamlab/errors.hpp"
#include "pamlab/manifold.hpp"

namespace pamlab {

namespace {
constexpr double kPi = std::numbers::pi;

double unit_sphere_area(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return 2.0 * kPi;
    default: return 4.0 * kPi;
  }
}

double max_length(const TorusSpec& spec) {
  double m = spec.length(0);
  for (int i = 1; i < spec.d; ++i) m = std::max(m, spec.length(i));
  return m;
}
}  // namespace

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::bounded: return "bounded";
    case Regime::logarithmic: return "log";
    case Regime::power: return "power";
  }
  return "?";
}

bool NoiseParams::dalang(int d) const { return alpha > 0.5 * (d - 2); }

Regime NoiseParams::regime(int d) const {
  const double half = 0.5 * d;
  if (std::abs(alpha - half) <= 1e-12) return Regime::logarithmic;
  return alpha > half ? Regime::bounded : Regime::power;
}

KernelValue g_alpha_spectral(const TorusSpec& spec, int kmax, double alpha, const Point& x,
                             const Point& y) {
  if (!(alpha > 0.0)) throw DomainError("kernel evaluation requires alpha > 0");
  const Point delta = spec.displacement(x, y);
  auto weight = [alpha](double lam) { return std::pow(lam, -alpha); };
  KernelValue out;
  out.value = half_lattice_cosine_sum(spec, kmax, delta, weight);
  const double m0 = spec.volume();
  const double r = std::sqrt(norm2(delta, spec.d));
  if (r < 1e-15) {
    if (2.0 * alpha > spec.d) {
      const double q = 2.0 * kPi / max_length(spec);
      const double k0 = std::max(kmax + 0.5 - 0.5 * std::sqrt(double(spec.d)), 0.5);
      out.tail = unit_sphere_area(spec.d) / m0 * std::pow(q, -2.0 * alpha) *
                 std::pow(k0, spec.d - 2.0 * alpha) / (2.0 * alpha - spec.d);
    } else {
      out.tail = std::numeric_limits<double>::infinity();
      out.divergent = true;
    }
  } else if (spec.d == 1) {
    const double q = 2.0 * kPi * (kmax + 1) / spec.length(0);
    out.tail = 2.0 / m0 * std::pow(q, -2.0 * alpha) / std::abs(std::sin(kPi * r / spec.length(0)));
  } else {
    const double half = half_lattice_cosine_sum(spec, kmax / 2, delta, weight);
    out.tail = std::abs(out.value - half);
  }
  return out;
}

KernelValue g_alpha_integral(const TorusSpec& spec, double alpha, const Point& x, const Point& y,
                             const IntegralControls& ctl) {
  using boost::math::quadrature::gauss_kronrod;
  if (!(alpha > 0.0)) throw DomainError("kernel evaluation requires alpha > 0");
  const double m0 = spec.volume();
  const int d = spec.d;
  const double lmin = spec.min_length();
  // s is the time of e^{s Laplacian}, i.e. heat time t = 2 s.
  const double s_switch = 0.5 * (ctl.t_switch > 0.0 ? ctl.t_switch : 0.5 * lmin * lmin);
  const double r2 = spec.distance2(x, y);
  const double gamma = std::tgamma(alpha);

  KernelValue out;
  if (r2 < 1e-30 && alpha <= 0.5 * d) {
    out.value = std::numeric_limits<double>::infinity();
    out.tail = std::numeric_limits<double>::infinity();
    out.divergent = true;
    return out;
  }

  const int n_img = images_required(spec, 2.0 * s_switch);
  auto images = [&](double s) { return heat_kernel_images(spec, 2.0 * s, x, y, n_img); };

  double err_total = 0.0;
  double short_part = 0.0;
  // Below s0 only the nearest image matters to double precision.
  const double s0 = lmin * lmin / 3000.0;
  double u_lo;
  if (r2 < 1e-30) {
    const double e = alpha - 0.5 * d;
    short_part += std::pow(4.0 * kPi, -0.5 * d) * std::pow(s0, e) / e;
    u_lo = std::log(s0);
  } else {
    u_lo = std::min(std::log(r2 / 3000.0), std::log(s0));
  }
  const double u_hi = std::log(s_switch);
  auto f_short = [&](double u) {
    const double s = std::exp(u);
    return std::pow(s, alpha) * images(s);
  };
  double err = 0.0;
  short_part += gauss_kronrod<double, 61>::integrate(f_short, u_lo, u_hi, ctl.max_depth,
                                                      ctl.rel_tol, &err);
  err_total += err;
  short_part -= std::pow(s_switch, alpha) / (alpha * m0);

  const Point delta = spec.displacement(x, y);
  const double q1 = 2.0 * kPi / max_length(spec);
  const double lam1 = q1 * q1;
  const double s_end = s_switch + 45.0 / lam1;
  const int kmax = static_cast<int>(std::ceil(std::sqrt(45.0 / s_switch) / q1)) + 1;
  auto f_long = [&](double s) {
    return std::pow(s, alpha - 1.0) *
           half_lattice_cosine_sum(spec, kmax, delta, [s](double lam) { return std::exp(-lam * s); });
  };
  double err2 = 0.0;
  const double long_part = gauss_kronrod<double, 61>::integrate(f_long, s_switch, s_end,
                                                                 ctl.max_depth, ctl.rel_tol, &err2);
  err_total += err2;

  out.value = (short_part + long_part) / gamma;
  out.tail = err_total / gamma;
  const double scale = std::max(std::abs(out.value), 1.0);
  if (!(out.tail <= std::max(ctl.abs_tol, 1e-8 * scale)))
    throw ToleranceNotMet("kernel time integral did not converge", out.tail);
  return out;
}

double g_alpha_rho(const TorusSpec& spec, int kmax, const NoiseParams& params, const Point& x,
                   const Point& y) {
  return params.rho / spec.volume() + g_alpha_spectral(spec, kmax, params.alpha, x, y).value;
}

double riesz_constant(int d, double alpha) {
  return std::tgamma(0.5 * d - alpha) /
         (std::pow(4.0, alpha) * std::pow(kPi, 0.5 * d) * std::tgamma(alpha));
}

LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = y[i] - f.intercept - f.slope * x[i];
      ssr += e * e;
    }
    f.slope_stderr = std::sqrt(ssr / (n - 2.0) / sxx);
  }
  return f;
}

ExponentFit estimate_singularity_exponent(const TorusSpec& spec, int kmax, double alpha,
                                          double r_min, double r_max, std::size_t n_points,
                                          KernelMethod method) {
  if (!(r_min > 0.0 && r_max > r_min && n_points >= 3))
    throw InvalidConfig("exponent fit needs 0 < r_min < r_max and at least 3 radii");
  if (!(r_max < spec.injectivity_radius()))
    throw InvalidConfig("exponent fit needs r_max below the injectivity radius");
  ExponentFit fit;
  const Point x{0.0, 0.0, 0.0};
  std::vector<double> lr, lg;
  for (std::size_t i = 0; i < n_points; ++i) {
    const double r =
        r_min * std::pow(r_max / r_min, static_cast<double>(i) / static_cast<double>(n_points - 1));
    Point y = x;
    y[0] = r;
    KernelValue v = method == KernelMethod::spectral ? g_alpha_spectral(spec, kmax, alpha, x, y)
                                                     : g_alpha_integral(spec, alpha, x, y);
    const double ratio = v.tail / std::abs(v.value);
    fit.max_tail_ratio = std::max(fit.max_tail_ratio, ratio);
    if (method == KernelMethod::spectral && i == 0 && !(ratio < 0.05)) {
      const int need = static_cast<int>(
          std::ceil((kmax + 1) * std::pow(ratio / 0.05, 1.0 / (2.0 * alpha))));
      throw TruncationInsufficient("spectral tail at r_min is " + std::to_string(ratio) +
                                       " of the kernel value; kmax >= " + std::to_string(need) +
                                       " required",
                                   need);
    }
    fit.radii.push_back(r);
    fit.values.push_back(v.value);
    lr.push_back(std::log(r));
    lg.push_back(std::log(std::abs(v.value)));
  }
  const LineFit line = least_squares_line(lr, lg);
  fit.slope = line.slope;
  fit.slope_stderr = line.slope_stderr;
  std::vector<double> dr, dg;
  for (std::size_t i = 0; i + 1 < n_points; ++i) {
    dr.push_back(lr[i]);
    dg.push_back(std::log(std::abs(fit.values[i + 1] - fit.values[i])));
  }
  fit.difference_slope = least_squares_line(dr, dg).slope;
  return fit;
}

}  // namespace pamlab
