#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

/// Independent references for the Feynman-Kac solver. Shares no code with dynamics.hpp.
namespace bogo::reference {

/// Heat kernel of u_beta = u_xixi/(2M) - (kappa/2) xi^2 u from a delta at 0 (Mehler).
inline double mehler_kernel(double M, double kappa, double beta, double xi) {
  const double W = std::sqrt(kappa / M);
  return std::sqrt(M * W / (2 * std::numbers::pi * std::sinh(W * beta))) *
         std::exp(-0.5 * M * W * xi * xi / std::tanh(W * beta));
}

/**
 * u_beta = u_xixi/(2M) - V u on [-L, L] with zero boundary values, from
 * u(beta0, .) = init to beta_end. Crank-Nicolson after four half-size
 * backward-Euler steps (Rannacher start).
 */
inline std::vector<double> diffusion_fd(double M, const std::function<double(double)>& V,
                                        const std::function<double(double)>& init, double beta0, double beta_end,
                                        double L, std::size_t nx, std::size_t steps) {
  const double h = 2 * L / (nx - 1), k = (beta_end - beta0) / steps, D = 1 / (2 * M);
  std::vector<double> x(nx), u(nx), Vx(nx);
  for (std::size_t j = 0; j < nx; ++j) {
    x[j] = -L + h * j;
    u[j] = (j == 0 || j + 1 == nx) ? 0.0 : init(x[j]);
    Vx[j] = V(x[j]);
  }
  // theta-scheme step: (I - theta dt A) u' = (I + (1 - theta) dt A) u, A = D d2 - V
  auto step = [&](double dt, double theta) {
    const std::size_t n = nx - 2;
    std::vector<double> a(n), b(n), c(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + 1;
      const double lap = (u[j - 1] - 2 * u[j] + u[j + 1]) / (h * h);
      r[i] = u[j] + (1 - theta) * dt * (D * lap - Vx[j] * u[j]);
      a[i] = -theta * dt * D / (h * h);
      c[i] = a[i];
      b[i] = 1 + theta * dt * (2 * D / (h * h) + Vx[j]);
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double f = a[i] / b[i - 1];
      b[i] -= f * c[i - 1];
      r[i] -= f * r[i - 1];
    }
    std::vector<double> s(n);
    s[n - 1] = r[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) s[i] = (r[i] - c[i] * s[i + 1]) / b[i];
    for (std::size_t i = 0; i < n; ++i) u[i + 1] = s[i];
  };
  for (int i = 0; i < 4; ++i) step(k / 2, 1.0);
  for (std::size_t i = 2; i < steps; ++i) step(k, 0.5);
  return u;
}
}  // namespace bogo::reference
