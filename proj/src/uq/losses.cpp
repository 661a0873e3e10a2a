#include "fieldbench/uq/losses.hpp"

#include <cmath>

namespace fieldbench::uq {

namespace {

void check_sizes(std::size_t n, std::span<const double> s, const char* what) {
  if (s.size() != n) throw std::invalid_argument(std::string("size mismatch: ") + what);
}

void check_grad_span(std::size_t n, std::span<double> s, const char* what) {
  if (!s.empty() && s.size() != n)
    throw std::invalid_argument(std::string("gradient span size mismatch: ") + what);
}

}  // namespace

double digamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("digamma: x must be > 0");
  double acc = 0.0;
  while (x < 8.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  // Asymptotic expansion: ln x - 1/(2x) - sum B_2k / (2k x^2k).
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return acc + std::log(x) - 0.5 * inv -
         inv2 * (1.0 / 12.0 -
                 inv2 * (1.0 / 120.0 -
                         inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
}

double heteroscedastic_nll(std::span<const double> mean, std::span<const double> log_var,
                           std::span<const double> target,
                           std::span<double> d_mean, std::span<double> d_log_var) {
  const std::size_t n = mean.size();
  if (n == 0) throw std::invalid_argument("heteroscedastic_nll: empty input");
  check_sizes(n, log_var, "log_var");
  check_sizes(n, target, "target");
  check_grad_span(n, d_mean, "d_mean");
  check_grad_span(n, d_log_var, "d_log_var");

  const double inv_n = 1.0 / double(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = mean[i] - target[i];
    const double inv_var = std::exp(-log_var[i]);
    acc += 0.5 * r * r * inv_var + 0.5 * log_var[i];
    if (!d_mean.empty()) d_mean[i] = r * inv_var * inv_n;
    if (!d_log_var.empty()) d_log_var[i] = (-0.5 * r * r * inv_var + 0.5) * inv_n;
  }
  const double loss = acc * inv_n;
  if (!std::isfinite(loss)) throw NonFiniteLoss("heteroscedastic_nll is non-finite");
  return loss;
}

double nig_nll(std::span<const double> gamma, std::span<const double> nu,
               std::span<const double> alpha, std::span<const double> beta,
               std::span<const double> target,
               std::span<double> d_gamma, std::span<double> d_nu,
               std::span<double> d_alpha, std::span<double> d_beta) {
  const std::size_t n = gamma.size();
  if (n == 0) throw std::invalid_argument("nig_nll: empty input");
  check_sizes(n, nu, "nu");
  check_sizes(n, alpha, "alpha");
  check_sizes(n, beta, "beta");
  check_sizes(n, target, "target");
  check_grad_span(n, d_gamma, "d_gamma");
  check_grad_span(n, d_nu, "d_nu");
  check_grad_span(n, d_alpha, "d_alpha");
  check_grad_span(n, d_beta, "d_beta");

  const double inv_n = 1.0 / double(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(nu[i] > 0.0) || !(alpha[i] > 1.0) || !(beta[i] > 0.0))
      throw std::invalid_argument("nig_nll: parameter constraints violated");
    const double r = target[i] - gamma[i];
    const double omega = 2.0 * beta[i] * (1.0 + nu[i]);
    const double s = r * r * nu[i] + omega;
    acc += 0.5 * std::log(M_PI / nu[i]) - alpha[i] * std::log(omega) +
           (alpha[i] + 0.5) * std::log(s) + std::lgamma(alpha[i]) - std::lgamma(alpha[i] + 0.5);

    if (!d_gamma.empty()) d_gamma[i] = (alpha[i] + 0.5) * (-2.0 * r * nu[i]) / s * inv_n;
    if (!d_nu.empty())
      d_nu[i] = (-0.5 / nu[i] - alpha[i] / (1.0 + nu[i]) +
                 (alpha[i] + 0.5) * (r * r + 2.0 * beta[i]) / s) *
                inv_n;
    if (!d_alpha.empty())
      d_alpha[i] =
          (std::log(s) - std::log(omega) + digamma(alpha[i]) - digamma(alpha[i] + 0.5)) * inv_n;
    if (!d_beta.empty())
      d_beta[i] = (-alpha[i] / beta[i] + (alpha[i] + 0.5) * 2.0 * (1.0 + nu[i]) / s) * inv_n;
  }
  const double loss = acc * inv_n;
  if (!std::isfinite(loss)) throw NonFiniteLoss("nig_nll is non-finite");
  return loss;
}

double edl_loss(std::span<const double> gamma, std::span<const double> nu,
                std::span<const double> alpha, std::span<const double> beta,
                std::span<const double> target, double lambda,
                std::span<double> d_gamma, std::span<double> d_nu,
                std::span<double> d_alpha, std::span<double> d_beta) {
  if (lambda < 0.0) throw std::invalid_argument("edl_loss: lambda must be >= 0");
  const double nig = nig_nll(gamma, nu, alpha, beta, target, d_gamma, d_nu, d_alpha, d_beta);

  const std::size_t n = gamma.size();
  const double inv_n = 1.0 / double(n);
  double reg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = target[i] - gamma[i];
    const double evidence = 2.0 * nu[i] + alpha[i];
    reg += std::fabs(r) * evidence;
    const double sgn = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    if (!d_gamma.empty()) d_gamma[i] += lambda * (-sgn) * evidence * inv_n;
    if (!d_nu.empty()) d_nu[i] += lambda * std::fabs(r) * 2.0 * inv_n;
    if (!d_alpha.empty()) d_alpha[i] += lambda * std::fabs(r) * inv_n;
  }
  const double loss = nig + lambda * reg * inv_n;
  if (!std::isfinite(loss)) throw NonFiniteLoss("edl_loss is non-finite");
  return loss;
}

}  // namespace fieldbench::uq
