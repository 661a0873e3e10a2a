#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

namespace fieldbench::uq {

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-cell heteroscedastic Gaussian NLL with the variance parameterized as
/// log sigma^2:  (mean - target)^2 / (2 e^lv) + lv / 2.
/// Returns the average over cells. Optional outputs receive d(loss)/d(mean)
/// and d(loss)/d(log_var) per cell (already divided by the cell count).
double heteroscedastic_nll(std::span<const double> mean, std::span<const double> log_var,
                           std::span<const double> target,
                           std::span<double> d_mean = {}, std::span<double> d_log_var = {});

/// Normal-Inverse-Gamma negative log-likelihood, averaged over cells:
///   1/2 log(pi/nu) - alpha log Omega + (alpha + 1/2) log((y-gamma)^2 nu + Omega)
///   + log Gamma(alpha) - log Gamma(alpha + 1/2),   Omega = 2 beta (1 + nu).
/// Gradients (per cell, divided by cell count) go to the optional spans.
double nig_nll(std::span<const double> gamma, std::span<const double> nu,
               std::span<const double> alpha, std::span<const double> beta,
               std::span<const double> target,
               std::span<double> d_gamma = {}, std::span<double> d_nu = {},
               std::span<double> d_alpha = {}, std::span<double> d_beta = {});

/// NIG NLL plus the evidence regularizer lambda * |y - gamma| * (2 nu + alpha),
/// averaged over cells so lambda keeps its meaning across grid resolutions.
double edl_loss(std::span<const double> gamma, std::span<const double> nu,
                std::span<const double> alpha, std::span<const double> beta,
                std::span<const double> target, double lambda,
                std::span<double> d_gamma = {}, std::span<double> d_nu = {},
                std::span<double> d_alpha = {}, std::span<double> d_beta = {});

/// Digamma (derivative of log Gamma) for x > 0: recurrence up to x >= 6, then
/// the asymptotic series. Accurate to ~1e-12 over the parameter ranges the
/// NIG loss visits.
double digamma(double x);

}  // namespace fieldbench::uq
