#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tsa/case.hpp"
#include "tsa/error.hpp"

namespace tsa {

/// Classical-model electrical output at the internal nodes:
/// Pe_i = E_i^2 G_ii + sum_{j != i} E_i E_j (G_ij cos d_ij + B_ij sin d_ij).
inline void electrical_power(const ReducedNetworkStage& stage, std::span<const double> emfs,
                             std::span<const double> angles, std::span<double> out) {
  const std::size_t n = stage.size();
  if (emfs.size() != n || angles.size() != n || out.size() != n)
    fail("malformed case", "dimension mismatch in electrical_power");
  const auto& G = stage.conductance_G;
  const auto& B = stage.susceptance_B;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    double pe = emfs[i] * emfs[i] * G(ii, ii);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      const double d = angles[i] - angles[j];
      pe += emfs[i] * emfs[j] * (G(ii, jj) * std::cos(d) + B(ii, jj) * std::sin(d));
    }
    out[i] = pe;
  }
}

inline std::vector<double> electrical_power(const ReducedNetworkStage& stage, std::span<const double> emfs,
                                            std::span<const double> angles) {
  std::vector<double> pe(stage.size());
  electrical_power(stage, emfs, angles, pe);
  return pe;
}

/// f_abs,i = Pm_i - Pe_i on the given stage.
inline std::vector<double> accelerating_power(const ReducedNetworkStage& stage, const SystemCase& c,
                                              std::span<const double> angles) {
  auto f = electrical_power(stage, c.emfs(), angles);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = c.machines[i].mech_power_Pm - f[i];
  return f;
}

namespace detail {

/// dPe_i / d(delta_j) for the classical model.
inline Eigen::MatrixXd power_jacobian(const ReducedNetworkStage& stage, std::span<const double> e,
                                      std::span<const double> angles) {
  const auto n = static_cast<Eigen::Index>(stage.size());
  const auto& G = stage.conductance_G;
  const auto& B = stage.susceptance_B;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = angles[static_cast<std::size_t>(i)] - angles[static_cast<std::size_t>(j)];
      const double ee = e[static_cast<std::size_t>(i)] * e[static_cast<std::size_t>(j)];
      const double dij = ee * (-G(i, j) * std::sin(d) + B(i, j) * std::cos(d));
      J(i, j) = -dij;
      J(i, i) += dij;
    }
  }
  return J;
}

}  // namespace detail

inline constexpr double kEquilibriumTolerance = 1e-10;

/// Absolute rotor angles with Pm_i = Pe_i on the prefault stage.
/// Network-mode cases return the snapshot EMF angles unchanged. Reduced-mode
/// cases run a damped Newton iteration from zero angles with machine 0 held
/// as the angle reference.
inline std::vector<double> prefault_equilibrium(const SystemCase& c) {
  if (c.snapshot_angles) return *c.snapshot_angles;

  const std::size_t n = c.size();
  const auto& stage = c.stage(Stage::prefault);
  const auto e = c.emfs();
  std::vector<double> angles(n, 0.0);
  auto residual = [&](std::span<const double> a) {
    auto f = accelerating_power(stage, c, a);
    return Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(n)).eval();
  };
  auto worst = [](const Eigen::VectorXd& r) { return r.size() ? r.cwiseAbs().maxCoeff() : 0.0; };

  if (n > 1) {
    const auto m = static_cast<Eigen::Index>(n - 1);
    Eigen::VectorXd r = residual(angles);
    bool converged = false;
    for (int iter = 0; iter < 200; ++iter) {
      const Eigen::VectorXd free_r = r.tail(m);
      if (worst(free_r) < 1e-13) {
        converged = true;
        break;
      }
      const Eigen::MatrixXd J = detail::power_jacobian(stage, e, angles).bottomRightCorner(m, m);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
      if (!lu.isInvertible()) break;
      // f = Pm - Pe, so df/dδ = -J and the Newton step is +J^-1 f.
      const Eigen::VectorXd step = lu.solve(free_r);
      double lambda = 1.0;
      const double before = free_r.norm();
      std::vector<double> trial(angles);
      for (int k = 0; k < 30; ++k) {
        for (std::size_t i = 1; i < n; ++i) trial[i] = angles[i] + lambda * step(static_cast<Eigen::Index>(i - 1));
        if (residual(trial).tail(m).norm() < before) break;
        lambda *= 0.5;
      }
      angles = trial;
      r = residual(angles);
    }
    if (!converged) fail("no prefault equilibrium");
  }
  if (worst(residual(angles)) > kEquilibriumTolerance) fail("no prefault equilibrium");
  return angles;
}

}  // namespace tsa
