#pragma once

// Shared fixtures for the unit tests.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsa/case_io.hpp"
#include "tsa/simulator.hpp"

namespace fixture {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kOmegaSyn = 2.0 * kPi * 60.0;

inline std::string data(const std::string& name) { return std::string(TSA_DATA_DIR) + "/" + name; }

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

inline nlohmann::json matrix_json(const std::vector<std::vector<double>>& m) { return m; }

/// Reduced-mode case. Each stage gets its own B; G is zero unless given.
inline nlohmann::json reduced_case(const std::vector<double>& H, const std::vector<double>& Pm, const std::vector<double>& E,
                                   const std::vector<std::vector<double>>& B_pre,
                                   const std::vector<std::vector<double>>& B_on,
                                   const std::vector<std::vector<double>>& B_post, double clear_time = 0.1) {
  const std::size_t n = H.size();
  const std::vector<std::vector<double>> zero(n, std::vector<double>(n, 0.0));
  nlohmann::json doc;
  doc["meta"] = {{"name", "synthetic"}, {"base_mva", 100.0}, {"omega_syn", kOmegaSyn}};
  doc["mode"] = "reduced";
  doc["machines"] = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i)
    doc["machines"].push_back({{"id", std::to_string(i + 1)}, {"H", H[i]}, {"xd_prime", 0.1}, {"Pm", Pm[i]}, {"E", E[i]}});
  doc["reduced"] = {{"prefault", {{"G", zero}, {"B", B_pre}}},
                    {"faulton", {{"G", zero}, {"B", B_on}}},
                    {"postfault", {{"G", zero}, {"B", B_post}}}};
  doc["fault"] = {{"bus", 0}, {"clear_time", clear_time}};
  doc["simulation"] = {{"dt", 0.001}, {"t_end", 3.0}};
  return doc;
}

/// Lossless two-machine system with a single coupling b per stage:
/// Pe_1 = E1 E2 b sin(d1 - d2).
inline nlohmann::json two_machine(double b_pre, double b_on, double b_post, double pm, double clear_time = 0.1,
                                  double h1 = 5.0, double h2 = 5.0) {
  auto B = [](double b) { return std::vector<std::vector<double>>{{-b, b}, {b, -b}}; };
  return reduced_case({h1, h2}, {pm, -pm}, {1.0, 1.0}, B(b_pre), B(b_on), B(b_post), clear_time);
}

inline tsa::SystemCase build(const nlohmann::json& doc) { return tsa::build_case(doc.dump()); }

/// Trajectory from explicit per-machine columns; the fault-on left limit at
/// the clearing sample defaults to the recorded force there.
inline tsa::Trajectory trajectory(std::vector<std::string> ids, std::vector<double> inertia, std::vector<double> times,
                                  std::vector<std::vector<double>> angles, std::vector<std::vector<double>> speeds,
                                  std::vector<std::vector<double>> forces, std::size_t clear_index = 0) {
  tsa::Trajectory tr;
  tr.case_ref = "synthetic";
  tr.ids = std::move(ids);
  tr.inertia = std::move(inertia);
  tr.times = std::move(times);
  tr.angles = std::move(angles);
  tr.speeds = std::move(speeds);
  tr.acc_powers = std::move(forces);
  tr.clear_index = clear_index;
  tr.clear_time = tr.times.empty() ? 0.0 : tr.times[clear_index];
  tr.dt = tr.times.size() > 1 ? tr.times[1] - tr.times[0] : 0.0;
  for (const auto& f : tr.acc_powers) tr.clear_faulton_acc.push_back(f.empty() ? 0.0 : f[clear_index]);
  return tr;
}

/// Samples t_k = k h, k = 0..count-1.
inline std::vector<double> grid(double h, std::size_t count) {
  std::vector<double> t(count);
  for (std::size_t k = 0; k < count; ++k) t[k] = static_cast<double>(k) * h;
  return t;
}

}  // namespace fixture
