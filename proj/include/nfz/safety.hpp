// Copyright 2026 The Neurofuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Biophysical safety constraints on stimulation patterns. Each constraint
// is reported as a dimensionless proportion (quantity / limit); a
// proportion strictly greater than 1 is a violation.

#ifndef NFZ_SAFETY_HPP_
#define NFZ_SAFETY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nfz/error.hpp"
#include "nfz/model.hpp"

namespace nfz {

enum class Constraint { physically_impossible, charge_density, instantaneous_current, active_electrodes };

inline constexpr std::array<Constraint, 4> kAllConstraints = {
    Constraint::physically_impossible, Constraint::charge_density,
    Constraint::instantaneous_current, Constraint::active_electrodes};

inline std::string_view constraint_name(Constraint c) {
  switch (c) {
    case Constraint::physically_impossible: return "PI";
    case Constraint::charge_density: return "CD";
    case Constraint::instantaneous_current: return "IC";
    case Constraint::active_electrodes: return "AE";
  }
  return "?";
}

// Limits in canonical units. Charge is in nC (1 uA x 1 ms = 1 nC).
struct SafetyLimits {
  double charge_nc = 0.0;          // per-electrode charge limit
  double current_ua = 0.0;         // total instantaneous current limit
  double active_electrodes = 0.0;  // co-activation limit
  double activity_epsilon = 0.0;   // an electrode is active when a > epsilon

  // Epiretinal array: 0.628 uC, 6 mA, 100 electrodes.
  static SafetyLimits retinal() { return {628.0, 6000.0, 100.0, 0.0}; }
  // Utah array: 20.4 nC, 3.6 mA, 30 electrodes.
  static SafetyLimits cortical() { return {20.4, 3600.0, 30.0, 0.0}; }

  void validate() const {
    if (!(charge_nc > 0.0) || !(current_ua > 0.0) || !(active_electrodes > 0.0) ||
        !std::isfinite(charge_nc) || !std::isfinite(current_ua) ||
        !std::isfinite(active_electrodes))
      throw Error(Errc::invalid_argument, "safety limits must be finite and strictly positive");
    if (!(activity_epsilon >= 0.0))
      throw Error(Errc::invalid_argument, "activity epsilon must be non-negative");
  }
};

struct ViolationProportion {
  Constraint constraint;
  std::optional<std::size_t> electrode;  // unset for aggregate constraints
  double proportion = 0.0;
  bool violated = false;
};

namespace detail {
inline ViolationProportion make_proportion(Constraint c, std::optional<std::size_t> e, double p) {
  return {c, e, p, p > 1.0};
}
inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(Errc::non_finite, std::string(what) + " is not finite");
}
}  // namespace detail

// 2p must fit in the period 1000/f (p in ms, f in Hz).
inline ViolationProportion check_physically_impossible(double frequency_hz, double pulse_ms,
                                                       std::optional<std::size_t> electrode = {}) {
  detail::require_finite(frequency_hz, "frequency");
  detail::require_finite(pulse_ms, "pulse duration");
  if (!(frequency_hz > 0.0))
    throw Error(Errc::invalid_stimulus,
                "frequency " + std::to_string(frequency_hz) + " Hz leaves the pulse period undefined");
  if (pulse_ms < 0.0) throw Error(Errc::invalid_stimulus, "negative pulse duration");
  return detail::make_proportion(Constraint::physically_impossible, electrode,
                                 2.0 * pulse_ms * frequency_hz / 1000.0);
}

inline ViolationProportion check_charge_density(double pulse_ms, double amplitude_ua,
                                                double charge_limit_nc,
                                                std::optional<std::size_t> electrode = {}) {
  detail::require_finite(pulse_ms, "pulse duration");
  detail::require_finite(amplitude_ua, "amplitude");
  return detail::make_proportion(Constraint::charge_density, electrode,
                                 pulse_ms * amplitude_ua / charge_limit_nc);
}

inline ViolationProportion check_instantaneous_current(std::span<const double> amplitudes_ua,
                                                       double current_limit_ua) {
  double total = 0.0;
  for (double a : amplitudes_ua) {
    detail::require_finite(a, "amplitude");
    total += a;
  }
  return detail::make_proportion(Constraint::instantaneous_current, std::nullopt,
                                 total / current_limit_ua);
}

inline ViolationProportion check_active_electrodes(std::span<const double> amplitudes_ua,
                                                   double active_limit,
                                                   double activity_epsilon = 0.0) {
  std::size_t active = 0;
  for (double a : amplitudes_ua) {
    detail::require_finite(a, "amplitude");
    if (a > activity_epsilon) ++active;
  }
  return detail::make_proportion(Constraint::active_electrodes, std::nullopt,
                                 static_cast<double>(active) / active_limit);
}

// Electrode-wise proportions (PI, CD) for every electrode plus the two
// aggregate proportions (IC, AE).
struct ViolationReport {
  std::vector<double> pi;
  std::vector<double> cd;
  double ic = 0.0;
  double ae = 0.0;
  std::vector<double> amplitudes_ua;
  bool any_violation = false;

  std::size_t electrode_count() const { return pi.size(); }

  bool violates(Constraint c) const {
    switch (c) {
      case Constraint::physically_impossible:
        return std::any_of(pi.begin(), pi.end(), [](double p) { return p > 1.0; });
      case Constraint::charge_density:
        return std::any_of(cd.begin(), cd.end(), [](double p) { return p > 1.0; });
      case Constraint::instantaneous_current: return ic > 1.0;
      case Constraint::active_electrodes: return ae > 1.0;
    }
    return false;
  }

  friend bool operator==(const ViolationReport&, const ViolationReport&) = default;
};

inline ViolationReport evaluate(const StimulationPattern& pattern, const SafetyLimits& limits) {
  const std::size_t n = pattern.electrode_count();
  if (pattern.frequency_hz.size() != n || pattern.pulse_ms.size() != n)
    throw Error(Errc::length_mismatch, "stimulation pattern vectors differ in length");
  ViolationReport report;
  report.pi.resize(n);
  report.cd.resize(n);
  report.amplitudes_ua = pattern.amplitude_ua;
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto pi = check_physically_impossible(pattern.frequency_hz[i], pattern.pulse_ms[i], i);
    const auto cd = check_charge_density(pattern.pulse_ms[i], pattern.amplitude_ua[i],
                                         limits.charge_nc, i);
    report.pi[i] = pi.proportion;
    report.cd[i] = cd.proportion;
    any = any || pi.violated || cd.violated;
  }
  const auto ic = check_instantaneous_current(pattern.amplitude_ua, limits.current_ua);
  const auto ae = check_active_electrodes(pattern.amplitude_ua, limits.active_electrodes,
                                          limits.activity_epsilon);
  report.ic = ic.proportion;
  report.ae = ae.proportion;
  report.any_violation = any || ic.violated || ae.violated;
  return report;
}

}  // namespace nfz

#endif  // NFZ_SAFETY_HPP_
