#pragma once
// Analysis quantities: local-setting expectation values with propagated
// Poissonian errors, GHZ fidelity from five settings, the fidelity witness,
// squared statistical overlap and bunching-dip visibility.

#include "photonshor/elements.hpp"  // symbol_bit

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace photonshor {

// Counts for one measurement setting over three modes.  Counts are stored as
// reals so exact probabilities (total 1) can flow through the same estimators.
struct SettingCounts {
  std::string setting;  // "ZZZ", "XXX", "XYY", "YXY" or "YYX"
  std::map<std::string, double> counts;

  double total() const {
    double t = 0.0;
    for (const auto& [key, n] : counts) t += n;
    return t;
  }
};

struct Expectation {
  double value = 0.0;
  double sigma = 0.0;
};

namespace detail {

inline int outcome_parity(const std::string& key) {
  int ones = 0;
  for (char c : key) ones += symbol_bit(c);
  return ones & 1;
}

// Poisson variance with a one-count floor for empty outcomes, so estimators
// never report exactly-zero uncertainty from finite data.
inline double count_variance(double n) { return n > 0.0 ? n : 1.0; }

}  // namespace detail

// Parity-weighted mean sum_o (-1)^{parity(o)} n_o / total with first-order
// error propagation of independent Poissonian counts.
inline Expectation expectation(const SettingCounts& sc) {
  const double total = sc.total();
  if (total <= 0.0) throw std::invalid_argument("expectation: zero total counts");
  double signed_sum = 0.0;
  for (const auto& [key, n] : sc.counts)
    signed_sum += (detail::outcome_parity(key) ? -n : n);
  const double value = signed_sum / total;
  double var = 0.0;
  for (const auto& [key, n] : sc.counts) {
    const double s = detail::outcome_parity(key) ? -1.0 : 1.0;
    const double d = (s * total - signed_sum) / (total * total);
    var += d * d * detail::count_variance(n);
  }
  return {value, std::sqrt(var)};
}

struct FidelityEstimate {
  double value = 0.0;  // clamped to [0, 1]
  double sigma = 0.0;
  double raw = 0.0;  // unclamped estimate
};

// GHZ fidelity from the five experimental settings:
// F = (P_HHH + P_VVV)/2 + (<XXX> - <XYY> - <YXY> - <YYX>)/8.
inline FidelityEstimate ghz_fidelity(const std::vector<SettingCounts>& settings) {
  const SettingCounts* table[5] = {nullptr, nullptr, nullptr, nullptr, nullptr};
  const std::array<std::string, 5> names = {"ZZZ", "XXX", "XYY", "YXY", "YYX"};
  for (const SettingCounts& sc : settings)
    for (int i = 0; i < 5; ++i)
      if (sc.setting == names[i]) table[i] = &sc;
  for (int i = 0; i < 5; ++i)
    if (!table[i])
      throw std::invalid_argument("ghz_fidelity: missing setting " + names[i]);

  const SettingCounts& zzz = *table[0];
  const double total = zzz.total();
  if (total <= 0.0) throw std::invalid_argument("ghz_fidelity: zero total counts");
  double extreme = 0.0;
  for (const auto& [key, n] : zzz.counts)
    if (key == "HHH" || key == "VVV") extreme += n;
  const double populations = extreme / total;
  double var = 0.0;
  for (const auto& [key, n] : zzz.counts) {
    const double ind = (key == "HHH" || key == "VVV") ? 1.0 : 0.0;
    const double d = (ind - populations) / total;
    var += d * d * detail::count_variance(n);
  }
  var *= 0.25;  // populations enter with weight 1/2

  const double sign[4] = {+1.0, -1.0, -1.0, -1.0};
  double corr = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Expectation e = expectation(*table[i + 1]);
    corr += sign[i] * e.value;
    var += (e.sigma * e.sigma) / 64.0;  // weight 1/8 each
  }

  FidelityEstimate f;
  f.raw = 0.5 * populations + 0.125 * corr;
  f.value = std::min(1.0, std::max(0.0, f.raw));
  f.sigma = std::sqrt(var);
  return f;
}

struct WitnessResult {
  bool genuine = false;        // fidelity above the 1/2 threshold
  double significance = 0.0;   // (F - 1/2) / sigma
};

inline WitnessResult witness(const FidelityEstimate& f) {
  WitnessResult w;
  w.genuine = f.value > 0.5;
  w.significance = f.sigma > 0.0
                       ? (f.value - 0.5) / f.sigma
                       : (w.genuine ? std::numeric_limits<double>::infinity() : 0.0);
  return w;
}

// Squared statistical overlap gamma = (sum_y sqrt(m_y e_y))^2 between two
// normalized distributions; 1 iff they coincide.
inline double statistical_overlap(const std::vector<double>& measured,
                                  const std::vector<double>& expected) {
  if (measured.size() != expected.size())
    throw std::invalid_argument("statistical_overlap: size mismatch");
  double sm = 0.0, se = 0.0;
  for (double v : measured) sm += v;
  for (double v : expected) se += v;
  if (std::abs(sm - 1.0) > 1e-6 || std::abs(se - 1.0) > 1e-6)
    throw std::invalid_argument("statistical_overlap: distributions not normalized");
  double s = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i)
    s += std::sqrt(std::max(0.0, measured[i]) * std::max(0.0, expected[i]));
  return std::min(1.0, s * s);
}

struct HomScanPoint {
  double delay = 0.0;
  double p_ppp = 0.0;  // |+>|+>|+> probability
  double p_ppm = 0.0;  // |+>|+>|-> probability
};

struct HomVisibility {
  double value = 0.0;  // (P+++ - P++-) / (P+++ + P++-) at zero delay
  std::vector<HomScanPoint> curve;
};

// Visibility of the three-photon bunching feature.  The scan must include the
// zero-delay point and at least one asymptotic point |d| >= 5 sigma_c.
inline HomVisibility hom_visibility(const std::vector<HomScanPoint>& scan,
                                    double sigma_c) {
  const HomScanPoint* zero = nullptr;
  bool has_asymptote = false;
  for (const HomScanPoint& pt : scan) {
    if (std::abs(pt.delay) < 1e-12) zero = &pt;
    if (std::abs(pt.delay) >= 5.0 * sigma_c) has_asymptote = true;
  }
  if (!zero) throw std::invalid_argument("hom_visibility: no zero-delay point");
  if (!has_asymptote)
    throw std::invalid_argument("hom_visibility: no asymptotic delay point");
  const double denom = zero->p_ppp + zero->p_ppm;
  if (denom <= 0.0) throw std::invalid_argument("hom_visibility: empty zero-delay point");
  HomVisibility v;
  v.value = (zero->p_ppp - zero->p_ppm) / denom;
  v.curve = scan;
  return v;
}

}  // namespace photonshor
