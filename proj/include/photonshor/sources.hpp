#pragma once
// Photon-pair source with higher-order emission, distinguishability knobs,
// ensemble (mixture) machinery and the Poisson counting sampler.

#include "photonshor/fock.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace photonshor {

// Two-crystal down-conversion source.  Each crystal emits k pairs with ket
// amplitude p^{k/2} into its two output modes, horizontally polarized after
// the preparation polarizers; photons from one crystal pulse share a
// wavepacket time offset.
struct SpdcConfig {
  double pair_probability = 0.0;  // p, per-crystal pair emission probability
  int truncation = 2;             // max pairs per crystal
  std::array<std::pair<int, int>, 2> crystal_outputs{{{1, 2}, {3, 4}}};
  std::array<double, 2> label_offsets{0.0, 0.0};
  int mode_count = 4;

  void validate() const {
    if (pair_probability < 0.0 || pair_probability >= 0.2)
      throw std::invalid_argument("spdc: pair_probability out of [0, 0.2)");
    if (truncation < 1) throw std::invalid_argument("spdc: truncation < 1");
    if (4 * truncation > kPhotonCap)
      throw std::invalid_argument("spdc: truncation exceeds the photon cap");
    // Norm captured by the truncated series, relative to the full geometric
    // series per crystal.
    double captured = 1.0;
    for (int c = 0; c < 2; ++c) {
      double sum = 0.0;
      for (int k = 0; k <= truncation; ++k)
        sum += std::pow(pair_probability, k);
      captured *= sum * (1.0 - pair_probability);
    }
    if (1.0 - captured > 0.05)
      throw std::invalid_argument("spdc: truncated norm deficit exceeds 5%");
  }
};

// Truncated product over the two crystals, normalized.  The result spans
// photon-number sectors 0, 2, ..., 4*truncation; sectors are orthogonal and
// post-selection later picks out the relevant one.
inline FockState spdc_state(const SpdcConfig& cfg) {
  cfg.validate();
  const double p = cfg.pair_probability;

  FockState state;
  state.mode_count = cfg.mode_count;
  state.terms[FockConfig{}] = 1.0;  // vacuum seed

  for (int c = 0; c < 2; ++c) {
    const auto [m1, m2] = cfg.crystal_outputs[c];
    const double off = cfg.label_offsets[c];
    std::map<FockConfig, Complex> next;
    for (const auto& [cfg0, amp0] : state.terms) {
      for (int k = 0; k <= cfg.truncation; ++k) {
        FockConfig merged = cfg0;
        for (int i = 0; i < k; ++i) {
          merged.slots.push_back(Slot{m1, Pol::H, off});
          merged.slots.push_back(Slot{m2, Pol::H, off});
        }
        merged.canonicalize();
        next[merged] += amp0 * std::pow(p, 0.5 * k);
      }
    }
    state.terms = std::move(next);
  }

  double n2 = 0.0;
  for (const auto& [cfg0, amp] : state.terms) n2 += std::norm(amp);
  const double n = std::sqrt(n2);
  for (auto& [cfg0, amp] : state.terms) amp /= n;
  return state;
}

// Adds `offset` to the time labels of all photons currently in `mode`.
inline FockState delay_mode(const FockState& s, int mode, double offset) {
  FockState out;
  out.mode_count = s.mode_count;
  for (const auto& [cfg, amp] : s.terms) {
    FockConfig c = cfg;
    for (Slot& slot : c.slots)
      if (slot.mode == mode) slot.label += offset;
    c.canonicalize();
    out.terms[c] += amp;
  }
  return out;
}

// Weighted mixture of normalized pure states.
struct Ensemble {
  std::vector<std::pair<double, FockState>> members;

  void validate() const {
    double sum = 0.0;
    for (const auto& [w, st] : members) {
      if (w <= 0.0) throw std::invalid_argument("ensemble: nonpositive weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("ensemble: weights do not sum to 1");
  }
};

inline Ensemble as_ensemble(FockState s) {
  Ensemble e;
  e.members.push_back({1.0, std::move(s)});
  return e;
}

inline Ensemble delay_mode(const Ensemble& e, int mode, double offset) {
  Ensemble out;
  for (const auto& [w, st] : e.members) out.members.push_back({w, delay_mode(st, mode, offset)});
  return out;
}

namespace detail {

// diag(1, -1) on the polarization of one mode: flips the sign of every
// configuration for each V photon it holds there.
inline FockState apply_pol_z(const FockState& s, int mode) {
  FockState out;
  out.mode_count = s.mode_count;
  for (const auto& [cfg, amp] : s.terms) {
    int v = 0;
    for (const Slot& slot : cfg.slots) v += (slot.mode == mode && slot.pol == Pol::V);
    out.terms[cfg] = (v & 1) ? -amp : amp;
  }
  return out;
}

}  // namespace detail

// Phase-damping channel of strength lambda on one mode's polarization: each
// member splits into an identity branch of weight (1 - lambda/2) and a
// sign-flipped branch of weight lambda/2.  lambda = 1 removes all H/V
// coherence on that mode.
inline Ensemble dephase(const Ensemble& e, int mode, double lambda) {
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("dephase: lambda out of [0, 1]");
  if (lambda == 0.0) return e;
  Ensemble out;
  for (const auto& [w, st] : e.members) {
    out.members.push_back({w * (1.0 - lambda / 2.0), st});
    out.members.push_back({w * (lambda / 2.0), detail::apply_pol_z(st, mode)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Counting statistics.

// Deterministic random stream; Poisson draws use Knuth's method in chunks so
// results do not depend on the platform's library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
    std::uint64_t total = 0;
    while (mean > 500.0) {
      total += poisson_small(500.0);
      mean -= 500.0;
    }
    return total + poisson_small(mean);
  }

 private:
  std::uint64_t poisson_small(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    double prod = 1.0;
    std::uint64_t n = 0;
    do {
      prod *= uniform01();
      if (prod <= limit) break;
      ++n;
    } while (true);
    return n;
  }

  std::mt19937_64 gen_;
};

struct CountEntry {
  double probability = 0.0;  // expected probability for this outcome
  std::uint64_t counts = 0;  // sampled counts
  double sigma = 0.0;        // sqrt(n) counting error
};

using CountTable = std::map<std::string, CountEntry>;

// Draws independent Poisson counts per outcome with mean budget*probability.
inline CountTable sample_counts(const std::map<std::string, double>& distribution,
                                double budget, Rng& rng) {
  if (budget < 0.0) throw std::invalid_argument("sample_counts: negative budget");
  double total = 0.0;
  for (const auto& [key, p] : distribution) total += p;
  if (std::abs(total - 1.0) > 1e-6)
    throw std::invalid_argument("sample_counts: distribution not normalized");
  CountTable table;
  for (const auto& [key, p] : distribution) {
    CountEntry e;
    e.probability = p;
    e.counts = rng.poisson(budget * p);
    e.sigma = std::sqrt(static_cast<double>(e.counts));
    table[key] = e;
  }
  return table;
}

}  // namespace photonshor
