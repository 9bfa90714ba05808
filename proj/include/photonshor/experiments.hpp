#pragma once
// Experiment pipelines shared by the command-line driver and the acceptance
// suite: noise-parameterized input preparation, detector-coincidence rates,
// setting tables, the compiled order-finding readout and visibility
// calibration.
//
// Pure four-photon runs use the strict one-photon-per-mode network executor.
// Runs with higher-order pair emission model the real detection instead:
// a polarizer per arm followed by a threshold (non-number-resolving)
// detector, an event being all four arms firing.  Exactly-one-per-mode
// projection would discard every higher-order term outright (photon number
// is conserved and there are only four modes), so this coincidence model is
// what lets pair emission affect the recorded statistics, as it does in the
// laboratory.

#include "photonshor/elements.hpp"
#include "photonshor/metrics.hpp"
#include "photonshor/shor.hpp"
#include "photonshor/sources.hpp"

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace photonshor {

// Source and channel imperfections for one simulated run.
struct NoiseParams {
  double pair_probability = 0.0;  // higher-order emission strength p
  int truncation = 2;
  double sigma_c = 1.0;           // wavepacket coherence width
  double crystal_offset = 0.0;    // residual time offset of the second crystal
  double delay2 = 0.0;            // translation-stage delay on mode 2
  double delay4 = 0.0;            // translation-stage delay on mode 4
  double dephasing = 0.0;         // phase-damping strength on one register
  int dephasing_mode = 2;

  Coherence coherence() const { return Coherence{sigma_c}; }

  bool pure_four_photon() const { return pair_probability == 0.0; }

  // Residual cross-crystal overlap at nominal zero delay.
  double residual_overlap() const {
    return Coherence{sigma_c}.overlap(0.0, crystal_offset);
  }

  static double offset_for_overlap(double xi, double sigma_c) {
    if (xi <= 0.0 || xi > 1.0)
      throw std::invalid_argument("offset_for_overlap: xi out of (0, 1]");
    return 2.0 * sigma_c * std::sqrt(-std::log(xi));
  }
};

// Source state with delays applied; spans photon-number sectors when
// pair_probability > 0, otherwise the single fourfold sector.
inline FockState source_state(const NoiseParams& np) {
  FockState s;
  if (np.pure_four_photon()) {
    s = make_state({{1, Pol::H, 0.0},
                    {2, Pol::H, 0.0},
                    {3, Pol::H, np.crystal_offset},
                    {4, Pol::H, np.crystal_offset}},
                   4);
  } else {
    SpdcConfig cfg;
    cfg.pair_probability = np.pair_probability;
    cfg.truncation = np.truncation;
    cfg.label_offsets = {0.0, np.crystal_offset};
    s = spdc_state(cfg);
  }
  if (np.delay2 != 0.0) s = delay_mode(s, 2, np.delay2);
  if (np.delay4 != 0.0) s = delay_mode(s, 4, np.delay4);
  return s;
}

// ---------------------------------------------------------------------------
// Threshold-detector coincidences.

// One detection arm: an optional polarizer (basis + passing bit) in front of
// a non-number-resolving detector.
struct Arm {
  int mode = 0;
  std::optional<std::pair<MeasBasis, int>> polarizer;
};

// Probability that every arm fires: each polarized arm holds at least one
// photon passing its polarizer, each open arm at least one photon.  Exact
// incoherent sum over the orthonormal internal label basis.
inline double coincidence_rate(const FockState& s, const std::vector<Arm>& arms,
                               const Coherence& coh) {
  int min_photons = static_cast<int>(arms.size());
  ModeTransform rot = ModeTransform::identity(s.mode_count);
  for (const Arm& arm : arms) {
    if (arm.mode < 1 || arm.mode > s.mode_count)
      throw std::invalid_argument("coincidence_rate: arm mode out of range");
    if (arm.polarizer) {
      const int i = pol_index(arm.mode, Pol::H);
      rot.matrix.block<2, 2>(i, i) = basis_rotation(arm.polarizer->first);
    }
  }

  // Sectors with fewer photons than arms can never fire all detectors.
  FockState relevant;
  relevant.mode_count = s.mode_count;
  for (const auto& [cfg, amp] : s.terms)
    if (cfg.photon_count() >= min_photons) relevant.terms[cfg] = amp;
  if (relevant.empty()) return 0.0;

  const FockState rotated = apply_transform(relevant, rot);
  const GramEmbedding emb = GramEmbedding::build(rotated.labels(), coh);
  const InternalState expanded = expand_internal(rotated, emb);

  double rate = 0.0;
  for (const auto& [cfg, amp] : expanded.terms) {
    bool fires = true;
    for (const Arm& arm : arms) {
      bool hit = false;
      for (const InternalSlot& slot : cfg.slots) {
        if (slot.mode != arm.mode) continue;
        if (!arm.polarizer ||
            static_cast<int>(slot.pol) == arm.polarizer->second) {
          hit = true;
          break;
        }
      }
      if (!hit) { fires = false; break; }
    }
    if (fires) rate += std::norm(amp);
  }
  return rate;
}

// Weighted coincidence rate over a mixture, with optional per-member extra
// transforms (used for conditioned readout elements).
struct PreparedEnsemble {
  std::vector<std::pair<double, FockState>> members;
  Coherence coh;
};

inline double coincidence_rate(const PreparedEnsemble& pe, const std::vector<Arm>& arms) {
  double rate = 0.0;
  for (const auto& [w, st] : pe.members) rate += w * coincidence_rate(st, arms, pe.coh);
  return rate;
}

// ---------------------------------------------------------------------------
// Stage preparation.

// Runs the preparation plates and the two beam-splitter gates (no projection,
// no readout).  prep_first_qubit controls whether photon 1 is rotated to |+>
// (needed for the order-finding run, not for the entanglement measurements).
inline PreparedEnsemble prepare_interferometer(const NoiseParams& np,
                                               bool prep_first_qubit) {
  const int M = 4;
  FockState s = source_state(np);
  std::vector<ModeTransform> stages;
  if (prep_first_qubit) stages.push_back(hwp(M, 1, kHalfWavePlateHadamard));
  for (int m = 2; m <= 4; ++m) stages.push_back(hwp(M, m, kHalfWavePlateHadamard));
  stages.push_back(pbs(M, 2, 3));
  stages.push_back(pbs(M, 3, 4));
  for (const ModeTransform& t : stages) s = apply_transform(s, t);

  Ensemble mix = dephase(as_ensemble(std::move(s)), np.dephasing_mode, np.dephasing);
  PreparedEnsemble pe;
  pe.coh = np.coherence();
  pe.members = std::move(mix.members);
  return pe;
}

// ---------------------------------------------------------------------------
// Entanglement-setting tables.

inline std::array<MeasBasis, 3> setting_bases(const std::string& setting) {
  auto of = [](char c) {
    switch (c) {
      case 'Z': return MeasBasis::HV;
      case 'X': return MeasBasis::PM;
      case 'Y': return MeasBasis::RL;
      default: throw std::invalid_argument("unknown setting axis");
    }
  };
  if (setting.size() != 3) throw std::invalid_argument("setting must have 3 axes");
  return {of(setting[0]), of(setting[1]), of(setting[2])};
}

// Normalized outcome probabilities for one setting on photons 2,3,4, with the
// trigger arm 1 required to fire.  Also reports the raw fourfold rate.
struct SettingTable {
  std::map<std::string, double> probabilities;
  double rate = 0.0;
};

inline SettingTable setting_table(const PreparedEnsemble& pe, const std::string& setting) {
  const std::array<MeasBasis, 3> bases = setting_bases(setting);
  SettingTable out;
  for (unsigned bits = 0; bits < 8; ++bits) {
    std::string key;
    std::vector<Arm> arms{{1, std::nullopt}};
    for (int i = 0; i < 3; ++i) {
      const int bit = (bits >> i) & 1;
      key.push_back(basis_symbol(bases[i], bit));
      arms.push_back(Arm{2 + i, std::make_pair(bases[i], bit)});
    }
    const double r = coincidence_rate(pe, arms);
    out.probabilities[key] = r;
    out.rate += r;
  }
  if (out.rate <= 0.0)
    throw std::invalid_argument("setting_table: no fourfold events");
  for (auto& [key, p] : out.probabilities) p /= out.rate;
  return out;
}

inline std::vector<SettingCounts> ghz_setting_probabilities(const NoiseParams& np) {
  const PreparedEnsemble pe = prepare_interferometer(np, false);
  std::vector<SettingCounts> tables;
  for (const std::string& name : {"ZZZ", "XXX", "XYY", "YXY", "YYX"}) {
    SettingCounts sc;
    sc.setting = name;
    sc.counts = setting_table(pe, name).probabilities;
    tables.push_back(std::move(sc));
  }
  return tables;
}

// ---------------------------------------------------------------------------
// Three-photon bunching scan.

// Normalized |+/-> outcome probabilities on photons 2,3,4 at one delay of
// mode 2 (relative to the configured static delay).
inline SettingTable hom_point(const NoiseParams& np, double delay) {
  NoiseParams local = np;
  local.delay2 = np.delay2 + delay;
  local.dephasing = 0.0;  // the scan precedes the register channels
  const PreparedEnsemble pe = prepare_interferometer(local, false);
  return setting_table(pe, "XXX");
}

inline HomScanPoint hom_scan_point(const NoiseParams& np, double delay) {
  const SettingTable t = hom_point(np, delay);
  HomScanPoint pt;
  pt.delay = delay;
  pt.p_ppp = t.probabilities.at("+++");
  pt.p_ppm = t.probabilities.at("++-");
  return pt;
}

inline double raw_visibility(const NoiseParams& np) {
  const HomScanPoint pt = hom_scan_point(np, 0.0);
  return (pt.p_ppp - pt.p_ppm) / (pt.p_ppp + pt.p_ppm);
}

// ---------------------------------------------------------------------------
// Compiled order-finding readout.

// Exact distribution over the two output bits, keyed "y1y0" ("00", "01",
// "10", "11").  Feedforward is realized the way the experiment does it: the
// four analyzer configurations are measured separately, the quarter-wave
// plate being inserted in arm 2 for the configurations where photon 1 reads
// |1>; rates are then normalized over the four configurations.
struct CompiledResult {
  std::map<std::string, double> distribution;
  double rate = 0.0;
};

inline CompiledResult compiled_distribution(const NoiseParams& np) {
  const int M = 4;
  const PreparedEnsemble pe = prepare_interferometer(np, true);
  const ModeTransform h1 = hwp(M, 1, kHalfWavePlateHadamard);
  const ModeTransform h2 = hwp(M, 2, kHalfWavePlateHadamard);
  const ModeTransform s2 = qwp(M, 2, 0.0);

  CompiledResult out;
  for (int y0 = 0; y0 < 2; ++y0) {
    for (int y1 = 0; y1 < 2; ++y1) {
      PreparedEnsemble cfg;
      cfg.coh = pe.coh;
      for (const auto& [w, st] : pe.members) {
        FockState r = apply_transform(st, h1);
        if (y0 == 1) r = apply_transform(r, s2);
        r = apply_transform(r, h2);
        cfg.members.push_back({w, std::move(r)});
      }
      std::vector<Arm> arms{{1, std::make_pair(MeasBasis::HV, y0)},
                            {2, std::make_pair(MeasBasis::HV, y1)},
                            {3, std::nullopt},
                            {4, std::nullopt}};
      const double r = coincidence_rate(cfg, arms);
      const std::string key = std::string(1, '0' + y1) + std::string(1, '0' + y0);
      out.distribution[key] = r;
      out.rate += r;
    }
  }
  if (out.rate <= 0.0)
    throw std::invalid_argument("compiled_distribution: no fourfold events");
  for (auto& [key, p] : out.distribution) p /= out.rate;
  return out;
}

// Strict-projection reference of the same readout through the network
// executor (pure four-photon inputs only).
inline std::map<std::string, double> compiled_distribution_strict(const NoiseParams& np) {
  Ensemble in = dephase(as_ensemble(source_state(np)), np.dephasing_mode, 0.0);
  // Dephasing acts on the entangled registers, i.e. after the gate stage;
  // run the preparation first, then the channel, then the readout.
  NetworkResult mef = run_network(in.members, compiled_mef_plan(), np.coherence());
  std::vector<std::pair<double, FockState>> post;
  double weight_sum = 0.0;
  for (const NetworkBranch& br : mef.branches) weight_sum += br.weight;
  for (const NetworkBranch& br : mef.branches)
    post.push_back({br.weight / weight_sum, br.state});
  Ensemble staged;
  staged.members = std::move(post);
  staged = dephase(staged, np.dephasing_mode, np.dephasing);

  NetworkResult res = run_network(staged.members, compiled_readout_plan(), np.coherence());
  // Outcome keys are mode-ordered symbols for modes 1,2,3,4; y0 is photon 1,
  // y1 photon 2, photons 3,4 are traced out.
  std::map<std::string, double> dist{{"00", 0.0}, {"01", 0.0}, {"10", 0.0}, {"11", 0.0}};
  for (const auto& [key, p] : res.distribution) {
    const int y0 = symbol_bit(key[0]);
    const int y1 = symbol_bit(key[1]);
    dist[std::string(1, '0' + y1) + std::string(1, '0' + y0)] += p;
  }
  return dist;
}

// ---------------------------------------------------------------------------
// Calibration: adjust pair emission until the raw zero-delay visibility hits
// the target, holding the residual overlap fixed.

inline double calibrate_pair_probability(NoiseParams base, double target_visibility,
                                         double tol = 1e-4) {
  double lo = 0.0, hi = 0.19;
  base.pair_probability = lo;
  const double v0 = raw_visibility(base);
  if (v0 < target_visibility)
    throw std::invalid_argument("calibrate: residual overlap already below target");
  base.pair_probability = hi;
  if (raw_visibility(base) > target_visibility)
    throw std::invalid_argument("calibrate: target below reachable range");
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    base.pair_probability = mid;
    const double v = raw_visibility(base);
    if (std::abs(v - target_visibility) < tol) return mid;
    if (v > target_visibility) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Qubit-side reference helpers.

// Fock encoding of an n-qubit register state: qubit i on mode i+1, bit 0 as
// |H>, all photons sharing the reference time label.
inline FockState fock_from_qubits(const std::vector<Complex>& amplitudes, int qubits) {
  if (amplitudes.size() != (std::size_t(1) << qubits))
    throw std::invalid_argument("fock_from_qubits: dimension mismatch");
  FockState out;
  out.mode_count = qubits;
  for (std::size_t idx = 0; idx < amplitudes.size(); ++idx) {
    if (std::abs(amplitudes[idx]) < kAmplitudeEps) continue;
    FockConfig cfg;
    for (int q = 0; q < qubits; ++q) {
      const int bit = (idx >> (qubits - 1 - q)) & 1;  // qubit 0 is the MSB
      cfg.slots.push_back(Slot{q + 1, bit ? Pol::V : Pol::H, 0.0});
    }
    cfg.canonicalize();
    out.terms[cfg] = amplitudes[idx];
  }
  return out;
}

// Exact probabilities of one Pauli setting on a 3-qubit state or mixture.
inline std::map<std::string, double> qubit_setting_probabilities(
    const std::vector<std::pair<double, std::vector<Complex>>>& mixture,
    const std::string& setting) {
  const std::array<MeasBasis, 3> bases = setting_bases(setting);
  std::array<Eigen::Matrix2cd, 3> rot;
  for (int i = 0; i < 3; ++i) rot[i] = basis_rotation(bases[i]);
  std::map<std::string, double> probs;
  for (unsigned o = 0; o < 8; ++o) {
    std::string key;
    for (int i = 0; i < 3; ++i)
      key.push_back(basis_symbol(bases[i], (o >> (2 - i)) & 1));
    probs[key] = 0.0;
  }
  for (const auto& [w, amp] : mixture) {
    if (amp.size() != 8)
      throw std::invalid_argument("qubit_setting_probabilities: need 3 qubits");
    for (unsigned o = 0; o < 8; ++o) {
      // <o_rotated| psi> where |o> factors over qubits.
      Complex overlap(0, 0);
      for (unsigned b = 0; b < 8; ++b) {
        Complex c(1, 0);
        for (int q = 0; q < 3; ++q) {
          const int ob = (o >> (2 - q)) & 1;
          const int bb = (b >> (2 - q)) & 1;
          c *= rot[q](ob, bb);
        }
        overlap += c * amp[b];
      }
      std::string key;
      for (int i = 0; i < 3; ++i)
        key.push_back(basis_symbol(bases[i], (o >> (2 - i)) & 1));
      probs[key] += w * std::norm(overlap);
    }
  }
  return probs;
}

inline std::vector<SettingCounts> qubit_ghz_settings(
    const std::vector<std::pair<double, std::vector<Complex>>>& mixture) {
  std::vector<SettingCounts> tables;
  for (const std::string& name : {"ZZZ", "XXX", "XYY", "YXY", "YYX"}) {
    SettingCounts sc;
    sc.setting = name;
    sc.counts = qubit_setting_probabilities(mixture, name);
    tables.push_back(std::move(sc));
  }
  return tables;
}

}  // namespace photonshor
