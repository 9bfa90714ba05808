#pragma once
// Optical element catalog and network executor: waveplates, polarizing beam
// splitters, delays, one-photon-per-mode post-selection and polarization
// resolved measurement, plus the compiled order-finding network.

#include "photonshor/fock.hpp"

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace photonshor {

enum class MeasBasis : int { HV = 0, PM = 1, RL = 2 };

inline char basis_symbol(MeasBasis b, int bit) {
  static constexpr const char* sym[3] = {"HV", "+-", "RL"};
  return sym[static_cast<int>(b)][bit];
}

inline int symbol_bit(char symbol) {
  switch (symbol) {
    case 'H': case '+': case 'R': return 0;
    case 'V': case '-': case 'L': return 1;
    default: throw std::invalid_argument("unknown outcome symbol");
  }
}

// 2x2 rotation mapping the basis kets onto H/V (first listed element -> H).
inline Eigen::Matrix2cd basis_rotation(MeasBasis b) {
  const double s = 1.0 / std::sqrt(2.0);
  Eigen::Matrix2cd u;
  switch (b) {
    case MeasBasis::HV: u = Eigen::Matrix2cd::Identity(); break;
    case MeasBasis::PM:
      u << s, s, s, -s;
      break;
    case MeasBasis::RL:
      u << s, Complex(0, -s), s, Complex(0, s);
      break;
  }
  return u;
}

namespace detail {

inline ModeTransform single_mode(int mode_count, int mode, const Eigen::Matrix2cd& u) {
  if (mode < 1 || mode > mode_count)
    throw std::invalid_argument("element: mode out of range");
  ModeTransform t = ModeTransform::identity(mode_count);
  const int i = pol_index(mode, Pol::H);
  t.matrix.block<2, 2>(i, i) = u;
  t.span = {mode};
  return t;
}

}  // namespace detail

// Half-wave plate at angle theta: H -> cos2t H + sin2t V, V -> sin2t H - cos2t V.
inline ModeTransform hwp(int mode_count, int mode, double theta) {
  Eigen::Matrix2cd u;
  const double c = std::cos(2 * theta), s = std::sin(2 * theta);
  u << c, s, s, -c;
  return detail::single_mode(mode_count, mode, u);
}

// Quarter-wave plate at fast-axis angle theta; diag(1, i) at theta = 0.
inline ModeTransform qwp(int mode_count, int mode, double theta) {
  Eigen::Matrix2cd r, d;
  const double c = std::cos(theta), s = std::sin(theta);
  r << c, -s, s, c;
  d << 1.0, 0.0, 0.0, Complex(0.0, 1.0);
  Eigen::Matrix2cd u = r * d * r.transpose();
  return detail::single_mode(mode_count, mode, u);
}

// Polarization phase diag(1, e^{i phi}) on one mode.
inline ModeTransform pol_phase(int mode_count, int mode, double phi) {
  Eigen::Matrix2cd u;
  u << 1.0, 0.0, 0.0, std::polar(1.0, phi);
  return detail::single_mode(mode_count, mode, u);
}

// Polarizing beam splitter between two modes: transmits H, reflects V with
// unit coefficients (phase compensated), so pbs . pbs = identity.
inline ModeTransform pbs(int mode_count, int mode_a, int mode_b) {
  if (mode_a == mode_b) throw std::invalid_argument("pbs: same-mode input");
  if (mode_a < 1 || mode_a > mode_count || mode_b < 1 || mode_b > mode_count)
    throw std::invalid_argument("pbs: mode out of range");
  ModeTransform t = ModeTransform::identity(mode_count);
  const int va = pol_index(mode_a, Pol::V), vb = pol_index(mode_b, Pol::V);
  t.matrix(va, va) = 0.0;
  t.matrix(vb, vb) = 0.0;
  t.matrix(vb, va) = 1.0;
  t.matrix(va, vb) = 1.0;
  t.span = {std::min(mode_a, mode_b), std::max(mode_a, mode_b)};
  return t;
}

// ---------------------------------------------------------------------------
// Post-selection and measurement.

using OutcomeDistribution = std::map<std::string, double>;

namespace detail {

inline FockState project_one_per_mode(const FockState& s, const std::vector<int>& modes) {
  FockState kept;
  kept.mode_count = s.mode_count;
  for (const auto& [cfg, amp] : s.terms) {
    bool ok = true;
    for (int m : modes)
      if (cfg.count_in_mode(m) != 1) { ok = false; break; }
    if (ok) kept.terms[cfg] = amp;
  }
  return kept;
}

}  // namespace detail

// Projects onto exactly one photon in each listed mode; returns the
// renormalized state and the projection probability.
inline std::pair<FockState, double> postselect(const FockState& s,
                                               const std::vector<int>& modes,
                                               const Coherence& coh = {}) {
  for (int m : modes)
    if (m < 1 || m > s.mode_count)
      throw std::invalid_argument("postselect: mode out of range");
  if (auto n = s.uniform_photon_count(); n && *n < static_cast<int>(modes.size()))
    throw std::invalid_argument("postselect: fewer photons than selected modes");

  const double before = norm_squared(s, coh);
  FockState kept = detail::project_one_per_mode(s, modes);
  const double after = kept.empty() ? 0.0 : norm_squared(kept, coh);
  const double prob = before > 0.0 ? after / before : 0.0;
  if (prob < 1e-18)
    throw std::invalid_argument("postselect: zero-probability projection");
  for (auto& [cfg, amp] : kept.terms) amp /= std::sqrt(after);
  return {std::move(kept), prob};
}

// Exact outcome probabilities for polarization measurements on the given
// modes, one symbol per measured mode in ascending mode order.  Probabilities
// sum incoherently over the orthonormal internal label basis.
inline OutcomeDistribution measure(const FockState& s,
                                   const std::map<int, MeasBasis>& bases,
                                   const Coherence& coh = {}) {
  if (bases.empty()) throw std::invalid_argument("measure: no modes given");
  for (const auto& [cfg, amp] : s.terms)
    for (const auto& [mode, b] : bases)
      if (cfg.count_in_mode(mode) != 1)
        throw std::invalid_argument(
            "measure: mode " + std::to_string(mode) + " is not single-occupancy");

  ModeTransform rot = ModeTransform::identity(s.mode_count);
  for (const auto& [mode, b] : bases) {
    const int i = pol_index(mode, Pol::H);
    rot.matrix.block<2, 2>(i, i) = basis_rotation(b);
  }
  const FockState rotated = apply_transform(s, rot);

  const GramEmbedding emb = GramEmbedding::build(rotated.labels(), coh);
  const InternalState expanded = expand_internal(rotated, emb);

  OutcomeDistribution dist;
  double total = 0.0;
  for (const auto& [cfg, amp] : expanded.terms) {
    std::string key;
    key.reserve(bases.size());
    for (const auto& [mode, b] : bases) {
      for (const InternalSlot& slot : cfg.slots) {
        if (slot.mode == mode) {
          key.push_back(basis_symbol(b, static_cast<int>(slot.pol)));
          break;
        }
      }
    }
    const double p = std::norm(amp);
    dist[key] += p;
    total += p;
  }
  if (total <= 0.0) throw std::invalid_argument("measure: zero-norm state");
  for (auto& [key, p] : dist) p /= total;
  return dist;
}

// ---------------------------------------------------------------------------
// Network plans.

struct Condition {
  int mode = 0;     // previously measured mode
  char symbol = 0;  // apply the step when that mode read this symbol
};

// Element descriptor kept alongside the matrix so plans can be serialized.
struct ElementDesc {
  std::string kind;  // "hwp" | "qwp" | "pbs" | "pol_phase"
  std::map<std::string, double> params;
};

struct TransformStep {
  ModeTransform transform;
  std::optional<Condition> condition;
  std::optional<ElementDesc> desc;
};

struct DelayStep {
  int mode = 0;
  double offset = 0.0;
};

struct PostselectStep {
  std::vector<int> modes;
};

struct MeasureStep {
  std::map<int, MeasBasis> bases;
};

using NetworkStep = std::variant<TransformStep, DelayStep, PostselectStep, MeasureStep>;
using NetworkPlan = std::vector<NetworkStep>;

inline NetworkStep make_hwp_step(int mode_count, int mode, double theta,
                                 std::optional<Condition> cond = std::nullopt) {
  return TransformStep{hwp(mode_count, mode, theta), cond,
                       ElementDesc{"hwp", {{"mode", double(mode)}, {"theta", theta}}}};
}

inline NetworkStep make_qwp_step(int mode_count, int mode, double theta,
                                 std::optional<Condition> cond = std::nullopt) {
  return TransformStep{qwp(mode_count, mode, theta), cond,
                       ElementDesc{"qwp", {{"mode", double(mode)}, {"theta", theta}}}};
}

inline NetworkStep make_pbs_step(int mode_count, int a, int b) {
  return TransformStep{pbs(mode_count, a, b), std::nullopt,
                       ElementDesc{"pbs", {{"mode_a", double(a)}, {"mode_b", double(b)}}}};
}

inline NetworkStep make_pol_phase_step(int mode_count, int mode, double phi,
                                       std::optional<Condition> cond = std::nullopt) {
  return TransformStep{pol_phase(mode_count, mode, phi), cond,
                       ElementDesc{"pol_phase", {{"mode", double(mode)}, {"phi", phi}}}};
}

// Static well-formedness check: measured modes must pass a post-selection
// first or be declared single-occupancy at the input.
inline void validate_plan(const NetworkPlan& plan,
                          const std::set<int>& single_occupancy_inputs = {}) {
  std::set<int> cleared = single_occupancy_inputs;
  std::set<int> measured;
  for (const NetworkStep& step : plan) {
    if (const auto* ps = std::get_if<PostselectStep>(&step)) {
      cleared.insert(ps->modes.begin(), ps->modes.end());
    } else if (const auto* ms = std::get_if<MeasureStep>(&step)) {
      for (const auto& [mode, b] : ms->bases) {
        if (!cleared.count(mode))
          throw std::invalid_argument(
              "plan: mode " + std::to_string(mode) +
              " measured without post-selection or single-occupancy declaration");
        if (measured.count(mode))
          throw std::invalid_argument("plan: mode measured twice");
        measured.insert(mode);
      }
    } else if (const auto* ts = std::get_if<TransformStep>(&step)) {
      if (ts->condition && !measured.count(ts->condition->mode))
        throw std::invalid_argument("plan: condition references unmeasured mode");
    }
  }
}

// ---------------------------------------------------------------------------
// Network execution.  Measurement steps split execution into outcome branches
// (exact probabilities, no sampling); conditioned transforms consult the
// branch record, which realizes measurement feedforward.

struct Ensemble;  // sources.hpp

struct NetworkBranch {
  double weight = 1.0;  // input weight x post-selection x measurement probs
  FockState state;
  std::map<int, char> outcomes;
};

struct NetworkResult {
  OutcomeDistribution distribution;  // conditioned on all post-selections
  double success_probability = 1.0;  // total post-selection weight
  std::vector<NetworkBranch> branches;
};

namespace detail {

inline void run_measure_step(std::vector<NetworkBranch>& branches,
                             const MeasureStep& ms, const Coherence& coh) {
  std::vector<NetworkBranch> next;
  for (NetworkBranch& br : branches) {
    for (const auto& [cfg, amp] : br.state.terms)
      for (const auto& [mode, b] : ms.bases)
        if (cfg.count_in_mode(mode) != 1)
          throw std::invalid_argument(
              "measure: mode " + std::to_string(mode) + " is not single-occupancy");

    ModeTransform rot = ModeTransform::identity(br.state.mode_count);
    for (const auto& [mode, b] : ms.bases) {
      const int i = pol_index(mode, Pol::H);
      rot.matrix.block<2, 2>(i, i) = basis_rotation(b);
    }
    ModeTransform rot_back = rot;
    rot_back.matrix = rot.matrix.adjoint();

    const FockState rotated = apply_transform(br.state, rot);
    const double before = norm_squared(rotated, coh);

    // Enumerate outcome patterns over the measured modes.
    const int nm = static_cast<int>(ms.bases.size());
    for (unsigned pattern = 0; pattern < (1u << nm); ++pattern) {
      FockState proj;
      proj.mode_count = rotated.mode_count;
      for (const auto& [cfg, amp] : rotated.terms) {
        bool match = true;
        int bit_pos = 0;
        for (const auto& [mode, b] : ms.bases) {
          const int want = (pattern >> bit_pos) & 1;
          ++bit_pos;
          bool found = false;
          for (const Slot& slot : cfg.slots)
            if (slot.mode == mode && static_cast<int>(slot.pol) == want) { found = true; break; }
          if (!found) { match = false; break; }
        }
        if (match) proj.terms[cfg] = amp;
      }
      if (proj.empty()) continue;
      const double w = norm_squared(proj, coh) / before;
      if (w < 1e-15) continue;

      NetworkBranch child;
      child.weight = br.weight * w;
      for (auto& [cfg, amp] : proj.terms) amp /= std::sqrt(w * before);
      child.state = apply_transform(proj, rot_back);
      child.outcomes = br.outcomes;
      int bit_pos = 0;
      for (const auto& [mode, b] : ms.bases) {
        child.outcomes[mode] = basis_symbol(b, (pattern >> bit_pos) & 1);
        ++bit_pos;
      }
      next.push_back(std::move(child));
    }
  }
  branches = std::move(next);
}

}  // namespace detail

inline NetworkResult run_network(const std::vector<std::pair<double, FockState>>& input,
                                 const NetworkPlan& plan, const Coherence& coh = {}) {
  std::vector<NetworkBranch> branches;
  for (const auto& [w, st] : input) {
    if (w <= 0.0) throw std::invalid_argument("run_network: nonpositive weight");
    branches.push_back(NetworkBranch{w, st, {}});
  }
  if (branches.empty()) throw std::invalid_argument("run_network: empty input");

  for (const NetworkStep& step : plan) {
    if (const auto* ts = std::get_if<TransformStep>(&step)) {
      for (NetworkBranch& br : branches) {
        if (ts->condition) {
          auto it = br.outcomes.find(ts->condition->mode);
          if (it == br.outcomes.end())
            throw std::invalid_argument("run_network: condition references unmeasured mode");
          if (it->second != ts->condition->symbol) continue;
        }
        br.state = apply_transform(br.state, ts->transform);
      }
    } else if (const auto* ds = std::get_if<DelayStep>(&step)) {
      for (NetworkBranch& br : branches) {
        FockState shifted;
        shifted.mode_count = br.state.mode_count;
        for (const auto& [cfg, amp] : br.state.terms) {
          FockConfig c = cfg;
          for (Slot& s : c.slots)
            if (s.mode == ds->mode) s.label += ds->offset;
          c.canonicalize();
          shifted.terms[c] += amp;
        }
        br.state = std::move(shifted);
      }
    } else if (const auto* ps = std::get_if<PostselectStep>(&step)) {
      std::vector<NetworkBranch> kept;
      for (NetworkBranch& br : branches) {
        const double before = norm_squared(br.state, coh);
        FockState proj = detail::project_one_per_mode(br.state, ps->modes);
        const double after = proj.empty() ? 0.0 : norm_squared(proj, coh);
        const double prob = before > 0.0 ? after / before : 0.0;
        if (prob < 1e-15) continue;
        for (auto& [cfg, amp] : proj.terms) amp /= std::sqrt(after);
        kept.push_back(NetworkBranch{br.weight * prob, std::move(proj), br.outcomes});
      }
      if (kept.empty())
        throw std::invalid_argument("run_network: zero-probability post-selection");
      branches = std::move(kept);
    } else if (const auto* ms = std::get_if<MeasureStep>(&step)) {
      detail::run_measure_step(branches, *ms, coh);
    }
  }

  NetworkResult result;
  double total = 0.0;
  for (const NetworkBranch& br : branches) total += br.weight;
  result.success_probability = total;
  for (const NetworkBranch& br : branches) {
    if (br.outcomes.empty()) continue;
    std::string key;
    for (const auto& [mode, sym] : br.outcomes) key.push_back(sym);
    result.distribution[key] += br.weight / total;
  }
  result.branches = std::move(branches);
  return result;
}

inline NetworkResult run_network(const FockState& input, const NetworkPlan& plan,
                                 const Coherence& coh = {}) {
  return run_network(std::vector<std::pair<double, FockState>>{{1.0, input}}, plan, coh);
}

// ---------------------------------------------------------------------------
// Canonical networks for the four-photon experiment.  Photon 1 carries the
// high first-register qubit, photon 2 the low one (the only nontrivial
// control), photons 3 and 4 the two nontrivial second-register bits.

inline constexpr double kHalfWavePlateHadamard = M_PI / 8;  // 22.5 degrees

// Preparation plus the two post-selected beam-splitter gates: all four
// photons rotated to |+>, modes 2-3 and 3-4 combined on PBSs, then exactly
// one photon demanded in every output.  Registers 2,3,4 leave in a GHZ state
// with photon 1 still separable.
inline NetworkPlan compiled_mef_plan() {
  const int M = 4;
  NetworkPlan plan;
  for (int m = 1; m <= 4; ++m)
    plan.push_back(make_hwp_step(M, m, kHalfWavePlateHadamard));
  plan.push_back(make_pbs_step(M, 2, 3));
  plan.push_back(make_pbs_step(M, 3, 4));
  plan.push_back(PostselectStep{{1, 2, 3, 4}});
  return plan;
}

// Measurement-based Fourier readout: photon 1 is rotated and measured first
// (output bit y0); when it reads |V> a quarter-wave plate applies the
// conditional pi/2 phase to photon 2, which is then rotated and measured
// (bit y1).  The second-register photons are read in H/V.
inline NetworkPlan compiled_readout_plan() {
  const int M = 4;
  NetworkPlan plan;
  plan.push_back(make_hwp_step(M, 1, kHalfWavePlateHadamard));
  plan.push_back(MeasureStep{{{1, MeasBasis::HV}}});
  plan.push_back(make_qwp_step(M, 2, 0.0, Condition{1, 'V'}));
  plan.push_back(make_hwp_step(M, 2, kHalfWavePlateHadamard));
  plan.push_back(MeasureStep{{{2, MeasBasis::HV}}});
  plan.push_back(MeasureStep{{{3, MeasBasis::HV}, {4, MeasBasis::HV}}});
  return plan;
}

// Full compiled network: order-finding for N = 15, a = 11 on four photons.
inline NetworkPlan build_compiled_network() {
  NetworkPlan plan = compiled_mef_plan();
  NetworkPlan readout = compiled_readout_plan();
  plan.insert(plan.end(), readout.begin(), readout.end());
  return plan;
}

// Entanglement-preparation network measured in per-mode bases on photons
// 2,3,4 (photon 1 is post-selected as trigger but not read out).
inline NetworkPlan ghz_measurement_plan(const std::array<MeasBasis, 3>& bases) {
  const int M = 4;
  NetworkPlan plan;
  for (int m = 2; m <= 4; ++m)
    plan.push_back(make_hwp_step(M, m, kHalfWavePlateHadamard));
  plan.push_back(make_pbs_step(M, 2, 3));
  plan.push_back(make_pbs_step(M, 3, 4));
  plan.push_back(PostselectStep{{1, 2, 3, 4}});
  plan.push_back(MeasureStep{{{2, bases[0]}, {3, bases[1]}, {4, bases[2]}}});
  return plan;
}

}  // namespace photonshor
