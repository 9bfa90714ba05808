#pragma once
// Exact few-photon bosonic states over labeled optical modes.
//
// A photon occupies a slot (spatial mode, polarization, wavepacket time
// offset).  States are sparse maps from occupation configurations to complex
// amplitudes, stored in the normalized-ket convention: a configuration with
// n identical slots stands for (a^dag)^n / sqrt(n!) |0>.  Slots with equal
// time offsets are identical bosons; distinct offsets overlap through a
// Gaussian coherence function, entering inner products via a Gram matrix of
// pairwise overlaps (permanent-type matching sums) or, equivalently, via an
// embedding of each offset into an orthonormal internal basis.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace photonshor {

using Complex = std::complex<double>;

inline constexpr double kAmplitudeEps = 1e-14;  // drop amplitudes below this
inline constexpr double kUnitaryTol = 1e-12;
inline constexpr double kZeroNormEps = 1e-14;
inline constexpr int kPhotonCap = 8;

enum class Pol : int { H = 0, V = 1 };

// One photon: spatial mode (1-based), polarization, time offset.
// Offsets compare exactly; equal offsets mean identical particles.
struct Slot {
  int mode = 1;
  Pol pol = Pol::H;
  double label = 0.0;

  friend bool operator==(const Slot&, const Slot&) = default;
  friend bool operator<(const Slot& a, const Slot& b) {
    if (a.mode != b.mode) return a.mode < b.mode;
    if (a.pol != b.pol) return static_cast<int>(a.pol) < static_cast<int>(b.pol);
    return a.label < b.label;
  }
};

namespace detail {

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace detail

// Canonically sorted multiset of occupied slots.
struct FockConfig {
  std::vector<Slot> slots;

  int photon_count() const { return static_cast<int>(slots.size()); }

  int count_in_mode(int mode) const {
    int n = 0;
    for (const Slot& s : slots) n += (s.mode == mode);
    return n;
  }

  // Product of n! over groups of identical slots.
  double occupation_factorial() const {
    double f = 1.0;
    std::size_t i = 0;
    while (i < slots.size()) {
      std::size_t j = i + 1;
      while (j < slots.size() && slots[j] == slots[i]) ++j;
      f *= detail::factorial(static_cast<int>(j - i));
      i = j;
    }
    return f;
  }

  void canonicalize() { std::sort(slots.begin(), slots.end()); }

  friend bool operator==(const FockConfig&, const FockConfig&) = default;
  friend bool operator<(const FockConfig& a, const FockConfig& b) {
    return a.slots < b.slots;
  }
};

// Sparse state: configuration -> amplitude (normalized-ket convention).
// States built through make_state/superpose hold one photon-number sector;
// source models may populate several sectors (sectors are orthogonal, so all
// inner products and projections remain well defined).
struct FockState {
  int mode_count = 0;
  std::map<FockConfig, Complex> terms;

  bool empty() const { return terms.empty(); }

  std::optional<int> uniform_photon_count() const {
    std::optional<int> n;
    for (const auto& [cfg, amp] : terms) {
      if (!n) {
        n = cfg.photon_count();
      } else if (*n != cfg.photon_count()) {
        return std::nullopt;
      }
    }
    return n;
  }

  void prune(double eps = kAmplitudeEps) {
    for (auto it = terms.begin(); it != terms.end();) {
      if (std::abs(it->second) < eps) {
        it = terms.erase(it);
      } else {
        ++it;
      }
    }
  }

  // Sorted distinct time offsets present in the state.
  std::vector<double> labels() const {
    std::vector<double> out;
    for (const auto& [cfg, amp] : terms)
      for (const Slot& s : cfg.slots) out.push_back(s.label);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

// Gaussian wavepacket overlap law between two time offsets.
struct Coherence {
  double sigma_c = 1.0;

  double overlap(double t1, double t2) const {
    const double d = t1 - t2;
    return std::exp(-d * d / (4.0 * sigma_c * sigma_c));
  }
};

// Gram matrix of pairwise label overlaps together with a factor E such that
// gram = E^T E; column j of E is label j expressed in an orthonormal internal
// basis.  One embedding serves a whole simulation, so measurement code can
// treat expanded configurations as orthonormal.
struct GramEmbedding {
  std::vector<double> labels;  // sorted, distinct
  Eigen::MatrixXd gram;
  Eigen::MatrixXd embedding;

  static GramEmbedding build(std::vector<double> labels, const Coherence& coh) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    const int n = static_cast<int>(labels.size());
    GramEmbedding g;
    g.labels = std::move(labels);
    g.gram.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        g.gram(i, j) = coh.overlap(g.labels[i], g.labels[j]);

    Eigen::LLT<Eigen::MatrixXd> llt(g.gram);
    if (llt.info() == Eigen::Success) {
      g.embedding = Eigen::MatrixXd(llt.matrixL()).transpose();
    } else {
      // Numerically semidefinite Gram (near-coincident labels): factor
      // through the eigendecomposition with clamped eigenvalues.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.gram);
      Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      g.embedding = ev.asDiagonal() * es.eigenvectors().transpose();
    }
    return g;
  }

  int index_of(double label) const {
    auto it = std::lower_bound(labels.begin(), labels.end(), label);
    if (it == labels.end() || *it != label)
      throw std::invalid_argument("GramEmbedding: unknown label");
    return static_cast<int>(it - labels.begin());
  }
};

namespace detail {

// Permanent by Ryser's formula; fine for the <=8 photons handled here.
inline double permanent(const std::vector<double>& m, int k) {
  if (k == 0) return 1.0;
  if (k == 1) return m[0];
  double sum = 0.0;
  const unsigned full = 1u << k;
  for (unsigned mask = 1; mask < full; ++mask) {
    double prod = 1.0;
    for (int i = 0; i < k; ++i) {
      double row = 0.0;
      for (int j = 0; j < k; ++j)
        if (mask & (1u << j)) row += m[i * k + j];
      prod *= row;
    }
    const int parity = (k - __builtin_popcount(mask)) & 1;
    sum += parity ? -prod : prod;
  }
  return sum;
}

// <bra|ket> between two configurations in the normalized-ket convention.
// Label overlaps vanish across different (mode, pol), so the matching
// matrix is block diagonal per (mode, pol) group and the permanent
// factorizes over groups.
inline double config_overlap(const FockConfig& bra, const FockConfig& ket,
                             const Coherence& coh) {
  if (bra.slots.size() != ket.slots.size()) return 0.0;
  const auto& bs = bra.slots;
  const auto& ks = ket.slots;
  double perm = 1.0;
  std::size_t i = 0, j = 0;
  while (i < bs.size() && j < ks.size()) {
    if (bs[i].mode != ks[j].mode || bs[i].pol != ks[j].pol) return 0.0;
    std::size_t i2 = i, j2 = j;
    while (i2 < bs.size() && bs[i2].mode == bs[i].mode && bs[i2].pol == bs[i].pol) ++i2;
    while (j2 < ks.size() && ks[j2].mode == ks[j].mode && ks[j2].pol == ks[j].pol) ++j2;
    const int nb = static_cast<int>(i2 - i);
    const int nk = static_cast<int>(j2 - j);
    if (nb != nk) return 0.0;
    if (nb == 1) {
      perm *= coh.overlap(bs[i].label, ks[j].label);
    } else {
      std::vector<double> m(static_cast<std::size_t>(nb) * nb);
      for (int r = 0; r < nb; ++r)
        for (int c = 0; c < nb; ++c)
          m[r * nb + c] = coh.overlap(bs[i + r].label, ks[j + c].label);
      perm *= permanent(m, nb);
    }
    i = i2;
    j = j2;
  }
  return perm / std::sqrt(bra.occupation_factorial() * ket.occupation_factorial());
}

// Key used to bucket configurations whose mutual overlap can be nonzero.
inline std::vector<std::pair<int, int>> mode_pol_signature(const FockConfig& cfg) {
  std::vector<std::pair<int, int>> sig;
  for (const Slot& s : cfg.slots) sig.emplace_back(s.mode, static_cast<int>(s.pol));
  return sig;
}

}  // namespace detail

// Single-configuration state with amplitude 1 (norm 1 whenever the slots are
// pairwise identical or live in distinct modes).
inline FockState make_state(const std::vector<Slot>& photons, int mode_count = 0,
                            int photon_cap = kPhotonCap) {
  if (static_cast<int>(photons.size()) > photon_cap)
    throw std::invalid_argument("make_state: photon cap exceeded");
  int max_mode = 0;
  for (const Slot& s : photons) max_mode = std::max(max_mode, s.mode);
  if (mode_count == 0) mode_count = max_mode;
  for (const Slot& s : photons) {
    if (s.mode < 1 || s.mode > mode_count)
      throw std::invalid_argument("make_state: unknown mode " + std::to_string(s.mode));
    if (!std::isfinite(s.label))
      throw std::invalid_argument("make_state: non-finite label");
  }
  FockConfig cfg{photons};
  cfg.canonicalize();
  FockState out;
  out.mode_count = mode_count;
  out.terms[cfg] = Complex(1.0, 0.0);
  return out;
}

// Linear combination.  Not normalized; cancellations may leave an empty
// (zero-norm) state, which normalize() rejects.
inline FockState superpose(const std::vector<std::pair<Complex, FockState>>& parts) {
  FockState out;
  std::optional<int> count;
  for (const auto& [coeff, st] : parts) {
    out.mode_count = std::max(out.mode_count, st.mode_count);
    auto n = st.uniform_photon_count();
    if (!st.empty() && !n)
      throw std::invalid_argument("superpose: component mixes photon counts");
    if (n && std::abs(coeff) > 0.0) {
      if (count && *count != *n)
        throw std::invalid_argument("superpose: mixed photon counts");
      if (!count) count = n;
    }
    for (const auto& [cfg, amp] : st.terms) out.terms[cfg] += coeff * amp;
  }
  out.prune();
  return out;
}

// Bosonic inner product <a|b> with label overlaps entering through the Gram
// matrix.  Photon-number sectors are orthogonal; a mismatch between two
// single-sector states is reported as an error.
inline Complex inner_product(const FockState& a, const FockState& b,
                             const Coherence& coh = {}) {
  if (a.mode_count != b.mode_count)
    throw std::invalid_argument("inner_product: mode space mismatch");
  const auto na = a.uniform_photon_count();
  const auto nb = b.uniform_photon_count();
  if (na && nb && *na != *nb)
    throw std::invalid_argument("inner_product: photon-count mismatch");

  std::map<std::vector<std::pair<int, int>>, std::vector<const std::pair<const FockConfig, Complex>*>>
      buckets;
  for (const auto& term : b.terms)
    buckets[detail::mode_pol_signature(term.first)].push_back(&term);

  Complex total(0.0, 0.0);
  for (const auto& [cfg_a, amp_a] : a.terms) {
    auto it = buckets.find(detail::mode_pol_signature(cfg_a));
    if (it == buckets.end()) continue;
    for (const auto* term_b : it->second) {
      const double ov = detail::config_overlap(cfg_a, term_b->first, coh);
      if (ov != 0.0) total += std::conj(amp_a) * term_b->second * ov;
    }
  }
  return total;
}

inline double norm_squared(const FockState& s, const Coherence& coh = {}) {
  return std::real(inner_product(s, s, coh));
}

// Returns (unit-norm state, original norm); zero-norm input is an error.
inline std::pair<FockState, double> normalize(const FockState& s,
                                              const Coherence& coh = {}) {
  const double n2 = norm_squared(s, coh);
  const double n = std::sqrt(std::max(n2, 0.0));
  if (n < kZeroNormEps) throw std::invalid_argument("normalize: zero-norm state");
  FockState out = s;
  for (auto& [cfg, amp] : out.terms) amp /= n;
  return {std::move(out), n};
}

// ---------------------------------------------------------------------------
// Unitary transforms on the (mode, polarization) creation-operator space.

inline int pol_index(int mode, Pol p) { return 2 * (mode - 1) + static_cast<int>(p); }

struct ModeTransform {
  int mode_count = 0;
  Eigen::MatrixXcd matrix;  // dimension 2*mode_count, basis index pol_index()
  std::vector<int> span;    // modes acted on nontrivially (documentation aid)

  static ModeTransform identity(int mode_count) {
    ModeTransform t;
    t.mode_count = mode_count;
    t.matrix = Eigen::MatrixXcd::Identity(2 * mode_count, 2 * mode_count);
    return t;
  }

  bool is_unitary(double tol = kUnitaryTol) const {
    const Eigen::MatrixXcd d =
        matrix.adjoint() * matrix -
        Eigen::MatrixXcd::Identity(matrix.rows(), matrix.cols());
    return d.cwiseAbs().maxCoeff() < tol;
  }
};

// compose(second, first): apply `first`, then `second`.
inline ModeTransform compose(const ModeTransform& second, const ModeTransform& first) {
  if (second.mode_count != first.mode_count)
    throw std::invalid_argument("compose: mode count mismatch");
  ModeTransform t;
  t.mode_count = first.mode_count;
  t.matrix = second.matrix * first.matrix;
  t.span = first.span;
  for (int m : second.span)
    if (std::find(t.span.begin(), t.span.end(), m) == t.span.end()) t.span.push_back(m);
  std::sort(t.span.begin(), t.span.end());
  return t;
}

// Substitutes every creation operator by its image under t and recollects
// configurations.  Labels ride along untouched, so the Gram inner product
// (hence the norm) is preserved exactly.
inline FockState apply_transform(const FockState& s, const ModeTransform& t) {
  if (t.mode_count != s.mode_count)
    throw std::invalid_argument("apply_transform: mode count mismatch");
  if (!t.is_unitary())
    throw std::invalid_argument("apply_transform: non-unitary transform");

  const int dim = 2 * s.mode_count;
  std::map<FockConfig, Complex> mono_acc;
  std::vector<Slot> scratch;

  for (const auto& [cfg, amp] : s.terms) {
    const Complex mono = amp / std::sqrt(cfg.occupation_factorial());
    const int k = cfg.photon_count();
    // Per-photon images (nonzero column entries of t for that slot).
    std::vector<std::vector<std::pair<Slot, Complex>>> images(k);
    for (int q = 0; q < k; ++q) {
      const Slot& src = cfg.slots[q];
      const int col = pol_index(src.mode, src.pol);
      for (int row = 0; row < dim; ++row) {
        const Complex c = t.matrix(row, col);
        if (std::abs(c) > kAmplitudeEps)
          images[q].push_back({Slot{row / 2 + 1, static_cast<Pol>(row % 2), src.label}, c});
      }
    }
    scratch.assign(k, Slot{});
    // Depth-first expansion of the product over photons.
    auto rec = [&](auto&& self, int q, Complex coeff) -> void {
      if (q == k) {
        FockConfig out{scratch};
        out.canonicalize();
        mono_acc[out] += coeff;
        return;
      }
      for (const auto& [slot, c] : images[q]) {
        scratch[q] = slot;
        self(self, q + 1, coeff * c);
      }
    };
    rec(rec, 0, mono);
  }

  FockState out;
  out.mode_count = s.mode_count;
  for (auto& [cfg, mono] : mono_acc) {
    const Complex ket = mono * std::sqrt(cfg.occupation_factorial());
    if (std::abs(ket) >= kAmplitudeEps) out.terms[cfg] = ket;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Expansion onto the orthonormal internal label basis.  After expansion,
// distinct configurations are orthogonal and probabilities are plain sums of
// squared magnitudes.

struct InternalSlot {
  int mode = 1;
  Pol pol = Pol::H;
  int label_index = 0;

  friend bool operator==(const InternalSlot&, const InternalSlot&) = default;
  friend bool operator<(const InternalSlot& a, const InternalSlot& b) {
    if (a.mode != b.mode) return a.mode < b.mode;
    if (a.pol != b.pol) return static_cast<int>(a.pol) < static_cast<int>(b.pol);
    return a.label_index < b.label_index;
  }
};

struct InternalConfig {
  std::vector<InternalSlot> slots;

  double occupation_factorial() const {
    double f = 1.0;
    std::size_t i = 0;
    while (i < slots.size()) {
      std::size_t j = i + 1;
      while (j < slots.size() && slots[j] == slots[i]) ++j;
      f *= detail::factorial(static_cast<int>(j - i));
      i = j;
    }
    return f;
  }

  friend bool operator==(const InternalConfig&, const InternalConfig&) = default;
  friend bool operator<(const InternalConfig& a, const InternalConfig& b) {
    return a.slots < b.slots;
  }
};

struct InternalState {
  int mode_count = 0;
  std::map<InternalConfig, Complex> terms;

  double norm_squared() const {
    double n2 = 0.0;
    for (const auto& [cfg, amp] : terms) n2 += std::norm(amp);
    return n2;
  }
};

inline InternalState expand_internal(const FockState& s, const GramEmbedding& emb) {
  const int levels = static_cast<int>(emb.labels.size());
  std::map<InternalConfig, Complex> mono_acc;
  std::vector<InternalSlot> scratch;

  for (const auto& [cfg, amp] : s.terms) {
    const Complex mono = amp / std::sqrt(cfg.occupation_factorial());
    const int k = cfg.photon_count();
    std::vector<std::vector<std::pair<InternalSlot, double>>> images(k);
    for (int q = 0; q < k; ++q) {
      const Slot& src = cfg.slots[q];
      const int col = emb.index_of(src.label);
      for (int row = 0; row < levels; ++row) {
        const double c = emb.embedding(row, col);
        if (std::abs(c) > kAmplitudeEps)
          images[q].push_back({InternalSlot{src.mode, src.pol, row}, c});
      }
    }
    scratch.assign(k, InternalSlot{});
    auto rec = [&](auto&& self, int q, Complex coeff) -> void {
      if (q == k) {
        InternalConfig out{scratch};
        std::sort(out.slots.begin(), out.slots.end());
        mono_acc[out] += coeff;
        return;
      }
      for (const auto& [slot, c] : images[q]) {
        scratch[q] = slot;
        self(self, q + 1, coeff * c);
      }
    };
    rec(rec, 0, mono);
  }

  InternalState out;
  out.mode_count = s.mode_count;
  for (auto& [cfg, mono] : mono_acc) {
    const Complex ket = mono * std::sqrt(cfg.occupation_factorial());
    if (std::abs(ket) >= kAmplitudeEps) out.terms[cfg] = ket;
  }
  return out;
}

// Norm computed through the embedding route; agrees with the Gram/permanent
// route, which property tests pin down.
inline double norm_squared_embedding(const FockState& s, const Coherence& coh = {}) {
  const GramEmbedding emb = GramEmbedding::build(s.labels(), coh);
  return expand_internal(s, emb).norm_squared();
}

}  // namespace photonshor
