#pragma once
// Qubit-level order-finding engine: dense state vectors, modular
// exponentiation as a basis permutation, coherent and measurement-based
// Fourier readout, and the classical pre/post-processing around them.

#include "photonshor/sources.hpp"  // Rng

#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

namespace photonshor {

using u64 = std::uint64_t;

inline u64 mod_pow(u64 base, u64 exp, u64 mod) {
  u64 result = 1 % mod;
  base %= mod;
  while (exp) {
    if (exp & 1) result = (result * base) % mod;
    base = (base * base) % mod;
    exp >>= 1;
  }
  return result;
}

inline bool is_prime(u64 n) {
  if (n < 2) return false;
  for (u64 d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

// Problem instance: odd composite N, base a coprime to N.
struct ShorInstance {
  u64 N = 15;
  u64 a = 11;

  ShorInstance(u64 N_, u64 a_) : N(N_), a(a_) {
    if (N < 9 || N % 2 == 0 || is_prime(N))
      throw std::invalid_argument("shor: N must be an odd composite");
    if (a <= 1 || a >= N) throw std::invalid_argument("shor: need 1 < a < N");
    if (std::gcd(a, N) != 1) throw std::invalid_argument("shor: gcd(a, N) != 1");
  }

  u64 order() const {
    u64 r = 1, v = a % N;
    while (v != 1) {
      v = (v * a) % N;
      ++r;
    }
    return r;
  }
};

// Dense amplitude vector over n first-register and m second-register qubits;
// basis index = x * 2^m + w.
struct QubitState {
  int n = 0;
  int m = 0;
  std::vector<Complex> amp;

  static QubitState zero(int n, int m) {
    QubitState s;
    s.n = n;
    s.m = m;
    s.amp.assign(std::size_t(1) << (n + m), Complex(0, 0));
    return s;
  }

  std::size_t dim() const { return amp.size(); }

  double norm_squared() const {
    double t = 0.0;
    for (const Complex& c : amp) t += std::norm(c);
    return t;
  }
};

// |x>|w> -> |x>|w * a^x mod N> for w < N; identity above N.  A bijection on
// basis states, so unitary.
inline u64 modexp_map(const ShorInstance& inst, int n, int m, u64 index) {
  const u64 mask = (u64(1) << m) - 1;
  const u64 w = index & mask;
  const u64 x = index >> m;
  if (w >= inst.N) return index;
  const u64 w2 = (w * mod_pow(inst.a, x, inst.N)) % inst.N;
  return (x << m) | w2;
}

inline QubitState apply_modexp(const QubitState& s, const ShorInstance& inst) {
  if ((u64(1) << s.m) < inst.N)
    throw std::invalid_argument("modexp: second register too small");
  QubitState out = QubitState::zero(s.n, s.m);
  for (std::size_t i = 0; i < s.dim(); ++i)
    if (s.amp[i] != Complex(0, 0)) out.amp[modexp_map(inst, s.n, s.m, i)] = s.amp[i];
  return out;
}

inline QubitState apply_modexp_inverse(const QubitState& s, const ShorInstance& inst) {
  QubitState out = QubitState::zero(s.n, s.m);
  for (std::size_t i = 0; i < s.dim(); ++i)
    if (s.amp[i] != Complex(0, 0)) out.amp[i] = s.amp[modexp_map(inst, s.n, s.m, i)];
  return out;
}

// Coherent Fourier transform on the first register:
// |x> -> 2^{-n/2} sum_y e^{+2 pi i x y / 2^n} |y>.
inline QubitState qft_first(const QubitState& s, int sign = +1) {
  const std::size_t X = std::size_t(1) << s.n;
  const std::size_t W = std::size_t(1) << s.m;
  QubitState out = QubitState::zero(s.n, s.m);
  const double scale = 1.0 / std::sqrt(double(X));
  for (std::size_t w = 0; w < W; ++w) {
    for (std::size_t y = 0; y < X; ++y) {
      Complex acc(0, 0);
      for (std::size_t x = 0; x < X; ++x) {
        const Complex c = s.amp[(x << s.m) | w];
        if (c == Complex(0, 0)) continue;
        const double phase = 2.0 * M_PI * sign * double((x * y) % X) / double(X);
        acc += c * std::polar(1.0, phase);
      }
      out.amp[(y << s.m) | w] = acc * scale;
    }
  }
  return out;
}

inline QubitState iqft_first(const QubitState& s) { return qft_first(s, -1); }

// Exact first-register marginal after measuring in the computational basis.
inline std::vector<double> measure_first(const QubitState& s) {
  const std::size_t X = std::size_t(1) << s.n;
  const std::size_t W = std::size_t(1) << s.m;
  std::vector<double> p(X, 0.0);
  for (std::size_t x = 0; x < X; ++x)
    for (std::size_t w = 0; w < W; ++w) p[x] += std::norm(s.amp[(x << s.m) | w]);
  return p;
}

namespace detail {

inline void apply_phase_bit(QubitState& s, int global_bit, Complex phase) {
  const std::size_t mask = std::size_t(1) << global_bit;
  for (std::size_t i = 0; i < s.dim(); ++i)
    if (i & mask) s.amp[i] *= phase;
}

inline void apply_hadamard_bit(QubitState& s, int global_bit) {
  const std::size_t mask = std::size_t(1) << global_bit;
  const double inv = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < s.dim(); ++i) {
    if (i & mask) continue;
    const Complex a = s.amp[i], b = s.amp[i | mask];
    s.amp[i] = (a + b) * inv;
    s.amp[i | mask] = (a - b) * inv;
  }
}

// Depth-first enumeration of the measurement cascade.  Branch amplitudes stay
// unnormalized; the squared norm of a leaf is its joint probability.
inline void semiclassical_rec(QubitState& s, int k, u64 y_prefix,
                              std::vector<double>& dist) {
  const int n = s.n;
  if (k == n) {
    dist[y_prefix] += s.norm_squared();
    return;
  }
  // Bit y_k is read from first-register qubit x_{n-1-k}: conditioned phases
  // from earlier results, then a Hadamard, then the measurement.
  const int reg_bit = n - 1 - k;
  const int global_bit = s.m + reg_bit;
  double angle = 0.0;
  for (int t = 0; t < k; ++t)
    if ((y_prefix >> t) & 1) angle += 2.0 * M_PI * std::ldexp(1.0, t - k - 1);
  if (angle != 0.0) apply_phase_bit(s, global_bit, std::polar(1.0, angle));
  apply_hadamard_bit(s, global_bit);

  const std::size_t mask = std::size_t(1) << global_bit;
  for (int bit = 0; bit < 2; ++bit) {
    QubitState child = s;
    for (std::size_t i = 0; i < child.dim(); ++i)
      if (((i & mask) != 0) != (bit != 0)) child.amp[i] = Complex(0, 0);
    semiclassical_rec(child, k + 1, y_prefix | (u64(bit) << k), dist);
  }
}

}  // namespace detail

// Measurement-based Fourier readout of the first register: qubits are
// measured one by one with phase rotations conditioned on earlier outcomes.
// Returns the exact distribution over y; equals the coherent transform
// followed by measurement.
inline std::vector<double> semiclassical_qft(const QubitState& s) {
  std::vector<double> dist(std::size_t(1) << s.n, 0.0);
  QubitState work = s;
  detail::semiclassical_rec(work, 0, 0, dist);
  return dist;
}

// ---------------------------------------------------------------------------
// Compiled instance N = 15, a = 11.  Since a^2 = 1 (mod 15) only the low
// first-register bit controls the multiplication, realized by two CNOTs onto
// second-register bits that start in |0>; the two remaining second-register
// bits never change and are left out.  Qubit order (MSB to LSB):
// x1, x0, r3, r1 where r3/r1 are the nontrivial second-register bits.
inline QubitState compiled_mef_state_15_11() {
  QubitState s = QubitState::zero(2, 2);
  // H on x1 and x0 from |00>, then CNOT(x0 -> r3), CNOT(x0 -> r1):
  // (1/2) sum_{x1,x0} |x1 x0> |x0 x0>.
  for (int x1 = 0; x1 < 2; ++x1)
    for (int x0 = 0; x0 < 2; ++x0) {
      const std::size_t idx = (std::size_t(x1) << 3) | (std::size_t(x0) << 2) |
                              (std::size_t(x0) << 1) | std::size_t(x0);
      s.amp[idx] = 0.5;
    }
  return s;
}

// Reinserts the two second-register bits that stay fixed (b2 = 0, b0 = 1),
// giving the full six-bit reading x1 x0 b3 b2 b1 b0.
inline u64 reinsert_trivial_bits(u64 compiled_index) {
  const u64 x1 = (compiled_index >> 3) & 1;
  const u64 x0 = (compiled_index >> 2) & 1;
  const u64 b3 = (compiled_index >> 1) & 1;
  const u64 b1 = compiled_index & 1;
  return (x1 << 5) | (x0 << 4) | (b3 << 3) | (0 << 2) | (b1 << 1) | 1;
}

// ---------------------------------------------------------------------------
// Classical post-processing.

// Continued-fraction expansion of y / 2^n; returns the smallest convergent
// denominator r <= N with a^r = 1 (mod N), if any.  y = 0 carries no period
// information and reports none.
inline std::optional<u64> extract_period(u64 y, int n, const ShorInstance& inst) {
  if (y >> n) throw std::invalid_argument("extract_period: y out of range");
  if (y == 0) return std::nullopt;
  u64 num = y, den = u64(1) << n;
  u64 h0 = 1, h1 = 0, k0 = 0, k1 = 1;  // convergent recurrences
  while (den != 0) {
    const u64 q = num / den;
    const u64 rem = num % den;
    const u64 h = q * h0 + h1;
    const u64 k = q * k0 + k1;
    h1 = h0; h0 = h;
    k1 = k0; k0 = k;
    num = den;
    den = rem;
    if (k0 > 0 && k0 <= inst.N && mod_pow(inst.a, k0, inst.N) == 1) return k0;
    if (k0 > inst.N) break;
  }
  return std::nullopt;
}

// gcd(a^{r/2} +- 1, N) when r is even and a^{r/2} != -1 (mod N); the returned
// pair is nontrivial or absent.
inline std::optional<std::pair<u64, u64>> factors_from_period(const ShorInstance& inst,
                                                              u64 r) {
  if (mod_pow(inst.a, r, inst.N) != 1)
    throw std::invalid_argument("factors_from_period: r is not a period of a mod N");
  if (r % 2 != 0) return std::nullopt;
  const u64 half = mod_pow(inst.a, r / 2, inst.N);
  if (half == inst.N - 1) return std::nullopt;
  const u64 f1 = std::gcd(half - 1, inst.N);
  const u64 f2 = std::gcd(half + 1, inst.N);
  u64 p = 1;
  if (f1 > 1 && f1 < inst.N) p = f1;
  else if (f2 > 1 && f2 < inst.N) p = f2;
  if (p == 1) return std::nullopt;
  return std::make_pair(std::min(p, inst.N / p), std::max(p, inst.N / p));
}

// ---------------------------------------------------------------------------
// End-to-end driver.

enum class ShorMode { Full, Compiled };

struct ShotRecord {
  u64 y = 0;
  std::optional<u64> period;
  std::optional<std::pair<u64, u64>> factors;
  bool success = false;
};

struct ShorReport {
  int n = 0;
  std::vector<double> distribution;        // exact P(y)
  double exact_success_probability = 0.0;  // sum_y P(y) [post-processing succeeds]
  std::vector<ShotRecord> shots;
  std::map<u64, u64> histogram;
  double success_rate = 0.0;  // over the sampled shots
};

inline ShotRecord postprocess_outcome(u64 y, int n, const ShorInstance& inst) {
  ShotRecord rec;
  rec.y = y;
  rec.period = extract_period(y, n, inst);
  if (rec.period) {
    rec.factors = factors_from_period(inst, *rec.period);
    if (rec.factors) rec.success = true;
  }
  return rec;
}

// Exact y-distribution of the order-finding circuit.  Full mode uses
// n = 2*ceil(log2 N) control and m = ceil(log2 N) work qubits with the work
// register initialized to the value 1; compiled mode is the four-qubit
// N = 15, a = 11 network.
inline std::vector<double> shor_distribution(const ShorInstance& inst, ShorMode mode,
                                             int* n_out = nullptr) {
  if (mode == ShorMode::Compiled) {
    if (inst.N != 15 || inst.a != 11)
      throw std::invalid_argument("compiled mode is specific to N=15, a=11");
    if (n_out) *n_out = 2;
    return semiclassical_qft(compiled_mef_state_15_11());
  }
  int m = 0;
  while ((u64(1) << m) < inst.N) ++m;
  const int n = 2 * m;
  if (n_out) *n_out = n;
  QubitState s = QubitState::zero(n, m);
  const std::size_t X = std::size_t(1) << n;
  const double a0 = 1.0 / std::sqrt(double(X));
  for (std::size_t x = 0; x < X; ++x) s.amp[(x << m) | 1] = a0;  // |x>|1>
  s = apply_modexp(s, inst);
  return semiclassical_qft(s);
}

inline ShorReport run_shor(const ShorInstance& inst, int shots, ShorMode mode,
                           std::uint64_t seed = 1) {
  if (shots < 1) throw std::invalid_argument("run_shor: shots < 1");
  ShorReport report;
  report.distribution = shor_distribution(inst, mode, &report.n);

  for (u64 y = 0; y < report.distribution.size(); ++y) {
    if (report.distribution[y] <= 0.0) continue;
    if (postprocess_outcome(y, report.n, inst).success)
      report.exact_success_probability += report.distribution[y];
  }

  // Shots are drawn from the exact distribution; no per-shot state collapse.
  Rng rng(seed);
  std::vector<double> cdf(report.distribution.size());
  double acc = 0.0;
  for (std::size_t y = 0; y < cdf.size(); ++y) {
    acc += report.distribution[y];
    cdf[y] = acc;
  }
  int successes = 0;
  for (int i = 0; i < shots; ++i) {
    const double u = rng.uniform01() * acc;
    const std::size_t y =
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    ShotRecord rec = postprocess_outcome(std::min(y, cdf.size() - 1), report.n, inst);
    successes += rec.success;
    ++report.histogram[rec.y];
    report.shots.push_back(std::move(rec));
  }
  report.success_rate = double(successes) / double(shots);
  return report;
}

}  // namespace photonshor
