#pragma once

// Statevector simulation of the depth-p QAOA ansatz for Max-Cut.
//
// Basis index layout: qubit i is bit i of the index (little-endian). Bit 0
// means spin +1. The cost operator is the cut count C(z), so the largest
// eigenvalue is the maximum cut.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "qaoaml/errors.hpp"
#include "qaoaml/graph.hpp"
#include "qaoaml/rng.hpp"

namespace qaoaml {

inline constexpr int kMaxQubits = 24;

using Complex = std::complex<double>;

/// Maps an angle onto [-pi, pi]. Values already in range are left untouched.
inline double wrap_angle(double x) noexcept {
  constexpr double pi = std::numbers::pi;
  if (x >= -pi && x <= pi) return x;
  double r = std::remainder(x, 2.0 * pi);  // in [-pi, pi]
  return r;
}

/// The 2p variational angles; every component is wrapped into [-pi, pi].
class QaoaParams {
 public:
  QaoaParams() = default;

  QaoaParams(std::vector<double> betas, std::vector<double> gammas)
      : betas_(std::move(betas)), gammas_(std::move(gammas)) {
    if (betas_.empty() || betas_.size() != gammas_.size())
      throw DomainError("QAOA params: need p >= 1 betas and as many gammas");
    for (double& b : betas_) b = wrap_angle(b);
    for (double& g : gammas_) g = wrap_angle(g);
  }

  /// From the flat layout [beta_1..beta_p, gamma_1..gamma_p].
  static QaoaParams from_flat(std::span<const double> x) {
    if (x.empty() || x.size() % 2 != 0)
      throw DomainError("QAOA params: flat vector must have even length 2p");
    const std::size_t p = x.size() / 2;
    return {{x.begin(), x.begin() + p}, {x.begin() + p, x.end()}};
  }

  static QaoaParams zeros(int p) {
    return {std::vector<double>(p, 0.0), std::vector<double>(p, 0.0)};
  }

  static QaoaParams uniform(int p, Rng& rng) {
    std::vector<double> x(2 * p);
    for (double& v : x) v = rng.uniform(-std::numbers::pi, std::numbers::pi);
    return from_flat(x);
  }

  [[nodiscard]] int depth() const noexcept { return static_cast<int>(betas_.size()); }
  [[nodiscard]] const std::vector<double>& betas() const noexcept { return betas_; }
  [[nodiscard]] const std::vector<double>& gammas() const noexcept { return gammas_; }

  [[nodiscard]] std::vector<double> flat() const {
    std::vector<double> x(betas_);
    x.insert(x.end(), gammas_.begin(), gammas_.end());
    return x;
  }

  friend bool operator==(const QaoaParams&, const QaoaParams&) = default;

 private:
  std::vector<double> betas_;
  std::vector<double> gammas_;
};

/// Cut value of every basis state; the spectrum of the cost operator.
struct CutDiagonal {
  int n = 0;
  int max_value = 0;
  std::vector<std::uint16_t> values;
};

inline void check_qubits(const Graph& g) {
  if (g.n() > kMaxQubits)
    throw ResourceError("statevector simulation capped at " + std::to_string(kMaxQubits) +
                        " qubits");
}

inline CutDiagonal cut_diagonal(const Graph& g) {
  check_qubits(g);
  const int n = g.n();
  // Vertex h joins an assignment z of vertices < h: with bit 1 its edges to
  // lower zeros are cut, with bit 0 its edges to lower ones.
  std::vector<std::uint32_t> lower(n, 0);
  for (auto [u, v] : g.edges()) lower[std::max(u, v)] |= 1u << std::min(u, v);
  CutDiagonal d;
  d.n = n;
  d.values.assign(std::size_t{1} << n, 0);
  for (int h = 0; h < n; ++h) {
    const std::size_t half = std::size_t{1} << h;
    for (std::size_t z = 0; z < half; ++z) {
      const auto zb = static_cast<std::uint32_t>(z);
      d.values[z + half] = static_cast<std::uint16_t>(d.values[z] + std::popcount(lower[h] & ~zb));
      d.values[z] = static_cast<std::uint16_t>(d.values[z] + std::popcount(lower[h] & zb));
    }
  }
  d.max_value = *std::max_element(d.values.begin(), d.values.end());
  return d;
}

struct StateVector {
  std::vector<Complex> amplitudes;

  [[nodiscard]] double norm2() const {
    double s = 0.0;
    for (const Complex& a : amplitudes) s += std::norm(a);
    return s;
  }
};

/// One QAOA layer pair applied in place: cost phase by gamma, then mixer by beta.
inline void apply_layer(std::vector<Complex>& amp, const CutDiagonal& diag, double beta,
                        double gamma) {
  std::vector<Complex> phase(diag.max_value + 1);
  for (int c = 0; c <= diag.max_value; ++c) phase[c] = std::polar(1.0, -gamma * c);
  for (std::size_t z = 0; z < amp.size(); ++z) amp[z] *= phase[diag.values[z]];

  const double c = std::cos(beta);
  const Complex ms(0.0, -std::sin(beta));
  for (int q = 0; q < diag.n; ++q) {
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t base = 0; base < amp.size(); base += 2 * bit)
      for (std::size_t z0 = base; z0 < base + bit; ++z0) {
        const Complex a0 = amp[z0];
        const Complex a1 = amp[z0 | bit];
        amp[z0] = c * a0 + ms * a1;
        amp[z0 | bit] = ms * a0 + c * a1;
      }
  }
}

inline StateVector evolve(const CutDiagonal& diag, const QaoaParams& params) {
  if (params.depth() < 1) throw DomainError("evolve: depth must be >= 1");
  StateVector s;
  const std::size_t dim = std::size_t{1} << diag.n;
  s.amplitudes.assign(dim, Complex(1.0 / std::sqrt(static_cast<double>(dim)), 0.0));
  for (int k = 0; k < params.depth(); ++k)
    apply_layer(s.amplitudes, diag, params.betas()[k], params.gammas()[k]);
  return s;
}

inline StateVector evolve(const Graph& g, const QaoaParams& params) {
  return evolve(cut_diagonal(g), params);
}

/// Energy estimate. `shots == 0` marks an exact expectation.
struct EnergyValue {
  double mean = 0.0;
  std::uint64_t shots = 0;
  double std_error = 0.0;

  friend bool operator==(const EnergyValue&, const EnergyValue&) = default;
};

inline EnergyValue expectation_exact(const CutDiagonal& diag, const QaoaParams& params) {
  const StateVector s = evolve(diag, params);
  double e = 0.0;
  for (std::size_t z = 0; z < s.amplitudes.size(); ++z)
    e += std::norm(s.amplitudes[z]) * diag.values[z];
  return {e, 0, 0.0};
}

inline EnergyValue expectation_exact(const Graph& g, const QaoaParams& params) {
  return expectation_exact(cut_diagonal(g), params);
}

/// Draws `shots` bitstrings from the Born distribution and averages their
/// cut values. Deterministic for a fixed rng state.
inline EnergyValue expectation_sampled(const CutDiagonal& diag, const QaoaParams& params,
                                       std::uint64_t shots, Rng& rng) {
  if (shots == 0) throw DomainError("expectation_sampled: shots must be >= 1");
  const StateVector s = evolve(diag, params);
  std::vector<double> cdf(s.amplitudes.size());
  double acc = 0.0;
  for (std::size_t z = 0; z < cdf.size(); ++z) cdf[z] = acc += std::norm(s.amplitudes[z]);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::uint64_t k = 0; k < shots; ++k) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    const double c = diag.values[static_cast<std::size_t>(it - cdf.begin())];
    sum += c;
    sum_sq += c * c;
  }
  const double m = static_cast<double>(shots);
  const double mean = sum / m;
  double std_error = 0.0;
  if (shots > 1) {
    const double var = std::max(0.0, (sum_sq - m * mean * mean) / (m - 1.0));
    std_error = std::sqrt(var / m);
  }
  return {mean, shots, std_error};
}

inline EnergyValue expectation_sampled(const Graph& g, const QaoaParams& params,
                                       std::uint64_t shots, std::uint64_t seed) {
  Rng rng = Rng(seed).substream("shots");
  return expectation_sampled(cut_diagonal(g), params, shots, rng);
}

// ---------------------------------------------------------------------------
// p = 1 landscapes

struct LandscapePoint {
  double beta = 0.0;
  double gamma = 0.0;
  EnergyValue value;
};

/// Grid coordinate i of `resolution` points spanning [-pi, pi] inclusive.
inline double grid_coordinate(int i, int resolution) {
  return -std::numbers::pi + 2.0 * std::numbers::pi * i / (resolution - 1);
}

/// Row-major (beta outer, gamma inner) grid of f over [-pi, pi]^2.
/// `shots == 0` evaluates exactly; otherwise each point gets its own substream.
inline std::vector<LandscapePoint> landscape_grid(const Graph& g, int depth, int resolution,
                                                  std::uint64_t shots = 0,
                                                  std::uint64_t seed = 0) {
  if (depth != 1) throw DomainError("landscape_grid: only p = 1 landscapes are supported");
  if (resolution < 2) throw DomainError("landscape_grid: resolution must be >= 2");
  const CutDiagonal diag = cut_diagonal(g);
  const Rng root = Rng(seed).substream("landscape");
  std::vector<LandscapePoint> out;
  out.reserve(static_cast<std::size_t>(resolution) * resolution);
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      const double b = grid_coordinate(i, resolution);
      const double c = grid_coordinate(j, resolution);
      QaoaParams x({b}, {c});
      LandscapePoint pt{b, c, {}};
      if (shots == 0) {
        pt.value = expectation_exact(diag, x);
      } else {
        Rng rng = root.substream("point", static_cast<std::uint64_t>(i) * resolution + j);
        pt.value = expectation_sampled(diag, x, shots, rng);
      }
      out.push_back(pt);
    }
  return out;
}

}  // namespace qaoaml
