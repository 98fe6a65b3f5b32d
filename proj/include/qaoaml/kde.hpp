#pragma once

// Gaussian kernel density model of good QAOA parameters and the sampling
// optimizer built on it.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qaoaml/errors.hpp"
#include "qaoaml/optim.hpp"
#include "qaoaml/qaoa.hpp"
#include "qaoaml/rng.hpp"

namespace qaoaml {

inline constexpr std::string_view kKdeSchema = "qaoaml.kde/v1";
inline constexpr double kMinBandwidth = 0.01;

/// Equal-weight mixture of isotropic Gaussians of width `bandwidth` placed on
/// the `centers` (each a flat [betas..., gammas...] vector of length 2p).
struct KdeModel {
  int depth = 1;
  double bandwidth = 0.1;
  std::vector<std::vector<double>> centers;

  [[nodiscard]] int dimension() const noexcept { return 2 * depth; }
};

/// Standard deviation of angles on the circle, sqrt(-2 ln R) with R the mean
/// resultant length; capped at the uniform-circle value pi/sqrt(3).
inline double circular_std(std::span<const double> angles) {
  std::complex<double> acc{0.0, 0.0};
  for (double a : angles) acc += std::polar(1.0, a);
  const double r = std::abs(acc) / static_cast<double>(angles.size());
  const double cap = std::numbers::pi / std::sqrt(3.0);
  if (r <= 0.0) return cap;
  return std::min(cap, std::sqrt(-2.0 * std::log(std::min(1.0, r))));
}

/// Scott's rule with circular spread: N^(-1/(d+4)) * mean_k circ_std_k, floored at 0.01.
inline double scott_bandwidth(const std::vector<std::vector<double>>& centers) {
  const std::size_t n = centers.size();
  const std::size_t d = centers.front().size();
  double spread = 0.0;
  std::vector<double> column(n);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = centers[i][k];
    spread += circular_std(column);
  }
  spread /= static_cast<double>(d);
  const double factor = std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
  return std::max(kMinBandwidth, factor * spread);
}

inline KdeModel kde_fit(const std::vector<QaoaParams>& s_star,
                        std::optional<double> bandwidth = std::nullopt) {
  if (s_star.empty()) throw DomainError("kde_fit: empty parameter set");
  KdeModel m;
  m.depth = s_star.front().depth();
  for (const QaoaParams& x : s_star) {
    if (x.depth() != m.depth) throw DomainError("kde_fit: parameter vectors differ in depth");
    m.centers.push_back(x.flat());
  }
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw DomainError("kde_fit: bandwidth must be positive");
    m.bandwidth = *bandwidth;
  } else {
    m.bandwidth = scott_bandwidth(m.centers);
  }
  return m;
}

inline double kde_density(const KdeModel& m, std::span<const double> x) {
  const std::size_t d = static_cast<std::size_t>(m.dimension());
  if (x.size() != d) throw DomainError("kde_density: point has wrong dimension");
  const double w2 = m.bandwidth * m.bandwidth;
  const double norm = std::pow(2.0 * std::numbers::pi * w2, -0.5 * static_cast<double>(d));
  double sum = 0.0;
  for (const auto& c : m.centers) {
    double r2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) r2 += (x[k] - c[k]) * (x[k] - c[k]);
    sum += std::exp(-r2 / (2.0 * w2));
  }
  return norm * sum / static_cast<double>(m.centers.size());
}

/// Mixture sampling: pick a center uniformly, add N(0, w^2 I), wrap into [-pi, pi].
inline std::vector<QaoaParams> kde_sample(const KdeModel& m, std::size_t count, Rng& rng) {
  std::vector<QaoaParams> out;
  out.reserve(count);
  std::vector<double> x(m.dimension());
  for (std::size_t s = 0; s < count; ++s) {
    const auto& c = m.centers[rng.below(m.centers.size())];
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = c[k] + m.bandwidth * rng.normal();
    out.push_back(QaoaParams::from_flat(x));
  }
  return out;
}

inline std::vector<QaoaParams> kde_sample(const KdeModel& m, std::size_t count,
                                          std::uint64_t seed) {
  Rng rng = Rng(seed).substream("kde-sample");
  return kde_sample(m, count, rng);
}

/// Spends the whole remaining budget on KDE samples and keeps the best.
inline OptResult kde_optimize(MeteredObjective& obj, const KdeModel& m, std::uint64_t seed) {
  if (m.depth != obj.depth()) throw DomainError("kde_optimize: model depth does not match objective");
  if (obj.remaining() < 1) throw BudgetError("kde_optimize: no budget left");
  for (const QaoaParams& x : kde_sample(m, obj.remaining(), seed)) obj.evaluate(x);
  return result_from_trace(obj);
}

inline nlohmann::json to_json(const KdeModel& m) {
  return {{"schema", kKdeSchema}, {"p", m.depth}, {"omega", m.bandwidth}, {"centers", m.centers}};
}

inline KdeModel kde_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != kKdeSchema) throw DomainError("not a KDE model file (schema mismatch)");
  KdeModel m;
  m.depth = j.at("p").get<int>();
  m.bandwidth = j.at("omega").get<double>();
  m.centers = j.at("centers").get<std::vector<std::vector<double>>>();
  if (m.centers.empty() || !(m.bandwidth > 0.0)) throw DomainError("KDE model file is degenerate");
  for (const auto& c : m.centers)
    if (static_cast<int>(c.size()) != m.dimension()) throw DomainError("KDE center has wrong dimension");
  return m;
}

}  // namespace qaoaml
