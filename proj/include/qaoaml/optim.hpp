#pragma once

// Budget-metered QAOA objective and the derivative-free baselines:
// uniform random search, Nelder-Mead, multistart collection of near-optimal
// parameters and the p = 1 grid oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "qaoaml/errors.hpp"
#include "qaoaml/graph.hpp"
#include "qaoaml/parallel.hpp"
#include "qaoaml/qaoa.hpp"
#include "qaoaml/rng.hpp"

namespace qaoaml {

inline constexpr std::size_t kDefaultBudget = 192;
inline constexpr std::uint64_t kDefaultShots = 1024;

/// How a metered objective estimates f: exact expectation or `shots` samples.
struct EvalMode {
  std::uint64_t shots = kDefaultShots;  // 0 = exact
  std::uint64_t seed = 0;

  static EvalMode exact() { return {0, 0}; }
  static EvalMode sampled(std::uint64_t shots, std::uint64_t seed) {
    if (shots == 0) throw DomainError("sampled mode needs shots >= 1");
    return {shots, seed};
  }
  [[nodiscard]] bool is_exact() const noexcept { return shots == 0; }
};

struct TraceEntry {
  QaoaParams params;
  EnergyValue value;
};

/// QAOA objective for one (graph, depth) that refuses to evaluate more than
/// `budget` times. Every metered evaluation is appended to the trace.
/// Not thread-safe; each optimizer run owns its objective.
class MeteredObjective {
 public:
  MeteredObjective(const Graph& g, int depth, EvalMode mode, std::size_t budget)
      : MeteredObjective(std::make_shared<const CutDiagonal>(cut_diagonal(g)), g.edge_count(),
                         depth, mode, budget) {}

  MeteredObjective(std::shared_ptr<const CutDiagonal> diag, std::size_t edge_count, int depth,
                   EvalMode mode, std::size_t budget)
      : diag_(std::move(diag)),
        edge_count_(edge_count),
        depth_(depth),
        mode_(mode),
        budget_(budget),
        shot_root_(Rng(mode.seed).substream("metered-shots")) {
    if (depth_ < 1) throw DomainError("metered objective: depth must be >= 1");
    trace_.reserve(budget_);
  }

  EnergyValue evaluate(const QaoaParams& x) {
    check_depth(x);
    if (used_ >= budget_)
      throw BudgetError("evaluation budget of " + std::to_string(budget_) + " exhausted");
    EnergyValue v;
    if (mode_.is_exact()) {
      v = expectation_exact(*diag_, x);
    } else {
      Rng rng = shot_root_.substream("eval", used_);
      v = expectation_sampled(*diag_, x, mode_.shots, rng);
    }
    ++used_;
    trace_.push_back({x, v});
    return v;
  }

  /// Exact f(x), outside the budget. Used for re-scoring and metrics only.
  [[nodiscard]] double exact(const QaoaParams& x) const {
    check_depth(x);
    return expectation_exact(*diag_, x).mean;
  }

  [[nodiscard]] int depth() const noexcept { return depth_; }
  [[nodiscard]] int dimension() const noexcept { return 2 * depth_; }
  [[nodiscard]] const EvalMode& mode() const noexcept { return mode_; }
  [[nodiscard]] std::size_t budget() const noexcept { return budget_; }
  [[nodiscard]] std::size_t used() const noexcept { return used_; }
  [[nodiscard]] std::size_t remaining() const noexcept { return budget_ - used_; }
  [[nodiscard]] const std::vector<TraceEntry>& trace() const noexcept { return trace_; }
  [[nodiscard]] std::size_t edge_count() const noexcept { return edge_count_; }
  [[nodiscard]] const CutDiagonal& diagonal() const noexcept { return *diag_; }

 private:
  void check_depth(const QaoaParams& x) const {
    if (x.depth() != depth_)
      throw DomainError("parameter depth " + std::to_string(x.depth()) +
                        " does not match objective depth " + std::to_string(depth_));
  }

  std::shared_ptr<const CutDiagonal> diag_;
  std::size_t edge_count_ = 0;
  int depth_ = 1;
  EvalMode mode_;
  std::size_t budget_ = 0;
  std::size_t used_ = 0;
  Rng shot_root_;
  std::vector<TraceEntry> trace_;
};

struct OptResult {
  QaoaParams best_params;
  double best_value = 0.0;  // metered (possibly shot-noisy) value
  double best_exact = 0.0;  // exact re-evaluation, not budget-counted
  std::size_t evals_used = 0;
};

/// Best trace entry (first on ties), re-scored exactly.
inline OptResult result_from_trace(const MeteredObjective& obj) {
  const auto& tr = obj.trace();
  if (tr.empty()) throw DomainError("optimizer produced no evaluations");
  std::size_t best = 0;
  for (std::size_t i = 1; i < tr.size(); ++i)
    if (tr[i].value.mean > tr[best].value.mean) best = i;
  return {tr[best].params, tr[best].value.mean, obj.exact(tr[best].params), obj.used()};
}

// ---------------------------------------------------------------------------
// Random search

inline OptResult random_search(MeteredObjective& obj, std::uint64_t seed) {
  if (obj.remaining() < 1) throw BudgetError("random search: no budget left");
  Rng rng = Rng(seed).substream("random-search");
  while (obj.remaining() > 0) obj.evaluate(QaoaParams::uniform(obj.depth(), rng));
  return result_from_trace(obj);
}

// ---------------------------------------------------------------------------
// Nelder-Mead

struct NelderMeadOptions {
  double initial_offset = 0.25;  // rad, added to one coordinate per extra vertex
  double min_diameter = 1e-4;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

struct NelderMeadResult {
  std::vector<double> best_x;
  double best_value = 0.0;
  std::size_t evals = 0;
};

/// Maximizes `f` over R^d starting from the simplex {x0, x0 + offset*e_i}.
/// Stops after `max_evals` calls to f or once the simplex diameter drops
/// below `min_diameter`; returns the best point ever evaluated.
template <class F>
NelderMeadResult nelder_mead_maximize(F&& f, std::vector<double> x0, std::size_t max_evals,
                                      const NelderMeadOptions& opt = {}) {
  const std::size_t d = x0.size();
  if (d == 0) throw DomainError("nelder-mead: empty start point");
  if (max_evals < d + 1) throw DomainError("nelder-mead: budget too small for initial simplex");

  struct Vertex {
    std::vector<double> x;
    double f;
  };
  struct Exhausted {};

  NelderMeadResult res;
  res.best_value = -std::numeric_limits<double>::infinity();
  auto eval = [&](const std::vector<double>& x) -> double {
    if (res.evals >= max_evals) throw Exhausted{};
    const double v = f(x);
    ++res.evals;
    if (v > res.best_value) res.best_value = v, res.best_x = x;
    return v;
  };
  auto towards = [d](const std::vector<double>& from, const std::vector<double>& to, double t) {
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = from[i] + t * (to[i] - from[i]);
    return out;
  };

  try {
    std::vector<Vertex> s;
    s.push_back({x0, eval(x0)});
    for (std::size_t i = 0; i < d; ++i) {
      std::vector<double> x = x0;
      x[i] += opt.initial_offset;
      s.push_back({x, eval(x)});
    }
    for (;;) {
      std::stable_sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.f > b.f; });
      double diameter = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j) {
          double acc = 0.0;
          for (std::size_t k = 0; k < d; ++k) acc += (s[i].x[k] - s[j].x[k]) * (s[i].x[k] - s[j].x[k]);
          diameter = std::max(diameter, std::sqrt(acc));
        }
      if (diameter < opt.min_diameter) break;

      std::vector<double> centroid(d, 0.0);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k) centroid[k] += s[i].x[k] / static_cast<double>(d);

      Vertex& worst = s.back();
      const double second_worst = s[d - 1].f;
      auto xr = towards(centroid, worst.x, -opt.reflection);
      const double fr = eval(xr);
      if (fr > s.front().f) {
        auto xe = towards(centroid, xr, opt.expansion);
        const double fe = eval(xe);
        worst = fe > fr ? Vertex{std::move(xe), fe} : Vertex{std::move(xr), fr};
        continue;
      }
      if (fr > second_worst) {
        worst = {std::move(xr), fr};
        continue;
      }
      if (fr > worst.f) {
        auto xc = towards(centroid, xr, opt.contraction);
        const double fc = eval(xc);
        if (fc >= fr) {
          worst = {std::move(xc), fc};
          continue;
        }
      } else {
        auto xc = towards(centroid, worst.x, opt.contraction);
        const double fc = eval(xc);
        if (fc > worst.f) {
          worst = {std::move(xc), fc};
          continue;
        }
      }
      for (std::size_t i = 1; i < s.size(); ++i) {
        s[i].x = towards(s.front().x, s[i].x, opt.shrink);
        s[i].f = eval(s[i].x);
      }
    }
  } catch (const Exhausted&) {
  }
  return res;
}

/// Nelder-Mead on a metered QAOA objective, using its whole remaining budget.
inline OptResult nelder_mead(MeteredObjective& obj, const QaoaParams& x0,
                             const NelderMeadOptions& opt = {}) {
  const std::size_t d = static_cast<std::size_t>(obj.dimension());
  if (x0.depth() != obj.depth()) throw DomainError("nelder-mead: start point depth mismatch");
  if (obj.remaining() < d + 2)
    throw DomainError("nelder-mead: budget " + std::to_string(obj.remaining()) +
                      " below 2p+2 = " + std::to_string(d + 2));
  nelder_mead_maximize(
      [&obj](const std::vector<double>& x) { return obj.evaluate(QaoaParams::from_flat(x)).mean; },
      x0.flat(), obj.remaining(), opt);
  return result_from_trace(obj);
}

// ---------------------------------------------------------------------------
// Multistart collection of near-optimal parameters

inline constexpr std::size_t kMultistartBudget = 200;
inline constexpr double kAdmissionRatio = 0.99;

struct MultistartResult {
  std::vector<QaoaParams> admitted;
  double best_exact = 0.0;
  std::vector<double> final_values;  // exact value of every start's result
};

/// Runs exact-mode Nelder-Mead from `n_starts` uniform points and keeps the
/// final points whose value is at least 99% of the best one found.
inline MultistartResult multistart_collect(const Graph& g, int depth, std::size_t n_starts,
                                           std::uint64_t seed, unsigned threads = 1,
                                           std::size_t per_start_budget = kMultistartBudget) {
  if (n_starts < 1) throw DomainError("multistart: n_starts must be >= 1");
  auto diag = std::make_shared<const CutDiagonal>(cut_diagonal(g));
  const Rng root = Rng(seed).substream("multistart");
  std::vector<OptResult> runs(n_starts);
  parallel_for(n_starts, threads, [&](std::size_t i) {
    Rng rng = root.substream("start", i);
    MeteredObjective obj(diag, g.edge_count(), depth, EvalMode::exact(), per_start_budget);
    runs[i] = nelder_mead(obj, QaoaParams::uniform(depth, rng));
  });
  MultistartResult out;
  for (const OptResult& r : runs) {
    out.final_values.push_back(r.best_exact);
    out.best_exact = std::max(out.best_exact, r.best_exact);
  }
  for (const OptResult& r : runs)
    if (r.best_exact >= kAdmissionRatio * out.best_exact) out.admitted.push_back(r.best_params);
  return out;
}

// ---------------------------------------------------------------------------
// Grid oracle

struct GridOptimum {
  QaoaParams params;
  double value = 0.0;
};

/// Exact argmax of the p = 1 landscape on a `resolution`^2 grid.
inline GridOptimum grid_oracle_best(const Graph& g, int depth, int resolution) {
  if (depth != 1) throw DomainError("grid oracle: only p = 1 is supported");
  if (resolution < 16) throw DomainError("grid oracle: resolution must be >= 16");
  const auto grid = landscape_grid(g, 1, resolution);
  const auto it = std::max_element(grid.begin(), grid.end(), [](const auto& a, const auto& b) {
    return a.value.mean < b.value.mean;
  });
  return {QaoaParams({it->beta}, {it->gamma}), it->value.mean};
}

}  // namespace qaoaml
