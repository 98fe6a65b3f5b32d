#pragma once

// Benchmark protocol: every optimizer in the roster gets `attempts` runs of
// budget B on every (instance, depth) cell; the best parameters of each run
// are re-scored exactly and summarized as optimality ratios, gap-reduction
// factors against Nelder-Mead and approximation ratios against brute force.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "qaoaml/errors.hpp"
#include "qaoaml/graph.hpp"
#include "qaoaml/kde.hpp"
#include "qaoaml/optim.hpp"
#include "qaoaml/parallel.hpp"
#include "qaoaml/rl.hpp"

namespace qaoaml {

inline constexpr std::string_view kMetricsSchema = "qaoaml.metrics/v1";

/// Report subgroup: barbell and caveman graphs form the community group.
inline std::string instance_group(GraphClass c) {
  switch (c) {
    case GraphClass::random: return "random";
    case GraphClass::ladder: return "ladder";
    case GraphClass::barbell:
    case GraphClass::caveman: return "community";
  }
  return "?";
}

inline const std::vector<std::string>& known_optimizers() {
  static const std::vector<std::string> names{"random", "nm", "kde", "rl"};
  return names;
}

struct BenchConfig {
  std::vector<int> depths{1, 2, 4};
  std::size_t budget = kDefaultBudget;
  int attempts = 10;
  std::uint64_t shots = kDefaultShots;  // 0 = exact evaluations
  std::vector<std::string> roster{"random", "nm", "kde", "rl"};
  int max_vertices = 12;  // instance filter; 0 keeps every instance
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const {
    if (attempts < 1) throw ConfigError("bench: attempts must be >= 1");
    if (budget < 1) throw ConfigError("bench: budget must be >= 1");
    if (depths.empty() || roster.empty()) throw ConfigError("bench: need at least one depth and optimizer");
    for (int p : depths)
      if (p < 1) throw ConfigError("bench: depths must be >= 1");
    for (const auto& o : roster)
      if (std::find(known_optimizers().begin(), known_optimizers().end(), o) == known_optimizers().end())
        throw ConfigError("bench: unknown optimizer '" + o + "'");
  }
};

struct TrainedModels {
  std::map<int, KdeModel> kde;        // by depth
  std::map<int, PolicyBundle> policy;  // by depth
};

struct BenchRecord {
  std::string instance;
  std::string group;
  int depth = 1;
  std::string optimizer;
  int attempt = 0;
  double best_value = 0.0;
  double best_exact = 0.0;
  std::size_t evals_used = 0;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

inline Suite filter_suite(const Suite& suite, int max_vertices) {
  if (max_vertices <= 0) return suite;
  Suite out;
  for (const auto& inst : suite)
    if (inst.graph.n() <= max_vertices) out.push_back(inst);
  return out;
}

/// Start point shared by every start-consuming optimizer in one attempt.
inline QaoaParams attempt_start(const BenchConfig& cfg, const std::string& instance, int depth, int attempt) {
  Rng rng = Rng(cfg.seed).substream("bench").substream(instance).substream("depth", depth).substream(
      "start", static_cast<std::uint64_t>(attempt));
  return QaoaParams::uniform(depth, rng);
}

struct CellResult {
  OptResult result;
  std::size_t trace_length = 0;  // metered evaluations recorded by the objective
};

/// Runs one benchmark cell on a fresh metered objective.
inline CellResult run_cell(const BenchConfig& cfg, const TrainedModels& models,
                           const std::shared_ptr<const CutDiagonal>& diag, std::size_t edges,
                           const std::string& instance, int depth, const std::string& optimizer, int attempt) {
  const Rng cell = Rng(cfg.seed).substream("bench").substream(instance).substream("depth", depth).substream(
      optimizer, static_cast<std::uint64_t>(attempt));
  const EvalMode mode = cfg.shots == 0 ? EvalMode::exact()
                                       : EvalMode::sampled(cfg.shots, cell.substream("shots").key());
  MeteredObjective obj(diag, edges, depth, mode, cfg.budget);
  const QaoaParams start = attempt_start(cfg, instance, depth, attempt);
  OptResult r;
  if (optimizer == "random") {
    r = random_search(obj, cell.substream("random").key());
  } else if (optimizer == "nm") {
    r = nelder_mead(obj, start);
  } else if (optimizer == "kde") {
    r = kde_optimize(obj, models.kde.at(depth), cell.substream("kde").key());
  } else if (optimizer == "rl") {
    r = rl_optimize(obj, models.policy.at(depth), start);
  } else {
    throw ConfigError("unknown optimizer '" + optimizer + "'");
  }
  if (obj.used() > cfg.budget || obj.trace().size() != obj.used())
    throw BudgetError("benchmark cell broke its evaluation budget");
  return {r, obj.trace().size()};
}

inline std::vector<BenchRecord> run_bench(const Suite& suite_in, const BenchConfig& cfg,
                                          const TrainedModels& models) {
  cfg.validate();
  for (const auto& o : cfg.roster)
    for (int p : cfg.depths) {
      if (o == "kde" && !models.kde.contains(p))
        throw ConfigError("bench: no KDE model for p = " + std::to_string(p));
      if (o == "rl" && !models.policy.contains(p))
        throw ConfigError("bench: no RL policy for p = " + std::to_string(p));
    }
  const Suite suite = filter_suite(suite_in, cfg.max_vertices);
  std::vector<std::shared_ptr<const CutDiagonal>> diags;
  for (const auto& inst : suite) diags.push_back(std::make_shared<const CutDiagonal>(cut_diagonal(inst.graph)));

  struct Cell {
    std::size_t inst;
    int depth;
    std::string optimizer;
    int attempt;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < suite.size(); ++i)
    for (int p : cfg.depths)
      for (const auto& o : cfg.roster)
        for (int a = 0; a < cfg.attempts; ++a) cells.push_back({i, p, o, a});

  std::vector<BenchRecord> records(cells.size());
  parallel_for(cells.size(), cfg.threads, [&](std::size_t c) {
    const Cell& cell = cells[c];
    const Instance& inst = suite[cell.inst];
    const OptResult r = run_cell(cfg, models, diags[cell.inst], inst.graph.edge_count(), inst.id(), cell.depth,
                                 cell.optimizer, cell.attempt).result;
    records[c] = {inst.id(), instance_group(inst.spec.cls), cell.depth, cell.optimizer, cell.attempt,
                  r.best_value, r.best_exact, r.evals_used};
  });
  return records;
}

// ---------------------------------------------------------------------------
// Metrics

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

using GroupDepthKey = std::tuple<std::string, int>;
using GroupDepthOptKey = std::tuple<std::string, int, std::string>;

struct MetricsTable {
  std::map<GroupDepthOptKey, double> tau;            // median over instances of E[tau]
  std::map<GroupDepthOptKey, double> gap_reduction;  // vs Nelder-Mead; +inf when tau = 1
  std::map<GroupDepthKey, double> eta;               // median of best-optimizer E[eta]
  std::map<GroupDepthOptKey, double> eta_by_optimizer;
  std::vector<std::string> warnings;

  friend bool operator==(const MetricsTable& a, const MetricsTable& b) {
    return a.tau == b.tau && a.gap_reduction == b.gap_reduction && a.eta == b.eta &&
           a.eta_by_optimizer == b.eta_by_optimizer && a.warnings == b.warnings;
  }
};

/// Per-(instance, depth) best known value over every optimizer and attempt.
inline std::map<std::tuple<std::string, int>, double> best_known(const std::vector<BenchRecord>& records) {
  std::map<std::tuple<std::string, int>, double> f_opt;
  for (const auto& r : records) {
    auto [it, fresh] = f_opt.try_emplace({r.instance, r.depth}, r.best_exact);
    if (!fresh) it->second = std::max(it->second, r.best_exact);
  }
  return f_opt;
}

struct InstanceRatio {
  std::string instance;
  std::string group;
  int depth;
  std::string optimizer;
  double value;  // mean over attempts
};

/// Expected optimality ratio per (instance, depth, optimizer); instances with
/// f_opt = 0 are dropped and reported in `warnings`.
inline std::vector<InstanceRatio> instance_optimality_ratios(const std::vector<BenchRecord>& records,
                                                              std::vector<std::string>* warnings = nullptr) {
  const auto f_opt = best_known(records);
  std::map<std::tuple<std::string, int, std::string>, std::pair<double, int>> acc;
  std::map<std::string, std::string> group_of;
  for (const auto& r : records) {
    const double fo = f_opt.at({r.instance, r.depth});
    if (!(fo > 0.0)) continue;
    auto& [sum, cnt] = acc[{r.instance, r.depth, r.optimizer}];
    sum += r.best_exact / fo;
    ++cnt;
    group_of[r.instance] = r.group;
  }
  if (warnings)
    for (const auto& [key, fo] : f_opt)
      if (!(fo > 0.0))
        warnings->push_back("instance " + std::get<0>(key) + " p=" + std::to_string(std::get<1>(key)) +
                            " excluded from optimality ratios: best known value is 0");
  std::vector<InstanceRatio> out;
  for (const auto& [key, sc] : acc)
    out.push_back({std::get<0>(key), group_of[std::get<0>(key)], std::get<1>(key), std::get<2>(key),
                   sc.first / sc.second});
  return out;
}

inline void optimality_ratios(const std::vector<BenchRecord>& records, MetricsTable& table) {
  std::map<GroupDepthOptKey, std::vector<double>> per_group;
  for (const auto& r : instance_optimality_ratios(records, &table.warnings))
    per_group[{r.group, r.depth, r.optimizer}].push_back(r.value);
  for (auto& [key, vals] : per_group) table.tau[key] = median(vals);
}

/// (1 - tau_NM) / (1 - tau_method) for every non-NM optimizer, per group and depth.
inline void gap_reduction(MetricsTable& table) {
  for (const auto& [key, tau] : table.tau) {
    const auto& [group, depth, opt] = key;
    if (opt == "nm") continue;
    const auto nm = table.tau.find({group, depth, "nm"});
    if (nm == table.tau.end()) continue;
    const double den = 1.0 - tau;
    table.gap_reduction[key] = den <= 0.0 ? std::numeric_limits<double>::infinity() : (1.0 - nm->second) / den;
  }
}

/// Maximum cut by id; nullopt when the instance is unknown or too large.
using CutOracle = std::function<std::optional<int>(const std::string&)>;

inline CutOracle suite_cut_oracle() {
  auto cache = std::make_shared<std::map<std::string, std::optional<int>>>();
  return [cache](const std::string& id) -> std::optional<int> {
    if (auto it = cache->find(id); it != cache->end()) return it->second;
    std::optional<int> v;
    if (auto inst = find_instance(id); inst && inst->graph.n() <= kMaxBruteForceVertices)
      v = max_cut_bruteforce(inst->graph).value;
    (*cache)[id] = v;
    return v;
  };
}

inline void approximation_ratios(const std::vector<BenchRecord>& records, const CutOracle& oracle,
                                 MetricsTable& table) {
  std::map<std::tuple<std::string, int, std::string>, std::pair<double, int>> acc;
  std::map<std::string, std::string> group_of;
  std::map<std::string, std::optional<int>> copt;
  for (const auto& r : records) {
    auto it = copt.find(r.instance);
    if (it == copt.end()) {
      it = copt.emplace(r.instance, oracle(r.instance)).first;
      if (!it->second || *it->second <= 0)
        table.warnings.push_back("instance " + r.instance + " excluded from approximation ratios: no cut oracle value");
    }
    if (!it->second || *it->second <= 0) continue;
    auto& [sum, cnt] = acc[{r.instance, r.depth, r.optimizer}];
    sum += r.best_exact / *it->second;
    ++cnt;
    group_of[r.instance] = r.group;
  }
  std::map<std::tuple<std::string, int>, double> best_per_cell;
  std::map<GroupDepthOptKey, std::vector<double>> by_opt;
  for (const auto& [key, sc] : acc) {
    const auto& [inst, depth, opt] = key;
    const double eta = sc.first / sc.second;
    by_opt[{group_of[inst], depth, opt}].push_back(eta);
    auto [b, fresh] = best_per_cell.try_emplace({inst, depth}, eta);
    if (!fresh) b->second = std::max(b->second, eta);
  }
  std::map<GroupDepthKey, std::vector<double>> by_group;
  for (const auto& [key, eta] : best_per_cell) by_group[{group_of[std::get<0>(key)], std::get<1>(key)}].push_back(eta);
  for (auto& [key, v] : by_group) table.eta[key] = median(v);
  for (auto& [key, v] : by_opt) table.eta_by_optimizer[key] = median(v);
}

inline MetricsTable compute_metrics(const std::vector<BenchRecord>& records, const CutOracle& oracle) {
  MetricsTable t;
  if (records.empty()) return t;
  optimality_ratios(records, t);
  gap_reduction(t);
  approximation_ratios(records, oracle, t);
  return t;
}

// ---------------------------------------------------------------------------
// Export / import

namespace detail {

inline std::string fmt_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw IoError("malformed number '" + s + "'");
  return v;
}

inline nlohmann::json json_double(double x) {
  if (std::isinf(x)) return fmt_double(x);
  return x;
}

inline double from_json_double(const nlohmann::json& j) {
  return j.is_string() ? parse_double(j.get<std::string>()) : j.get<double>();
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

}  // namespace detail

inline constexpr std::string_view kRecordsHeader =
    "instance,group,depth,optimizer,attempt,best_value,best_exact,evals_used";

inline void write_records_csv(std::ostream& os, const std::vector<BenchRecord>& records) {
  os << kRecordsHeader << '\n';
  for (const auto& r : records)
    os << r.instance << ',' << r.group << ',' << r.depth << ',' << r.optimizer << ',' << r.attempt << ','
       << detail::fmt_double(r.best_value) << ',' << detail::fmt_double(r.best_exact) << ',' << r.evals_used
       << '\n';
}

inline std::vector<BenchRecord> read_records_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kRecordsHeader) throw IoError("records file: unexpected header");
  std::vector<BenchRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw IoError("records file: expected 8 columns in '" + line + "'");
    out.push_back({f[0], f[1], std::stoi(f[2]), f[3], std::stoi(f[4]), detail::parse_double(f[5]),
                   detail::parse_double(f[6]), static_cast<std::size_t>(std::stoull(f[7]))});
  }
  return out;
}

inline nlohmann::json to_json(const MetricsTable& t) {
  nlohmann::json tau = nlohmann::json::array(), gap = nlohmann::json::array(), eta = nlohmann::json::array(),
                 eta_opt = nlohmann::json::array();
  for (const auto& [k, v] : t.tau)
    tau.push_back({{"group", std::get<0>(k)}, {"p", std::get<1>(k)}, {"optimizer", std::get<2>(k)}, {"value", v}});
  for (const auto& [k, v] : t.gap_reduction)
    gap.push_back({{"group", std::get<0>(k)},
                   {"p", std::get<1>(k)},
                   {"optimizer", std::get<2>(k)},
                   {"value", detail::json_double(v)}});
  for (const auto& [k, v] : t.eta) eta.push_back({{"group", std::get<0>(k)}, {"p", std::get<1>(k)}, {"value", v}});
  for (const auto& [k, v] : t.eta_by_optimizer)
    eta_opt.push_back(
        {{"group", std::get<0>(k)}, {"p", std::get<1>(k)}, {"optimizer", std::get<2>(k)}, {"value", v}});
  return {{"schema", kMetricsSchema},
          {"optimality_ratio", tau},
          {"gap_reduction_vs_nm", gap},
          {"approximation_ratio", eta},
          {"approximation_ratio_by_optimizer", eta_opt},
          {"warnings", t.warnings}};
}

inline MetricsTable metrics_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != kMetricsSchema) throw IoError("not a metrics file (schema mismatch)");
  MetricsTable t;
  auto key3 = [](const nlohmann::json& r) {
    return GroupDepthOptKey{r.at("group").get<std::string>(), r.at("p").get<int>(), r.at("optimizer").get<std::string>()};
  };
  for (const auto& r : j.at("optimality_ratio")) t.tau[key3(r)] = r.at("value").get<double>();
  for (const auto& r : j.at("gap_reduction_vs_nm")) t.gap_reduction[key3(r)] = detail::from_json_double(r.at("value"));
  for (const auto& r : j.at("approximation_ratio"))
    t.eta[{r.at("group").get<std::string>(), r.at("p").get<int>()}] = r.at("value").get<double>();
  for (const auto& r : j.at("approximation_ratio_by_optimizer")) t.eta_by_optimizer[key3(r)] = r.at("value").get<double>();
  t.warnings = j.at("warnings").get<std::vector<std::string>>();
  return t;
}

inline void write_metrics_csv(std::ostream& os, const MetricsTable& t) {
  os << "metric,group,depth,optimizer,value\n";
  for (const auto& [k, v] : t.tau)
    os << "optimality_ratio," << std::get<0>(k) << ',' << std::get<1>(k) << ',' << std::get<2>(k) << ','
       << detail::fmt_double(v) << '\n';
  for (const auto& [k, v] : t.gap_reduction)
    os << "gap_reduction_vs_nm," << std::get<0>(k) << ',' << std::get<1>(k) << ',' << std::get<2>(k) << ','
       << detail::fmt_double(v) << '\n';
  for (const auto& [k, v] : t.eta)
    os << "approximation_ratio," << std::get<0>(k) << ',' << std::get<1>(k) << ",best," << detail::fmt_double(v)
       << '\n';
  for (const auto& [k, v] : t.eta_by_optimizer)
    os << "approximation_ratio," << std::get<0>(k) << ',' << std::get<1>(k) << ',' << std::get<2>(k) << ','
       << detail::fmt_double(v) << '\n';
}

/// Long-format rows (group, depth, optimizer, attempt, tau) for boxplots.
inline void write_tau_long_csv(std::ostream& os, const std::vector<BenchRecord>& records) {
  os << "instance,group,depth,optimizer,attempt,tau\n";
  const auto f_opt = best_known(records);
  for (const auto& r : records) {
    const double fo = f_opt.at({r.instance, r.depth});
    if (!(fo > 0.0)) continue;
    os << r.instance << ',' << r.group << ',' << r.depth << ',' << r.optimizer << ',' << r.attempt << ','
       << detail::fmt_double(r.best_exact / fo) << '\n';
  }
}

/// Writes records.csv, metrics.json, metrics.csv and tau_long.csv into `dir`.
inline void export_report(const MetricsTable& table, const std::vector<BenchRecord>& records,
                          const std::filesystem::path& dir) {
  {
    auto os = detail::open_out(dir / "records.csv");
    write_records_csv(os, records);
  }
  {
    auto os = detail::open_out(dir / "metrics.json");
    os << to_json(table).dump(2) << '\n';
  }
  {
    auto os = detail::open_out(dir / "metrics.csv");
    write_metrics_csv(os, table);
  }
  {
    auto os = detail::open_out(dir / "tau_long.csv");
    write_tau_long_csv(os, records);
  }
}

}  // namespace qaoaml
