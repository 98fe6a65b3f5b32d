#pragma once

// Command-line front end. dispatch() takes the arguments after the program
// name and returns the process exit code: 0 on success, 1 on a failed run or
// validation error, 2 on a usage error.
//
// Option values resolve as: built-in defaults, then --config file, then flags.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qaoaml/bench.hpp"
#include "qaoaml/config.hpp"
#include "qaoaml/errors.hpp"
#include "qaoaml/graph.hpp"
#include "qaoaml/kde.hpp"
#include "qaoaml/optim.hpp"
#include "qaoaml/qaoa.hpp"
#include "qaoaml/rl.hpp"

namespace qaoaml {

inline constexpr std::string_view kSstarSchema = "qaoaml.sstar/v1";

namespace detail {

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw IoError("cannot read " + p.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  auto os = open_out(p);
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed: " + p.string());
}

inline void check_schema(const nlohmann::json& j, std::string_view schema, const std::filesystem::path& p) {
  if (!j.is_object() || j.value("schema", std::string{}) != schema)
    throw IoError(p.string() + " is not a " + std::string(schema) + " file");
}

}  // namespace detail

/// S_* file for one depth: one entry per training instance.
inline nlohmann::json sstar_to_json(const std::string& suite, int depth,
                                    const std::vector<std::pair<std::string, MultistartResult>>& runs) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [id, r] : runs) {
    nlohmann::json admitted = nlohmann::json::array();
    for (const auto& x : r.admitted) admitted.push_back(x.flat());
    entries.push_back({{"instance_id", id}, {"p", depth}, {"admitted", admitted}, {"best_exact", r.best_exact}});
  }
  return {{"schema", kSstarSchema}, {"p", depth}, {"suite", suite}, {"entries", entries}};
}

/// Pooled admitted parameters of an S_* file.
inline std::vector<QaoaParams> sstar_pool(const nlohmann::json& j, int* depth = nullptr) {
  const int p = j.at("p").get<int>();
  if (depth) *depth = p;
  std::vector<QaoaParams> pool;
  for (const auto& e : j.at("entries"))
    for (const auto& x : e.at("admitted")) {
      const auto flat = x.get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(2 * p)) throw DomainError("S* entry has wrong dimension");
      pool.push_back(QaoaParams::from_flat(flat));
    }
  return pool;
}

inline Suite load_suite_arg(const std::string& arg) {
  if (arg == "train" || arg == "test") return build_suite(arg);
  return suite_from_json(detail::read_json(arg));
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;
  CLI::App app{"Learned and baseline optimizers for QAOA Max-Cut parameters", "qaoaml"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string config_path;
  auto* o_seed = app.add_option("--seed", seed, "Root seed for every random stream");
  auto* o_threads = app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  auto* o_exact = app.add_flag("--exact", "Evaluate all metered objectives exactly");
  app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);

  // gen
  auto* gen = app.add_subcommand("gen", "Write an instance suite");
  std::string gen_suite = "test";
  std::string gen_out;
  gen->add_option("--suite", gen_suite, "train or test")->check(CLI::IsMember({"train", "test"}));
  gen->add_option("--out", gen_out, "Output JSON path (stdout when omitted)");

  // landscape
  auto* land = app.add_subcommand("landscape", "Export a p = 1 energy landscape grid");
  std::string land_instance;
  int land_resolution = 64;
  std::uint64_t land_shots = 0;
  std::string land_out;
  land->add_option("--instance", land_instance, "Instance id, e.g. L-4 or R-8-0.5-s1")->required();
  auto* o_land_res = land->add_option("--resolution", land_resolution, "Points per axis");
  auto* o_land_shots = land->add_option("--shots", land_shots, "Shots per point");
  land->add_option("--out", land_out, "Output CSV path (stdout when omitted)");

  // build-sstar
  auto* sstar = app.add_subcommand("build-sstar", "Collect near-optimal parameters by multistart");
  std::string sstar_suite = "train";
  std::vector<int> sstar_depths;
  std::size_t sstar_starts = 0;
  std::string sstar_out;
  sstar->add_option("--suite", sstar_suite, "train, test or a suite JSON path");
  auto* o_sstar_p = sstar->add_option("--p", sstar_depths, "Depths, comma separated")->delimiter(',');
  auto* o_sstar_starts = sstar->add_option("--starts", sstar_starts, "Starts per instance");
  sstar->add_option("--out", sstar_out, "Output directory")->required();

  // build-kde
  auto* kde = app.add_subcommand("build-kde", "Fit a kernel density model to an S* file");
  std::string kde_sstar;
  double kde_bandwidth = 0.0;
  std::string kde_out;
  kde->add_option("--sstar", kde_sstar, "S* JSON file")->required()->check(CLI::ExistingFile);
  auto* o_kde_bw = kde->add_option("--bandwidth", kde_bandwidth, "Kernel bandwidth (Scott's rule when omitted)");
  kde->add_option("--out", kde_out, "Output model path")->required();

  // train-rl
  auto* trn = app.add_subcommand("train-rl", "Train the PPO policy");
  std::string trn_suite = "train";
  int trn_depth = 1;
  int trn_epochs = 0;
  int trn_episodes = 0;
  std::string trn_out;
  trn->add_option("--suite", trn_suite, "train, test or a suite JSON path");
  trn->add_option("--p", trn_depth, "Circuit depth")->check(CLI::PositiveNumber);
  auto* o_trn_epochs = trn->add_option("--epochs", trn_epochs, "Training epochs");
  auto* o_trn_episodes = trn->add_option("--episodes", trn_episodes, "Episodes per epoch");
  trn->add_option("--out", trn_out, "Output directory")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "Benchmark optimizers under a fixed evaluation budget");
  std::string bench_suite = "test";
  std::vector<std::string> bench_roster;
  std::vector<int> bench_depths;
  std::size_t bench_budget = 0;
  int bench_attempts = 0;
  std::uint64_t bench_shots = 0;
  int bench_max_n = 0;
  std::vector<std::string> bench_kde;
  std::vector<std::string> bench_policy;
  std::string bench_out;
  bench->add_option("--suite", bench_suite, "train, test or a suite JSON path");
  auto* o_roster = bench->add_option("--roster", bench_roster, "Optimizers: random,nm,kde,rl")->delimiter(',');
  auto* o_bench_p = bench->add_option("--p", bench_depths, "Depths, comma separated")->delimiter(',');
  auto* o_budget = bench->add_option("--budget", bench_budget, "Evaluations per attempt");
  auto* o_attempts = bench->add_option("--attempts", bench_attempts, "Attempts per cell");
  auto* o_shots = bench->add_option("--shots", bench_shots, "Shots per evaluation");
  auto* o_max_n = bench->add_option("--max-n", bench_max_n, "Largest vertex count kept");
  auto* o_full = bench->add_flag("--full", "Keep every instance of the suite");
  bench->add_option("--kde", bench_kde, "KDE model file (repeatable, one per depth)")->check(CLI::ExistingFile);
  bench->add_option("--policy", bench_policy, "Policy file (repeatable, one per depth)")->check(CLI::ExistingFile);
  bench->add_option("--out", bench_out, "Output directory")->required();
  o_full->excludes(o_max_n);

  // report
  auto* rep = app.add_subcommand("report", "Compute metrics from a records CSV");
  std::string rep_records;
  std::string rep_format = "json";
  std::string rep_out;
  rep->add_option("--records", rep_records, "records.csv from bench")->required()->check(CLI::ExistingFile);
  rep->add_option("--format", rep_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  rep->add_option("--out", rep_out, "Output path (stdout when omitted)");

  if (args.empty()) {
    err << app.help();
    return 2;
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (o_seed->count()) cfg.seed = seed;
    if (o_threads->count()) cfg.threads = threads;
    if (o_exact->count()) cfg.exact = true;
    if (o_land_res->count()) cfg.resolution = land_resolution;
    if (o_sstar_starts->count()) cfg.starts = sstar_starts;
    if (o_kde_bw->count()) cfg.bandwidth = kde_bandwidth;
    if (o_trn_epochs->count()) cfg.ppo.epochs = trn_epochs;
    if (o_trn_episodes->count()) cfg.ppo.episodes_per_epoch = trn_episodes;
    if (o_roster->count()) cfg.bench.roster = bench_roster;
    if (o_bench_p->count()) cfg.bench.depths = bench_depths;
    if (o_sstar_p->count()) cfg.bench.depths = sstar_depths;
    if (o_budget->count()) cfg.bench.budget = bench_budget;
    if (o_attempts->count()) cfg.bench.attempts = bench_attempts;
    if (o_shots->count()) cfg.bench.shots = bench_shots;
    if (o_max_n->count()) cfg.bench.max_vertices = bench_max_n;
    if (o_full->count()) cfg.bench.max_vertices = 0;
    validate(cfg);
    cfg.bench.seed = cfg.seed;
    cfg.bench.threads = cfg.threads;
    if (cfg.exact) cfg.bench.shots = 0;

    RunManifest manifest;
    manifest.args = args;
    manifest.config = cfg;
    const EvalMode train_mode = cfg.exact ? EvalMode::exact() : EvalMode::sampled(cfg.bench.shots, 0);

    if (*gen) {
      manifest.command = "gen";
      const nlohmann::json j = suite_to_json(build_suite(gen_suite));
      if (gen_out.empty()) {
        out << j.dump(2) << '\n';
        return 0;
      }
      detail::write_json(gen_out, j);
      manifest.outputs.push_back(gen_out);
      manifest.write(gen_out + ".manifest.json");
      out << "wrote " << j.at("instances").size() << " instances to " << gen_out << '\n';
    } else if (*land) {
      manifest.command = "landscape";
      const auto inst = find_instance(land_instance);
      if (!inst) throw ConfigError("unknown instance id '" + land_instance + "'");
      const std::uint64_t shots = o_land_shots->count() && !cfg.exact ? land_shots : 0;
      const auto grid = landscape_grid(inst->graph, 1, cfg.resolution, shots, cfg.seed);
      std::ostringstream csv;
      csv << "beta,gamma,mean,stderr\n";
      for (const auto& pt : grid)
        csv << detail::fmt_double(pt.beta) << ',' << detail::fmt_double(pt.gamma) << ','
            << detail::fmt_double(pt.value.mean) << ',' << detail::fmt_double(pt.value.std_error) << '\n';
      if (land_out.empty()) {
        out << csv.str();
        return 0;
      }
      {
        auto os = detail::open_out(land_out);
        os << csv.str();
      }
      manifest.outputs.push_back(land_out);
      manifest.write(land_out + ".manifest.json");
      out << "wrote " << grid.size() << " grid points to " << land_out << '\n';
    } else if (*sstar) {
      manifest.command = "build-sstar";
      const Suite suite = load_suite_arg(sstar_suite);
      if (sstar_suite != "train" && sstar_suite != "test") manifest.inputs.push_back(sstar_suite);
      const Rng root = Rng(cfg.seed).substream("sstar");
      for (int p : cfg.bench.depths) {
        std::vector<std::pair<std::string, MultistartResult>> runs;
        std::size_t admitted = 0;
        for (const auto& inst : suite) {
          const std::string id = inst.spec.id();
          runs.emplace_back(id, multistart_collect(inst.graph, p, cfg.starts,
                                                   root.substream(id).substream("p", p).key(), cfg.threads));
          admitted += runs.back().second.admitted.size();
        }
        const fs::path path = fs::path(sstar_out) / ("sstar_p" + std::to_string(p) + ".json");
        detail::write_json(path, sstar_to_json(sstar_suite, p, runs));
        manifest.outputs.push_back(path);
        out << "p=" << p << ": " << admitted << " admitted parameter vectors -> " << path.string() << '\n';
      }
      manifest.write(fs::path(sstar_out) / "manifest.json");
    } else if (*kde) {
      manifest.command = "build-kde";
      const nlohmann::json j = detail::read_json(kde_sstar);
      detail::check_schema(j, kSstarSchema, kde_sstar);
      int p = 1;
      const auto pool = sstar_pool(j, &p);
      const KdeModel model =
          kde_fit(pool, cfg.bandwidth > 0.0 ? std::optional<double>(cfg.bandwidth) : std::nullopt);
      detail::write_json(kde_out, to_json(model));
      manifest.inputs.push_back(kde_sstar);
      manifest.outputs.push_back(kde_out);
      manifest.write(kde_out + ".manifest.json");
      out << "p=" << p << ": " << model.centers.size() << " centers, bandwidth "
          << detail::fmt_double(model.bandwidth) << " -> " << kde_out << '\n';
    } else if (*trn) {
      manifest.command = "train-rl";
      const Suite suite = load_suite_arg(trn_suite);
      if (trn_suite != "train" && trn_suite != "test") manifest.inputs.push_back(trn_suite);
      const TrainResult r = train(suite, trn_depth, cfg.ppo, cfg.seed, train_mode, cfg.threads);
      const std::string tag = "_p" + std::to_string(trn_depth);
      const fs::path policy_path = fs::path(trn_out) / ("policy" + tag + ".json");
      const fs::path curve_path = fs::path(trn_out) / ("curve" + tag + ".csv");
      detail::write_json(policy_path, to_json(r.bundle));
      {
        auto os = detail::open_out(curve_path);
        os << "epoch,mean_discounted_reward\n";
        for (std::size_t e = 0; e < r.learning_curve.size(); ++e)
          os << e << ',' << detail::fmt_double(r.learning_curve[e]) << '\n';
      }
      manifest.outputs = {policy_path, curve_path};
      manifest.write(fs::path(trn_out) / "manifest.json");
      out << "trained " << r.learning_curve.size() << " epochs; final mean discounted reward "
          << detail::fmt_double(r.learning_curve.back()) << " -> " << policy_path.string() << '\n';
    } else if (*bench) {
      manifest.command = "bench";
      const Suite suite = load_suite_arg(bench_suite);
      if (bench_suite != "train" && bench_suite != "test") manifest.inputs.push_back(bench_suite);
      TrainedModels models;
      for (const auto& path : bench_kde) {
        const nlohmann::json j = detail::read_json(path);
        detail::check_schema(j, kKdeSchema, path);
        KdeModel m = kde_from_json(j);
        models.kde[m.depth] = std::move(m);
        manifest.inputs.push_back(path);
      }
      for (const auto& path : bench_policy) {
        const nlohmann::json j = detail::read_json(path);
        detail::check_schema(j, kPolicySchema, path);
        PolicyBundle b = policy_from_json(j);
        models.policy[b.depth] = std::move(b);
        manifest.inputs.push_back(path);
      }
      const auto records = run_bench(suite, cfg.bench, models);
      const MetricsTable table = compute_metrics(records, suite_cut_oracle());
      export_report(table, records, bench_out);
      for (const char* f : {"records.csv", "metrics.json", "metrics.csv", "tau_long.csv"})
        manifest.outputs.push_back(fs::path(bench_out) / f);
      manifest.write(fs::path(bench_out) / "manifest.json");
      for (const auto& w : table.warnings) err << "warning: " << w << '\n';
      out << records.size() << " records -> " << bench_out << '\n';
    } else if (*rep) {
      manifest.command = "report";
      std::ifstream is(rep_records);
      if (!is) throw IoError("cannot read " + rep_records);
      const auto records = read_records_csv(is);
      const MetricsTable table = compute_metrics(records, suite_cut_oracle());
      for (const auto& w : table.warnings) err << "warning: " << w << '\n';
      std::ostringstream body;
      if (rep_format == "json")
        body << to_json(table).dump(2) << '\n';
      else
        write_metrics_csv(body, table);
      if (rep_out.empty()) {
        out << body.str();
        return 0;
      }
      {
        auto os = detail::open_out(rep_out);
        os << body.str();
      }
      manifest.inputs.push_back(rep_records);
      manifest.outputs.push_back(rep_out);
      manifest.write(rep_out + ".manifest.json");
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace qaoaml
