#pragma once

// Run configuration (plain-text `key = value` files) and run manifests.
//
// Config schema, one key per line, `#` starts a comment:
//   seed, threads                      integers
//   budget, attempts, shots            integers (shots = 0 means exact)
//   exact                              true/false
//   depths, roster                     comma lists, e.g. `1,2,4`, `random,nm,kde,rl`
//   max_vertices                       integer, 0 = whole suite
//   episode_length, history            RL episode length T and state history L
//   discount, clip, gae_lambda         reals
//   actor_lr, critic_lr, kl_stop       reals
//   max_passes, epochs, episodes       integers
//   noise_variance                     real
//   normalize_obs                      true/false, standardize policy inputs
//   reward_probes, starts, resolution  integers
//   bandwidth                          real, 0 = Scott's rule

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qaoaml/bench.hpp"
#include "qaoaml/errors.hpp"
#include "qaoaml/rl.hpp"
#include "qaoaml/rng.hpp"

namespace qaoaml {

inline constexpr std::string_view kToolVersion = "qaoaml 1.0.0";
inline constexpr std::string_view kManifestSchema = "qaoaml.manifest/v1";

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  BenchConfig bench;
  PpoConfig ppo = PpoConfig::desk();
  std::size_t starts = 1000;
  int resolution = 64;
  double bandwidth = 0.0;  // 0 = automatic
  bool exact = false;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (!is || !is.eof()) throw std::invalid_argument(v);
  if constexpr (std::is_unsigned_v<T>)
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument(v);
}

}  // namespace detail

using ConfigSetter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, ConfigSetter>& config_schema() {
  using detail::parse_number;
  static const std::map<std::string, ConfigSetter> schema{
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v); }},
      {"threads", [](RunConfig& c, const std::string& v) { c.threads = parse_number<unsigned>(v); }},
      {"budget", [](RunConfig& c, const std::string& v) { c.bench.budget = parse_number<std::size_t>(v); }},
      {"attempts", [](RunConfig& c, const std::string& v) { c.bench.attempts = parse_number<int>(v); }},
      {"shots", [](RunConfig& c, const std::string& v) { c.bench.shots = parse_number<std::uint64_t>(v); }},
      {"exact", [](RunConfig& c, const std::string& v) { c.exact = detail::parse_bool(v); }},
      {"depths",
       [](RunConfig& c, const std::string& v) {
         c.bench.depths.clear();
         for (const auto& s : detail::split_list(v)) c.bench.depths.push_back(parse_number<int>(s));
       }},
      {"roster", [](RunConfig& c, const std::string& v) { c.bench.roster = detail::split_list(v); }},
      {"max_vertices", [](RunConfig& c, const std::string& v) { c.bench.max_vertices = parse_number<int>(v); }},
      {"episode_length", [](RunConfig& c, const std::string& v) { c.ppo.episode_length = parse_number<int>(v); }},
      {"history", [](RunConfig& c, const std::string& v) { c.ppo.history = parse_number<int>(v); }},
      {"discount", [](RunConfig& c, const std::string& v) { c.ppo.discount = parse_number<double>(v); }},
      {"clip", [](RunConfig& c, const std::string& v) { c.ppo.clip = parse_number<double>(v); }},
      {"gae_lambda", [](RunConfig& c, const std::string& v) { c.ppo.gae_lambda = parse_number<double>(v); }},
      {"actor_lr", [](RunConfig& c, const std::string& v) { c.ppo.actor_lr = parse_number<double>(v); }},
      {"critic_lr", [](RunConfig& c, const std::string& v) { c.ppo.critic_lr = parse_number<double>(v); }},
      {"kl_stop", [](RunConfig& c, const std::string& v) { c.ppo.kl_stop = parse_number<double>(v); }},
      {"max_passes", [](RunConfig& c, const std::string& v) { c.ppo.max_passes = parse_number<int>(v); }},
      {"epochs", [](RunConfig& c, const std::string& v) { c.ppo.epochs = parse_number<int>(v); }},
      {"episodes", [](RunConfig& c, const std::string& v) { c.ppo.episodes_per_epoch = parse_number<int>(v); }},
      {"noise_variance", [](RunConfig& c, const std::string& v) { c.ppo.noise_variance = parse_number<double>(v); }},
      {"reward_probes", [](RunConfig& c, const std::string& v) { c.ppo.reward_probes = parse_number<int>(v); }},
      {"normalize_obs",
       [](RunConfig& c, const std::string& v) { c.ppo.normalize_observations = detail::parse_bool(v); }},
      {"starts", [](RunConfig& c, const std::string& v) { c.starts = parse_number<std::size_t>(v); }},
      {"resolution", [](RunConfig& c, const std::string& v) { c.resolution = parse_number<int>(v); }},
      {"bandwidth", [](RunConfig& c, const std::string& v) { c.bandwidth = parse_number<double>(v); }},
  };
  return schema;
}

/// Range checks shared by config files and command-line flags.
inline void validate(const RunConfig& c) {
  std::vector<std::string> bad;
  if (c.bench.budget < 1) bad.push_back("budget");
  if (c.bench.attempts < 1) bad.push_back("attempts");
  if (c.bench.depths.empty()) bad.push_back("depths");
  for (int p : c.bench.depths)
    if (p < 1) bad.push_back("depths");
  for (const auto& o : c.bench.roster)
    if (std::find(known_optimizers().begin(), known_optimizers().end(), o) == known_optimizers().end())
      bad.push_back("roster");
  if (c.ppo.episode_length < 1) bad.push_back("episode_length");
  if (c.ppo.history < 1) bad.push_back("history");
  if (!(c.ppo.discount > 0.0 && c.ppo.discount <= 1.0)) bad.push_back("discount");
  if (!(c.ppo.clip > 0.0 && c.ppo.clip < 1.0)) bad.push_back("clip");
  if (!(c.ppo.gae_lambda >= 0.0 && c.ppo.gae_lambda <= 1.0)) bad.push_back("gae_lambda");
  if (!(c.ppo.actor_lr > 0.0)) bad.push_back("actor_lr");
  if (!(c.ppo.critic_lr > 0.0)) bad.push_back("critic_lr");
  if (!(c.ppo.kl_stop > 0.0)) bad.push_back("kl_stop");
  if (c.ppo.max_passes < 1) bad.push_back("max_passes");
  if (c.ppo.epochs < 1) bad.push_back("epochs");
  if (c.ppo.episodes_per_epoch < 1) bad.push_back("episodes");
  if (!(c.ppo.noise_variance > 0.0)) bad.push_back("noise_variance");
  if (c.ppo.reward_probes < 1) bad.push_back("reward_probes");
  if (c.starts < 1) bad.push_back("starts");
  if (c.resolution < 2) bad.push_back("resolution");
  if (c.bandwidth < 0.0) bad.push_back("bandwidth");
  if (!bad.empty()) {
    std::string msg = "invalid configuration values:";
    for (const auto& k : bad) msg += " " + k;
    throw ConfigError(msg);
  }
}

/// Applies `key = value` lines on top of `base`. Every unknown key and every
/// value that fails to parse is collected before the error is raised.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::vector<std::string> unknown;
  std::vector<std::string> mistyped;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      mistyped.push_back("line " + std::to_string(lineno) + " (missing '=')");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto it = config_schema().find(key);
    if (it == config_schema().end()) {
      unknown.push_back(key);
      continue;
    }
    try {
      it->second(base, value);
    } catch (const std::invalid_argument&) {
      mistyped.push_back(key);
    }
  }
  if (!unknown.empty() || !mistyped.empty()) {
    std::string msg = "config validation failed;";
    if (!unknown.empty()) {
      msg += " unknown keys:";
      for (const auto& k : unknown) msg += " " + k;
      msg += ";";
    }
    if (!mistyped.empty()) {
      msg += " bad values:";
      for (const auto& k : mistyped) msg += " " + k;
    }
    throw ConfigError(msg);
  }
  validate(base);
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"threads", c.threads},
          {"budget", c.bench.budget},
          {"attempts", c.bench.attempts},
          {"shots", c.bench.shots},
          {"exact", c.exact},
          {"depths", c.bench.depths},
          {"roster", c.bench.roster},
          {"max_vertices", c.bench.max_vertices},
          {"episode_length", c.ppo.episode_length},
          {"history", c.ppo.history},
          {"discount", c.ppo.discount},
          {"clip", c.ppo.clip},
          {"gae_lambda", c.ppo.gae_lambda},
          {"actor_lr", c.ppo.actor_lr},
          {"critic_lr", c.ppo.critic_lr},
          {"kl_stop", c.ppo.kl_stop},
          {"max_passes", c.ppo.max_passes},
          {"epochs", c.ppo.epochs},
          {"episodes", c.ppo.episodes_per_epoch},
          {"noise_variance", c.ppo.noise_variance},
          {"reward_probes", c.ppo.reward_probes},
          {"normalize_obs", c.ppo.normalize_observations},
          {"starts", c.starts},
          {"resolution", c.resolution},
          {"bandwidth", c.bandwidth}};
}

// ---------------------------------------------------------------------------
// Manifests

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
inline std::string file_hash(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot read " + p.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  RunConfig config;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json in = nlohmann::json::array(), out = nlohmann::json::array();
    for (const auto& p : inputs) in.push_back({{"path", p.generic_string()}, {"fnv1a64", file_hash(p)}});
    for (const auto& p : outputs) out.push_back({{"path", p.generic_string()}, {"fnv1a64", file_hash(p)}});
    return {{"schema", kManifestSchema},
            {"tool_version", kToolVersion},
            {"rng", kRngVersion},
            {"command", command},
            {"args", args},
            {"config", qaoaml::to_json(config)},
            {"seeds", {{"root", config.seed}}},
            {"inputs", in},
            {"outputs", out}};
  }

  void write(const std::filesystem::path& path) const {
    auto os = detail::open_out(path);
    os << to_json().dump(2) << '\n';
  }
};

}  // namespace qaoaml
