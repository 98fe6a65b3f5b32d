#pragma once

// Max-Cut instances: unweighted simple graphs, the four instance generators,
// the train/test suites and an exhaustive Max-Cut solver.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qaoaml/errors.hpp"
#include "qaoaml/rng.hpp"

namespace qaoaml {

using Edge = std::pair<int, int>;

/// Undirected unweighted simple graph. Edges are stored with u < v, sorted.
class Graph {
 public:
  Graph() = default;

  Graph(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    if (n_ < 1) throw DomainError("graph needs at least one vertex");
    for (auto& [u, v] : edges_) {
      if (u > v) std::swap(u, v);
      if (u == v) throw DomainError("self-loop on vertex " + std::to_string(u));
      if (u < 0 || v >= n_) throw DomainError("edge endpoint out of range");
    }
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
      throw DomainError("duplicate edge");
  }

  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }
  [[nodiscard]] std::size_t edge_count() const noexcept { return edges_.size(); }

  [[nodiscard]] std::vector<int> degrees() const {
    std::vector<int> d(n_, 0);
    for (auto [u, v] : edges_) ++d[u], ++d[v];
    return d;
  }

  [[nodiscard]] bool connected() const {
    std::vector<std::vector<int>> adj(n_);
    for (auto [u, v] : edges_) adj[u].push_back(v), adj[v].push_back(u);
    std::vector<bool> seen(n_, false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    int count = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : adj[u])
        if (!seen[v]) seen[v] = true, ++count, q.push(v);
    }
    return count == n_;
  }

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
};

// ---------------------------------------------------------------------------
// Generators

inline Graph gen_erdos_renyi(int n, double edge_prob, std::uint64_t seed) {
  if (n < 2) throw DomainError("erdos-renyi: n must be >= 2");
  if (!(edge_prob >= 0.0 && edge_prob <= 1.0))
    throw DomainError("erdos-renyi: edge probability must lie in [0, 1]");
  // Pairs are visited in lexicographic (u, v) order, one uniform draw each.
  Rng rng = Rng(seed).substream("erdos-renyi");
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform() < edge_prob) edges.emplace_back(u, v);
  return Graph(n, std::move(edges));
}

/// Two paths of `length` vertices (0..L-1 and L..2L-1) joined by L rungs.
inline Graph gen_ladder(int length) {
  if (length < 2) throw DomainError("ladder: length must be >= 2");
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < length; ++i) {
    edges.emplace_back(i, i + 1);
    edges.emplace_back(length + i, length + i + 1);
  }
  for (int i = 0; i < length; ++i) edges.emplace_back(i, length + i);
  return Graph(2 * length, std::move(edges));
}

/// Two copies of K_k bridged by the edge (k-1, k).
inline Graph gen_barbell(int clique) {
  if (clique < 3) throw DomainError("barbell: clique size must be >= 3");
  std::vector<Edge> edges;
  for (int base : {0, clique})
    for (int i = 0; i < clique; ++i)
      for (int j = i + 1; j < clique; ++j) edges.emplace_back(base + i, base + j);
  edges.emplace_back(clique - 1, clique);
  return Graph(2 * clique, std::move(edges));
}

/// Connected caveman graph: `cliques` copies of K_k on consecutive vertex
/// blocks; in each block the edge (s, s+1) is replaced by (s, s-1 mod n),
/// which links the blocks into a ring and keeps the edge count.
inline Graph gen_caveman(int cliques, int clique_size) {
  if (cliques < 2) throw DomainError("caveman: need at least 2 cliques");
  if (clique_size < 3) throw DomainError("caveman: clique size must be >= 3");
  const int n = cliques * clique_size;
  std::set<Edge> edges;
  for (int s = 0; s < n; s += clique_size)
    for (int i = 0; i < clique_size; ++i)
      for (int j = i + 1; j < clique_size; ++j) edges.emplace(s + i, s + j);
  for (int s = 0; s < n; s += clique_size) {
    edges.erase({s, s + 1});
    const int prev = (s - 1 + n) % n;
    edges.emplace(std::min(s, prev), std::max(s, prev));
  }
  return Graph(n, {edges.begin(), edges.end()});
}

// ---------------------------------------------------------------------------
// Instance suites

enum class GraphClass { random, ladder, barbell, caveman };

inline std::string to_string(GraphClass c) {
  switch (c) {
    case GraphClass::random: return "random";
    case GraphClass::ladder: return "ladder";
    case GraphClass::barbell: return "barbell";
    case GraphClass::caveman: return "caveman";
  }
  return "?";
}

inline GraphClass graph_class_from_string(const std::string& s) {
  if (s == "random") return GraphClass::random;
  if (s == "ladder") return GraphClass::ladder;
  if (s == "barbell") return GraphClass::barbell;
  if (s == "caveman") return GraphClass::caveman;
  throw DomainError("unknown graph class '" + s + "'");
}

/// Generator recipe. `a`/`b` carry the class parameters:
/// random (n_R, -), ladder (n_L, -), barbell (n_B, -), caveman (n_C, n_k).
struct InstanceSpec {
  GraphClass cls = GraphClass::random;
  int a = 0;
  int b = 0;
  double edge_prob = 0.0;             // random only
  std::optional<std::uint64_t> seed;  // random only

  [[nodiscard]] std::string id() const {
    std::ostringstream os;
    switch (cls) {
      case GraphClass::random:
        os << "R-" << a << "-" << edge_prob << "-s" << seed.value_or(0);
        break;
      case GraphClass::ladder: os << "L-" << a; break;
      case GraphClass::barbell: os << "B-" << a; break;
      case GraphClass::caveman: os << "C-" << a << "-" << b; break;
    }
    return os.str();
  }

  [[nodiscard]] Graph build() const {
    if ((cls == GraphClass::random) != seed.has_value())
      throw DomainError("instance spec: seed must be given iff class is random");
    switch (cls) {
      case GraphClass::random: return gen_erdos_renyi(a, edge_prob, *seed);
      case GraphClass::ladder: return gen_ladder(a);
      case GraphClass::barbell: return gen_barbell(a);
      case GraphClass::caveman: return gen_caveman(a, b);
    }
    throw DomainError("unreachable graph class");
  }

  friend bool operator==(const InstanceSpec&, const InstanceSpec&) = default;
};

struct Instance {
  InstanceSpec spec;
  Graph graph;
  [[nodiscard]] std::string id() const { return spec.id(); }
};

using Suite = std::vector<Instance>;

inline constexpr double kEdgeProbs[] = {0.5, 0.6, 0.7, 0.8};

/// Seeds of the four random training graphs, one per edge probability.
inline constexpr std::uint64_t kTrainSeeds[] = {11, 12, 13, 14};

namespace detail {
inline Instance make_instance(InstanceSpec s) {
  Graph g = s.build();
  return {std::move(s), std::move(g)};
}
}  // namespace detail

inline Suite build_train_set() {
  Suite out;
  for (int i = 0; i < 4; ++i)
    out.push_back(detail::make_instance(
        {GraphClass::random, 8, 0, kEdgeProbs[i], kTrainSeeds[i]}));
  out.push_back(detail::make_instance({GraphClass::ladder, 4, 0, 0.0, std::nullopt}));
  out.push_back(detail::make_instance({GraphClass::barbell, 4, 0, 0.0, std::nullopt}));
  out.push_back(detail::make_instance({GraphClass::caveman, 2, 4, 0.0, std::nullopt}));
  return out;
}

inline Suite build_test_set() {
  Suite out;
  for (int n : {8, 12, 16, 20})
    for (double ep : kEdgeProbs)
      for (std::uint64_t seed : {1, 2, 3, 4})
        out.push_back(detail::make_instance({GraphClass::random, n, 0, ep, seed}));
  for (int len : {2, 3, 5, 6, 7, 8, 9, 10, 11})
    out.push_back(detail::make_instance({GraphClass::ladder, len, 0, 0.0, std::nullopt}));
  for (int k : {3, 5, 6, 7, 8, 9, 10, 11})
    out.push_back(detail::make_instance({GraphClass::barbell, k, 0, 0.0, std::nullopt}));
  for (int c : {3, 4, 5})
    out.push_back(detail::make_instance({GraphClass::caveman, c, 4, 0.0, std::nullopt}));
  for (int c : {3, 5, 7})
    out.push_back(detail::make_instance({GraphClass::caveman, c, 3, 0.0, std::nullopt}));
  for (int k : {3, 5, 6, 7, 8, 9, 10})
    out.push_back(detail::make_instance({GraphClass::caveman, 2, k, 0.0, std::nullopt}));
  return out;
}

inline Suite build_suite(const std::string& name) {
  if (name == "train") return build_train_set();
  if (name == "test") return build_test_set();
  throw DomainError("unknown suite '" + name + "' (expected train or test)");
}

/// Looks an instance id up in the train and test suites.
inline std::optional<Instance> find_instance(const std::string& id) {
  for (const Suite& s : {build_train_set(), build_test_set()})
    for (const Instance& inst : s)
      if (inst.id() == id) return inst;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Suite manifest (JSON)

inline constexpr std::string_view kSuiteSchema = "qaoaml.suite/v1";

inline nlohmann::json to_json(const Instance& inst) {
  nlohmann::json params;
  const InstanceSpec& s = inst.spec;
  switch (s.cls) {
    case GraphClass::random: params = {{"n_R", s.a}, {"e_p", s.edge_prob}}; break;
    case GraphClass::ladder: params = {{"n_L", s.a}}; break;
    case GraphClass::barbell: params = {{"n_B", s.a}}; break;
    case GraphClass::caveman: params = {{"n_C", s.a}, {"n_k", s.b}}; break;
  }
  nlohmann::json edges = nlohmann::json::array();
  for (auto [u, v] : inst.graph.edges()) edges.push_back({u, v});
  return {{"id", inst.id()},
          {"class", to_string(s.cls)},
          {"params", params},
          {"seed", s.seed ? nlohmann::json(*s.seed) : nlohmann::json(nullptr)},
          {"n", inst.graph.n()},
          {"edges", edges}};
}

inline Instance instance_from_json(const nlohmann::json& j) {
  InstanceSpec s;
  s.cls = graph_class_from_string(j.at("class").get<std::string>());
  const auto& p = j.at("params");
  switch (s.cls) {
    case GraphClass::random:
      s.a = p.at("n_R").get<int>();
      s.edge_prob = p.at("e_p").get<double>();
      break;
    case GraphClass::ladder: s.a = p.at("n_L").get<int>(); break;
    case GraphClass::barbell: s.a = p.at("n_B").get<int>(); break;
    case GraphClass::caveman:
      s.a = p.at("n_C").get<int>();
      s.b = p.at("n_k").get<int>();
      break;
  }
  if (!j.at("seed").is_null()) s.seed = j.at("seed").get<std::uint64_t>();
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  return {s, Graph(j.at("n").get<int>(), std::move(edges))};
}

inline nlohmann::json suite_to_json(const Suite& suite) {
  nlohmann::json list = nlohmann::json::array();
  for (const Instance& inst : suite) list.push_back(to_json(inst));
  return {{"schema", kSuiteSchema}, {"rng", kRngVersion}, {"instances", list}};
}

inline Suite suite_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != kSuiteSchema)
    throw DomainError("not a suite manifest (schema mismatch)");
  Suite out;
  for (const auto& item : j.at("instances")) out.push_back(instance_from_json(item));
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive Max-Cut

inline constexpr int kMaxBruteForceVertices = 24;

struct CutResult {
  int value = 0;
  std::vector<int> assignment;  // +1 for bit 0, -1 for bit 1
};

/// Number of edges whose endpoints carry different spins.
inline int cut_value(const Graph& g, const std::vector<int>& spins) {
  int c = 0;
  for (auto [u, v] : g.edges()) c += spins[u] != spins[v];
  return c;
}

/// Exact Max-Cut by Gray-code enumeration of the 2^(n-1) assignments with
/// vertex 0 fixed to bit 0. Ties go to the smallest bitstring.
inline CutResult max_cut_bruteforce(const Graph& g) {
  const int n = g.n();
  if (n > kMaxBruteForceVertices)
    throw ResourceError("brute-force max-cut capped at " +
                        std::to_string(kMaxBruteForceVertices) + " vertices");
  std::vector<std::uint32_t> adj(n, 0);
  for (auto [u, v] : g.edges()) adj[u] |= 1u << v, adj[v] |= 1u << u;

  std::uint32_t z = 0;
  int cut = 0;
  int best = 0;
  std::uint32_t best_z = 0;
  const std::uint64_t steps = n > 1 ? (1ull << (n - 1)) : 1;
  for (std::uint64_t k = 1; k < steps; ++k) {
    // Gray code over vertices 1..n-1: flip vertex 1 + ctz(k).
    const int v = 1 + std::countr_zero(k);
    const std::uint32_t bit = 1u << v;
    const int same = std::popcount(adj[v] & ((z & bit) ? z : ~z));
    const int diff = std::popcount(adj[v]) - same;
    cut += same - diff;
    z ^= bit;
    if (cut > best || (cut == best && z < best_z)) best = cut, best_z = z;
  }
  CutResult r;
  r.value = best;
  r.assignment.resize(n);
  for (int i = 0; i < n; ++i) r.assignment[i] = (best_z >> i) & 1u ? -1 : 1;
  return r;
}

}  // namespace qaoaml
