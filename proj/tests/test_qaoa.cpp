#include <gtest/gtest.h>

#include <numbers>

#include "qaoaml/dense_oracle.hpp"
#include "qaoaml/qaoa.hpp"

using namespace qaoaml;

namespace {

constexpr double kPi = std::numbers::pi;

double max_deviation(const StateVector& a, const StateVector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.amplitudes.size(); ++i)
    d = std::max(d, std::abs(a.amplitudes[i] - b.amplitudes[i]));
  return d;
}

Graph triangle() { return Graph(3, {{0, 1}, {1, 2}, {0, 2}}); }

}  // namespace

TEST(Params, WrapOnConstruction) {
  const QaoaParams x({kPi + 0.5}, {-3.0 * kPi + 0.25});
  EXPECT_NEAR(x.betas()[0], -kPi + 0.5, 1e-12);
  EXPECT_NEAR(x.gammas()[0], -kPi + 0.25, 1e-12);
  EXPECT_THROW(QaoaParams({0.1}, {}), DomainError);
  EXPECT_THROW(QaoaParams::from_flat(std::vector<double>{0.1, 0.2, 0.3}), DomainError);
  const QaoaParams y = QaoaParams::from_flat(std::vector<double>{0.1, 0.2, 0.3, 0.4});
  EXPECT_EQ(y.betas(), (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(y.flat(), (std::vector<double>{0.1, 0.2, 0.3, 0.4}));
}

TEST(CutDiagonal, Examples) {
  EXPECT_EQ(cut_diagonal(Graph(2, {{0, 1}})).values, (std::vector<std::uint16_t>{0, 1, 1, 0}));
  EXPECT_EQ(cut_diagonal(Graph(2, {})).values, (std::vector<std::uint16_t>{0, 0, 0, 0}));
  const CutDiagonal d = cut_diagonal(gen_ladder(2));
  EXPECT_EQ(d.max_value, 4);
  EXPECT_EQ(d.max_value, max_cut_bruteforce(gen_ladder(2)).value);
  // 4-cycle 0-1-3-2-0: the alternating assignments are z = 0b0110 and 0b1001.
  EXPECT_EQ(d.values[0b0110], 4);
  EXPECT_EQ(d.values[0b1001], 4);
}

TEST(CutDiagonal, DirectCountAndComplementSymmetry) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Graph g = gen_erdos_renyi(10, 0.5, s);
    const CutDiagonal d = cut_diagonal(g);
    const std::size_t mask = (std::size_t{1} << g.n()) - 1;
    for (std::size_t z = 0; z <= mask; ++z) {
      int c = 0;
      for (auto [u, v] : g.edges()) c += ((z >> u) & 1) != ((z >> v) & 1);
      ASSERT_EQ(d.values[z], c);
      ASSERT_EQ(d.values[z], d.values[~z & mask]);
    }
    EXPECT_LE(d.max_value, static_cast<int>(g.edge_count()));
  }
}

TEST(CutDiagonal, MaxMatchesBruteForce) {
  for (const auto& inst : build_train_set())
    EXPECT_EQ(cut_diagonal(inst.graph).max_value, max_cut_bruteforce(inst.graph).value) << inst.id();
}

TEST(Evolve, ZeroAnglesGiveUniformState) {
  const Graph g = gen_caveman(2, 4);
  const StateVector s = evolve(g, QaoaParams::zeros(2));
  const double amp = std::pow(2.0, -g.n() / 2.0);
  for (const auto& a : s.amplitudes) EXPECT_NEAR(std::abs(a - Complex(amp, 0)), 0.0, 1e-14);
}

TEST(Evolve, SingleEdgeMatchesDenseOracle) {
  const Graph k2(2, {{0, 1}});
  const QaoaParams x({0.3}, {0.7});
  EXPECT_LE(max_deviation(evolve(k2, x), dense_oracle(k2, x)), 1e-8);
}

TEST(Evolve, SingleEdgeClosedForm) {
  // For K2 at p = 1, f = 1/2 + sin(4 beta) sin(gamma) / 2 (bit 0 = spin +1,
  // cost = cut count). Obtained by expanding the two-qubit evolution by hand.
  const Graph k2(2, {{0, 1}});
  for (double b : {-1.2, 0.1, 0.3, 0.9})
    for (double c : {-2.0, 0.7, 1.5}) {
      const double f = expectation_exact(k2, QaoaParams({b}, {c})).mean;
      EXPECT_NEAR(f, 0.5 + 0.5 * std::sin(4 * b) * std::sin(c), 1e-12) << b << "," << c;
    }
}

TEST(Evolve, TriangleDepthTwoMatchesDenseOracle) {
  Rng rng(7);
  for (int t = 0; t < 5; ++t) {
    const QaoaParams x = QaoaParams::uniform(2, rng);
    EXPECT_LE(max_deviation(evolve(triangle(), x), dense_oracle(triangle(), x)), 1e-8);
  }
}

TEST(Evolve, AsymmetricGraphsMatchDenseOracle) {
  // Not invariant under qubit reversal, so a flipped bit order shows up.
  const Graph edge_and_isolated(3, {{0, 1}});
  Rng rng(8);
  const QaoaParams x1 = QaoaParams::uniform(1, rng);
  EXPECT_LE(max_deviation(evolve(edge_and_isolated, x1), dense_oracle(edge_and_isolated, x1)), 1e-8);
  for (int n = 4; n <= 6; ++n)
    for (int p : {1, 4}) {
      const Graph g = gen_erdos_renyi(n, 0.5, static_cast<std::uint64_t>(n));
      const QaoaParams x = QaoaParams::uniform(p, rng);
      EXPECT_LE(max_deviation(evolve(g, x), dense_oracle(g, x)), 1e-8) << n << " " << p;
    }
}

TEST(Evolve, UnitarityAcrossDepths) {
  Rng rng(3);
  for (int p : {1, 2, 4})
    for (const Graph& g : {gen_ladder(8), gen_erdos_renyi(14, 0.6, 2), gen_barbell(6)}) {
      const StateVector s = evolve(g, QaoaParams::uniform(p, rng));
      EXPECT_NEAR(s.norm2(), 1.0, 1e-10);
    }
}

TEST(Evolve, DenseOracleCap) {
  EXPECT_THROW(dense_oracle(gen_ladder(4), QaoaParams::zeros(1)), ResourceError);
  EXPECT_THROW(evolve(Graph(25, {}), QaoaParams::zeros(1)), ResourceError);
  EXPECT_LE(max_deviation(dense_oracle(triangle(), QaoaParams::zeros(1)), evolve(triangle(), QaoaParams::zeros(1))),
            1e-12);
}

TEST(Expectation, UniformStateIsHalfTheEdges) {
  for (const Graph& g : {gen_ladder(5), gen_barbell(4), gen_erdos_renyi(12, 0.7, 1)})
    for (int p : {1, 2, 4}) EXPECT_NEAR(expectation_exact(g, QaoaParams::zeros(p)).mean, g.edge_count() / 2.0, 1e-10);
}

TEST(Expectation, EmptyGraphIsZero) {
  Rng rng(1);
  const Graph g(5, {});
  for (int t = 0; t < 5; ++t) EXPECT_EQ(expectation_exact(g, QaoaParams::uniform(2, rng)).mean, 0.0);
  const EnergyValue s = expectation_sampled(g, QaoaParams::uniform(1, rng), 256, 4);
  EXPECT_EQ(s.mean, 0.0);
  EXPECT_EQ(s.std_error, 0.0);
}

TEST(Expectation, PinnedRandomGraphAgainstDenseBound) {
  // n = 8 exceeds the dense oracle; compare to the amplitude-weighted cut sum.
  const Graph g = gen_erdos_renyi(8, 0.5, 1);
  const QaoaParams x({0.35}, {-0.8});
  const StateVector s = evolve(g, x);
  double f = 0.0;
  for (std::size_t z = 0; z < s.amplitudes.size(); ++z) {
    int c = 0;
    for (auto [u, v] : g.edges()) c += ((z >> u) & 1) != ((z >> v) & 1);
    f += std::norm(s.amplitudes[z]) * c;
  }
  EXPECT_NEAR(expectation_exact(g, x).mean, f, 1e-12);
  EXPECT_LE(expectation_exact(g, x).mean, max_cut_bruteforce(g).value + 1e-9);
}

TEST(Expectation, ExactHasNoShots) {
  const EnergyValue e = expectation_exact(gen_ladder(3), QaoaParams::zeros(1));
  EXPECT_EQ(e.shots, 0u);
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(Expectation, Periodicity) {
  Rng rng(11);
  const Graph g = gen_erdos_renyi(8, 0.6, 2);
  for (int t = 0; t < 10; ++t) {
    const double b = rng.uniform(-kPi, kPi), c = rng.uniform(-kPi, kPi);
    const double f = expectation_exact(g, QaoaParams({b}, {c})).mean;
    EXPECT_NEAR(expectation_exact(g, QaoaParams({b}, {c + 2 * kPi})).mean, f, 1e-10);
    EXPECT_NEAR(expectation_exact(g, QaoaParams({b + kPi / 2}, {c})).mean, f, 1e-10);
    // Time reversal: (beta, gamma) -> (-beta, -gamma) conjugates the state.
    EXPECT_NEAR(expectation_exact(g, QaoaParams({-b}, {-c})).mean, f, 1e-10);
  }
}

TEST(Expectation, BitFlipSymmetryOfProbabilities) {
  Rng rng(5);
  const Graph g = gen_ladder(4);
  const StateVector s = evolve(g, QaoaParams::uniform(2, rng));
  const std::size_t mask = s.amplitudes.size() - 1;
  for (std::size_t z = 0; z <= mask; ++z)
    EXPECT_NEAR(std::norm(s.amplitudes[z]), std::norm(s.amplitudes[~z & mask]), 1e-12);
}

TEST(Sampled, DeterministicPerSeedAndValidatesShots) {
  const Graph g = gen_ladder(4);
  const QaoaParams x({0.4}, {0.9});
  const EnergyValue a = expectation_sampled(g, x, 1024, 99);
  const EnergyValue b = expectation_sampled(g, x, 1024, 99);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.shots, 1024u);
  EXPECT_NE(a.mean, expectation_sampled(g, x, 1024, 100).mean);
  EXPECT_THROW(expectation_sampled(g, x, 0, 1), DomainError);
}

TEST(Sampled, WithinFourStandardErrors) {
  const Graph g = gen_barbell(4);
  const QaoaParams x({0.3}, {-0.6});
  const double exact = expectation_exact(g, x).mean;
  int ok = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const EnergyValue e = expectation_sampled(g, x, 1024, s);
    ok += std::abs(e.mean - exact) <= 4 * e.std_error;
  }
  EXPECT_GE(ok, 99);
}

TEST(Sampled, StandardErrorScalesAsInverseRootShots) {
  const Graph g = gen_ladder(5);
  const QaoaParams x({0.5}, {1.1});
  double small = 0.0, large = 0.0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    small += expectation_sampled(g, x, 1024, s).std_error;
    large += expectation_sampled(g, x, 16384, s).std_error;
  }
  EXPECT_NEAR(small / large, 4.0, 0.5);
}

TEST(Landscape, ResolutionThreeCorners) {
  const auto grid = landscape_grid(gen_ladder(3), 1, 3);
  ASSERT_EQ(grid.size(), 9u);
  EXPECT_DOUBLE_EQ(grid[0].beta, -kPi);
  EXPECT_DOUBLE_EQ(grid[8].gamma, kPi);
  const double c = grid[0].value.mean;
  for (std::size_t i : {2u, 6u, 8u}) EXPECT_NEAR(grid[i].value.mean, c, 1e-10);
  for (std::size_t i = 0; i < 9; ++i) {
    const QaoaParams x({grid[i].beta}, {grid[i].gamma});
    EXPECT_NEAR(grid[i].value.mean, expectation_exact(gen_ladder(3), x).mean, 1e-12);
  }
}

TEST(Landscape, EmptyGraphAndErrors) {
  for (const auto& pt : landscape_grid(Graph(3, {}), 1, 4)) EXPECT_EQ(pt.value.mean, 0.0);
  EXPECT_THROW(landscape_grid(gen_ladder(3), 2, 4), DomainError);
  EXPECT_THROW(landscape_grid(gen_ladder(3), 1, 1), DomainError);
}

TEST(Landscape, SampledGridIsDeterministic) {
  const auto a = landscape_grid(gen_ladder(3), 1, 5, 128, 3);
  const auto b = landscape_grid(gen_ladder(3), 1, 5, 128, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].value.mean, b[i].value.mean);
    EXPECT_EQ(a[i].value.shots, 128u);
  }
}
