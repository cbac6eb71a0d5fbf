#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cachenet/tabular_q.hpp"

using namespace cachenet;

namespace {

// Dirichlet(1) rows via normalized exponentials; the last entry absorbs the
// rounding so every row sums to one.
TinyMdpSpec random_mdp(SeededRng& rng, std::size_t states, std::size_t actions, double gamma) {
  TinyMdpSpec m;
  m.states = states;
  m.actions = actions;
  m.gamma = gamma;
  m.transition.assign(states * actions * states, 0.0);
  m.cost = m.transition;
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t a = 0; a < actions; ++a) {
      std::vector<double> e(states);
      double tot = 0.0;
      for (auto& x : e) {
        x = -std::log(1.0 - rng.uniform01());
        tot += x;
      }
      double row = 0.0;
      for (std::size_t s2 = 0; s2 < states; ++s2) {
        const std::size_t i = (s * actions + a) * states + s2;
        m.transition[i] = s2 + 1 < states ? e[s2] / tot : 1.0 - row;
        row += m.transition[i];
        m.cost[i] = rng.uniform01();
      }
    }
  }
  return m;
}

TinyMdpSpec single_state(std::vector<double> costs, double gamma) {
  TinyMdpSpec m;
  m.states = 1;
  m.actions = costs.size();
  m.gamma = gamma;
  m.transition.assign(costs.size(), 1.0);
  m.cost = std::move(costs);
  return m;
}

}  // namespace

TEST(EpsilonGreedy, PureExploitation) {
  SeededRng rng(1);
  const std::vector<double> q{3, 1, 2};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(epsilon_greedy(q, 0.0, rng), 1u);
}

TEST(EpsilonGreedy, TieGoesToLowestAction) {
  SeededRng rng(2);
  EXPECT_EQ(epsilon_greedy(std::vector<double>{2, 2}, 0.0, rng), 0u);
}

TEST(EpsilonGreedy, FullExplorationIsUniform) {
  SeededRng rng(3);
  std::vector<int> hits(3, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++hits[epsilon_greedy(std::vector<double>{3, 1, 2}, 1.0, rng)];
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / n, 1.0 / 3.0, 0.02);
}

TEST(EpsilonGreedy, RejectsBadInput) {
  SeededRng rng(4);
  EXPECT_THROW(epsilon_greedy(std::vector<double>{}, 0.1, rng), InvalidInput);
  EXPECT_THROW(epsilon_greedy(std::vector<double>{1}, 1.5, rng), InvalidInput);
}

TEST(ExplorationSchedule, ConstantAndGlie) {
  const ExplorationSchedule c{ExplorationSchedule::Mode::constant, 0.4};
  const ExplorationSchedule g{ExplorationSchedule::Mode::glie, 0.4};
  EXPECT_EQ(c.at(1), 0.4);
  EXPECT_EQ(c.at(1000), 0.4);
  EXPECT_EQ(g.at(1), 1.0);
  EXPECT_EQ(g.at(4), 0.25);
}

TEST(QUpdate, FullOverwrite) {
  QTable q(2, 2);
  q_update(q, 0, 1, 5.0, 1, 1.0, 0.8);
  EXPECT_EQ(q.at(0, 1), 5.0);
}

TEST(QUpdate, PureDecay) {
  QTable q(2, 2);
  q.at(0, 0) = 4.0;
  q_update(q, 0, 0, 0.0, 1, 0.5, 0.8);
  EXPECT_EQ(q.at(0, 0), 2.0);
}

TEST(QUpdate, TouchesOnlyOneEntryBitwise) {
  SeededRng rng(5);
  QTable q(3, 3);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t a = 0; a < 3; ++a) q.at(s, a) = rng.normal();
  const QTable before = q;
  q_update(q, 1, 2, 0.7, 0, 0.3, 0.9);
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t a = 0; a < 3; ++a) {
      if (s == 1 && a == 2) {
        const double want = 0.7 * before.at(1, 2) + 0.3 * (0.7 + 0.9 * before.min_value(0));
        EXPECT_DOUBLE_EQ(q.at(s, a), want);
      } else {
        EXPECT_EQ(q.at(s, a), before.at(s, a));
      }
    }
  }
}

TEST(QUpdate, RejectsUnknownIdsAndBadRates) {
  QTable q(2, 2);
  EXPECT_THROW(q_update(q, 2, 0, 1.0, 0, 0.5, 0.5), InvalidInput);
  EXPECT_THROW(q_update(q, 0, 2, 1.0, 0, 0.5, 0.5), InvalidInput);
  EXPECT_THROW(q_update(q, 0, 0, 1.0, 3, 0.5, 0.5), InvalidInput);
  EXPECT_THROW(q_update(q, 0, 0, 1.0, 0, 0.0, 0.5), InvalidInput);
  EXPECT_THROW(q_update(q, 0, 0, 1.0, 0, 0.5, 1.0), InvalidInput);
}

TEST(ValueIteration, ZeroCostFixedPoint) {
  SeededRng rng(6);
  auto m = random_mdp(rng, 3, 2, 0.9);
  std::fill(m.cost.begin(), m.cost.end(), 0.0);
  const auto q = value_iteration(m, 1e-12);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t a = 0; a < 2; ++a) EXPECT_EQ(q.at(s, a), 0.0);
}

TEST(ValueIteration, SingleStateGeometricSeries) {
  const auto q = value_iteration(single_state({1.0, 2.0}, 0.5), 1e-13);
  EXPECT_NEAR(q.at(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(q.at(0, 1), 3.0, 1e-12);
}

TEST(ValueIteration, BellmanResidualBelowTolerance) {
  SeededRng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_mdp(rng, 4, 3, 0.8);
    const double tol = 1e-11;
    const auto q = value_iteration(m, tol);
    EXPECT_LT(bellman_backup(m, q).sup_distance(q), tol);
  }
}

TEST(ValueIteration, RejectsNonStochasticRows) {
  auto m = single_state({1.0, 1.0}, 0.5);
  m.transition[1] = 0.9;
  EXPECT_THROW(value_iteration(m, 1e-9), InvalidInput);
}

TEST(ValueIteration, GreedyPolicyInvariantToCostShift) {
  SeededRng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = random_mdp(rng, 4, 3, 0.8);
    const auto pi = greedy_policy(value_iteration(m, 1e-12));
    for (auto& c : m.cost) c += 7.5;
    EXPECT_EQ(greedy_policy(value_iteration(m, 1e-12)), pi);
  }
}

TEST(ValueIteration, MinOverActionsEqualsGreedyPolicyValue) {
  SeededRng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_mdp(rng, 4, 3, 0.8);
    const auto q = value_iteration(m, 1e-13);
    const auto v = policy_evaluation(m, greedy_policy(q), 1e-13);
    for (std::size_t s = 0; s < m.states; ++s) EXPECT_NEAR(q.min_value(s), v[s], 1e-10);
  }
}

TEST(PolicyEvaluation, ZeroCostsAndGeometricSeries) {
  SeededRng rng(10);
  auto m = random_mdp(rng, 3, 2, 0.7);
  std::fill(m.cost.begin(), m.cost.end(), 0.0);
  for (double x : policy_evaluation(m, {0, 1, 0}, 1e-12)) EXPECT_EQ(x, 0.0);
  EXPECT_NEAR(policy_evaluation(single_state({1.0}, 0.9), {0}, 1e-13)[0], 10.0, 1e-10);
}

TEST(PolicyEvaluation, RejectsBadPolicy) {
  const auto m = single_state({1.0, 2.0}, 0.5);
  EXPECT_THROW(policy_evaluation(m, {2}, 1e-9), InvalidInput);
  EXPECT_THROW(policy_evaluation(m, {0, 0}, 1e-9), InvalidInput);
}

// Rollout estimator of the discounted cost from each start state.
TEST(PolicyEvaluation, MatchesMonteCarloRollouts) {
  SeededRng rng(11);
  const auto m = random_mdp(rng, 3, 2, 0.8);
  const std::vector<std::size_t> pi{1, 0, 1};
  const auto v = policy_evaluation(m, pi, 1e-13);
  const int rollouts = 100000, horizon = 200;
  for (std::size_t start = 0; start < m.states; ++start) {
    double sum = 0.0, sumsq = 0.0;
    for (int k = 0; k < rollouts; ++k) {
      std::size_t s = start;
      double g = 0.0, disc = 1.0;
      for (int t = 0; t < horizon; ++t) {
        const std::size_t s2 = m.sample_next(s, pi[s], rng);
        g += disc * m.c(s, pi[s], s2);
        disc *= m.gamma;
        s = s2;
      }
      sum += g;
      sumsq += g * g;
    }
    const double mean = sum / rollouts;
    const double se = std::sqrt((sumsq / rollouts - mean * mean) / rollouts);
    EXPECT_NEAR(mean, v[start], 3.0 * se + 1e-12) << "state " << start;
  }
}

// With gamma = 0 and deterministic costs per (s, a), one visit pins Q exactly.
TEST(QLearning, MyopicCaseLearnsImmediateCosts) {
  SeededRng rng(12);
  auto m = random_mdp(rng, 3, 2, 0.0);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t s2 = 0; s2 < 3; ++s2) m.cost[(s * 2 + a) * 3 + s2] = static_cast<double>(s * 10 + a);
  const auto q = q_learning(m, 2000, {ExplorationSchedule::Mode::constant, 1.0}, rng);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t a = 0; a < 2; ++a) EXPECT_DOUBLE_EQ(q.at(s, a), static_cast<double>(s * 10 + a));
}

// Uniform exploration visits every pair often enough for the 1/(1+n) step
// sizes to settle; at gamma = 0.5 this is within 0.02 after 4e5 steps.
TEST(QLearning, UniformExplorationApproachesValueIteration) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SeededRng rng(seed);
    const auto m = random_mdp(rng, 3, 2, 0.5);
    const auto qstar = value_iteration(m, 1e-13);
    const auto q = q_learning(m, 400000, {ExplorationSchedule::Mode::constant, 1.0}, rng);
    EXPECT_LE(q.sup_distance(qstar), 0.02) << "seed " << seed;
  }
}

TEST(TabularLeaf, QuantizesByDoubling) {
  TabularQLeafPolicy p(4, 2, {4, 0.0, 0.5, 0.8}, SeededRng(1));
  EXPECT_EQ(p.level(0), 0u);
  EXPECT_EQ(p.level(1), 1u);
  EXPECT_EQ(p.level(2), 2u);
  EXPECT_EQ(p.level(3), 2u);
  EXPECT_EQ(p.level(4), 3u);
  EXPECT_EQ(p.level(1e6), 3u);
}

TEST(TabularLeaf, LearnsToCacheCostlyLevel) {
  TabularQLeafPolicy p(4, 1, {4, 0.0, 0.5, 0.0}, SeededRng(2));
  const StateVector s{0, 0, 9, 0};
  // keeping level-3 files out costs 9 per slot, caching them costs nothing
  const CacheAction out = CacheAction::empty(4, 1);
  CacheAction in = CacheAction::empty(4, 1);
  in.set(2, true);
  for (int i = 0; i < 20; ++i) {
    p.learn(s, out, CostVector{0, 0, 9, 0}, s);
    p.learn(s, in, CostVector{0, 0, 0, 0}, s);
  }
  EXPECT_TRUE(p.act(s).cached(2));
  EXPECT_EQ(p.evaluate(s), p.act(s));
}

TEST(TabularLeaf, ExplorationStaysWithinBudget) {
  TabularQLeafPolicy p(6, 2, {4, 1.0, 0.1, 0.8}, SeededRng(3));
  for (int i = 0; i < 200; ++i) EXPECT_EQ(p.act(StateVector(6)).count(), 2u);
}
