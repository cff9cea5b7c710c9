#include <gtest/gtest.h>

#include <cmath>

#include "evac/fire.hpp"
#include "support/oracles.hpp"

using namespace evac;

namespace {

ScenarioSpec two_rooms() {
  return parse_scenario(
      "name: pair\ncell_size: 0.5\ngrid:\n"
      "|#######|\n"
      "|#..#..#|\n"
      "|#..#..#|\n"
      "|##D#D##|\n"
      "|@.....E|\n"
      "exit out kind=main cells=4,6\n"
      "room west ignitable=true rect=1,1,2,2\n"
      "room east ignitable=true rect=1,4,2,5\n");
}

ScenarioSpec open_room(int n) {
  std::string doc = "name: open\ncell_size: 0.5\ngrid:\n";
  for (int r = 0; r < n; ++r) doc += "|" + std::string(static_cast<std::size_t>(n), r == n - 1 ? 'E' : '.') + "|\n";
  doc += "exit out kind=main cells=" + std::to_string(n - 1) + ",0\nroom hall ignitable=true rect=0,0," +
         std::to_string(n - 2) + "," + std::to_string(n - 1) + "\n";
  return parse_scenario_unchecked(doc);
}

}  // namespace

TEST(Ignite, SingleIgnitableRoomAlwaysChosen) {
  auto spec = two_rooms();
  spec.rooms[1].ignitable = false;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto s = ignite(spec, FireConfig{}, rng);
    EXPECT_EQ(s.ignition_room, 0);
    EXPECT_EQ(s.burning.size(), 1U);
    EXPECT_EQ(spec.grid.at(s.ignition_cell).room, 0);
    EXPECT_EQ(s.spread_count, 0);
  }
}

TEST(Ignite, RoomsChosenUniformly) {
  const auto spec = two_rooms();
  int west = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Rng rng(splitmix64(static_cast<std::uint64_t>(i)));
    west += ignite(spec, FireConfig{}, rng).ignition_room == 0 ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(west) / n, 0.5, 0.02);
}

TEST(Ignite, CellsWithinRoomChosenUniformly) {
  auto spec = two_rooms();
  spec.rooms[1].ignitable = false;
  std::map<CellPos, int> hits;
  const int n = 8000;
  for (int i = 0; i < n; ++i) {
    Rng rng(static_cast<std::uint64_t>(i) * 7919U);
    ++hits[ignite(spec, FireConfig{}, rng).ignition_cell];
  }
  ASSERT_EQ(hits.size(), 4U);
  for (const auto& [cell, count] : hits) EXPECT_NEAR(static_cast<double>(count) / n, 0.25, 0.02);
}

TEST(Ignite, FixedSeedIsDeterministic) {
  const auto spec = two_rooms();
  Rng a(42), b(42);
  EXPECT_EQ(ignite(spec, FireConfig{}, a, 1.5), ignite(spec, FireConfig{}, b, 1.5));
}

TEST(Ignite, NoIgnitableRoomIsConfigError) {
  auto spec = two_rooms();
  for (auto& r : spec.rooms) r.ignitable = false;
  Rng rng(1);
  EXPECT_THROW(ignite(spec, FireConfig{}, rng), FireConfigError);
  FireConfig bad;
  bad.spread_interval = 0.0;
  spec.rooms[0].ignitable = true;
  EXPECT_THROW(ignite(spec, bad, rng), FireConfigError);
}

TEST(FireStep, NothingBeforeOneInterval) {
  const auto spec = open_room(5);
  const auto s0 = ignite_at(spec, {2, 2}, 3.0);
  const auto s1 = fire_step(s0, spec, FireConfig{}, 4.99);
  EXPECT_EQ(s1, s0);
}

TEST(FireStep, OneIntervalBurnsVonNeumannNeighbourhood) {
  const auto spec = open_room(5);
  const auto s = fire_step(ignite_at(spec, {2, 2}, 0.0), spec, FireConfig{}, 2.0);
  EXPECT_EQ(s.spread_count, 1);
  ASSERT_EQ(s.burning.size(), 5U);
  for (const auto& p : std::vector<CellPos>{{2, 2}, {1, 2}, {3, 2}, {2, 1}, {2, 3}}) EXPECT_TRUE(s.burning.contains(p));
}

TEST(FireStep, TickClockStaysOnSchedule) {
  // Twenty accumulated 0.1 s ticks fall just short of 2.0.
  const auto spec = open_room(5);
  double clock = 0.0;
  for (int i = 0; i < 20; ++i) clock += 0.1;
  EXPECT_EQ(fire_step(ignite_at(spec, {2, 2}), spec, FireConfig{}, clock).spread_count, 1);
}

TEST(FireStep, WallsNeverBurn) {
  const auto spec = parse_scenario_unchecked(
      "name: w\ncell_size: 0.5\ngrid:\n|..#..|\n|..#..|\n|..#.E|\nexit out kind=main cells=2,4\n");
  auto s = ignite_at(spec, {1, 1});
  s = fire_step(s, spec, FireConfig{}, 1000.0);
  for (int r = 0; r < 3; ++r) EXPECT_FALSE(s.burning.contains({r, 2}));
  EXPECT_FALSE(s.burning.contains({0, 3}));
  EXPECT_EQ(s.burning.size(), 6U);
}

TEST(FireStep, RejectsNonPositiveInterval) {
  const auto spec = open_room(3);
  FireConfig bad;
  bad.spread_interval = -1.0;
  EXPECT_THROW(fire_step(ignite_at(spec, {0, 0}), spec, bad, 5.0), FireConfigError);
}

TEST(IsPassable, Examples) {
  const auto spec = two_rooms();
  auto s = ignite_at(spec, {1, 1});
  FireState none;
  EXPECT_TRUE(is_passable(spec, none, {4, 1}));
  EXPECT_FALSE(is_passable(spec, none, {0, 0}));
  s.burning.insert({3, 2});
  EXPECT_EQ(spec.grid.at({3, 2}).kind, CellKind::Door);
  EXPECT_FALSE(is_passable(spec, s, {3, 2}));
  EXPECT_TRUE(is_passable(spec, s, {4, 2}));
}

// Random scenarios with a random room, ignition seed, interval and tick
// sequence. The burning set is checked against a plain breadth-first ball
// around the ignition cell.
TEST(Property, FireSuite) {
  std::mt19937_64 gen(8675309);
  int cases = 0;
  while (cases < 1200) {
    const auto g = oracle::random_grid(gen, 12, 12, 0.25);
    const int rows = static_cast<int>(g.size()), cols = static_cast<int>(g[0].size());
    const int r0 = static_cast<int>(gen() % rows), c0 = static_cast<int>(gen() % cols);
    const int r1 = r0 + static_cast<int>(gen() % (rows - r0)), c1 = c0 + static_cast<int>(gen() % (cols - c0));
    const auto doc = oracle::document(g, nullptr,
                                      "room r ignitable=true rect=" + std::to_string(r0) + "," + std::to_string(c0) +
                                          "," + std::to_string(r1) + "," + std::to_string(c1) + "\n");
    const auto spec = parse_scenario_unchecked(doc);
    if (spec.rooms.empty() || spec.rooms[0].cells.empty()) continue;
    ++cases;

    FireConfig cfg;
    cfg.spread_interval = 0.5 + static_cast<double>(gen() % 40) / 10.0;
    cfg.seed = gen();
    const double dt = 0.1;
    Rng rng(cfg.seed);
    const auto start = ignite(spec, cfg, rng);
    ASSERT_TRUE(spec.grid.at(start.ignition_cell).room == 0);

    // Plain BFS over passable cells (fire is not stopped by exits).
    std::vector<std::vector<int>> dist(rows, std::vector<int>(cols, -1));
    std::deque<CellPos> q{start.ignition_cell};
    dist[start.ignition_cell.row][start.ignition_cell.col] = 0;
    while (!q.empty()) {
      const auto u = q.front();
      q.pop_front();
      for (const auto& d : oracle::kDelta) {
        const CellPos v{u.row + d.row, u.col + d.col};
        if (!oracle::passable(g, v) || dist[v.row][v.col] >= 0) continue;
        dist[v.row][v.col] = dist[u.row][u.col] + 1;
        q.push_back(v);
      }
    }

    auto s = start;
    auto twin = start;
    Rng rng2(cfg.seed);
    ASSERT_EQ(ignite(spec, cfg, rng2), start) << "seed determinism";
    double clock = 0.0;
    const int ticks = 50 + static_cast<int>(gen() % 200);
    for (int t = 0; t < ticks; ++t) {
      clock += dt;
      const auto next = fire_step(s, spec, cfg, clock);
      twin = fire_step(twin, spec, cfg, clock);
      ASSERT_EQ(next, twin);
      ASSERT_TRUE(s.burning.is_subset_of(next.burning)) << "monotone";
      const int k = static_cast<int>(std::floor(clock / cfg.spread_interval + 1e-9));
      ASSERT_EQ(next.spread_count, k);
      for (const auto& p : next.burning.cells()) {
        ASSERT_TRUE(oracle::passable(g, p)) << "containment";
        ASSERT_LE(manhattan(p, start.ignition_cell), k) << "radius";
        ASSERT_GE(dist[p.row][p.col], 0);
        ASSERT_LE(dist[p.row][p.col], k);
      }
      std::size_t expected = 0;
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) expected += dist[r][c] >= 0 && dist[r][c] <= k ? 1 : 0;
      }
      ASSERT_EQ(next.burning.size(), expected);
      s = next;
    }
    // One-shot evaluation equals the tick-by-tick result.
    ASSERT_EQ(fire_step(start, spec, cfg, clock).burning, s.burning);
  }
  EXPECT_GE(cases, 1000);
}
