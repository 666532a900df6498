#include <doctest.h>

#include <random>

#include "dvfsim/error.hpp"
#include "dvfsim/policies.hpp"

using namespace dvfsim;

namespace {

TaskRef F(int k) { return {TaskKind::Factorize, k, k, k}; }
TaskRef S(int i, int j, int k) { return {TaskKind::Solve, i, j, k}; }
TaskRef U1(int i, int j, int k) { return {TaskKind::Update1, i, j, k}; }
TaskRef U2(int i, int k) { return {TaskKind::Update2, i, i, k}; }

const GearTable& o2218() { return builtin_gear_table("opteron-2218"); }

}  // namespace

TEST_CASE("policy names round-trip") {
  CHECK(all_policies().size() == 7);
  for (auto k : all_policies()) CHECK(parse_policy(to_string(k)) == k);
  CHECK(parse_policy("cp-theo") == PolicyKind::CpTheo);
  CHECK_THROWS_AS(parse_policy("ondemand"), ConfigError);
}

TEST_CASE("PAST predictor") {
  PredictorState s;
  CHECK(past_predict(s, 10) == 10);
  CHECK(s.last_observed == 10);
  CHECK(past_predict(s, 5) == 5);
  CHECK(past_predict(s, 7) == 7);

  std::mt19937 rng(3);
  PredictorState a;
  double prev = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double w = std::uniform_real_distribution<double>(0, 100)(rng);
    const double prediction_before = a.last_predicted;
    CHECK(past_predict(a, w) == w);
    // the error of the previous prediction is the first difference
    if (i > 0) CHECK(w - prediction_before == w - prev);
    prev = w;
  }
  PredictorState c;
  for (int i = 0; i < 10; ++i) {
    const double pred = c.last_predicted;
    past_predict(c, 4.0);
    if (i > 0) CHECK(pred == 4.0);
  }
}

TEST_CASE("RELAX predictor") {
  PredictorState s{0, 10, 0.5};
  CHECK(relax_predict(s, 20) == 15);

  PredictorState one{0, 3, 1.0};
  PredictorState past;
  for (double w : {1.0, 9.0, 4.0, 4.0, 0.5}) CHECK(relax_predict(one, w) == past_predict(past, w));

  PredictorState frozen{0, 6, 0.0};
  for (double w : {1.0, 9.0, 4.0}) CHECK(relax_predict(frozen, w) == 6);

  PredictorState bad{0, 0, 1.5};
  CHECK_THROWS_AS(relax_predict(bad, 1), DomainError);
}

TEST_CASE("cp_decide") {
  const TaskGraph g = generate_graph(Factorization::Cholesky, 4);
  const CritPath cp = generate_crit_path(g);
  KernelCost cost;
  cost.cycles = {2'400'000'000, 2'400'000'000, 2'400'000'000, 2'400'000'000};  // 1 s at 2.4 GHz

  // on the critical path
  CHECK(cp_decide(g, cp, F(2), 5.0, o2218(), cost).gear() == 0);
  // off the path but feeding another block
  REQUIRE_FALSE(cp.contains(S(4, 1, 1)));
  REQUIRE(g.has_explicit_out(g.index_of(S(4, 1, 1))));
  CHECK(cp_decide(g, cp, S(4, 1, 1), 5.0, o2218(), cost).gear() == 0);

  // off-path, implicit-only successors: non-final update instance
  const TaskRef u = U1(4, 3, 1);
  REQUIRE_FALSE(cp.contains(u));
  REQUIRE_FALSE(g.has_explicit_out(g.index_of(u)));
  CHECK(cp_decide(g, cp, u, 0.0, o2218(), cost).gear() == 0);
  CHECK(cp_decide(g, cp, u, -1.0, o2218(), cost).gear() == 0);
  // 2.4 * 1 / (1 + 1/11) = 2.2 exactly available
  CHECK(cp_decide(g, cp, u, 1.0 / 11.0, o2218(), cost).gear() == 1);
  // n beyond f_h / f_l clamps to the slowest gear
  CHECK(cp_decide(g, cp, u, 10.0, o2218(), cost).gear() == 3);
  // 1.92 GHz: split between 2.2 and 1.8
  const PolicyDecision d = cp_decide(g, cp, u, 0.25, o2218(), cost);
  REQUIRE(d.is_split());
  CHECK(d.split().high == 1);
  CHECK(d.split().low == 2);
  CHECK(d.split().duration_high == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(d.split().duration_low == doctest::Approx(0.875).epsilon(1e-12));
}

TEST_CASE("sc_decide") {
  const GearTable& t = o2218();
  CHECK(sc_decide(Phase::Compute, ScLevel::Library, t)->gear() == 0);
  CHECK(sc_decide(Phase::Communicate, ScLevel::Library, t)->gear() == 3);
  CHECK(sc_decide(Phase::Compute, ScLevel::OsPredicted, t)->gear() == 0);
  CHECK(sc_decide(Phase::Communicate, ScLevel::OsPredicted, t)->gear() == 3);
  CHECK_FALSE(sc_decide(Phase::Idle, ScLevel::OsPredicted, t).has_value());
  CHECK_FALSE(sc_decide(Phase::Idle, ScLevel::OsPredicted, t, true).has_value());
  CHECK_FALSE(sc_decide(Phase::Idle, ScLevel::Library, t).has_value());
  CHECK(sc_decide(Phase::Idle, ScLevel::Library, t, true)->gear() == 3);
}

TEST_CASE("tx_step halts, races and notifies") {
  const TaskGraph g = generate_graph(Factorization::Cholesky, 4);
  const GearTable& t = o2218();
  std::vector<std::size_t> all(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) all[i] = i;
  TxState s = TxState::for_tasks(g, all);

  // no dependencies: race at once
  auto r = tx_step(s, g, t, tx::TaskReady{F(1)});
  CHECK(r.may_start);
  CHECK(r.decision.gear() == 0);

  // S(2,1) halts at f_l until F(1,1)'s flag arrives
  r = tx_step(s, g, t, tx::TaskReady{S(2, 1, 1)});
  CHECK_FALSE(r.may_start);
  CHECK(r.decision.gear() == 3);

  r = tx_step(s, g, t, tx::TaskFinished{F(1)});
  CHECK(r.decision.gear() == 3);
  REQUIRE(r.done_flags.size() == 3);
  CHECK(r.done_flags[0].to == S(2, 1, 1));
  CHECK(r.done_flags[1].to == S(3, 1, 1));
  CHECK(r.done_flags[2].to == S(4, 1, 1));

  r = tx_step(s, g, t, tx::DepDoneFlag{F(1), S(2, 1, 1)});
  CHECK(r.may_start);
  r = tx_step(s, g, t, tx::TaskReady{S(2, 1, 1)});
  CHECK(r.may_start);
  CHECK(r.decision.gear() == 0);
  CHECK(s.current_gear == 0);

  // duplicate or unknown flags are protocol errors
  CHECK_THROWS_AS(tx_step(s, g, t, tx::DepDoneFlag{F(1), S(2, 1, 1)}), ProtocolError);
  CHECK_THROWS_AS(tx_step(s, g, t, tx::DepDoneFlag{F(2), S(3, 1, 1)}), ProtocolError);
  CHECK_THROWS_AS(tx_step(s, g, t, tx::TaskFinished{F(1)}), ProtocolError);
  CHECK_THROWS_AS(tx_step(s, g, t, tx::TaskFinished{U2(2, 1)}), ProtocolError);

  TxState only_f = TxState::for_tasks(g, std::vector<std::size_t>{0});
  CHECK_THROWS_AS(tx_step(only_f, g, t, tx::TaskReady{S(2, 1, 1)}), ProtocolError);
}
