#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "dvfsim/costmodel.hpp"
#include "dvfsim/error.hpp"
#include "oracles.hpp"

using namespace dvfsim;

TEST_CASE("task duration is cycles over frequency") {
  KernelCost k;
  k.cycles = {2'400'000'000, 1, 1, 1};
  const TaskRef f{TaskKind::Factorize, 1, 1, 1};
  CHECK(task_duration(k, f, 2.4) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(task_duration(k, f, 1.2) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(task_duration(k, f, 0.0), DomainError);

  const KernelCost c200 = KernelCost::dense(Factorization::Cholesky, 200);
  CHECK(c200.cycles_for(TaskKind::Factorize) == 2'666'667);
  CHECK(task_duration(c200, f, 1.0) == doctest::Approx(2.667e-3).epsilon(1e-3));

  for (const auto& [key, t] : builtin_gear_tables())
    for (const auto& g : t.gears())
      CHECK(task_duration(c200, f, t.f_high()) * t.f_high() == doctest::Approx(task_duration(c200, f, g.ghz) * g.ghz));
}

TEST_CASE("dense kernel counts agree with naive loop nests") {
  for (int b = 1; b <= 8; ++b) {
    CAPTURE(b);
    const KernelCost k = KernelCost::dense(Factorization::Cholesky, b);
    const std::int64_t slack = 2LL * b * b + b;  // lower-order terms
    CHECK(std::llabs(oracle::potrf_flops(b) - k.cycles_for(TaskKind::Factorize)) <= slack);
    CHECK(std::llabs(oracle::trsm_flops(b) - k.cycles_for(TaskKind::Solve)) <= slack);
    CHECK(oracle::gemm_flops(b) == k.cycles_for(TaskKind::Update1));
    CHECK(std::llabs(oracle::syrk_flops(b) - k.cycles_for(TaskKind::Update2)) <= slack);
  }
  // the leading terms dominate as blocks grow
  const int b = 64;
  const KernelCost k = KernelCost::dense(Factorization::Cholesky, b);
  CHECK(static_cast<double>(oracle::potrf_flops(b)) / k.cycles_for(TaskKind::Factorize) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("LU and QR counts") {
  const KernelCost lu = KernelCost::dense(Factorization::LU, 30);
  CHECK(lu.cycles == std::array<std::int64_t, 4>{18000, 27000, 54000, 54000});
  const KernelCost qr = KernelCost::dense(Factorization::QR, 30);
  CHECK(qr.cycles == std::array<std::int64_t, 4>{54000, 27000, 54000, 54000});
  for (auto f : {Factorization::Cholesky, Factorization::LU, Factorization::QR}) {
    const KernelCost k = KernelCost::dense(f, 1);
    for (auto c : k.cycles) CHECK(c >= 1);
    CHECK(KernelCost::dense(f, 16).cycles_for(TaskKind::Update1) >= KernelCost::dense(f, 16).cycles_for(TaskKind::Update2));
  }
  CHECK_THROWS_AS(KernelCost::dense(Factorization::LU, 0), DomainError);
}

TEST_CASE("message duration") {
  const GearTable& t = builtin_gear_table("opteron-2218");
  CommModel c;
  c.cpu_bound_fraction = 0.0;
  CHECK(message_duration(c, 1000, t.f_high(), t) == message_duration(c, 1000, t.f_low(), t));

  c.latency_startup = 1e-5;
  c.cpu_bound_fraction = 1.0;
  CHECK(message_duration(c, 0, t.f_high() / 2, t) == doctest::Approx(2e-5).epsilon(1e-12));

  CommModel d;
  CHECK(CommModel::block_bytes(128) == 131072.0);
  const double transfer = message_duration(d, CommModel::block_bytes(128), t.f_high(), t) - d.latency_startup;
  CHECK(transfer == doctest::Approx(1.048576e-3).epsilon(1e-9));

  // non-increasing in f, non-decreasing in bytes
  double prev = 0.0;
  for (const auto& g : t.gears()) {
    const double m = message_duration(d, 4096, g.ghz, t);
    CHECK(m >= prev);
    prev = m;
  }
  CHECK(message_duration(d, 10, 2.0, t) <= message_duration(d, 11, 2.0, t));
  CHECK_THROWS_AS(message_duration(d, -1, 2.0, t), DomainError);

  CHECK(doneflag_duration(d, t.f_high(), t) == doctest::Approx(d.latency_startup));
  d.zero_latency_doneflags = true;
  CHECK(doneflag_duration(d, t.f_high(), t) == 0.0);
}
