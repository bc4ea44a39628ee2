#include <doctest.h>

#include <random>

#include "fedat/adversary.hpp"
#include "support/oracles.hpp"

using namespace fedat;

TEST_CASE("fractions parse as a single division") {
  CHECK(parse_fraction("8/255") == 8.0 / 255.0);
  CHECK(parse_fraction("3/10") == 3.0 / 10.0);
  CHECK(parse_fraction("0.05") == 0.05);
  CHECK(parse_fraction(" 1 / 20 ") == 1.0 / 20.0);
  CHECK_THROWS_AS(parse_fraction("8/0"), Error);
  CHECK_THROWS_AS(parse_fraction("eight"), Error);
  CHECK_THROWS_AS(parse_fraction(""), Error);
}

TEST_CASE("zero steps returns the input unchanged") {
  const ModelSpec spec{{4, 5, 3}, Activation::relu, 2};
  std::mt19937_64 gen(3);
  const Batch b = oracle::random_batch(gen, 6, 4, 3);
  AttackConfig cfg;
  cfg.steps = 0;
  Rng rng(1);
  const Batch adv = pgd_attack(init_params(spec), spec, b, cfg, rng);
  CHECK(adv.inputs == b.inputs);
  CHECK(adv.labels == b.labels);
}

TEST_CASE("one sign step on a linear model, then projection") {
  // Logit of class 1 is x0 - x1 and class 0 is constant, label 0, so the
  // input gradient has sign (+, -).
  const ModelSpec spec{{2, 2}, Activation::relu, 0};
  ParamVector p = ParamVector::Zero(6);
  p[1] = 1.0;   // W[0][1]
  p[3] = -1.0;  // W[1][1]
  Batch b{Matrix::Constant(1, 2, 0.5), {0}};
  AttackConfig cfg;
  cfg.steps = 1;
  cfg.epsilon = 0.1;
  cfg.alpha = 1.0;
  Rng rng(0);
  const Batch adv = pgd_attack(p, spec, b, cfg, rng);
  CHECK(adv.inputs(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(adv.inputs(0, 1) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("zero gradient leaves a coordinate where it is") {
  const ModelSpec spec{{2, 2}, Activation::relu, 0};
  ParamVector p = ParamVector::Zero(6);
  p[1] = 1.0;  // only x0 matters
  Batch b{Matrix::Constant(1, 2, 0.5), {0}};
  AttackConfig cfg;
  cfg.steps = 3;
  cfg.epsilon = 0.2;
  cfg.alpha = 0.05;
  Rng rng(0);
  const Batch adv = pgd_attack(p, spec, b, cfg, rng);
  CHECK(adv.inputs(0, 1) == 0.5);
  CHECK(adv.inputs(0, 0) == doctest::Approx(0.65));
}

TEST_CASE("outputs stay in the epsilon ball and the valid range") {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const ModelSpec spec{{3, 6, 4}, trial % 2 ? Activation::tanh : Activation::relu, static_cast<std::uint64_t>(trial)};
    AttackConfig cfg;
    cfg.steps = 1 + trial % 6;
    cfg.epsilon = 0.01 + 0.3 * u(gen);
    cfg.alpha = 0.005 + 0.2 * u(gen);
    cfg.random_start = trial % 3 == 0;
    const Batch b = oracle::random_batch(gen, 5, 3, 4);
    Rng rng(static_cast<std::uint64_t>(trial));
    const Batch adv = pgd_attack(init_params(spec), spec, b, cfg, rng);
    CHECK((adv.inputs - b.inputs).cwiseAbs().maxCoeff() <= cfg.epsilon + 1e-12);
    CHECK(adv.inputs.minCoeff() >= 0.0);
    CHECK(adv.inputs.maxCoeff() <= 1.0);
    CHECK(adv.labels == b.labels);
  }
}

TEST_CASE("random start is seeded and stays in range") {
  const ModelSpec spec{{3, 3}, Activation::relu, 1};
  std::mt19937_64 gen(5);
  const Batch b = oracle::random_batch(gen, 4, 3, 3);
  AttackConfig cfg;
  cfg.steps = 0;
  cfg.epsilon = 0.2;
  cfg.random_start = true;
  Rng r1(42), r2(42);
  const Batch a1 = pgd_attack(init_params(spec), spec, b, cfg, r1);
  const Batch a2 = pgd_attack(init_params(spec), spec, b, cfg, r2);
  CHECK(a1.inputs == a2.inputs);
  CHECK(a1.inputs != b.inputs);
  CHECK((a1.inputs - b.inputs).cwiseAbs().maxCoeff() <= 0.2 + 1e-12);
}

TEST_CASE("invalid attacks are rejected") {
  const ModelSpec spec{{2, 2}, Activation::relu, 0};
  Batch b{Matrix::Constant(1, 2, 0.5), {0}};
  Rng rng(0);
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(pgd_attack(init_params(spec), spec, b, cfg, rng), Error);
  cfg = AttackConfig{};
  cfg.lo = 1.0;
  cfg.hi = 0.0;
  CHECK_THROWS_AS(pgd_attack(init_params(spec), spec, b, cfg, rng), Error);
  cfg = AttackConfig{};
  Batch outside{Matrix::Constant(1, 2, 1.5), {0}};
  CHECK_THROWS_AS(pgd_attack(init_params(spec), spec, outside, cfg, rng), Error);
}
