#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sbc/estimators.hpp"
#include "sbc/simulation.hpp"

using namespace sbc;

namespace {

const std::vector<WeightRegime> kRegimes = {WeightRegime::unrestricted(true), WeightRegime::unrestricted(false),
                                            WeightRegime::signed_sum_one(), WeightRegime::simplex()};

Matrix random_walks(int units, int periods, unsigned seed, double drift = 0.0) {
  Matrix y(units, periods);
  for (int i = 0; i < units; ++i) {
    const auto rw = oracle::random_walk(static_cast<std::size_t>(periods), seed + static_cast<unsigned>(i) * 7919U, drift);
    for (int t = 0; t < periods; ++t) y(i, t) = rw[static_cast<std::size_t>(t)];
  }
  return y;
}

Eigen::Index argmax(const Vector& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return i;
}

}  // namespace

TEST(ScEstimate, TreatedEqualToDonorHasZeroEffects) {
  Matrix y = random_walks(6, 60, 10);
  y.row(0) = y.row(3);  // donor 4 in 1-based units
  const PanelData panel(y, 1, 55);
  for (const auto& regime : kRegimes) {
    const auto r = sc_estimate(panel, FilterSpec{2, 2}, regime);
    EXPECT_EQ(r.horizon(), 2);
    EXPECT_LT(r.effects.cwiseAbs().maxCoeff(), 1e-8) << to_string(regime.variant);
    EXPECT_LT((r.post_counterfactual - panel.series(4).segment(55, 2)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(ScEstimate, AffineMatchUnderUnrestrictedIntercept) {
  Matrix y = random_walks(5, 50, 20);
  y.row(0) = (y.row(1).array() + 7.0).matrix();
  const PanelData panel(y, 1, 45);
  const auto r = sc_estimate(panel, FilterSpec{2, 2}, WeightRegime::unrestricted(true));
  Vector e = Vector::Zero(4);
  e(0) = 1.0;
  EXPECT_LT((r.weights.weights - e).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(*r.weights.intercept, 7.0, 1e-8);
  EXPECT_LT(r.effects.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ScEstimate, ModelOneMatchesOlsOracle) {
  sim::SimulationSpec spec;
  spec.t0 = 100;
  const auto simulated = sim::gen_model1(spec, 4242);
  const auto& panel = simulated.panel;
  const auto r = sc_estimate(panel, spec.filter(), WeightRegime::unrestricted(true));

  oracle::Rows x;
  std::vector<double> yv;
  for (int t = 4; t <= 100; ++t) {
    std::vector<double> row{1.0};
    for (int i = 2; i <= 12; ++i) row.push_back(panel.outcomes()(i - 1, t - 1));
    x.push_back(row);
    yv.push_back(panel.outcomes()(0, t - 1));
  }
  const auto beta = oracle::normal_equations(x, yv);
  for (int k = 0; k < 2; ++k) {
    double pred = beta[0];
    for (int i = 2; i <= 12; ++i) pred += beta[static_cast<std::size_t>(i - 1)] * panel.outcomes()(i - 1, 100 + k);
    EXPECT_NEAR(r.post_counterfactual(k), pred, 1e-7 * std::max(1.0, std::abs(pred)));
  }
  EXPECT_EQ(r.pre_fitted.size(), 97);
}

TEST(SbcEstimate, TreatedEqualToDonorHasZeroEffects) {
  Matrix y = random_walks(5, 80, 30);
  y.row(0) = y.row(2);  // donor 3
  const PanelData panel(y, 1, 70);
  const FilterSpec spec{2, 2};
  for (const auto& regime : kRegimes) {
    const auto r = sbc_estimate(panel, spec, regime);
    EXPECT_LT(r.effects.cwiseAbs().maxCoeff(), 1e-7) << to_string(regime.variant);
    EXPECT_NEAR(r.weights.weights(1), 1.0, 1e-7);
    EXPECT_FALSE(r.weights.intercept.has_value());
  }
  // Recursive extension past h stays exact because every fed-back value is exact.
  EstimateOptions opts;
  opts.horizon = 10;
  const auto longer = sbc_estimate(panel, spec, WeightRegime::simplex(), opts);
  EXPECT_EQ(longer.horizon(), 10);
  EXPECT_LT(longer.effects.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SbcEstimate, ConstantPanel) {
  Matrix y = Matrix::Constant(4, 40, 3.0);
  y.row(0).setConstant(8.0);
  y(0, 36) = 9.0;  // observed post deviation
  y(0, 37) = 10.0;
  const PanelData panel(y, 1, 36);
  const auto r = sbc_estimate(panel, {2, 2}, WeightRegime::simplex());
  EXPECT_LT((r.post_counterfactual.array() - 8.0).abs().maxCoeff(), 1e-10);
  EXPECT_NEAR(r.effects(0), 1.0, 1e-10);
  EXPECT_NEAR(r.effects(1), 2.0, 1e-10);
}

TEST(SbcEstimate, PreMseEqualsCycleFitMse) {
  sim::SimulationSpec spec;
  spec.model = sim::Model::Model2;
  spec.t0 = 100;
  for (unsigned seed = 0; seed < 10; ++seed) {
    const auto simulated = sim::gen_model2(spec, seed);
    for (const auto& regime : kRegimes) {
      const auto r = sbc_estimate(simulated.panel, spec.filter(), regime);
      const double cycle_mse = r.weights.objective / r.window.effective_size;
      EXPECT_NEAR(r.pre_mse, cycle_mse, 1e-9 * std::max(1.0, cycle_mse));
      EXPECT_EQ(r.horizon(), spec.h);
      ASSERT_TRUE(r.trend_forecast.has_value());
      EXPECT_EQ(r.trend_forecast->size(), spec.h);
    }
  }
}

TEST(Estimators, PreMseMonotoneAcrossRegimes) {
  sim::SimulationSpec spec;
  spec.t0 = 60;
  for (unsigned seed = 0; seed < 20; ++seed) {
    const auto simulated = sim::gen_model1(spec, seed);
    for (bool sbc_method : {false, true}) {
      auto run = [&](const WeightRegime& regime) {
        return sbc_method ? sbc_estimate(simulated.panel, spec.filter(), regime).pre_mse
                          : sc_estimate(simulated.panel, spec.filter(), regime).pre_mse;
      };
      const double free = run(WeightRegime::unrestricted(false));
      const double sum_one = run(WeightRegime::signed_sum_one());
      const double simplex = run(WeightRegime::simplex());
      EXPECT_GE(sum_one, free - 1e-9);
      EXPECT_GE(simplex, sum_one - 1e-9);
      if (!sbc_method) EXPECT_LE(run(WeightRegime::unrestricted(true)), free + 1e-9);
    }
  }
}

TEST(Estimators, EffectsAreObservedMinusCounterfactual) {
  sim::SimulationSpec spec;
  const auto simulated = sim::gen_model1(spec, 77);
  for (const auto& regime : kRegimes) {
    for (const auto& r : {sc_estimate(simulated.panel, spec.filter(), regime),
                          sbc_estimate(simulated.panel, spec.filter(), regime)}) {
      EXPECT_EQ(r.effects, r.post_actual - r.post_counterfactual);
      EXPECT_NEAR(r.pre_mse, (r.pre_actual - r.pre_fitted).squaredNorm() / r.window.effective_size, 1e-12);
    }
  }
}

TEST(Estimators, HorizonPastPanelIsRejected) {
  const PanelData panel(random_walks(3, 30, 1), 1, 29);
  EXPECT_THROW(sbc_estimate(panel, {2, 2}, WeightRegime::simplex()), Error);
  EXPECT_THROW(sc_estimate(panel, {2, 2}, WeightRegime::simplex()), Error);
}

TEST(SbcEstimate, BeatsScOutOfSampleOnModelTwo) {
  sim::SimulationSpec spec;
  spec.model = sim::Model::Model2;
  spec.phi = 0.5;
  spec.t0 = 100;
  spec.regime = WeightRegime::unrestricted(true);
  spec.replications = 200;
  spec.master_seed = 555;
  const auto report = sim::run_monte_carlo(spec, 1);
  EXPECT_LT(report.post_ratio, 1.0);
}

TEST(PlaceboRun, ExactDonorMixGivesZeroEffects) {
  // Donor 3 is an affine copy of donor 2, so their filter cycles are
  // proportional and the treated mix is matched exactly in both steps.
  Matrix y = random_walks(4, 70, 40);
  y.row(2) = (2.0 * y.row(1).array() + 5.0).matrix();
  y.row(0) = 0.3 * y.row(1) + 0.7 * y.row(2);
  const PanelData panel(y, 1, 65);
  for (const auto& regime : kRegimes) {
    const auto placebo = placebo_run(panel, 55, {2, 2}, regime);
    EXPECT_EQ(placebo.sc.t0, 55);
    EXPECT_LT(placebo.sc.effects.cwiseAbs().maxCoeff(), 1e-7) << to_string(regime.variant);
    EXPECT_LT(placebo.sbc.effects.cwiseAbs().maxCoeff(), 1e-7) << to_string(regime.variant);
  }
}

TEST(PlaceboRun, RejectsLateOrShortPlaceboDates) {
  const PanelData panel(random_walks(4, 40, 2), 1, 30);
  try {
    placebo_run(panel, 30, {2, 2}, WeightRegime::simplex());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
  try {
    placebo_run(panel, 6, {2, 2}, WeightRegime::simplex());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WindowTooShort);
  }
}

TEST(PlaceboRun, SbcPlaceboErrorBelowScOnModelOne) {
  sim::SimulationSpec spec;
  spec.t0 = 100;
  double sbc_sse = 0.0;
  double sc_sse = 0.0;
  for (unsigned rep = 0; rep < 200; ++rep) {
    const auto simulated = sim::gen_model1(spec, rng::stream_seed(808, rep));
    const auto placebo = placebo_run(simulated.panel, spec.t0 - 10, spec.filter(), WeightRegime::unrestricted(true));
    sbc_sse += placebo.sbc.effects.squaredNorm();
    sc_sse += placebo.sc.effects.squaredNorm();
  }
  EXPECT_LT(sbc_sse, sc_sse);
}

TEST(PlaceboRun, UntreatedPanelEffectsAverageToZero) {
  sim::SimulationSpec spec;
  spec.model = sim::Model::Model2;
  spec.t0 = 150;
  std::vector<double> means;
  for (unsigned rep = 0; rep < 400; ++rep) {
    const auto simulated = sim::gen_model2(spec, rng::stream_seed(909, rep));
    const auto placebo = placebo_run(simulated.panel, 140, spec.filter(), WeightRegime::simplex());
    means.push_back(placebo.sbc.effects.mean());
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(means.size());
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  const double se = std::sqrt(var / static_cast<double>(means.size() - 1) / static_cast<double>(means.size()));
  EXPECT_LT(std::abs(mean), 3.0 * se);
}

TEST(WeightComparison, TreatedEqualToDonorTwo) {
  Matrix y = random_walks(5, 60, 50);
  y.row(0) = y.row(1);
  const PanelData panel(y, 1, 55);
  const auto cmp = weight_comparison(panel, {2, 2}, WeightRegime::simplex());
  ASSERT_EQ(cmp.donors.size(), 4U);
  for (const auto* w : {&cmp.raw, &cmp.trend, &cmp.cycle}) {
    EXPECT_NEAR(w->weights(0), 1.0, 1e-8);
  }
}

TEST(WeightComparison, TrendAndCycleDonorsSeparate) {
  // Treated = smooth trend A + stationary cycle B. Donor "A" carries the
  // trend with little noise; donor "B" carries the cycle on top of an
  // unrelated trend. Remaining donors are independent.
  const int periods = 120;
  std::mt19937_64 gen(606);
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector trend_a(periods), cycle_b(periods), trend_r(periods);
  double a = 0.0, b = 0.0, r = 0.0;
  for (int t = 0; t < periods; ++t) {
    a += 1.0 + 0.02 * n01(gen);
    b = 0.3 * b + n01(gen);
    r += -0.8 + 0.02 * n01(gen);
    trend_a(t) = a;
    cycle_b(t) = b;
    trend_r(t) = r;
  }
  Matrix y(6, periods);
  y.row(0) = (trend_a + cycle_b).transpose();
  for (int t = 0; t < periods; ++t) {
    y(1, t) = trend_a(t) + 0.05 * n01(gen);  // donor A
    y(2, t) = trend_r(t) + cycle_b(t);       // donor B
  }
  y.bottomRows(3) = random_walks(3, periods, 61, 0.2);
  const PanelData panel(y, 1, 110);
  const auto cmp = weight_comparison(panel, {4, 2}, WeightRegime::simplex());
  EXPECT_EQ(argmax(cmp.trend.weights), 0);
  EXPECT_EQ(argmax(cmp.cycle.weights), 1);
}
