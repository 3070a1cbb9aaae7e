#include "doctest.h"
#include "matfdr/inference.hpp"

#include <cmath>

#include "matfdr/parallel.hpp"
#include "matfdr/simulate.hpp"
#include "matfdr/stats.hpp"
#include "support.hpp"

using namespace matfdr;
using Eigen::MatrixXd;

namespace {

// Rank-1 factors U = V = e1 in dimension d.
FactorModel e1_factors(int d) {
  FactorModel m;
  m.U = MatrixXd::Identity(d, 1);
  m.V = MatrixXd::Identity(d, 1);
  m.S = Eigen::VectorXd::Constant(1, 1.0);
  m.dense = m.reconstruct();
  return m;
}

// Scenario shared by the normality/coverage checks: fixed flat model, fresh
// observations per rep, W for one null entry form.
struct NullRun {
  std::vector<double> w;
  int covered = 0;
};

NullRun null_scenario_run(int reps) {
  const int d = 60, r = 2;
  const double sigma = 0.5;
  const int n = 20 * r * d;
  const FactorModel m = generate_low_rank(d, d, r, 60.0, 2.0, 42);
  LinearForm form = LinearForm::entry(7, 11);
  form.set_theta(m.dense(7, 11));
  NullRun out;
  out.w.resize(reps);
  std::vector<char> covered(reps, 0);
  parallel_for(reps, 0, [&](int rep) {
    Rng stream = Rng::stream(99, rep);
    const ObservationSet obs =
        sample_observations(m, n, sigma, NoiseSpec{}, stream.next_u64());
    GdConfig cfg;
    cfg.rank = r;
    const Estimate est = full_estimate(obs, cfg);
    out.w[rep] = test_statistic(form, est.model, est.init, obs).w;
    const auto [lo, hi] = confidence_interval(form, est.model, est.init, obs, 0.95);
    covered[rep] = lo <= form.theta() && form.theta() <= hi;
  });
  for (char c : covered) out.covered += c;
  return out;
}

}  // namespace

TEST_CASE("tangent projection examples") {
  const FactorModel m = e1_factors(3);
  SUBCASE("form orthogonal to the tangent space maps to zero") {
    const LinearForm t = LinearForm::entry(1, 1);
    CHECK(tangent_project(t, m.U, m.V).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("form inside the tangent space is fixed") {
    const LinearForm t = LinearForm::entry(0, 1);
    const MatrixXd p = tangent_project(t, m.U, m.V);
    CHECK((p - t.to_dense(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("matches the explicit-complement oracle") {
    const FactorModel r2 = generate_low_rank(5, 4, 2, 2.0, 1.5, 31);
    const MatrixXd t = testsupport::gaussian_matrix(5, 4, 17);
    const MatrixXd oracle = testsupport::tangent_project_oracle(t, r2.U, r2.V);
    CHECK((tangent_project(t, r2.U, r2.V) - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("tangent projection is an idempotent contraction") {
  for (int seed = 1; seed <= 25; ++seed) {
    const FactorModel m = generate_low_rank(8, 6, 2, 1.0, 1.0, seed);
    const MatrixXd t = testsupport::gaussian_matrix(8, 6, 500 + seed);
    const MatrixXd once = tangent_project(t, m.U, m.V);
    const MatrixXd twice = tangent_project(once, m.U, m.V);
    CHECK((twice - once).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(once.norm() <= t.norm() + 1e-12);
  }
}

TEST_CASE("projection summaries agree with the dense projection") {
  for (int seed = 1; seed <= 10; ++seed) {
    const FactorModel m = generate_low_rank(7, 9, 3, 1.0, 1.0, seed);
    const LinearForm a = LinearForm::entry_difference(1, 2, 3, 4);
    const LinearForm b = LinearForm::entry(2, seed % 9);
    const TangentSummary sa = summarize_projection(a, m.U, m.V);
    const TangentSummary sb = summarize_projection(b, m.U, m.V);
    const MatrixXd pa = tangent_project(a, m.U, m.V);
    const MatrixXd pb = tangent_project(b, m.U, m.V);
    CHECK(sa.norm2 == doctest::Approx(pa.squaredNorm()).epsilon(1e-10));
    CHECK(projection_inner(sa, sb) ==
          doctest::Approx(pa.cwiseProduct(pb).sum()).epsilon(1e-10));
  }
}

TEST_CASE("alignment ratio") {
  const int d = 6;
  const FactorModel m = e1_factors(d);
  SUBCASE("fully aligned form reaches sqrt(d2/r)") {
    const AlignmentRatio ar = alignment_ratio(LinearForm::entry(0, 3), m.U, m.V);
    CHECK_FALSE(ar.degenerate);
    CHECK(ar.value == doctest::Approx(std::sqrt(static_cast<double>(d))));
  }
  SUBCASE("orthogonal form is degenerate") {
    const AlignmentRatio ar = alignment_ratio(LinearForm::entry(2, 3), m.U, m.V);
    CHECK(ar.degenerate);
    CHECK(ar.value == 0.0);
  }
  SUBCASE("entry form matches the explicit oracle") {
    const FactorModel r2 = generate_low_rank(9, 7, 2, 1.0, 1.0, 5);
    const LinearForm t = LinearForm::entry(4, 5);
    const MatrixXd oracle =
        testsupport::tangent_project_oracle(t.to_dense(9, 7), r2.U, r2.V);
    const AlignmentRatio ar = alignment_ratio(t, r2.U, r2.V);
    CHECK(ar.value == doctest::Approx(oracle.norm() * std::sqrt(7.0 / 2.0))
                          .epsilon(1e-10));
  }
}

TEST_CASE("noise variance estimate") {
  FactorModel zero = e1_factors(3);
  zero.dense = MatrixXd::Zero(3, 3);
  SUBCASE("residuals {1,-1} give 1") {
    ObservationSet obs{3, 3, {{0, 0, 1.0}, {1, 1, -1.0}}};
    CHECK(noise_variance_estimate(obs, zero) == doctest::Approx(1.0));
  }
  SUBCASE("exact estimate gives 0") {
    const FactorModel m = generate_low_rank(6, 6, 2, 2.0, 1.0, 3);
    const ObservationSet obs = sample_observations(m, 50, 0.0, NoiseSpec{}, 4);
    CHECK(noise_variance_estimate(obs, m) == 0.0);
  }
  SUBCASE("law of large numbers band at n=1e4") {
    const FactorModel m = generate_low_rank(40, 40, 2, 10.0, 1.0, 6);
    const ObservationSet obs =
        sample_observations(m, 10000, 0.5, NoiseSpec{}, 7);
    const double est = noise_variance_estimate(obs, m);
    CHECK(est > 0.25 * 0.95);
    CHECK(est < 0.25 * 1.05);
  }
}

TEST_CASE("sampling sd estimate mirrors the projection norm") {
  const FactorModel m = e1_factors(4);
  CHECK(sampling_sd_estimate(LinearForm::entry(2, 2), m) == 0.0);
  CHECK(sampling_sd_estimate(LinearForm::entry(0, 2), m) == doctest::Approx(1.0));
  const FactorModel r2 = generate_low_rank(6, 8, 2, 1.0, 1.0, 11);
  const LinearForm t = LinearForm::entry_difference(0, 1, 2, 3);
  const MatrixXd oracle =
      testsupport::tangent_project_oracle(t.to_dense(6, 8), r2.U, r2.V);
  CHECK(sampling_sd_estimate(t, r2) == doctest::Approx(oracle.norm()).epsilon(1e-10));
}

namespace {

// Fixture with hand-picked variance components: sigma_hat = 0.5, s_hat = 2.
struct StatFixture {
  FactorModel init;
  FactorModel model;
  ObservationSet obs;
  LinearForm form = LinearForm({{0, 1, 2.0}}, 1.0);

  explicit StatFixture(int n, double point) : obs{10, 10, {}} {
    init = e1_factors(10);
    init.dense = MatrixXd::Zero(10, 10);
    model = init;
    model.dense = MatrixXd::Zero(10, 10);
    model.dense(0, 1) = point / 2.0;  // <model, 2 e1 e2^T> = point
    for (int i = 0; i < n; ++i)
      obs.samples.push_back({i % 10, (i / 10) % 10, 0.5});
  }
};

}  // namespace

TEST_CASE("test statistic direct formula") {
  SUBCASE("point equal to theta gives W = 0") {
    StatFixture fx(25, 1.0);
    CHECK(test_statistic(fx.form, fx.model, fx.init, fx.obs).w ==
          doctest::Approx(0.0));
  }
  SUBCASE("worked example W = 0.1") {
    StatFixture fx(25, 1.2);
    const TestRecord rec = test_statistic(fx.form, fx.model, fx.init, fx.obs);
    CHECK(rec.sigma_xi_hat == doctest::Approx(0.5));
    CHECK(rec.s_hat == doctest::Approx(2.0));
    CHECK(rec.w == doctest::Approx(0.1));
  }
  SUBCASE("degenerate projection is untestable") {
    StatFixture fx(25, 1.0);
    const LinearForm off = LinearForm::entry(3, 3, 0.0);
    CHECK_THROWS_AS(test_statistic(off, fx.model, fx.init, fx.obs),
                    UntestableForm);
  }
  SUBCASE("scale invariance in (T, theta)") {
    const FactorModel m = generate_low_rank(12, 12, 2, 4.0, 1.5, 8);
    const ObservationSet obs = sample_observations(m, 500, 0.3, NoiseSpec{}, 9);
    GdConfig cfg;
    cfg.rank = 2;
    const Estimate est = full_estimate(obs, cfg);
    LinearForm t1({{2, 3, 1.0}, {4, 5, -1.0}}, 0.37);
    LinearForm t3({{2, 3, 3.0}, {4, 5, -3.0}}, 3 * 0.37);
    const double w1 = test_statistic(t1, est.model, est.init, obs).w;
    const double w3 = test_statistic(t3, est.model, est.init, obs).w;
    CHECK(w1 == doctest::Approx(w3).epsilon(1e-10));
  }
}

TEST_CASE("confidence interval") {
  SUBCASE("unit half-width at level 0.95") {
    StatFixture fx(100, 0.0);  // sigma*s*sqrt(d1 d2/n) = 0.5*2*1 = 1
    const auto [lo, hi] =
        confidence_interval(fx.form, fx.model, fx.init, fx.obs, 0.95);
    CHECK(lo == doctest::Approx(-1.959964).epsilon(1e-6));
    CHECK(hi == doctest::Approx(1.959964).epsilon(1e-6));
  }
  SUBCASE("nesting across levels and exact half-width") {
    StatFixture fx(100, 0.8);
    const auto [lo95, hi95] =
        confidence_interval(fx.form, fx.model, fx.init, fx.obs, 0.95);
    const auto [lo90, hi90] =
        confidence_interval(fx.form, fx.model, fx.init, fx.obs, 0.90);
    CHECK(lo95 < lo90);
    CHECK(hi90 < hi95);
    CHECK(hi95 - lo95 ==
          doctest::Approx(2.0 * normal_quantile(0.975)).epsilon(1e-12));
  }
}

TEST_CASE("null scenario: normality and coverage at d=60" *
          doctest::description("Monte-Carlo, a few seconds")) {
  const NullRun run = null_scenario_run(300);
  CHECK(ks_distance_to_normal(run.w) <= 0.10);
  CHECK(run.covered >= 270);  // >= 0.90 empirical coverage at nominal 0.95
}

TEST_CASE("pair correlation") {
  SUBCASE("identical forms correlate exactly 1") {
    const FactorModel m = generate_low_rank(6, 6, 2, 1.0, 1.0, 3);
    const LinearForm t = LinearForm::entry(1, 2);
    CHECK(pair_correlation(t, t, m.U, m.V) == 1.0);
  }
  SUBCASE("disjoint-support projections correlate 0") {
    const FactorModel m = e1_factors(3);
    const LinearForm t1 = LinearForm::entry(0, 1);
    const LinearForm t2 = LinearForm::entry(1, 0);
    CHECK(pair_correlation(t1, t2, m.U, m.V) == doctest::Approx(0.0));
  }
  SUBCASE("matches the explicit-complement oracle and is symmetric") {
    const FactorModel m = generate_low_rank(8, 7, 2, 1.0, 1.0, 12);
    const LinearForm t1 = LinearForm::entry(2, 3);
    const LinearForm t2 = LinearForm::entry(2, 5);
    const MatrixXd p1 =
        testsupport::tangent_project_oracle(t1.to_dense(8, 7), m.U, m.V);
    const MatrixXd p2 =
        testsupport::tangent_project_oracle(t2.to_dense(8, 7), m.U, m.V);
    const double oracle = p1.cwiseProduct(p2).sum() / (p1.norm() * p2.norm());
    CHECK(pair_correlation(t1, t2, m.U, m.V) ==
          doctest::Approx(oracle).epsilon(1e-10));
    CHECK(pair_correlation(t1, t2, m.U, m.V) ==
          pair_correlation(t2, t1, m.U, m.V));
  }
  SUBCASE("zero projection is an error") {
    const FactorModel m = e1_factors(3);
    const LinearForm bad = LinearForm::entry(2, 2);
    const LinearForm ok = LinearForm::entry(0, 1);
    CHECK_THROWS_AS(pair_correlation(bad, ok, m.U, m.V), UntestableForm);
  }
}

TEST_CASE("moment diagnostic") {
  CHECK(moment_diagnostic({0.0, 0.0, 0.0}, 2) == 0.0);
  CHECK(moment_diagnostic({1.0, -1.0}, 2) == doctest::Approx(1.0));
  CHECK(moment_diagnostic({2.0}, 3) == doctest::Approx(64.0));
  CHECK_THROWS_AS(moment_diagnostic({1.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(moment_diagnostic({}, 2), std::invalid_argument);
}
