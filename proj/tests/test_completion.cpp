#include "doctest.h"
#include "matfdr/completion.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "matfdr/simulate.hpp"
#include "support.hpp"

using namespace matfdr;
using Eigen::MatrixXd;
using testsupport::flat_model;

namespace {

ObservationSet full_observation(const MatrixXd& m) {
  ObservationSet obs{static_cast<int>(m.rows()), static_cast<int>(m.cols()), {}};
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) obs.samples.push_back({i, j, m(i, j)});
  return obs;
}

}  // namespace

TEST_CASE("gradient descent recovers a fully observed rank-1 ones matrix") {
  const MatrixXd m = MatrixXd::Ones(2, 2);
  GdConfig cfg;
  cfg.rank = 1;
  const GdResult gd = gradient_descent_init(full_observation(m), cfg);
  CHECK((gd.model.dense - m).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(gd.converged);
}

TEST_CASE("gradient descent recovers a fully observed noiseless rank-2 matrix") {
  const FactorModel truth = generate_low_rank(20, 20, 2, 5.0, 1.5, 3);
  GdConfig cfg;
  cfg.rank = 2;
  const GdResult gd = gradient_descent_init(full_observation(truth.dense), cfg);
  CHECK((gd.model.dense - truth.dense).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("gradient descent error rate at d=60 over 20 seeds") {
  // Monte-Carlo check of the entrywise rate with calibrated constant 5; the
  // test model keeps incoherence flat so the rate, not the model's leverage
  // spikes, is what is measured.
  const int d = 60, r = 2;
  const double sigma = 0.5;
  const int n = 20 * r * d;
  const double bound = 5.0 * sigma * std::sqrt(d * std::log(d) / n);
  double mean_init = 0.0, mean_final = 0.0;
  for (int seed = 1; seed <= 20; ++seed) {
    const FactorModel m = flat_model(d, d, r, 60.0, seed);
    const ObservationSet obs =
        sample_observations(m, n, sigma, NoiseSpec{}, 1000 + seed);
    GdConfig cfg;
    cfg.rank = r;
    const Estimate est = full_estimate(obs, cfg);
    CHECK(est.converged);
    mean_init += (est.init.dense - m.dense).cwiseAbs().maxCoeff() / 20.0;
    mean_final += (est.model.dense - m.dense).cwiseAbs().maxCoeff() / 20.0;
  }
  CHECK(mean_init <= bound);
  // The projected estimate should be no worse than the initializer.
  CHECK(mean_final <= mean_init + 0.01);
}

TEST_CASE("full estimate with noiseless covering sample is exact") {
  const int d = 12, r = 2;
  const FactorModel m = flat_model(d, d, r, 5.0, 9);
  const int n = static_cast<int>(3.0 * d * d * std::log(d));
  const ObservationSet obs = sample_observations(m, n, 0.0, NoiseSpec{}, 77);
  // Coupon-collector oracle: every entry must actually be observed.
  std::vector<char> seen(d * d, 0);
  for (const Sample& s : obs.samples) seen[s.row * d + s.col] = 1;
  for (char c : seen) REQUIRE(c == 1);

  GdConfig cfg;
  cfg.rank = r;
  cfg.max_iters = 5000;
  cfg.tol = 1e-15;
  const Estimate est = full_estimate(obs, cfg);
  CHECK((est.model.dense - m.dense).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("debias identities") {
  SUBCASE("zero residuals leave the estimate untouched") {
    const FactorModel m = generate_low_rank(6, 5, 2, 3.0, 1.0, 4);
    const ObservationSet obs = sample_observations(m, 40, 0.0, NoiseSpec{}, 5);
    CHECK((debias(m, obs) - m.dense).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("zero estimate with one observation per entry returns Y") {
    const int d = 4;
    MatrixXd y(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) y(i, j) = 0.3 * i - 0.7 * j + 1.0;
    FactorModel zero;
    zero.U = MatrixXd::Identity(d, 1);
    zero.V = MatrixXd::Identity(d, 1);
    zero.S = Eigen::VectorXd::Constant(1, 1.0);
    zero.dense = MatrixXd::Zero(d, d);
    CHECK((debias(zero, full_observation(y)) - y).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("3x3 direct formula") {
    FactorModel zero;
    zero.U = MatrixXd::Identity(3, 1);
    zero.V = MatrixXd::Identity(3, 1);
    zero.S = Eigen::VectorXd::Constant(1, 1.0);
    zero.dense = MatrixXd::Zero(3, 3);
    ObservationSet obs{3, 3, {{0, 0, 2.0}, {1, 2, -1.0}}};
    const MatrixXd out = debias(zero, obs);
    CHECK(out(0, 0) == doctest::Approx(9.0));
    CHECK(out(1, 2) == doctest::Approx(-4.5));
    CHECK(out(0, 1) == 0.0);
    CHECK(out(2, 2) == 0.0);
  }
  SUBCASE("dimension mismatch is a usage error") {
    const FactorModel m = generate_low_rank(4, 4, 1, 1.0, 1.0, 1);
    ObservationSet obs{5, 4, {{4, 0, 1.0}}};
    CHECK_THROWS_AS(debias(m, obs), std::invalid_argument);
  }
}

TEST_CASE("incoherence projection") {
  SUBCASE("fixed point when spaces already agree") {
    const FactorModel m = generate_low_rank(7, 6, 2, 4.0, 2.0, 8);
    const ProjectedFactors pf = incoherence_projection(m.dense, m);
    const MatrixXd pu_diff =
        pf.U * pf.U.transpose() - m.U * m.U.transpose();
    const MatrixXd pv_diff =
        pf.V * pf.V.transpose() - m.V * m.V.transpose();
    CHECK(pu_diff.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(pv_diff.cwiseAbs().maxCoeff() < 1e-8);
    CHECK_FALSE(pf.degenerate);
  }
  SUBCASE("dominant direction of diag(3,1)") {
    MatrixXd unbs(2, 2);
    unbs << 3.0, 0.0, 0.0, 1.0;
    FactorModel init;
    init.U = MatrixXd::Identity(2, 1);
    init.V = MatrixXd::Identity(2, 1);
    init.S = Eigen::VectorXd::Constant(1, 1.0);
    init.dense = init.reconstruct();
    const ProjectedFactors pf = incoherence_projection(unbs, init);
    CHECK(std::abs(pf.U(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(pf.U(1, 0)) < 1e-12);
    CHECK(std::abs(pf.V(0, 0)) == doctest::Approx(1.0));
  }
  SUBCASE("matches a dense SVD oracle") {
    const FactorModel init = generate_low_rank(6, 5, 2, 2.0, 1.5, 13);
    const MatrixXd unbs = testsupport::gaussian_matrix(6, 5, 21);
    const ProjectedFactors pf = incoherence_projection(unbs, init);
    Eigen::JacobiSVD<MatrixXd> left(unbs * init.V, Eigen::ComputeFullU);
    Eigen::JacobiSVD<MatrixXd> right(unbs.transpose() * init.U,
                                     Eigen::ComputeFullU);
    const MatrixXd lu = left.matrixU().leftCols(2);
    const MatrixXd ru = right.matrixU().leftCols(2);
    CHECK((pf.U * pf.U.transpose() - lu * lu.transpose()).cwiseAbs().maxCoeff() <
          1e-10);
    CHECK((pf.V * pf.V.transpose() - ru * ru.transpose()).cwiseAbs().maxCoeff() <
          1e-10);
  }
  SUBCASE("rank collapse is flagged and factors stay orthonormal") {
    FactorModel init = generate_low_rank(5, 5, 2, 2.0, 1.0, 2);
    const ProjectedFactors pf =
        incoherence_projection(MatrixXd::Zero(5, 5), init);
    CHECK(pf.degenerate);
    CHECK((pf.U.transpose() * pf.U - MatrixXd::Identity(2, 2))
              .cwiseAbs()
              .maxCoeff() < 1e-8);
  }
}

TEST_CASE("low rank reconstruct") {
  SUBCASE("projection of a member of the space is the identity") {
    const FactorModel m = generate_low_rank(6, 6, 2, 3.0, 2.0, 17);
    const FactorModel out = low_rank_reconstruct(m.dense, m.U, m.V);
    CHECK((out.dense - m.dense).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("idempotence") {
    const FactorModel init = generate_low_rank(6, 6, 2, 3.0, 1.0, 19);
    const MatrixXd unbs = testsupport::gaussian_matrix(6, 6, 23);
    const FactorModel once = low_rank_reconstruct(unbs, init.U, init.V);
    const FactorModel twice = low_rank_reconstruct(once.dense, once.U, once.V);
    CHECK((twice.dense - once.dense).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("matches the explicit product oracle") {
    const FactorModel init = generate_low_rank(4, 4, 2, 3.0, 1.0, 29);
    const MatrixXd unbs = testsupport::gaussian_matrix(4, 4, 31);
    const FactorModel out = low_rank_reconstruct(unbs, init.U, init.V);
    const MatrixXd oracle = init.U * init.U.transpose() * unbs * init.V *
                            init.V.transpose();
    CHECK((out.dense - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("is a Frobenius contraction") {
    for (int seed = 1; seed <= 10; ++seed) {
      const FactorModel init = generate_low_rank(7, 5, 2, 1.0, 1.0, seed);
      const MatrixXd unbs = testsupport::gaussian_matrix(7, 5, 100 + seed);
      const FactorModel out = low_rank_reconstruct(unbs, init.U, init.V);
      CHECK(out.dense.norm() <= unbs.norm() + 1e-12);
    }
  }
}

TEST_CASE("factor models from the pipeline satisfy the invariants") {
  const FactorModel m = flat_model(30, 25, 3, 10.0, 7);
  const ObservationSet obs = sample_observations(m, 3000, 0.3, NoiseSpec{}, 8);
  GdConfig cfg;
  cfg.rank = 3;
  const Estimate est = full_estimate(obs, cfg);
  CHECK(est.init.orthonormality_defect() < 1e-8);
  CHECK(est.model.orthonormality_defect() < 1e-8);
  for (int k = 1; k < est.model.rank(); ++k)
    CHECK(est.model.S(k) <= est.model.S(k - 1) + 1e-12);
  CHECK((est.model.dense -
         est.model.U * est.model.S.asDiagonal() * est.model.V.transpose())
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("full estimate is deterministic") {
  const FactorModel m = generate_low_rank(20, 20, 2, 8.0, 1.5, 41);
  const ObservationSet obs = sample_observations(m, 900, 0.2, NoiseSpec{}, 42);
  GdConfig cfg;
  cfg.rank = 2;
  cfg.seed = 7;
  const Estimate a = full_estimate(obs, cfg);
  const Estimate b = full_estimate(obs, cfg);
  CHECK((a.model.dense - b.model.dense).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.init.dense - b.init.dense).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("configuration errors") {
  const FactorModel m = generate_low_rank(4, 4, 1, 1.0, 1.0, 3);
  const ObservationSet obs = sample_observations(m, 8, 0.0, NoiseSpec{}, 4);
  GdConfig cfg;
  cfg.rank = 5;
  CHECK_THROWS_AS(gradient_descent_init(obs, cfg), std::invalid_argument);
  cfg.rank = 1;
  cfg.max_iters = 0;
  CHECK_THROWS_AS(gradient_descent_init(obs, cfg), std::invalid_argument);
  ObservationSet empty{4, 4, {}};
  GdConfig ok;
  CHECK_THROWS_AS(gradient_descent_init(empty, ok), std::invalid_argument);
}
