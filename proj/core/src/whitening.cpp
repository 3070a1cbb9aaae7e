#include "matfdr/whitening.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>

namespace matfdr {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

void DesignStack::validate(int rank) const {
  if (d1 < 1 || d2 < 1 || rank < 1)
    throw std::invalid_argument("DesignStack: bad dimensions");
  const long cap = static_cast<long>(d1 + d2) * rank - static_cast<long>(rank) * rank;
  if (q() > cap)
    throw std::invalid_argument("DesignStack: q exceeds (d1+d2)r - r^2");
  for (const LinearForm& f : forms)
    if (f.max_row() >= d1 || f.max_col() >= d2)
      throw std::invalid_argument("DesignStack: form outside dimensions");

  // Gram matrix of the vectorized forms; rank deficiency means dependent rows.
  const int n = q();
  if (n == 0) return;
  Eigen::MatrixXd gram(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double dot = 0.0;
      // Entries are sorted row-major, so a merge gives the sparse dot product.
      const auto& ea = forms[i].entries();
      const auto& eb = forms[j].entries();
      std::size_t a = 0, b = 0;
      while (a < ea.size() && b < eb.size()) {
        const auto key_a = std::make_pair(ea[a].row, ea[a].col);
        const auto key_b = std::make_pair(eb[b].row, eb[b].col);
        if (key_a == key_b) {
          dot += ea[a].value * eb[b].value;
          ++a;
          ++b;
        } else if (key_a < key_b) {
          ++a;
        } else {
          ++b;
        }
      }
      gram(i, j) = gram(j, i) = dot;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const double tol = 1e-8 * std::max(es.eigenvalues().maxCoeff(), 1e-300);
  if (es.eigenvalues().minCoeff() <= tol)
    throw std::invalid_argument("DesignStack: forms are linearly dependent");
}

Eigen::MatrixXd estimate_sigma(const DesignStack& stack, const Eigen::MatrixXd& u,
                               const Eigen::MatrixXd& v) {
  const int n = stack.q();
  std::vector<TangentSummary> summaries;
  summaries.reserve(n);
  for (const LinearForm& f : stack.forms)
    summaries.push_back(summarize_projection(f, u, v));
  Eigen::MatrixXd sigma(n, n);
  for (int i = 0; i < n; ++i) {
    sigma(i, i) = summaries[i].norm2;
    for (int j = i + 1; j < n; ++j)
      sigma(i, j) = sigma(j, i) = projection_inner(summaries[i], summaries[j]);
  }
  return sigma;
}

InverseSqrt inverse_sqrt(const Eigen::MatrixXd& s, double floor) {
  if (s.rows() != s.cols())
    throw std::invalid_argument("inverse_sqrt: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  InverseSqrt out;
  Eigen::VectorXd lam = es.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) {
    if (lam(i) < floor) {
      lam(i) = floor;
      ++out.clamped;
    }
  }
  if (lam.minCoeff() <= 0.0)
    throw std::invalid_argument("inverse_sqrt: floor must be positive");
  const Eigen::VectorXd inv_root = lam.cwiseSqrt().cwiseInverse();
  out.m = es.eigenvectors() * inv_root.asDiagonal() * es.eigenvectors().transpose();
  return out;
}

CovarianceEstimate build_covariance(const DesignStack& stack,
                                    const Eigen::MatrixXd& u,
                                    const Eigen::MatrixXd& v) {
  CovarianceEstimate out;
  out.sigma = estimate_sigma(stack, u, v);
  const int n = static_cast<int>(out.sigma.rows());
  Eigen::VectorXd d = out.sigma.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (int i = 0; i < n; ++i)
    if (!(d(i) > 0.0))
      throw UntestableForm("build_covariance: zero-variance form in the stack");
  const Eigen::VectorXd dinv = d.cwiseInverse();
  out.corr = dinv.asDiagonal() * out.sigma * dinv.asDiagonal();
  out.corr.diagonal().setOnes();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.corr);
  out.eigen_floor = 1e-6 * std::max(es.eigenvalues().maxCoeff(), 1e-300);
  InverseSqrt inv = inverse_sqrt(out.corr, out.eigen_floor);
  out.corr_inv_sqrt = std::move(inv.m);
  out.clamped = inv.clamped;
  return out;
}

LassoResult lasso(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("lasso: lambda must be >= 0");
  if (design.rows() != response.size())
    throw std::invalid_argument("lasso: dimension mismatch");
  const int p = static_cast<int>(design.cols());
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::VectorXd xty = design.transpose() * response;
  const double y_energy = 0.5 * response.squaredNorm();
  const double gap_tol = 1e-8 * std::max(1.0, y_energy);
  const double grad_tol = 1e-10 * std::max(1.0, xty.cwiseAbs().maxCoeff());
  constexpr int kMaxSweeps = 10000;

  LassoResult out;
  out.coef = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd gram_w = Eigen::VectorXd::Zero(p);  // gram * coef
  for (out.sweeps = 1; out.sweeps <= kMaxSweeps; ++out.sweeps) {
    for (int j = 0; j < p; ++j) {
      const double gjj = gram(j, j);
      if (gjj <= 0.0) continue;
      const double rho = xty(j) - gram_w(j) + gjj * out.coef(j);
      const double updated =
          std::copysign(std::max(std::abs(rho) - lambda, 0.0), rho) / gjj;
      const double delta = updated - out.coef(j);
      if (delta != 0.0) {
        out.coef(j) = updated;
        gram_w += delta * gram.col(j);
      }
    }
    // Duality gap from the scaled residual as a dual-feasible point.
    const Eigen::VectorXd residual = response - design * out.coef;
    const Eigen::VectorXd grad = design.transpose() * residual;  // = xty - gram_w
    if (lambda == 0.0) {
      if (grad.cwiseAbs().maxCoeff() <= grad_tol) {
        out.converged = true;
        break;
      }
      continue;
    }
    double kkt = 0.0;
    for (int j = 0; j < p; ++j) {
      const double r = out.coef(j) != 0.0
                           ? std::abs(grad(j) - lambda * (out.coef(j) > 0 ? 1 : -1))
                           : std::max(0.0, std::abs(grad(j)) - lambda);
      kkt = std::max(kkt, r);
    }
    const double corr_inf = grad.cwiseAbs().maxCoeff();
    const double scale = corr_inf > lambda ? lambda / corr_inf : 1.0;
    const double primal =
        0.5 * residual.squaredNorm() + lambda * out.coef.lpNorm<1>();
    const double dual =
        y_energy - 0.5 * (scale * residual - response).squaredNorm();
    out.gap = primal - dual;
    if (out.gap <= gap_tol && kkt <= 1e-7 * std::max(1.0, lambda)) {
      out.converged = true;
      break;
    }
  }
  out.sweeps = std::min(out.sweeps, kMaxSweeps);
  return out;
}

OlsRefit ols_refit(const Eigen::MatrixXd& design_cols,
                   const Eigen::VectorXd& response) {
  if (design_cols.rows() != response.size())
    throw std::invalid_argument("ols_refit: dimension mismatch");
  const int k = static_cast<int>(design_cols.cols());
  OlsRefit out;
  out.coef = Eigen::VectorXd::Zero(k);
  out.sigma = Eigen::VectorXd::Zero(k);
  if (k == 0) return out;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> pivoted(design_cols);
  pivoted.setThreshold(1e-8);
  const int rank = static_cast<int>(pivoted.rank());
  std::vector<int> kept;
  if (rank == k) {
    kept.resize(k);
    for (int i = 0; i < k; ++i) kept[i] = i;
  } else {
    // Keep the pivot columns, drop the dependent remainder.
    const auto perm = pivoted.colsPermutation().indices();
    kept.assign(perm.data(), perm.data() + rank);
    std::sort(kept.begin(), kept.end());
    for (int i = 0; i < k; ++i)
      if (!std::binary_search(kept.begin(), kept.end(), i))
        out.dropped.push_back(i);
  }

  Eigen::MatrixXd sub(design_cols.rows(), kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) sub.col(i) = design_cols.col(kept[i]);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(sub);
  const Eigen::VectorXd coef_kept = qr.solve(response);
  const Eigen::MatrixXd r =
      qr.matrixQR().topRows(kept.size()).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(
          Eigen::MatrixXd::Identity(kept.size(), kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    out.coef(kept[i]) = coef_kept(static_cast<int>(i));
    // e_i^T (X^T X)^{-1} e_i = |e_i^T R^{-1}|^2.
    out.sigma(kept[i]) = r_inv.row(static_cast<int>(i)).norm();
  }
  return out;
}

namespace {

ScreeningResult screen_core(const Eigen::MatrixXd& whitener,
                            const Eigen::VectorXd& lasso_col_scale,
                            const Eigen::VectorXd& stat1,
                            const Eigen::VectorXd& stat2, double lambda) {
  const int q = static_cast<int>(whitener.rows());
  ScreeningResult out;
  out.w1 = Eigen::VectorXd::Zero(q);
  out.w2 = Eigen::VectorXd::Zero(q);
  out.sigma_w = Eigen::VectorXd::Zero(q);
  out.w_rank = Eigen::VectorXd::Zero(q);

  const Eigen::MatrixXd design = whitener * lasso_col_scale.asDiagonal();
  const LassoResult fit = lasso(design, whitener * stat1, lambda);
  out.lasso_converged = fit.converged;
  out.w1 = fit.coef;
  for (int i = 0; i < q; ++i)
    if (fit.coef(i) != 0.0) out.support.push_back(i);
  if (out.support.empty()) return out;

  Eigen::MatrixXd cols(q, out.support.size());
  for (std::size_t i = 0; i < out.support.size(); ++i)
    cols.col(i) = whitener.col(out.support[i]);
  const OlsRefit refit = ols_refit(cols, whitener * stat2);
  for (std::size_t i = 0; i < out.support.size(); ++i) {
    const int idx = out.support[i];
    out.w2(idx) = refit.coef(static_cast<int>(i));
    out.sigma_w(idx) = refit.sigma(static_cast<int>(i));
    if (out.sigma_w(idx) > 0.0)
      out.w_rank(idx) = out.w1(idx) * out.w2(idx) / out.sigma_w(idx);
  }
  return out;
}

}  // namespace

ScreeningResult screen_and_refit(const Eigen::MatrixXd& sigma,
                                 const Eigen::VectorXd& stat1,
                                 const Eigen::VectorXd& stat2, double lambda,
                                 double floor_scale) {
  const int q = static_cast<int>(sigma.rows());
  if (stat1.size() != q || stat2.size() != q)
    throw std::invalid_argument("screen_and_refit: dimension mismatch");
  Eigen::VectorXd scale = sigma.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (int i = 0; i < q; ++i)
    if (!(scale(i) > 0.0))
      throw UntestableForm("screen_and_refit: zero-variance statistic");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  const double floor = floor_scale * std::max(es.eigenvalues().maxCoeff(), 1e-300);
  const InverseSqrt whitener = inverse_sqrt(sigma, floor);
  return screen_core(whitener.m, scale, stat1, stat2, lambda);
}

ScreeningResult screen_and_refit_normalized(const Eigen::MatrixXd& corr,
                                            const Eigen::VectorXd& z1,
                                            const Eigen::VectorXd& z2,
                                            double lambda, double floor_scale) {
  const int q = static_cast<int>(corr.rows());
  if (z1.size() != q || z2.size() != q)
    throw std::invalid_argument("screen_and_refit_normalized: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
  const double floor = floor_scale * std::max(es.eigenvalues().maxCoeff(), 1e-300);
  const InverseSqrt whitener = inverse_sqrt(corr, floor);
  return screen_core(whitener.m, Eigen::VectorXd::Ones(q), z1, z2, lambda);
}

WhiteningResult finish_whitening(const SplitStatistics& stats,
                                 const HypothesisSet& hypotheses, int rank,
                                 double alpha, double lambda_scale, Side side) {
  const int q = hypotheses.q();
  WhiteningResult out;
  out.rejection.records = stats.records;
  out.rejection.untestable = stats.untestable;
  out.rejection.w_rank.assign(q, kNaN);
  out.w1 = Eigen::VectorXd::Constant(q, kNaN);
  out.w2 = Eigen::VectorXd::Constant(q, kNaN);
  out.sigma_w = Eigen::VectorXd::Constant(q, kNaN);

  std::vector<char> testable(q, 1);
  for (int idx : stats.untestable) testable[idx] = 0;
  std::vector<int> considered;
  if (side != Side::two_sided) {
    const std::vector<int> kept = one_sided_prefilter(stats.records, side);
    std::vector<char> keep_mask(q, 0);
    for (int idx : kept) keep_mask[idx] = 1;
    for (int i = 0; i < q; ++i) {
      if (!testable[i]) continue;
      if (keep_mask[i])
        considered.push_back(i);
      else
        out.rejection.prefiltered.push_back(i);
    }
  } else {
    for (int i = 0; i < q; ++i)
      if (testable[i]) considered.push_back(i);
  }

  if (!considered.empty()) {
    DesignStack stack;
    stack.d1 = static_cast<int>(stats.first.init.U.rows());
    stack.d2 = static_cast<int>(stats.first.init.V.rows());
    for (int idx : considered) stack.forms.push_back(hypotheses.forms[idx]);
    stack.validate(rank);

    const Eigen::MatrixXd sigma =
        estimate_sigma(stack, stats.first.init.U, stats.first.init.V);
    const int m = static_cast<int>(considered.size());
    Eigen::VectorXd stat1(m), stat2(m);
    for (int i = 0; i < m; ++i) {
      const SplitRecordPair& rec = stats.records[considered[i]];
      // Unnormalized statistics (point - theta) / (sigma_hat sqrt(d1 d2 / n)).
      stat1(i) = rec.first.w * rec.first.s_hat;
      stat2(i) = rec.second.w * rec.second.s_hat;
    }
    const double lambda =
        lambda_scale * std::sqrt(std::log(static_cast<double>(stack.d1)));
    const ScreeningResult scr = screen_and_refit(sigma, stat1, stat2, lambda);
    out.lasso_converged = scr.lasso_converged;

    std::vector<double> finite;
    finite.reserve(m);
    for (int i = 0; i < m; ++i) {
      const int idx = considered[i];
      out.w1(idx) = scr.w1(i);
      out.w2(idx) = scr.w2(i);
      out.sigma_w(idx) = scr.sigma_w(i);
      out.rejection.w_rank[idx] = scr.w_rank(i);
      finite.push_back(scr.w_rank(i));
    }
    for (int i : scr.support) out.support.push_back(considered[i]);
    out.rejection.threshold =
        finite.empty() ? kInf : data_driven_threshold(finite, alpha);
    for (int idx : considered)
      if (out.rejection.w_rank[idx] > out.rejection.threshold)
        out.rejection.rejected.push_back(idx);
  }

  if (hypotheses.truth) {
    const Score s = score(out.rejection.rejected, *hypotheses.truth);
    out.rejection.fdp = s.fdp;
    out.rejection.power = s.power;
  }
  return out;
}

WhiteningResult run_whitening(const ObservationSet& obs,
                              const HypothesisSet& hypotheses, const GdConfig& cfg,
                              double alpha, double lambda_scale) {
  hypotheses.validate();
  if (hypotheses.q() == 0) {
    WhiteningResult empty;
    if (hypotheses.truth) {
      empty.rejection.fdp = 0.0;
      empty.rejection.power = 0.0;
    }
    return empty;
  }
  {
    // The q cap is a precondition on the family itself.
    DesignStack stack{obs.d1, obs.d2, hypotheses.forms};
    stack.validate(cfg.rank);
  }
  const Side side = hypotheses.forms.front().side();
  const SplitStatistics stats = compute_split_statistics(obs, hypotheses, cfg);
  return finish_whitening(stats, hypotheses, cfg.rank, alpha, lambda_scale, side);
}

PairClassification classify_pairs(const HypothesisSet& hypotheses,
                                  const Eigen::MatrixXd& u,
                                  const Eigen::MatrixXd& v, double nu, double c,
                                  bool absolute) {
  if (!(nu > 0.0)) throw std::invalid_argument("classify_pairs: nu must be > 0");
  if (!(c > 0.0)) throw std::invalid_argument("classify_pairs: c must be > 0");
  hypotheses.validate();

  std::vector<int> null_idx;
  for (int i = 0; i < hypotheses.q(); ++i)
    if (!hypotheses.truth || !(*hypotheses.truth)[i]) null_idx.push_back(i);

  PairClassification out;
  const int q0 = static_cast<int>(null_idx.size());
  if (q0 == 0) return out;
  out.threshold = c * std::pow(static_cast<double>(q0), -nu);

  std::vector<TangentSummary> summaries;
  summaries.reserve(q0);
  for (int idx : null_idx)
    summaries.push_back(summarize_projection(hypotheses.forms[idx], u, v));

  long long strong_ordered = 0;
  for (int a = 0; a < q0; ++a) {
    for (int b = a; b < q0; ++b) {
      bool strong = false;
      if (summaries[a].norm2 > 0.0 && summaries[b].norm2 > 0.0) {
        double rho = (a == b) ? 1.0
                              : projection_inner(summaries[a], summaries[b]) /
                                    std::sqrt(summaries[a].norm2 * summaries[b].norm2);
        if (absolute) rho = std::abs(rho);
        strong = rho >= out.threshold;
      }
      const auto pair = std::make_pair(null_idx[a], null_idx[b]);
      if (strong) {
        out.strong.push_back(pair);
        strong_ordered += (a == b) ? 1 : 2;
      } else {
        out.weak.push_back(pair);
      }
    }
  }
  out.beta_s = static_cast<double>(strong_ordered) /
               (static_cast<double>(q0) * static_cast<double>(q0));
  return out;
}

}  // namespace matfdr
