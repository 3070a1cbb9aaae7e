#include "matfdr/inference.hpp"

#include <algorithm>
#include <cmath>

#include "matfdr/stats.hpp"

namespace matfdr {

Eigen::MatrixXd tangent_project(const Eigen::MatrixXd& t, const Eigen::MatrixXd& u,
                                const Eigen::MatrixXd& v) {
  // T - (I - U U^T) T (I - V V^T), without forming the complements.
  const Eigen::MatrixXd left = t - u * (u.transpose() * t);
  return t - (left - (left * v) * v.transpose());
}

Eigen::MatrixXd tangent_project(const LinearForm& form, const Eigen::MatrixXd& u,
                                const Eigen::MatrixXd& v) {
  return tangent_project(
      form.to_dense(static_cast<int>(u.rows()), static_cast<int>(v.rows())), u, v);
}

TangentSummary summarize_projection(const LinearForm& form,
                                    const Eigen::MatrixXd& u,
                                    const Eigen::MatrixXd& v) {
  const int r = static_cast<int>(u.cols());
  if (form.max_row() >= u.rows() || form.max_col() >= v.rows())
    throw std::invalid_argument("summarize_projection: form outside dimensions");
  TangentSummary s;
  s.ut_t = Eigen::MatrixXd::Zero(r, v.rows());
  s.t_v = Eigen::MatrixXd::Zero(u.rows(), r);
  for (const FormEntry& e : form.entries()) {
    s.ut_t.col(e.col) += e.value * u.row(e.row).transpose();
    s.t_v.row(e.row) += e.value * v.row(e.col);
  }
  s.ut_t_v = s.ut_t * v;
  s.norm2 = std::max(0.0, s.ut_t.squaredNorm() + s.t_v.squaredNorm() -
                              s.ut_t_v.squaredNorm());
  return s;
}

double projection_inner(const TangentSummary& a, const TangentSummary& b) {
  // P(T) = U U^T T + T V V^T - U U^T T V V^T, so the inner product of two
  // projections reduces to the three small Gram terms.
  return a.ut_t.cwiseProduct(b.ut_t).sum() + a.t_v.cwiseProduct(b.t_v).sum() -
         a.ut_t_v.cwiseProduct(b.ut_t_v).sum();
}

AlignmentRatio alignment_ratio(const LinearForm& form, const Eigen::MatrixXd& u,
                               const Eigen::MatrixXd& v) {
  const TangentSummary s = summarize_projection(form, u, v);
  const double proj_norm = std::sqrt(s.norm2);
  AlignmentRatio out;
  if (proj_norm <= 0.0) {
    out.degenerate = true;
    return out;
  }
  out.value = proj_norm / form.fro_norm() *
              std::sqrt(static_cast<double>(v.rows()) /
                        static_cast<double>(u.cols()));
  return out;
}

double noise_variance_estimate(const ObservationSet& obs, const FactorModel& init) {
  obs.validate();
  if (!init.has_dense())
    throw std::invalid_argument("noise_variance_estimate: init.dense required");
  double acc = 0.0;
  for (const Sample& s : obs.samples) {
    const double res = s.value - init.dense(s.row, s.col);
    acc += res * res;
  }
  return acc / static_cast<double>(obs.n());
}

double sampling_sd_estimate(const LinearForm& form, const FactorModel& init) {
  return std::sqrt(summarize_projection(form, init.U, init.V).norm2);
}

namespace {
double statistic_scale(const ObservationSet& obs, double sigma_xi, double s_hat) {
  return sigma_xi * s_hat *
         std::sqrt(static_cast<double>(obs.d1) * static_cast<double>(obs.d2) /
                   static_cast<double>(obs.n()));
}
}  // namespace

TestRecord test_statistic(const LinearForm& form, const FactorModel& model,
                          const FactorModel& init, const ObservationSet& obs) {
  TestRecord rec;
  rec.point = form.inner(model.has_dense() ? model.dense : model.reconstruct());
  rec.sigma_xi_hat = std::sqrt(noise_variance_estimate(obs, init));
  rec.s_hat = sampling_sd_estimate(form, init);
  if (!(rec.s_hat > 0.0))
    throw UntestableForm("test_statistic: projection norm is zero");
  if (!(rec.sigma_xi_hat > 0.0))
    throw UntestableForm("test_statistic: noise variance estimate is zero");
  rec.w = (rec.point - form.theta()) / statistic_scale(obs, rec.sigma_xi_hat, rec.s_hat);
  return rec;
}

std::pair<double, double> confidence_interval(const LinearForm& form,
                                              const FactorModel& model,
                                              const FactorModel& init,
                                              const ObservationSet& obs,
                                              double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("confidence_interval: level must be in (0,1)");
  const TestRecord rec = test_statistic(form, model, init, obs);
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double half = z * statistic_scale(obs, rec.sigma_xi_hat, rec.s_hat);
  return {rec.point - half, rec.point + half};
}

double pair_correlation(const LinearForm& a, const LinearForm& b,
                        const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
  if (&a == &b) {
    if (!(summarize_projection(a, u, v).norm2 > 0.0))
      throw UntestableForm("pair_correlation: a projection norm is zero");
    return 1.0;
  }
  const TangentSummary sa = summarize_projection(a, u, v);
  const TangentSummary sb = summarize_projection(b, u, v);
  if (!(sa.norm2 > 0.0) || !(sb.norm2 > 0.0))
    throw UntestableForm("pair_correlation: a projection norm is zero");
  const double rho = projection_inner(sa, sb) / std::sqrt(sa.norm2 * sb.norm2);
  return std::clamp(rho, -1.0, 1.0);
}

double moment_diagnostic(const std::vector<double>& w_samples, int k) {
  if (k < 2) throw std::invalid_argument("moment_diagnostic: k must be >= 2");
  if (w_samples.empty())
    throw std::invalid_argument("moment_diagnostic: empty sample");
  double acc = 0.0;
  for (double w : w_samples) acc += std::pow(w * w, k);
  return acc / static_cast<double>(w_samples.size());
}

}  // namespace matfdr
