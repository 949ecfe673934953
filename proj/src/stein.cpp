#include "malstein/stein.hpp"

#include <algorithm>
#include <cmath>

#include "malstein/common.hpp"
#include "malstein/gausssim.hpp"
#include "malstein/parallel.hpp"
#include "malstein/rng.hpp"

namespace malstein {

namespace {

void check_t(double t, const char *who) {
  if (!(t > 0.0 && t < 1.0))
    throw contract_error(std::string(who) + ": t must be in (0, 1)");
}

bool half_space_params(const ConvexSet &q, const CovarianceMatrix &sigma,
                       Eigen::VectorXd &a, double &c, double &sd) {
  if (q.family != ConvexFamily::half_space) return false;
  a = q.normals.row(0).transpose();
  c = q.offsets[0];
  sd = std::sqrt(a.dot(sigma.matrix() * a));
  return sd > 0.0;
}

// Draws shared by every quadrature node and stencil offset: budget i.i.d.
// N(0, Sigma) vectors from one stream.
Eigen::MatrixXd gaussian_draws(const CovarianceMatrix &sigma,
                               std::size_t budget, std::uint64_t seed) {
  std::size_t m = sigma.dim();
  NormalStream ns(seed, derive_stream("stein-draws"));
  Eigen::MatrixXd z(m, budget);
  std::vector<double> buf(m * budget);
  ns.fill_normals(buf, 0);
  for (std::size_t b = 0; b < budget; ++b)
    for (std::size_t i = 0; i < m; ++i)
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) =
          buf[b * m + i];
  if (!sigma.is_identity()) z = sigma.cholesky() * z;
  return z;
}

struct Quadrature {
  std::vector<double> u, w, s;  // nodes, trapezoid weights, s = 1 - e^{-u}
  double u_max = 0.0;
};

Quadrature build_grid(double t, std::size_t grid) {
  Quadrature q;
  double u_t = -std::log1p(-t);
  q.u_max = u_t + 40.0;
  q.u.resize(grid);
  double l0 = std::log(u_t), l1 = std::log(q.u_max);
  for (std::size_t k = 0; k < grid; ++k)
    q.u[k] = std::exp(l0 + (l1 - l0) * static_cast<double>(k) /
                               static_cast<double>(grid - 1));
  q.w.resize(grid, 0.0);
  for (std::size_t k = 0; k < grid; ++k) {
    double lo = k == 0 ? q.u[0] : 0.5 * (q.u[k - 1] + q.u[k]);
    double hi = k + 1 == grid ? q.u[grid - 1] : 0.5 * (q.u[k] + q.u[k + 1]);
    q.w[k] = hi - lo;
  }
  q.s.resize(grid);
  for (std::size_t k = 0; k < grid; ++k) q.s[k] = -std::expm1(-q.u[k]);
  return q;
}

}  // namespace

MollifyResult mollify(const ConvexSet &q, const CovarianceMatrix &sigma,
                      double t, const Eigen::VectorXd &x, std::size_t budget,
                      std::uint64_t seed) {
  check_t(t, "mollify");
  if (x.size() != static_cast<Eigen::Index>(sigma.dim()))
    throw contract_error("mollify: point dimension mismatch");
  if (budget == 0) throw contract_error("mollify: budget must be >= 1");

  MollifyResult out;
  out.low_budget = budget < 1000;

  if (q.family == ConvexFamily::whole) {
    out.value = 1.0;
    out.closed_form = true;
    out.low_budget = false;
    return out;
  }
  Eigen::VectorXd a;
  double c, sd;
  if (half_space_params(q, sigma, a, c, sd)) {
    out.value = normal_cdf((c - std::sqrt(1.0 - t) * a.dot(x)) /
                           (std::sqrt(t) * sd));
    out.closed_form = true;
    out.low_budget = false;
    return out;
  }

  Eigen::MatrixXd z = gaussian_draws(sigma, budget, seed);
  double st = std::sqrt(t), sx = std::sqrt(1.0 - t);
  std::size_t cnt = 0;
  Eigen::VectorXd y(x.size());
  for (std::size_t b = 0; b < budget; ++b) {
    y = st * z.col(static_cast<Eigen::Index>(b)) + sx * x;
    cnt += q.contains(y) ? 1 : 0;
  }
  out.value = static_cast<double>(cnt) / static_cast<double>(budget);
  out.se = std::sqrt(std::max(0.0, out.value * (1.0 - out.value)) /
                     static_cast<double>(budget));
  return out;
}

SteinEval stein_solution(const ConvexSet &q, const CovarianceMatrix &sigma,
                         double t, const Eigen::VectorXd &x, std::size_t grid,
                         std::size_t budget, std::uint64_t seed) {
  check_t(t, "stein_solution");
  if (grid < 32) throw contract_error("stein_solution: grid must be >= 32");
  if (x.size() != static_cast<Eigen::Index>(sigma.dim()))
    throw contract_error("stein_solution: point dimension mismatch");

  SteinEval out;
  Quadrature qd = build_grid(t, grid);
  out.nodes = grid;
  out.u_max = qd.u_max;

  if (q.family == ConvexFamily::whole) {
    out.closed_form = true;
    return out;  // integrand identically zero
  }
  Eigen::VectorXd a;
  double c, sd;
  if (half_space_params(q, sigma, a, c, sd)) {
    out.closed_form = true;
    double ax = a.dot(x);
    double base = normal_cdf(c / sd);
    std::vector<double> terms(grid);
    for (std::size_t k = 0; k < grid; ++k) {
      double s = qd.s[k];
      double hs = normal_cdf((c - std::sqrt(1.0 - s) * ax) /
                             (std::sqrt(s) * sd));
      terms[k] = -0.5 * qd.w[k] * (hs - base);
    }
    out.value = neumaier_sum(terms);
    return out;
  }

  if (budget == 0) throw contract_error("stein_solution: budget must be >= 1");
  Eigen::MatrixXd z = gaussian_draws(sigma, budget, seed);
  std::vector<double> per_draw(budget, 0.0);
  Eigen::VectorXd y(x.size());
  for (std::size_t b = 0; b < budget; ++b) {
    Eigen::VectorXd zb = z.col(static_cast<Eigen::Index>(b));
    double base = q.contains(zb) ? 1.0 : 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < grid; ++k) {
      double s = qd.s[k];
      y = std::sqrt(s) * zb + std::sqrt(1.0 - s) * x;
      acc += qd.w[k] * ((q.contains(y) ? 1.0 : 0.0) - base);
    }
    per_draw[b] = -0.5 * acc;
  }
  MeanSe ms = mean_se(per_draw);
  out.value = ms.mean;
  out.se = ms.se;
  return out;
}

HessianProbe hessian_probe(const ConvexSet &q, const CovarianceMatrix &sigma,
                           double t, const SampleBatch &points,
                           std::size_t grid, std::size_t budget,
                           std::uint64_t seed, double dc_estimate) {
  check_t(t, "hessian_probe");
  if (points.m != sigma.dim())
    throw contract_error("hessian_probe: point dimension mismatch");
  if (points.R == 0) throw contract_error("hessian_probe: no probe points");
  if (!(dc_estimate >= 0.0))
    throw contract_error("hessian_probe: dc_estimate must be >= 0");

  std::size_t m = points.m;
  double md = static_cast<double>(m);
  HessianProbe out;
  out.total = points.R;
  out.point_values.assign(points.R, 0.0);
  out.point_usable.assign(points.R, 0);

  auto eval = [&](const Eigen::VectorXd &x) {
    return stein_solution(q, sigma, t, x, grid, budget, seed);
  };

  // Step from the MC noise at the first point; the noise-optimal scaling for
  // second differences is se^{1/4}. Closed-form paths have no noise and use
  // a plain small step.
  Eigen::VectorXd x0(m);
  for (std::size_t i = 0; i < m; ++i)
    x0[static_cast<Eigen::Index>(i)] = points.at(0, i);
  SteinEval center0 = eval(x0);
  double h = center0.closed_form || center0.se == 0.0
                 ? 1e-4
                 : std::pow(center0.se, 0.25);
  out.step = h;

  std::vector<double> vals(points.R, 0.0);
  std::vector<std::uint8_t> usable(points.R, 0);
  parallel_for(static_cast<std::ptrdiff_t>(points.R), [&](std::ptrdiff_t rr) {
    std::size_t r = static_cast<std::size_t>(rr);
    Eigen::VectorXd x(m);
    for (std::size_t i = 0; i < m; ++i)
      x[static_cast<Eigen::Index>(i)] = points.at(r, i);
    SteinEval fc = eval(x);
    double hs_sq = 0.0;
    double noise_var = 0.0;
    Eigen::VectorXd xp = x, xm = x;
    for (std::size_t i = 0; i < m; ++i) {
      Eigen::Index ei = static_cast<Eigen::Index>(i);
      xp = x;
      xm = x;
      xp[ei] += h;
      xm[ei] -= h;
      double dd = (eval(xp).value - 2.0 * fc.value + eval(xm).value) / (h * h);
      hs_sq += dd * dd;
      noise_var += 6.0 * fc.se * fc.se / (h * h * h * h);
      for (std::size_t j = i + 1; j < m; ++j) {
        Eigen::Index ej = static_cast<Eigen::Index>(j);
        Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
        xpp[ei] += h; xpp[ej] += h;
        xpm[ei] += h; xpm[ej] -= h;
        xmp[ei] -= h; xmp[ej] += h;
        xmm[ei] -= h; xmm[ej] -= h;
        double od = (eval(xpp).value - eval(xpm).value - eval(xmp).value +
                     eval(xmm).value) /
                    (4.0 * h * h);
        hs_sq += 2.0 * od * od;
        noise_var += 2.0 * fc.se * fc.se / (4.0 * h * h * h * h);
      }
    }
    vals[r] = hs_sq;
    // A probe is data only when the value clears the independent-draw noise
    // floor; common random numbers make the real noise smaller, so this
    // errs toward discarding.
    usable[r] = (fc.se == 0.0 || hs_sq > 4.0 * noise_var) ? 1 : 0;
  });

  out.point_values = vals;
  out.point_usable = usable;
  std::vector<double> kept;
  for (std::size_t r = 0; r < points.R; ++r)
    if (usable[r]) kept.push_back(vals[r]);
  out.usable = kept.size();
  if (!kept.empty()) {
    out.probe_max = *std::max_element(kept.begin(), kept.end());
    out.probe_mean = neumaier_sum(kept) / static_cast<double>(kept.size());
  }
  double lt = std::log(t);
  out.lemma_rhs = sigma.inv_op_norm() * sigma.inv_op_norm() *
                  (md * md * lt * lt * dc_estimate +
                   530.0 * std::pow(md, 17.0 / 6.0));
  out.contradiction = out.usable > 0 && out.probe_mean > out.lemma_rhs;
  return out;
}

SmoothingCheck smoothing_check(const ConvexSet &q,
                               const CovarianceMatrix &sigma, double t,
                               const SampleBatch &batch, std::size_t budget,
                               std::uint64_t seed, std::size_t ref_draws) {
  check_t(t, "smoothing_check");
  if (batch.m != sigma.dim())
    throw contract_error("smoothing_check: batch dimension mismatch");
  if (batch.R < 2) throw contract_error("smoothing_check: need >= 2 replicates");

  std::size_t R = batch.R;
  double md = static_cast<double>(batch.m);

  // P(N in Q): exact where the set allows, Monte Carlo reference otherwise.
  // E h_t(N_Sigma) equals this for every t.
  double p_ref = 0.0, se_ref = 0.0;
  if (!q.gauss_prob(sigma, p_ref)) {
    SampleBatch g = sample_normal(sigma, ref_draws, seed,
                                  derive_stream("smoothing-ref"));
    std::size_t cnt = 0;
    Eigen::VectorXd x(batch.m);
    for (std::size_t r = 0; r < ref_draws; ++r) {
      for (std::size_t i = 0; i < batch.m; ++i)
        x[static_cast<Eigen::Index>(i)] = g.at(r, i);
      cnt += q.contains(x) ? 1 : 0;
    }
    p_ref = static_cast<double>(cnt) / static_cast<double>(ref_draws);
    se_ref = std::sqrt(std::max(0.0, p_ref * (1.0 - p_ref)) /
                       static_cast<double>(ref_draws));
  }

  // E h(F) and E h_t(F) from the same batch; h_t per replicate shares one
  // draw set (common random numbers) on the Monte Carlo path.
  std::vector<double> hvals(R), htvals(R);
  Eigen::VectorXd a;
  double c, sd;
  bool hs = half_space_params(q, sigma, a, c, sd);
  double se_z = 0.0;
  if (hs || q.family == ConvexFamily::whole) {
    parallel_for(static_cast<std::ptrdiff_t>(R), [&](std::ptrdiff_t rr) {
      std::size_t r = static_cast<std::size_t>(rr);
      Eigen::VectorXd x(batch.m);
      for (std::size_t i = 0; i < batch.m; ++i)
        x[static_cast<Eigen::Index>(i)] = batch.at(r, i);
      hvals[r] = q.contains(x) ? 1.0 : 0.0;
      htvals[r] = q.family == ConvexFamily::whole
                      ? 1.0
                      : normal_cdf((c - std::sqrt(1.0 - t) * a.dot(x)) /
                                   (std::sqrt(t) * sd));
    });
  } else {
    if (budget == 0) throw contract_error("smoothing_check: budget must be >= 1");
    Eigen::MatrixXd z = gaussian_draws(sigma, budget, seed);
    double st = std::sqrt(t), sx = std::sqrt(1.0 - t);
    std::vector<double> per_draw(budget, 0.0);
    parallel_for(static_cast<std::ptrdiff_t>(R), [&](std::ptrdiff_t rr) {
      std::size_t r = static_cast<std::size_t>(rr);
      Eigen::VectorXd x(batch.m);
      for (std::size_t i = 0; i < batch.m; ++i)
        x[static_cast<Eigen::Index>(i)] = batch.at(r, i);
      hvals[r] = q.contains(x) ? 1.0 : 0.0;
      std::size_t cnt = 0;
      Eigen::VectorXd y(batch.m);
      for (std::size_t b = 0; b < budget; ++b) {
        y = st * z.col(static_cast<Eigen::Index>(b)) + sx * x;
        cnt += q.contains(y) ? 1 : 0;
      }
      htvals[r] = static_cast<double>(cnt) / static_cast<double>(budget);
    });
    // Shared-draw noise does not average out over replicates; estimate it
    // from per-draw means over a replicate subsample.
    std::size_t sub = std::min<std::size_t>(R, 512);
    for (std::size_t b = 0; b < budget; ++b) {
      double acc = 0.0;
      for (std::size_t r = 0; r < sub; ++r) {
        Eigen::VectorXd x(batch.m);
        for (std::size_t i = 0; i < batch.m; ++i)
          x[static_cast<Eigen::Index>(i)] = batch.at(r, i);
        Eigen::VectorXd y = st * z.col(static_cast<Eigen::Index>(b)) + sx * x;
        acc += q.contains(y) ? 1.0 : 0.0;
      }
      per_draw[b] = acc / static_cast<double>(sub);
    }
    se_z = mean_se(per_draw).se;
  }

  MeanSe mh = mean_se(hvals);
  MeanSe mht = mean_se(htvals);

  SmoothingCheck out;
  out.lhs = std::abs(mh.mean - p_ref);
  out.mollified_diff = std::abs(mht.mean - p_ref);
  out.slack = (20.0 * md / std::sqrt(2.0)) * std::sqrt(t) / (1.0 - t);
  out.rhs = (4.0 / 3.0) * out.mollified_diff + out.slack;
  out.se = std::sqrt(mh.se * mh.se +
                     (16.0 / 9.0) * (mht.se * mht.se + se_z * se_z) +
                     (1.0 + 16.0 / 9.0) * se_ref * se_ref);
  out.ok = out.lhs <= out.rhs + 3.0 * out.se;
  return out;
}

}  // namespace malstein
