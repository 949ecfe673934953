#include "malstein/distances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "malstein/common.hpp"
#include "malstein/gausssim.hpp"
#include "malstein/parallel.hpp"
#include "malstein/rng.hpp"

namespace malstein {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double fract(double x) { return x - std::floor(x); }

// Generalized golden ratio: the positive root of x^{m+1} = x + 1. Powers of
// 1/g give the best-known Kronecker direction vector in m dimensions.
std::vector<double> kronecker_alphas(std::size_t m) {
  double g = 1.5;
  for (int it = 0; it < 128; ++it) g = std::pow(1.0 + g, 1.0 / (m + 1.0));
  std::vector<double> a(m);
  double p = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    p /= g;
    a[i] = p;
  }
  return a;
}

std::vector<double> kronecker_point(const std::vector<double> &alpha,
                                    std::uint64_t k) {
  std::vector<double> u(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i)
    u[i] = fract(0.5 + static_cast<double>(k + 1) * alpha[i]);
  return u;
}

// Unit directions: the 2m signed axes first (sharp for marginal shifts),
// then Kronecker points pushed through the normal quantile and normalized.
Eigen::MatrixXd sphere_directions(std::size_t m, std::size_t count,
                                  std::uint64_t seed) {
  Eigen::MatrixXd out(count, m);
  if (m == 1) {
    for (std::size_t k = 0; k < count; ++k) out(k, 0) = (k % 2 == 0) ? 1.0 : -1.0;
    return out;
  }
  std::size_t k = 0;
  for (; k < count && k < 2 * m; ++k) {
    out.row(k).setZero();
    out(k, k / 2) = (k % 2 == 0) ? 1.0 : -1.0;
  }
  auto alpha = kronecker_alphas(m);
  std::uint64_t skip = seed % 4096;
  for (; k < count; ++k) {
    auto u = kronecker_point(alpha, skip + (k - 2 * m));
    Eigen::VectorXd z(m);
    for (std::size_t i = 0; i < m; ++i)
      z[static_cast<Eigen::Index>(i)] =
          normal_quantile(std::min(1.0 - 1e-12, std::max(1e-12, u[i])));
    double nrm = z.norm();
    if (nrm < 1e-12) {
      z.setZero();
      z[0] = 1.0;
      nrm = 1.0;
    }
    out.row(k) = (z / nrm).transpose();
  }
  return out;
}

bool is_diagonal(const Eigen::MatrixXd &s) {
  double scale = s.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      if (i != j && std::abs(s(i, j)) > 1e-14 * std::max(1.0, scale))
        return false;
  return true;
}

// Multinomial bootstrap weights: R throws into R boxes, deterministic per
// (seed, b) so the resample is shared across every set in the class.
std::vector<std::uint16_t> bootstrap_weights(std::size_t R, std::uint64_t seed,
                                             std::uint64_t b) {
  NormalStream s(seed, derive_stream("dc-bootstrap", b));
  std::vector<std::uint16_t> w(R, 0);
  for (std::size_t i = 0; i < R; ++i)
    w[s.index(i, static_cast<std::uint64_t>(R))]++;
  return w;
}

double percentile(std::vector<double> xs, double p) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  double idx = p * static_cast<double>(xs.size() - 1);
  std::size_t lo = static_cast<std::size_t>(idx);
  std::size_t hi = std::min(lo + 1, xs.size() - 1);
  double frac = idx - static_cast<double>(lo);
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

double stddev(const std::vector<double> &xs) {
  if (xs.size() < 2) return 0.0;
  double mean = neumaier_sum(xs) / static_cast<double>(xs.size());
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    sq[i] = (xs[i] - mean) * (xs[i] - mean);
  return std::sqrt(neumaier_sum(sq) / static_cast<double>(xs.size() - 1));
}

}  // namespace

std::string family_name(ConvexFamily f) {
  switch (f) {
    case ConvexFamily::half_space: return "half-spaces";
    case ConvexFamily::axis_box: return "axis-boxes";
    case ConvexFamily::ball: return "balls";
    case ConvexFamily::polytope: return "polytopes";
    case ConvexFamily::whole: return "whole-space";
  }
  return "?";
}

bool ConvexSet::contains(const Eigen::VectorXd &x) const {
  switch (family) {
    case ConvexFamily::whole:
      return true;
    case ConvexFamily::half_space:
    case ConvexFamily::polytope:
      return ((normals * x - offsets).array() <= 0.0).all();
    case ConvexFamily::axis_box:
      return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    case ConvexFamily::ball:
      return (x - center).norm() <= radius;
  }
  return false;
}

bool ConvexSet::gauss_prob(const CovarianceMatrix &sigma, double &out) const {
  switch (family) {
    case ConvexFamily::whole:
      out = 1.0;
      return true;
    case ConvexFamily::half_space: {
      Eigen::VectorXd a = normals.row(0).transpose();
      double sd = std::sqrt(a.dot(sigma.matrix() * a));
      out = sd > 0.0 ? normal_cdf(offsets[0] / sd) : (offsets[0] >= 0.0 ? 1.0 : 0.0);
      return true;
    }
    case ConvexFamily::axis_box: {
      if (!is_diagonal(sigma.matrix())) return false;
      double p = 1.0;
      for (Eigen::Index i = 0; i < lo.size(); ++i) {
        double sd = std::sqrt(sigma.matrix()(i, i));
        p *= normal_cdf(hi[i] / sd) - normal_cdf(lo[i] / sd);
      }
      out = std::max(0.0, p);
      return true;
    }
    default:
      return false;
  }
}

std::size_t ConvexTestClass::size() const {
  if (family == ConvexFamily::half_space)
    return static_cast<std::size_t>(directions.rows()) * levels.size();
  return sets.size();
}

ConvexTestClass ConvexTestClass::half_spaces(std::size_t m,
                                             std::size_t directions,
                                             std::size_t thresholds,
                                             std::uint64_t seed) {
  if (m == 0 || directions == 0 || thresholds == 0)
    throw contract_error("half_spaces: m, directions, thresholds must be >= 1");
  ConvexTestClass c;
  c.family = ConvexFamily::half_space;
  c.m = m;
  c.seed = seed;
  c.directions = sphere_directions(m, directions, seed);
  c.levels.resize(thresholds);
  for (std::size_t t = 0; t < thresholds; ++t)
    c.levels[t] = (static_cast<double>(t) + 0.5) / static_cast<double>(thresholds);
  return c;
}

ConvexTestClass ConvexTestClass::axis_boxes(std::size_t m, std::size_t count,
                                            const CovarianceMatrix &sigma,
                                            std::uint64_t seed) {
  if (m == 0 || count == 0 || sigma.dim() != m)
    throw contract_error("axis_boxes: bad dimensions");
  ConvexTestClass c;
  c.family = ConvexFamily::axis_box;
  c.m = m;
  c.seed = seed;
  auto alpha = kronecker_alphas(2 * m);
  std::uint64_t skip = seed % 4096;
  for (std::size_t k = 0; k < count; ++k) {
    auto u = kronecker_point(alpha, skip + k);
    ConvexSet s;
    s.family = ConvexFamily::axis_box;
    s.lo.resize(m);
    s.hi.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      double sd = std::sqrt(sigma.matrix()(static_cast<Eigen::Index>(i),
                                           static_cast<Eigen::Index>(i)));
      double center = 0.7 * sd *
                      normal_quantile(std::min(1.0 - 1e-9, std::max(1e-9, u[i])));
      double half = sd * (0.25 + 1.75 * u[m + i]);
      s.lo[static_cast<Eigen::Index>(i)] = center - half;
      s.hi[static_cast<Eigen::Index>(i)] = center + half;
    }
    c.sets.push_back(std::move(s));
  }
  return c;
}

ConvexTestClass ConvexTestClass::balls(std::size_t m, std::size_t count,
                                       const CovarianceMatrix &sigma,
                                       std::uint64_t seed) {
  if (m == 0 || count == 0 || sigma.dim() != m)
    throw contract_error("balls: bad dimensions");
  ConvexTestClass c;
  c.family = ConvexFamily::ball;
  c.m = m;
  c.seed = seed;
  double scale = std::sqrt(sigma.trace());
  auto alpha = kronecker_alphas(m + 1);
  std::uint64_t skip = seed % 4096;
  for (std::size_t k = 0; k < count; ++k) {
    auto u = kronecker_point(alpha, skip + k);
    ConvexSet s;
    s.family = ConvexFamily::ball;
    s.center.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      double sd = std::sqrt(sigma.matrix()(static_cast<Eigen::Index>(i),
                                           static_cast<Eigen::Index>(i)));
      s.center[static_cast<Eigen::Index>(i)] =
          0.7 * sd * normal_quantile(std::min(1.0 - 1e-9, std::max(1e-9, u[i])));
    }
    s.radius = scale * (0.2 + 2.3 * u[m]);
    c.sets.push_back(std::move(s));
  }
  return c;
}

ConvexTestClass ConvexTestClass::polytopes(std::size_t m, std::size_t count,
                                           std::size_t faces,
                                           const CovarianceMatrix &sigma,
                                           std::uint64_t seed) {
  if (m == 0 || count == 0 || faces == 0 || sigma.dim() != m)
    throw contract_error("polytopes: bad dimensions");
  ConvexTestClass c;
  c.family = ConvexFamily::polytope;
  c.m = m;
  c.seed = seed;
  for (std::size_t k = 0; k < count; ++k) {
    NormalStream geom(seed, derive_stream("convex-polytope", k));
    ConvexSet s;
    s.family = ConvexFamily::polytope;
    s.normals.resize(faces, m);
    s.offsets.resize(faces);
    for (std::size_t j = 0; j < faces; ++j) {
      Eigen::VectorXd a(m);
      for (std::size_t i = 0; i < m; ++i)
        a[static_cast<Eigen::Index>(i)] = geom.normal(j * m + i);
      double nrm = a.norm();
      if (nrm < 1e-12) {
        a.setZero();
        a[0] = 1.0;
        nrm = 1.0;
      }
      a /= nrm;
      double sd = std::sqrt(a.dot(sigma.matrix() * a));
      double u = geom.uniform((faces + j) * m + 1);
      s.normals.row(static_cast<Eigen::Index>(j)) = a.transpose();
      s.offsets[static_cast<Eigen::Index>(j)] =
          sd * normal_quantile(0.55 + 0.43 * u);
    }
    c.sets.push_back(std::move(s));
  }
  return c;
}

ConvexTestClass ConvexTestClass::whole(std::size_t m) {
  if (m == 0) throw contract_error("whole: m must be >= 1");
  ConvexTestClass c;
  c.family = ConvexFamily::whole;
  c.m = m;
  ConvexSet s;
  s.family = ConvexFamily::whole;
  c.sets.push_back(std::move(s));
  return c;
}

ConvexTestClass ConvexTestClass::linear_image(const Eigen::MatrixXd &A) const {
  if (family != ConvexFamily::half_space)
    throw contract_error("linear_image: only half-space classes transform");
  if (A.rows() != static_cast<Eigen::Index>(m) ||
      A.cols() != static_cast<Eigen::Index>(m))
    throw contract_error("linear_image: map dimension mismatch");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw contract_error("linear_image: map is not invertible");
  Eigen::MatrixXd B = lu.inverse().transpose();
  ConvexTestClass out = *this;
  for (Eigen::Index d = 0; d < directions.rows(); ++d) {
    Eigen::VectorXd a = B * directions.row(d).transpose();
    out.directions.row(d) = (a / a.norm()).transpose();
  }
  return out;
}

double ks_exact_1d(std::vector<double> scores, double sigma_sq) {
  if (scores.empty()) throw contract_error("ks_exact_1d: empty sample");
  if (!(sigma_sq > 0.0)) throw contract_error("ks_exact_1d: variance must be > 0");
  std::sort(scores.begin(), scores.end());
  double sd = std::sqrt(sigma_sq);
  double R = static_cast<double>(scores.size());
  double best = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    double F = normal_cdf(scores[i] / sd);
    double right = static_cast<double>(i + 1) / R - F;
    double left = static_cast<double>(i) / R - F;
    best = std::max({best, std::abs(right), std::abs(left)});
  }
  return best;
}

double dc_interval_exact_1d(std::vector<double> scores, double sigma_sq) {
  if (scores.empty())
    throw contract_error("dc_interval_exact_1d: empty sample");
  if (!(sigma_sq > 0.0))
    throw contract_error("dc_interval_exact_1d: variance must be > 0");
  std::sort(scores.begin(), scores.end());
  double sd = std::sqrt(sigma_sq);
  std::size_t n = scores.size();
  double R = static_cast<double>(n);
  // g(t) = Fhat(t) - Phi(t). Right values Ri at sample points, left limits
  // Li; an interval's discrepancy is g_right(b) - g_left(a), so the exact
  // sup scans prefix minima of L and suffix minima of (R, L) against 0
  // (the value of g at +-infinity).
  std::vector<double> Lv(n), Rv(n);
  for (std::size_t i = 0; i < n; ++i) {
    double F = normal_cdf(scores[i] / sd);
    Rv[i] = static_cast<double>(i + 1) / R - F;
    Lv[i] = static_cast<double>(i) / R - F;
  }
  double best = 0.0;
  double premin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    premin = std::min(premin, Lv[i]);
    best = std::max(best, Rv[i] - premin);
  }
  // Left endpoint just above a sample point excludes that atom, so g_left
  // there equals Rv; pair it with strictly later right endpoints.
  double tail = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    best = std::max(best, Rv[i] - tail);
    best = std::max(best, Lv[i] - std::min(tail, Rv[i]));
    tail = std::min(tail, std::min(Lv[i], Rv[i]));
  }
  return best;
}

namespace {

// Exact Kolmogorov sweep reused by the m = 1 half-space path, with
// multinomial weights for the bootstrap replicates.
struct Sweep1d {
  std::vector<double> sorted;       // sorted scores
  std::vector<double> gauss_cdf;    // Phi at sorted scores
  std::vector<std::size_t> perm;    // original index of sorted entry
};

double weighted_ks(const Sweep1d &sw, const std::vector<std::uint16_t> &w) {
  double R = static_cast<double>(sw.sorted.size());
  double best = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < sw.sorted.size(); ++i) {
    double left = acc / R - sw.gauss_cdf[i];
    acc += static_cast<double>(w[sw.perm[i]]);
    double right = acc / R - sw.gauss_cdf[i];
    best = std::max({best, std::abs(left), std::abs(right)});
  }
  return best;
}

DistanceEstimate dc_halfspace_1d(const SampleBatch &batch,
                                 const CovarianceMatrix &sigma,
                                 const DcOptions &opts) {
  std::size_t R = batch.R;
  Sweep1d sw;
  sw.perm.resize(R);
  std::vector<std::pair<double, std::size_t>> order(R);
  for (std::size_t r = 0; r < R; ++r) order[r] = {batch.at(r, 0), r};
  std::sort(order.begin(), order.end());
  sw.sorted.resize(R);
  sw.gauss_cdf.resize(R);
  double sd = std::sqrt(sigma.matrix()(0, 0));
  for (std::size_t i = 0; i < R; ++i) {
    sw.sorted[i] = order[i].first;
    sw.perm[i] = order[i].second;
    sw.gauss_cdf[i] = normal_cdf(sw.sorted[i] / sd);
  }
  DistanceEstimate est;
  est.kind = "dc-lower";
  est.family = "half-spaces";
  est.r_f = R;
  est.class_count = 2 * R;
  est.value = ks_exact_1d(sw.sorted, sigma.matrix()(0, 0));

  std::vector<double> boot(opts.bootstrap);
  parallel_for(static_cast<std::ptrdiff_t>(opts.bootstrap), [&](std::ptrdiff_t b) {
    auto w = bootstrap_weights(R, opts.bootstrap_seed, static_cast<std::uint64_t>(b));
    boot[static_cast<std::size_t>(b)] = weighted_ks(sw, w);
  });
  est.se = stddev(boot);
  est.envelope95 = percentile(boot, 0.95);
  est.details["bootstrap"] = static_cast<double>(opts.bootstrap);
  return est;
}

DistanceEstimate dc_halfspace_md(const SampleBatch &batch,
                                 const CovarianceMatrix &sigma,
                                 const ConvexTestClass &cls,
                                 const DcOptions &opts) {
  std::size_t R = batch.R;
  std::size_t D = static_cast<std::size_t>(cls.directions.rows());
  std::size_t T = cls.levels.size();
  if (D * R > (1u << 24))
    throw resource_error("dc_lower: directions x replicates exceeds 2^24");

  std::vector<double> scores(D * R);
  std::vector<double> thresholds(D * T);
  std::vector<double> ref(D * T);
  std::vector<double> phat(D * T);
  std::vector<std::uint16_t> bin(D * R);

  parallel_for(static_cast<std::ptrdiff_t>(D), [&](std::ptrdiff_t dd) {
    std::size_t d = static_cast<std::size_t>(dd);
    Eigen::VectorXd a = cls.directions.row(dd).transpose();
    double sd = std::sqrt(a.dot(sigma.matrix() * a));
    double *sc = scores.data() + d * R;
    for (std::size_t r = 0; r < R; ++r) {
      double s = 0.0;
      const double *row = batch.data.data() + r * batch.m;
      for (std::size_t i = 0; i < batch.m; ++i)
        s += a[static_cast<Eigen::Index>(i)] * row[i];
      sc[r] = s;
    }
    std::vector<double> sorted(sc, sc + R);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t t = 0; t < T; ++t) {
      std::size_t idx = static_cast<std::size_t>(
          cls.levels[t] * static_cast<double>(R - 1));
      double c = sorted[idx];
      thresholds[d * T + t] = c;
      ref[d * T + t] = normal_cdf(c / sd);
      auto it = std::upper_bound(sorted.begin(), sorted.end(), c);
      phat[d * T + t] =
          static_cast<double>(it - sorted.begin()) / static_cast<double>(R);
    }
    for (std::size_t r = 0; r < R; ++r) {
      const double *tc = thresholds.data() + d * T;
      bin[d * R + r] = static_cast<std::uint16_t>(
          std::upper_bound(tc, tc + T, sc[r]) - tc);
    }
  });

  DistanceEstimate est;
  est.kind = "dc-lower";
  est.family = "half-spaces";
  est.r_f = R;
  est.class_count = D * T;
  double best = 0.0;
  for (std::size_t i = 0; i < D * T; ++i)
    best = std::max(best, std::abs(phat[i] - ref[i]));
  est.value = best;

  std::vector<double> boot(opts.bootstrap);
  parallel_for(static_cast<std::ptrdiff_t>(opts.bootstrap), [&](std::ptrdiff_t bb) {
    std::size_t b = static_cast<std::size_t>(bb);
    auto w = bootstrap_weights(R, opts.bootstrap_seed, b);
    double stat = 0.0;
    std::vector<std::uint32_t> acc(T + 1);
    for (std::size_t d = 0; d < D; ++d) {
      std::fill(acc.begin(), acc.end(), 0u);
      const std::uint16_t *bd = bin.data() + d * R;
      for (std::size_t r = 0; r < R; ++r) acc[bd[r]] += w[r];
      std::uint32_t run = 0;
      for (std::size_t t = 0; t < T; ++t) {
        run += acc[t];
        double p = static_cast<double>(run) / static_cast<double>(R);
        stat = std::max(stat, std::abs(p - ref[d * T + t]));
      }
    }
    boot[b] = stat;
  });
  est.se = stddev(boot);
  est.envelope95 = percentile(boot, 0.95);
  est.details["bootstrap"] = static_cast<double>(opts.bootstrap);
  return est;
}

DistanceEstimate dc_geometric(const SampleBatch &batch,
                              const CovarianceMatrix &sigma,
                              const ConvexTestClass &cls,
                              const DcOptions &opts) {
  std::size_t R = batch.R;
  std::size_t S = cls.sets.size();
  if (S * R > (1u << 27))
    throw resource_error("dc_lower: sets x replicates exceeds 2^27");

  std::vector<std::uint8_t> member(S * R);
  std::vector<double> phat(S), ref(S);
  std::vector<std::uint8_t> needs_mc(S, 0);

  parallel_for(static_cast<std::ptrdiff_t>(S), [&](std::ptrdiff_t ss) {
    std::size_t s = static_cast<std::size_t>(ss);
    const ConvexSet &q = cls.sets[s];
    std::uint8_t *mrow = member.data() + s * R;
    std::size_t cnt = 0;
    Eigen::VectorXd x(batch.m);
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t i = 0; i < batch.m; ++i)
        x[static_cast<Eigen::Index>(i)] = batch.at(r, i);
      bool in = q.contains(x);
      mrow[r] = in ? 1 : 0;
      cnt += in ? 1 : 0;
    }
    phat[s] = static_cast<double>(cnt) / static_cast<double>(R);
    double p;
    if (q.gauss_prob(sigma, p))
      ref[s] = p;
    else
      needs_mc[s] = 1;
  });

  double max_ref_se = 0.0;
  std::size_t n_mc =
      static_cast<std::size_t>(std::count(needs_mc.begin(), needs_mc.end(), 1));
  if (n_mc > 0) {
    std::size_t Rref = std::max<std::size_t>(opts.mc_reference, 1u << 20);
    SampleBatch gref = sample_normal(sigma, Rref, opts.mc_seed,
                                     derive_stream("dc-reference"));
    std::vector<double> mc_p(S, 0.0);
    parallel_for(static_cast<std::ptrdiff_t>(S), [&](std::ptrdiff_t ss) {
      std::size_t s = static_cast<std::size_t>(ss);
      if (!needs_mc[s]) return;
      const ConvexSet &q = cls.sets[s];
      std::size_t cnt = 0;
      Eigen::VectorXd x(gref.m);
      for (std::size_t r = 0; r < Rref; ++r) {
        for (std::size_t i = 0; i < gref.m; ++i)
          x[static_cast<Eigen::Index>(i)] = gref.at(r, i);
        cnt += q.contains(x) ? 1 : 0;
      }
      mc_p[s] = static_cast<double>(cnt) / static_cast<double>(Rref);
    });
    for (std::size_t s = 0; s < S; ++s) {
      if (!needs_mc[s]) continue;
      ref[s] = mc_p[s];
      max_ref_se = std::max(
          max_ref_se, std::sqrt(std::max(0.0, ref[s] * (1.0 - ref[s])) /
                                static_cast<double>(Rref)));
    }
  }

  DistanceEstimate est;
  est.kind = "dc-lower";
  est.family = family_name(cls.family);
  est.r_f = R;
  est.class_count = S;
  double best = 0.0;
  for (std::size_t s = 0; s < S; ++s)
    best = std::max(best, std::abs(phat[s] - ref[s]));
  est.value = best;

  std::vector<double> boot(opts.bootstrap);
  parallel_for(static_cast<std::ptrdiff_t>(opts.bootstrap), [&](std::ptrdiff_t bb) {
    std::size_t b = static_cast<std::size_t>(bb);
    auto w = bootstrap_weights(R, opts.bootstrap_seed, b);
    double stat = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      const std::uint8_t *mrow = member.data() + s * R;
      std::uint64_t cnt = 0;
      for (std::size_t r = 0; r < R; ++r)
        cnt += static_cast<std::uint64_t>(mrow[r]) * w[r];
      double p = static_cast<double>(cnt) / static_cast<double>(R);
      stat = std::max(stat, std::abs(p - ref[s]));
    }
    boot[b] = stat;
  });
  double sd_boot = stddev(boot);
  est.se = std::sqrt(sd_boot * sd_boot + max_ref_se * max_ref_se);
  est.envelope95 = percentile(boot, 0.95) + 1.96 * max_ref_se;
  est.details["bootstrap"] = static_cast<double>(opts.bootstrap);
  if (n_mc > 0) {
    est.details["ref_se"] = max_ref_se;
    est.details["ref_mc_sets"] = static_cast<double>(n_mc);
  }
  return est;
}

}  // namespace

DistanceEstimate dc_lower(const SampleBatch &batch,
                          const CovarianceMatrix &sigma,
                          const ConvexTestClass &cls, const DcOptions &opts) {
  if (batch.m != sigma.dim() || cls.m != batch.m)
    throw contract_error("dc_lower: dimension mismatch between batch, covariance and class");
  if (batch.R == 0) throw contract_error("dc_lower: empty batch");
  if (cls.size() == 0) throw contract_error("dc_lower: empty test class");
  if (opts.bootstrap < 2) throw contract_error("dc_lower: need >= 2 bootstrap resamples");

  DistanceEstimate est;
  if (cls.family == ConvexFamily::half_space) {
    est = (batch.m == 1) ? dc_halfspace_1d(batch, sigma, opts)
                         : dc_halfspace_md(batch, sigma, cls, opts);
  } else {
    est = dc_geometric(batch, sigma, cls, opts);
  }
  if (opts.bonferroni) {
    // Worst-case union-corrected envelope: z-quantile at level 0.05 over the
    // class, binomial sd capped at 1/2.
    double z = normal_quantile(
        1.0 - 0.025 / static_cast<double>(std::max<std::size_t>(1, est.class_count)));
    est.details["bonferroni_z"] = z;
    est.details["bonferroni_envelope"] =
        est.value + z * 0.5 / std::sqrt(static_cast<double>(batch.R));
  }
  return est;
}

SmoothTestMember SmoothTestMember::capped_quadratic(Eigen::VectorXd a, double c,
                                                    double cap, double ramp) {
  if (a.size() == 0 || a.norm() < 1e-12)
    throw contract_error("capped_quadratic: zero direction");
  if (!(cap > 0.0) || !(ramp > 0.0))
    throw contract_error("capped_quadratic: cap and ramp must be > 0");
  SmoothTestMember m;
  m.shape = Shape::capped_quadratic;
  m.a = a / a.norm();
  m.c = c;
  m.cap = cap;
  m.ramp = ramp;
  double sup_q1 = cap + ramp / 2.0;  // max |q'|, reached past the ramp
  m.lambda = 1.0 / std::max(1.0, sup_q1);
  m.lip_bound = m.lambda * sup_q1;
  m.hess_bound = m.lambda;  // sup |q''| = 1 inside the quadratic region
  return m;
}

SmoothTestMember SmoothTestMember::gauss_bump(Eigen::VectorXd a, double c) {
  if (a.size() == 0 || a.norm() < 1e-12)
    throw contract_error("gauss_bump: zero direction");
  SmoothTestMember m;
  m.shape = Shape::gauss_bump;
  m.a = a / a.norm();
  m.c = c;
  m.lambda = 1.0;
  m.lip_bound = std::exp(-0.5);  // max |q'| = e^{-1/2} at s = 1
  m.hess_bound = 1.0;            // max |q''| = 1 at s = 0
  return m;
}

double SmoothTestMember::scalar(double s) const {
  if (shape == Shape::gauss_bump) return std::exp(-0.5 * s * s);
  double t = std::abs(s);
  if (t <= cap) return 0.5 * s * s;
  double base = 0.5 * cap * cap;
  if (t <= cap + ramp) {
    double u = t - cap;
    return base + cap * u + 0.5 * u * u - u * u * u / (6.0 * ramp);
  }
  double q_end = base + cap * ramp + ramp * ramp / 3.0;
  return q_end + (cap + 0.5 * ramp) * (t - cap - ramp);
}

double SmoothTestMember::evaluate(const Eigen::VectorXd &x) const {
  return lambda * scalar(a.dot(x) + c);
}

namespace {

struct PartialMoments {
  double i0 = 0, i1 = 0, i2 = 0, i3 = 0;  // int s^k over [a,b] d N(mu, sd^2)
};

PartialMoments gauss_partial(double mu, double sd, double a, double b) {
  double alpha = (a - mu) / sd;
  bool binf = std::isinf(b);
  double beta = binf ? 0.0 : (b - mu) / sd;
  double pa = normal_pdf(alpha), pb = binf ? 0.0 : normal_pdf(beta);
  double Fa = normal_cdf(alpha), Fb = binf ? 1.0 : normal_cdf(beta);
  double z0 = Fb - Fa;
  double z1 = pa - pb;
  double z2 = z0 + alpha * pa - (binf ? 0.0 : beta * pb);
  double z3 = (alpha * alpha + 2.0) * pa - (binf ? 0.0 : (beta * beta + 2.0) * pb);
  PartialMoments out;
  out.i0 = z0;
  out.i1 = mu * z0 + sd * z1;
  out.i2 = mu * mu * z0 + 2.0 * mu * sd * z1 + sd * sd * z2;
  out.i3 = mu * mu * mu * z0 + 3.0 * mu * mu * sd * z1 + 3.0 * mu * sd * sd * z2 +
           sd * sd * sd * z3;
  return out;
}

// E of the positive-side ramp and linear pieces of the capped quadratic,
// for a projected variable N(mu, sd^2).
double capped_positive_tail(double mu, double sd, double cap, double ramp) {
  PartialMoments pm = gauss_partial(mu - cap, sd, 0.0, ramp);
  double base = 0.5 * cap * cap;
  double ramp_val = base * pm.i0 + cap * pm.i1 + 0.5 * pm.i2 - pm.i3 / (6.0 * ramp);
  PartialMoments pl = gauss_partial(mu - cap - ramp, sd, 0.0, kInf);
  double q_end = base + cap * ramp + ramp * ramp / 3.0;
  double lin_val = q_end * pl.i0 + (cap + 0.5 * ramp) * pl.i1;
  return ramp_val + lin_val;
}

}  // namespace

double SmoothTestMember::gauss_mean(const CovarianceMatrix &sigma) const {
  double var = a.dot(sigma.matrix() * a);
  if (shape == Shape::gauss_bump) {
    // E exp(-(sd Z + c)^2 / 2) = exp(-c^2 / (2 (1 + var))) / sqrt(1 + var)
    return lambda * std::exp(-0.5 * c * c / (1.0 + var)) / std::sqrt(1.0 + var);
  }
  double sd = std::sqrt(var);
  PartialMoments quad = gauss_partial(c, sd, -cap, cap);
  double val = 0.5 * quad.i2;
  val += capped_positive_tail(c, sd, cap, ramp);
  val += capped_positive_tail(-c, sd, cap, ramp);
  return lambda * val;
}

std::vector<SmoothTestMember> default_d2_family(std::size_t m,
                                                std::size_t directions,
                                                std::size_t shifts,
                                                std::uint64_t seed) {
  if (m == 0 || directions == 0 || shifts == 0)
    throw contract_error("default_d2_family: m, directions, shifts must be >= 1");
  Eigen::MatrixXd dirs = sphere_directions(m, directions, seed);
  std::vector<SmoothTestMember> fam;
  fam.reserve(directions * shifts * 2);
  for (std::size_t d = 0; d < directions; ++d) {
    for (std::size_t j = 0; j < shifts; ++j) {
      double c = shifts == 1 ? 0.0
                             : -1.5 + 3.0 * static_cast<double>(j) /
                                          static_cast<double>(shifts - 1);
      Eigen::VectorXd a = dirs.row(static_cast<Eigen::Index>(d)).transpose();
      fam.push_back(SmoothTestMember::gauss_bump(a, c));
      fam.push_back(SmoothTestMember::capped_quadratic(a, c, 3.0, 1.0));
    }
  }
  return fam;
}

DistanceEstimate d2_estimate(const SampleBatch &batch,
                             const CovarianceMatrix &sigma,
                             const std::vector<SmoothTestMember> &family) {
  if (batch.m != sigma.dim())
    throw contract_error("d2_estimate: dimension mismatch");
  if (batch.R == 0) throw contract_error("d2_estimate: empty batch");
  if (family.empty()) throw contract_error("d2_estimate: empty family");

  for (const auto &h : family) {
    if (h.a.size() != static_cast<Eigen::Index>(batch.m))
      throw contract_error("d2_estimate: member direction dimension mismatch");
    double expect_lip, expect_hess;
    if (h.shape == SmoothTestMember::Shape::gauss_bump) {
      expect_lip = h.lambda * std::exp(-0.5);
      expect_hess = h.lambda;
    } else {
      expect_lip = h.lambda * (h.cap + 0.5 * h.ramp);
      expect_hess = h.lambda;
    }
    bool certified = std::abs(h.a.norm() - 1.0) <= 1e-9 &&
                     std::abs(h.lip_bound - expect_lip) <= 1e-9 &&
                     std::abs(h.hess_bound - expect_hess) <= 1e-9 &&
                     h.lip_bound <= 1.0 + 1e-12 && h.hess_bound <= 1.0 + 1e-12;
    if (!certified)
      throw contract_error(
          "d2_estimate: member is not certified 1-Lipschitz with unit Hessian bound");
  }

  std::size_t K = family.size();
  std::vector<double> diff(K), mean(K), var(K);
  parallel_for(static_cast<std::ptrdiff_t>(K), [&](std::ptrdiff_t kk) {
    std::size_t k = static_cast<std::size_t>(kk);
    const auto &h = family[k];
    std::vector<double> vals(batch.R);
    Eigen::VectorXd x(batch.m);
    for (std::size_t r = 0; r < batch.R; ++r) {
      for (std::size_t i = 0; i < batch.m; ++i)
        x[static_cast<Eigen::Index>(i)] = batch.at(r, i);
      vals[r] = h.evaluate(x);
    }
    double mu = neumaier_sum(vals) / static_cast<double>(batch.R);
    std::vector<double> sq(batch.R);
    for (std::size_t r = 0; r < batch.R; ++r)
      sq[r] = (vals[r] - mu) * (vals[r] - mu);
    mean[k] = mu;
    var[k] = batch.R > 1
                 ? neumaier_sum(sq) / static_cast<double>(batch.R - 1)
                 : 0.0;
    diff[k] = std::abs(mu - h.gauss_mean(sigma));
  });

  DistanceEstimate est;
  est.kind = "d2";
  est.family = "smooth-c2";
  est.r_f = batch.R;
  est.class_count = K;
  std::size_t best = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (diff[k] > diff[best]) best = k;
  est.value = diff[best];
  est.se = std::sqrt(var[best] / static_cast<double>(batch.R));
  est.envelope95 = est.value + 1.645 * est.se;
  est.details["best_member"] = static_cast<double>(best);
  return est;
}

SandwichResult sandwich_check(const DistanceEstimate &dc,
                              const BoundReport &bound, double se_mult) {
  SandwichResult out;
  out.lhs = dc.value;
  out.rhs = bound.clipped + se_mult * dc.se;
  out.margin = out.rhs - out.lhs;
  out.ok = out.lhs <= out.rhs;
  return out;
}

GammaEstimate gamma_estimate(const CovarianceMatrix &sigma, std::uint64_t seed,
                             std::size_t draws) {
  if (draws < 1024) throw contract_error("gamma_estimate: draws must be >= 1024");
  GammaEstimate out;
  std::size_t m = sigma.dim();
  out.identity = sigma.is_identity();
  out.half_space_exact = normal_pdf(0.0) / std::sqrt(sigma.lambda_min());
  out.identity_bound =
      4.0 * std::pow(static_cast<double>(m), 0.25) / std::sqrt(sigma.lambda_min());

  // Centered Euclidean balls: the eps-enlargement of a ball is again a ball,
  // so the Monte Carlo increment rate is an honest lower estimate.
  SampleBatch g = sample_normal(sigma, draws, seed, derive_stream("gamma-mc"));
  std::vector<double> norms(draws);
  for (std::size_t r = 0; r < draws; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += g.at(r, i) * g.at(r, i);
    norms[r] = std::sqrt(s);
  }
  std::sort(norms.begin(), norms.end());
  double scale = std::sqrt(sigma.op_norm());
  double best = 0.0;
  auto cdf_at = [&](double r) {
    return static_cast<double>(std::upper_bound(norms.begin(), norms.end(), r) -
                               norms.begin()) /
           static_cast<double>(draws);
  };
  std::vector<double> radii{0.0};
  for (int q = 1; q <= 19; ++q)
    radii.push_back(norms[static_cast<std::size_t>(
        static_cast<double>(q) / 20.0 * static_cast<double>(draws - 1))]);
  for (double r : radii)
    for (double eps : {0.01, 0.02, 0.05, 0.1}) {
      double e = eps * scale;
      best = std::max(best, (cdf_at(r + e) - cdf_at(r)) / e);
    }
  out.mc_lower = best;
  out.value = std::max(out.mc_lower, out.half_space_exact);
  return out;
}

}  // namespace malstein
