#include "malstein/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

#include "malstein/gausssim.hpp"
#include "malstein/isserlis.hpp"
#include "malstein/parallel.hpp"
#include "malstein/rng.hpp"

namespace malstein {

namespace {

// Monomial coefficients of an expansion, via H_{k+1} = x H_k - k H_{k-1}.
std::vector<double> to_monomials(const HermiteExpansion &phi) {
  int kmax = phi.max_index();
  std::vector<std::vector<double>> h(static_cast<std::size_t>(kmax) + 1);
  h[0] = {1.0};
  if (kmax >= 1) h[1] = {0.0, 1.0};
  for (int k = 1; k < kmax; ++k) {
    std::vector<double> next(static_cast<std::size_t>(k) + 2, 0.0);
    for (std::size_t p = 0; p < h[static_cast<std::size_t>(k)].size(); ++p)
      next[p + 1] += h[static_cast<std::size_t>(k)][p];
    for (std::size_t p = 0; p < h[static_cast<std::size_t>(k - 1)].size(); ++p)
      next[p] -= static_cast<double>(k) * h[static_cast<std::size_t>(k - 1)][p];
    h[static_cast<std::size_t>(k) + 1] = std::move(next);
  }
  std::vector<double> out(static_cast<std::size_t>(kmax) + 1, 0.0);
  for (int k = 0; k <= kmax; ++k) {
    double a = k < static_cast<int>(phi.coeff.size()) ? phi.coeff[static_cast<std::size_t>(k)] : 0.0;
    if (a == 0.0) continue;
    for (std::size_t p = 0; p < h[static_cast<std::size_t>(k)].size(); ++p)
      out[p] += a * h[static_cast<std::size_t>(k)][p];
  }
  return out;
}

}  // namespace

std::size_t BreuerMajorSpec::block_begin(std::size_t i) const {
  double scale = partition.back();
  return static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * partition[i] / scale));
}

std::size_t BreuerMajorSpec::block_end(std::size_t i) const {
  double scale = partition.back();
  return static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * partition[i + 1] / scale));
}

void BreuerMajorSpec::validate() const {
  if (partition.size() < 2)
    throw contract_error("spec: partition needs at least two points");
  if (partition.front() != 0.0)
    throw contract_error("spec: partition must start at 0");
  for (std::size_t i = 0; i + 1 < partition.size(); ++i)
    if (!(partition[i] < partition[i + 1]))
      throw contract_error("spec: partition must be strictly increasing");
  if (n < 1) throw contract_error("spec: n must be >= 1");
  if (!phi.centered()) throw model_error("spec: phi must be centered");
  phi.hermite_rank();  // throws if phi has no nonzero coefficient
  for (std::size_t i = 0; i < dim(); ++i)
    if (block_end(i) <= block_begin(i)) {
      std::ostringstream os;
      os << "spec: degenerate partition, block " << i + 1 << " of " << dim()
         << " is empty at n=" << n;
      throw model_error(os.str());
    }
}

std::vector<double> breuer_major_from_path(const BreuerMajorSpec &spec,
                                           std::span<const double> path) {
  std::size_t m = spec.dim();
  std::vector<double> f(m, 0.0);
  double root_n = std::sqrt(static_cast<double>(spec.n));
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t k = spec.block_begin(i); k < spec.block_end(i); ++k)
      s += spec.phi.evaluate(path[k]);
    f[i] = s / root_n;
  }
  return f;
}

namespace {

SampleBatch breuer_major_impl(const BreuerMajorSpec &spec, std::size_t R,
                              std::uint64_t seed, bool parallel) {
  spec.validate();
  if (R == 0) throw contract_error("breuer_major_sample: R must be >= 1");
  std::size_t m = spec.dim();
  SampleBatch batch;
  batch.m = m;
  batch.R = R;
  batch.data.assign(m * R, 0.0);
  batch.provenance = {seed, 0,
                      "breuer-major " + spec.model.id() +
                          " n=" + std::to_string(spec.n)};
  PathSampler sampler(spec.model, spec.n, seed);

  struct Ws {
    PathSampler::Workspace ws;
    std::vector<double> pa, pb;
    explicit Ws(const PathSampler &s, std::size_t n) : ws(s), pa(n), pb(n) {}
  };
  std::size_t pairs = (R + 1) / 2;
  auto body = [&](Ws &w, std::ptrdiff_t p) {
    auto pi = static_cast<std::size_t>(p);
    sampler.sample_pair(pi, w.pa, w.pb, w.ws);
    auto fa = breuer_major_from_path(spec, w.pa);
    std::copy(fa.begin(), fa.end(), batch.data.begin() + static_cast<std::ptrdiff_t>((2 * pi) * m));
    if (2 * pi + 1 < R) {
      auto fb = breuer_major_from_path(spec, w.pb);
      std::copy(fb.begin(), fb.end(),
                batch.data.begin() + static_cast<std::ptrdiff_t>((2 * pi + 1) * m));
    }
  };
  auto make = [&] { return Ws(sampler, spec.n); };
  if (parallel)
    parallel_for_with(static_cast<std::ptrdiff_t>(pairs), make, body);
  else {
    auto ws = make();
    for (std::size_t p = 0; p < pairs; ++p) body(ws, static_cast<std::ptrdiff_t>(p));
  }
  return batch;
}

}  // namespace

SampleBatch breuer_major_sample(const BreuerMajorSpec &spec, std::size_t R,
                                std::uint64_t seed) {
  return breuer_major_impl(spec, R, seed, true);
}

SampleBatch breuer_major_sample_serial(const BreuerMajorSpec &spec, std::size_t R,
                                       std::uint64_t seed) {
  return breuer_major_impl(spec, R, seed, false);
}

Eigen::MatrixXd malliavin_matrix(const BreuerMajorSpec &spec,
                                 std::span<const double> path) {
  spec.validate();
  if (path.size() != spec.n)
    throw contract_error("malliavin_matrix: path length must equal n");
  std::size_t m = spec.dim(), n = spec.n;
  HermiteExpansion dphi = spec.phi.derivative();
  HermiteExpansion phi1 = spec.phi.shift();
  std::vector<double> dp(n), s1(n);
  for (std::size_t k = 0; k < n; ++k) {
    dp[k] = dphi.evaluate(path[k]);
    s1[k] = phi1.evaluate(path[k]);
  }

  long long w = spec.model.support();
  Eigen::MatrixXd out(m, m);
  std::vector<double> t(n);
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t jb = spec.block_begin(j), je = spec.block_end(j);
    if (w >= 0 && w <= 128) {
      std::fill(t.begin(), t.end(), 0.0);
      for (std::size_t l = jb; l < je; ++l) {
        double v = s1[l];
        if (v == 0.0) continue;
        long long lo = std::max<long long>(0, static_cast<long long>(l) - w);
        long long hi = std::min<long long>(static_cast<long long>(n) - 1,
                                           static_cast<long long>(l) + w);
        for (long long k = lo; k <= hi; ++k)
          t[static_cast<std::size_t>(k)] +=
              v * spec.model(k - static_cast<long long>(l));
      }
    } else {
      Sequence vj;
      vj.lo = static_cast<long long>(jb);
      vj.v.assign(s1.begin() + static_cast<std::ptrdiff_t>(jb),
                  s1.begin() + static_cast<std::ptrdiff_t>(je));
      Sequence conv = convolve(vj, truncate(spec.model, static_cast<long long>(n)));
      for (std::size_t k = 0; k < n; ++k) t[k] = conv.at(static_cast<long long>(k));
    }
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t k = spec.block_begin(i); k < spec.block_end(i); ++k)
        s += dp[k] * t[k];
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          s / static_cast<double>(n);
    }
  }
  return out;
}

Eigen::MatrixXd malliavin_matrix_serial(const BreuerMajorSpec &spec,
                                        std::span<const double> path) {
  spec.validate();
  if (path.size() != spec.n)
    throw contract_error("malliavin_matrix: path length must equal n");
  std::size_t m = spec.dim();
  HermiteExpansion dphi = spec.phi.derivative();
  HermiteExpansion phi1 = spec.phi.shift();
  Eigen::MatrixXd out(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = spec.block_begin(i); k < spec.block_end(i); ++k)
        for (std::size_t l = spec.block_begin(j); l < spec.block_end(j); ++l)
          s += dphi.evaluate(path[k]) * phi1.evaluate(path[l]) *
               spec.model(static_cast<long long>(k) - static_cast<long long>(l));
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          s / static_cast<double>(spec.n);
    }
  return out;
}

MeanSe estimate_gamma_sq(const BreuerMajorSpec &spec,
                         const Eigen::MatrixXd &sigma_target, std::size_t R,
                         std::uint64_t seed, const Eigen::MatrixXd &map) {
  spec.validate();
  if (R < 2) throw contract_error("estimate_gamma_sq: R must be >= 2");
  std::size_t m = spec.dim();
  if (sigma_target.rows() != static_cast<Eigen::Index>(m) ||
      sigma_target.cols() != static_cast<Eigen::Index>(m))
    throw contract_error("estimate_gamma_sq: target dimension mismatch");
  bool mapped = map.size() > 0;
  if (mapped && (map.rows() != static_cast<Eigen::Index>(m) ||
                 map.cols() != static_cast<Eigen::Index>(m)))
    throw contract_error("estimate_gamma_sq: map dimension mismatch");
  PathSampler sampler(spec.model, spec.n, seed);
  std::vector<double> vals(R);

  auto hs_sq = [&](const Eigen::MatrixXd &mf) {
    if (!mapped) return (mf - sigma_target).squaredNorm();
    return (map * (mf - sigma_target) * map.transpose()).squaredNorm();
  };

  struct Ws {
    PathSampler::Workspace ws;
    std::vector<double> pa, pb;
    explicit Ws(const PathSampler &s, std::size_t n) : ws(s), pa(n), pb(n) {}
  };
  std::size_t pairs = (R + 1) / 2;
  parallel_for_with(
      static_cast<std::ptrdiff_t>(pairs),
      [&] { return Ws(sampler, spec.n); },
      [&](Ws &w, std::ptrdiff_t p) {
        auto pi = static_cast<std::size_t>(p);
        sampler.sample_pair(pi, w.pa, w.pb, w.ws);
        vals[2 * pi] = hs_sq(malliavin_matrix(spec, w.pa));
        if (2 * pi + 1 < R)
          vals[2 * pi + 1] = hs_sq(malliavin_matrix(spec, w.pb));
      });
  return mean_se(vals);
}

Eigen::MatrixXd exact_covariance(const BreuerMajorSpec &spec) {
  spec.validate();
  std::size_t m = spec.dim(), n = spec.n;
  // r(d) = E[phi(X)phi(Y)] for corr(X,Y) = rho(d).
  std::vector<double> r(n, 0.0);
  int kmax = spec.phi.max_index();
  for (std::size_t d = 0; d < n; ++d) {
    double rho = spec.model(static_cast<long long>(d));
    double acc = 0.0, rp = 1.0;
    for (int q = 0; q <= kmax; ++q) {
      if (q > 0) rp *= rho;
      double a = spec.phi.coeff[static_cast<std::size_t>(q)];
      if (a != 0.0 && q > 0) acc += a * a * factorial_d(q) * rp;
    }
    r[d] = acc;
  }
  Eigen::MatrixXd out(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      long long a = static_cast<long long>(spec.block_begin(i));
      long long b = static_cast<long long>(spec.block_end(i));
      long long c = static_cast<long long>(spec.block_begin(j));
      long long d = static_cast<long long>(spec.block_end(j));
      double s = 0.0;
      for (long long t = a - d + 1; t <= b - 1 - c; ++t) {
        long long lo = std::max(a, c + t), hi = std::min(b - 1, d - 1 + t);
        if (hi < lo) continue;
        s += static_cast<double>(hi - lo + 1) * r[static_cast<std::size_t>(std::llabs(t))];
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          s / static_cast<double>(n);
    }
  return out;
}

double sigma_sq_limit(const HermiteExpansion &phi, const AutocovarianceModel &model,
                      long long terms) {
  if (terms < 0) throw contract_error("sigma_sq_limit: terms must be >= 0");
  int kmax = phi.max_index();
  double total = 0.0;
  for (int q = 1; q <= kmax; ++q) {
    double a = phi.coeff[static_cast<std::size_t>(q)];
    if (a == 0.0) continue;
    double s = 1.0;  // rho(0)^q
    for (long long j = 1; j <= terms; ++j) s += 2.0 * std::pow(model(j), q);
    total += a * a * factorial_d(q) * s;
  }
  return total;
}

double malliavin_variance_bound(const BreuerMajorSpec &spec, std::size_t i,
                                std::size_t j) {
  spec.validate();
  if (spec.n > 32)
    throw resource_error("malliavin_variance_bound: exhaustive sum limited to n <= 32");
  if (spec.phi.max_index() > 4)
    throw contract_error("malliavin_variance_bound: polynomial degree limited to 4");
  if (i >= spec.dim() || j >= spec.dim())
    throw contract_error("malliavin_variance_bound: block index out of range");
  std::vector<double> pmono = to_monomials(spec.phi.derivative());
  std::vector<double> smono = to_monomials(spec.phi.shift());

  // Covariance signature -> Cov(p(X1)s(X2), p(X3)s(X4)); the Toeplitz
  // structure makes most signatures repeat.
  std::map<std::array<double, 6>, double> memo;
  auto cov4 = [&](long long k, long long l, long long k2, long long l2) {
    std::array<double, 6> sig = {spec.model(k - l),  spec.model(k - k2),
                                 spec.model(k - l2), spec.model(l - k2),
                                 spec.model(l - l2), spec.model(k2 - l2)};
    auto it = memo.find(sig);
    if (it != memo.end()) return it->second;
    Eigen::MatrixXd c(4, 4);
    c << 1, sig[0], sig[1], sig[2],
        sig[0], 1, sig[3], sig[4],
        sig[1], sig[3], 1, sig[5],
        sig[2], sig[4], sig[5], 1;
    GaussianMomentTable tab(c);
    double m4 = tab.polynomial_product({0, 1, 2, 3}, {pmono, smono, pmono, smono});
    Eigen::MatrixXd c12 = c.topLeftCorner(2, 2);
    Eigen::MatrixXd c34 = c.bottomRightCorner(2, 2);
    double m12 = GaussianMomentTable(c12).polynomial_product({0, 1}, {pmono, smono});
    double m34 = GaussianMomentTable(c34).polynomial_product({0, 1}, {pmono, smono});
    double v = m4 - m12 * m34;
    memo[sig] = v;
    return v;
  };

  double total = 0.0;
  long long ib = static_cast<long long>(spec.block_begin(i));
  long long ie = static_cast<long long>(spec.block_end(i));
  long long jb = static_cast<long long>(spec.block_begin(j));
  long long je = static_cast<long long>(spec.block_end(j));
  for (long long k = ib; k < ie; ++k)
    for (long long l = jb; l < je; ++l) {
      double r1 = spec.model(k - l);
      if (r1 == 0.0) continue;
      for (long long k2 = ib; k2 < ie; ++k2)
        for (long long l2 = jb; l2 < je; ++l2) {
          double r2 = spec.model(k2 - l2);
          if (r2 == 0.0) continue;
          total += std::abs(cov4(k, l, k2, l2) * r1 * r2);
        }
    }
  double n = static_cast<double>(spec.n);
  return total / (n * n);
}

bool QuadraticFormVector::pure_quadratic() const {
  for (const auto &bi : b)
    if (bi.size() > 0 && bi.cwiseAbs().maxCoeff() > 0.0) return false;
  return true;
}

void QuadraticFormVector::validate() const {
  if (A.empty()) throw contract_error("quadratic form: empty vector");
  if (N == 0 || N > 512)
    throw contract_error("quadratic form: basis size must be in [1, 512]");
  if (!b.empty() && b.size() != A.size())
    throw contract_error("quadratic form: linear part count mismatch");
  for (std::size_t i = 0; i < A.size(); ++i) {
    const auto &a = A[i];
    if (a.rows() != static_cast<Eigen::Index>(N) ||
        a.cols() != static_cast<Eigen::Index>(N))
      throw contract_error("quadratic form: matrix dimension mismatch");
    double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      std::ostringstream os;
      os << "quadratic form: matrix " << i << " is not symmetric";
      throw contract_error(os.str());
    }
    if (i < b.size() && b[i].size() > 0 &&
        b[i].size() != static_cast<Eigen::Index>(N))
      throw contract_error("quadratic form: linear part dimension mismatch");
  }
}

std::string QuadraticFormVector::to_text() const {
  std::ostringstream os;
  os << "quadratic-form v1\n";
  os << "dim " << dim() << " basis " << N << "\n";
  for (std::size_t i = 0; i < A.size(); ++i) {
    os << "matrix " << i << "\n";
    for (std::size_t r = 0; r < N; ++r) {
      for (std::size_t c = 0; c < N; ++c) {
        if (c) os << " ";
        os << format_double(A[i](static_cast<Eigen::Index>(r),
                                 static_cast<Eigen::Index>(c)));
      }
      os << "\n";
    }
    if (i < b.size() && b[i].size() > 0 && b[i].cwiseAbs().maxCoeff() > 0.0) {
      os << "linear " << i << "\n";
      for (std::size_t c = 0; c < N; ++c) {
        if (c) os << " ";
        os << format_double(b[i](static_cast<Eigen::Index>(c)));
      }
      os << "\n";
    }
  }
  os << "end\n";
  return os.str();
}

QuadraticFormVector QuadraticFormVector::from_text(std::istream &in) {
  std::string line;
  if (!std::getline(in, line) || line != "quadratic-form v1")
    throw config_error("quadratic form: missing 'quadratic-form v1' header");
  std::size_t m = 0, N = 0;
  {
    if (!std::getline(in, line)) throw config_error("quadratic form: truncated input");
    std::istringstream is(line);
    std::string kw1, kw2;
    if (!(is >> kw1 >> m >> kw2 >> N) || kw1 != "dim" || kw2 != "basis")
      throw config_error("quadratic form: expected 'dim <m> basis <N>'");
  }
  if (m == 0 || N == 0) throw config_error("quadratic form: zero dimension");
  QuadraticFormVector v;
  v.N = N;
  v.A.assign(m, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N),
                                      static_cast<Eigen::Index>(N)));
  v.b.assign(m, Eigen::VectorXd());
  std::vector<bool> seen(m, false);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "end") break;
    std::istringstream is(line);
    std::string kw;
    std::size_t idx = 0;
    if (!(is >> kw >> idx) || (kw != "matrix" && kw != "linear"))
      throw config_error("quadratic form: expected 'matrix <i>' or 'linear <i>', got: " + line);
    if (idx >= m) throw config_error("quadratic form: index out of range: " + line);
    std::size_t rows = kw == "matrix" ? N : 1;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line))
        throw config_error("quadratic form: truncated " + kw + " block");
      std::istringstream row(line);
      for (std::size_t c = 0; c < N; ++c) {
        double x;
        if (!(row >> x)) throw config_error("quadratic form: short row in " + kw + " block");
        if (kw == "matrix")
          v.A[idx](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x;
        else {
          if (v.b[idx].size() == 0)
            v.b[idx] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
          v.b[idx](static_cast<Eigen::Index>(c)) = x;
        }
      }
    }
    if (kw == "matrix") seen[idx] = true;
  }
  for (std::size_t i = 0; i < m; ++i)
    if (!seen[i])
      throw config_error("quadratic form: matrix " + std::to_string(i) + " missing");
  v.validate();
  return v;
}

QfMoments qf_exact_moments(const QuadraticFormVector &v) {
  v.validate();
  std::size_t m = v.dim();
  QfMoments out;
  out.cov.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  out.cov_sq.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));

  bool pure = v.pure_quadratic();
  std::vector<GaussianFormNode> nodes(m);
  if (!pure) {
    for (std::size_t i = 0; i < m; ++i) {
      nodes[i].A = v.A[i];
      if (i < v.b.size()) nodes[i].b = v.b[i];
    }
  }

  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
      if (pure) {
        Eigen::MatrixXd ab = v.A[i] * v.A[j];
        double tr_ab = ab.trace();
        out.cov(I, J) = 2.0 * tr_ab;
        // Cov(F_i^2, F_j^2) = kappa(F_i,F_i,F_j,F_j) + 2 kappa(F_i,F_j)^2
        // with kappa4 = 16[2 tr(A_i^2 A_j^2) + tr((A_i A_j)^2)].
        double tr_aabb = (v.A[i] * v.A[i] * v.A[j] * v.A[j]).trace();
        double tr_abab = (ab * ab).trace();
        out.cov_sq(I, J) = 32.0 * tr_aabb + 16.0 * tr_abab + 8.0 * tr_ab * tr_ab;
      } else {
        GaussianFormNode ni = nodes[i], nj = nodes[j];
        std::vector<GaussianFormNode> pair = {ni, nj};
        out.cov(I, J) = gaussian_form_moment(pair);
        std::vector<GaussianFormNode> quad = {ni, ni, nj, nj};
        double m4 = gaussian_form_moment(quad);
        std::vector<GaussianFormNode> ii = {ni, ni}, jj = {nj, nj};
        out.cov_sq(I, J) =
            m4 - gaussian_form_moment(ii) * gaussian_form_moment(jj);
      }
    }

  double fourth = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
      fourth += out.cov_sq(I, J) + out.cov(I, I) * out.cov(J, J);
    }
  out.fourth = fourth;
  double tr = out.cov.trace();
  out.gauss_fourth = tr * tr + 2.0 * (out.cov * out.cov).trace();
  out.gap = out.fourth - out.gauss_fourth;
  return out;
}

SampleBatch qf_sample(const QuadraticFormVector &v, std::size_t R,
                      std::uint64_t seed) {
  v.validate();
  if (R == 0) throw contract_error("qf_sample: R must be >= 1");
  std::size_t m = v.dim(), N = v.N;
  SampleBatch batch;
  batch.m = m;
  batch.R = R;
  batch.data.assign(m * R, 0.0);
  batch.provenance = {seed, 0,
                      "quadratic-form m=" + std::to_string(m) +
                          " basis=" + std::to_string(N)};
  std::vector<double> tr(m);
  for (std::size_t i = 0; i < m; ++i) tr[i] = v.A[i].trace();
  std::size_t pairs = (R + 1) / 2;
  parallel_for(static_cast<std::ptrdiff_t>(pairs), [&](std::ptrdiff_t p) {
    NormalStream ns(seed, static_cast<std::uint64_t>(p));
    std::vector<double> z(N);
    for (int half = 0; half < 2; ++half) {
      std::size_t r = 2 * static_cast<std::size_t>(p) + static_cast<std::size_t>(half);
      if (r >= R) break;
      ns.fill_normals(z, static_cast<std::uint64_t>(half) * N);
      Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(N));
      for (std::size_t i = 0; i < m; ++i) {
        double val = zv.dot(v.A[i] * zv) - tr[i];
        if (i < v.b.size() && v.b[i].size() > 0) val += v.b[i].dot(zv);
        batch.data[r * m + i] = val;
      }
    }
  });
  return batch;
}

}  // namespace malstein
