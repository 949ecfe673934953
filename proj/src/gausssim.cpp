#include "malstein/gausssim.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include "malstein/common.hpp"
#include "malstein/parallel.hpp"
#include "malstein/rng.hpp"

namespace malstein {

namespace {

// FFTW planning (and plan destruction) is not thread-safe; execution on
// per-workspace buffers is.
std::mutex &fftw_mutex() {
  static std::mutex mu;
  return mu;
}

double compensated_total(const std::vector<double> &terms) {
  return neumaier_sum(std::span<const double>(terms));
}

}  // namespace

double Sequence::lp(double p) const {
  if (!(p >= 1.0)) throw contract_error("sequence lp: p must be >= 1");
  std::vector<double> terms(v.size());
  if (p == 1.0) {
    for (std::size_t i = 0; i < v.size(); ++i) terms[i] = std::abs(v[i]);
    return compensated_total(terms);
  }
  if (p == 2.0) {
    for (std::size_t i = 0; i < v.size(); ++i) terms[i] = v[i] * v[i];
    return std::sqrt(compensated_total(terms));
  }
  for (std::size_t i = 0; i < v.size(); ++i) terms[i] = std::pow(std::abs(v[i]), p);
  return std::pow(compensated_total(terms), 1.0 / p);
}

double Sequence::linf() const {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Sequence Sequence::abs() const {
  Sequence out = *this;
  for (double &x : out.v) x = std::abs(x);
  return out;
}

Sequence Sequence::square() const {
  Sequence out = *this;
  for (double &x : out.v) x = x * x;
  return out;
}

Sequence Sequence::reversed() const {
  Sequence out;
  out.lo = -hi();
  out.v.assign(v.rbegin(), v.rend());
  return out;
}

Sequence convolve(const Sequence &a, const Sequence &b, ConvMethod method) {
  if (a.v.empty() || b.v.empty()) return {};
  std::size_t sa = a.v.size(), sb = b.v.size();
  std::size_t sr = sa + sb - 1;
  Sequence out;
  out.lo = a.lo + b.lo;
  out.v.assign(sr, 0.0);

  bool use_fft = false;
  if (method == ConvMethod::fft) use_fft = true;
  if (method == ConvMethod::automatic)
    use_fft = sa * sb > (std::size_t{1} << 22);

  if (!use_fft) {
    for (std::size_t i = 0; i < sa; ++i) {
      double ai = a.v[i];
      if (ai == 0.0) continue;
      for (std::size_t j = 0; j < sb; ++j) out.v[i + j] += ai * b.v[j];
    }
    return out;
  }

  std::size_t L = sr;
  double *ra = fftw_alloc_real(L);
  double *rb = fftw_alloc_real(L);
  auto *ca = fftw_alloc_complex(L / 2 + 1);
  auto *cb = fftw_alloc_complex(L / 2 + 1);
  std::fill(ra, ra + L, 0.0);
  std::fill(rb, rb + L, 0.0);
  std::copy(a.v.begin(), a.v.end(), ra);
  std::copy(b.v.begin(), b.v.end(), rb);
  fftw_plan pf_a, pf_b, pb;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    pf_a = fftw_plan_dft_r2c_1d(static_cast<int>(L), ra, ca, FFTW_ESTIMATE);
    pf_b = fftw_plan_dft_r2c_1d(static_cast<int>(L), rb, cb, FFTW_ESTIMATE);
    pb = fftw_plan_dft_c2r_1d(static_cast<int>(L), ca, ra, FFTW_ESTIMATE);
  }
  fftw_execute(pf_a);
  fftw_execute(pf_b);
  for (std::size_t k = 0; k <= L / 2; ++k) {
    double re = ca[k][0] * cb[k][0] - ca[k][1] * cb[k][1];
    double im = ca[k][0] * cb[k][1] + ca[k][1] * cb[k][0];
    ca[k][0] = re;
    ca[k][1] = im;
  }
  fftw_execute(pb);
  double inv = 1.0 / static_cast<double>(L);
  for (std::size_t i = 0; i < sr; ++i) out.v[i] = ra[i] * inv;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(pf_a);
    fftw_destroy_plan(pf_b);
    fftw_destroy_plan(pb);
  }
  fftw_free(ra);
  fftw_free(rb);
  fftw_free(ca);
  fftw_free(cb);
  return out;
}

double inner(const Sequence &a, const Sequence &b) {
  long long lo = std::max(a.lo, b.lo);
  long long hi = std::min(a.hi(), b.hi());
  if (lo > hi) return 0.0;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (long long k = lo; k <= hi; ++k) terms.push_back(a.at(k) * b.at(k));
  return compensated_total(terms);
}

Sequence truncate(const AutocovarianceModel &model, long long n) {
  if (n < 1) throw contract_error("truncate: n must be >= 1");
  Sequence s;
  s.lo = -(n - 1);
  s.v.resize(static_cast<std::size_t>(2 * n - 1));
  for (long long k = -(n - 1); k <= n - 1; ++k)
    s.v[static_cast<std::size_t>(k + n - 1)] = model(k);
  return s;
}

Sequence ones_window(long long n) {
  if (n < 1) throw contract_error("ones_window: n must be >= 1");
  Sequence s;
  s.lo = -(n - 1);
  s.v.assign(static_cast<std::size_t>(2 * n - 1), 1.0);
  return s;
}

Sequence block_window(long long n) {
  if (n < 1) throw contract_error("block_window: n must be >= 1");
  Sequence s;
  s.lo = 0;
  s.v.assign(static_cast<std::size_t>(n), 1.0);
  return s;
}

ConvolutionTable convolution_sums(const AutocovarianceModel &model, long long n,
                                  std::span<const double> ps) {
  if (n < 1) throw contract_error("convolution_sums: n must be >= 1");
  if (n > (1LL << 16))
    throw resource_error("convolution_sums: n exceeds 2^16 dense limit");
  ConvolutionTable t;
  t.n = n;
  t.rho = truncate(model, n);
  for (double p : ps) t.rho_lp[p] = t.rho.lp(p);
  t.rho_rho = convolve(t.rho, t.rho);
  t.rho_ones = convolve(t.rho, ones_window(n));
  t.rho_rhosq = convolve(t.rho, t.rho.square());
  t.rho_triple = convolve(t.rho_rho, t.rho);
  return t;
}

Eigen::MatrixXd toeplitz(const AutocovarianceModel &model, std::size_t n) {
  Eigen::MatrixXd t(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          model(static_cast<long long>(i) - static_cast<long long>(j));
  return t;
}

PathSampler::PathSampler(AutocovarianceModel model, std::size_t n,
                         std::uint64_t seed, std::uint64_t stream_base)
    : model_(std::move(model)), n_(n), seed_(seed), stream_base_(stream_base) {
  if (n_ == 0) throw contract_error("sampler: n must be >= 1");
  if (n_ == 1 || model_.support() == 0) {
    mode_ = Mode::iid_direct;
    return;
  }

  // Minimal circulant embedding of T_n: order M = 2n-2, first column
  // (rho(0),...,rho(n-1),rho(n-2),...,rho(1)). Its eigenvalues are the DFT
  // of that column; they are real because the column is even.
  std::size_t M = 2 * n_ - 2;
  std::vector<double> c(M);
  for (std::size_t i = 0; i < n_; ++i) c[i] = model_(static_cast<long long>(i));
  for (std::size_t j = n_; j < M; ++j) c[j] = c[M - j];

  std::vector<double> lambda(M);
  {
    auto *in = fftw_alloc_complex(M);
    auto *out = fftw_alloc_complex(M);
    for (std::size_t i = 0; i < M; ++i) {
      in[i][0] = c[i];
      in[i][1] = 0.0;
    }
    fftw_plan plan;
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      plan = fftw_plan_dft_1d(static_cast<int>(M), in, out, FFTW_FORWARD,
                              FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    for (std::size_t i = 0; i < M; ++i) lambda[i] = out[i][0];
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
  }

  double lmin = *std::min_element(lambda.begin(), lambda.end());
  if (lmin >= -1e-10) {
    mode_ = Mode::circulant;
    embed_len_ = M;
    scale_.resize(M);
    for (std::size_t i = 0; i < M; ++i)
      scale_[i] = std::sqrt(std::max(lambda[i], 0.0) / static_cast<double>(M));
    return;
  }

  // Embedding failed; factor T_n densely.
  if (n_ > (std::size_t{1} << 15)) {
    std::ostringstream os;
    os << "sampler: circulant embedding failed (min eigenvalue " << lmin
       << ") and n=" << n_ << " exceeds the dense fallback limit 2^15";
    throw resource_error(os.str());
  }
  Eigen::MatrixXd t = toeplitz(model_, n_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  double tmin = es.eigenvalues().minCoeff();
  if (tmin < -1e-8) {
    std::ostringstream os;
    os << "sampler: Toeplitz matrix not positive semidefinite (min eigenvalue "
       << tmin << ")";
    throw model_error(os.str());
  }
  factor_ = es.eigenvectors() *
            es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
            es.eigenvectors().transpose();
  mode_ = Mode::dense_chol;
}

PathSampler::~PathSampler() = default;

struct PathSampler::Workspace::State {
  std::size_t M = 0;
  fftw_complex *in = nullptr;
  fftw_complex *out = nullptr;
  fftw_plan plan = nullptr;
  std::vector<double> z;      // normal draws scratch
  std::vector<double> spare;  // discarded pair half in sample_path

  ~State() {
    if (plan) {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      fftw_destroy_plan(plan);
    }
    if (in) fftw_free(in);
    if (out) fftw_free(out);
  }
};

PathSampler::Workspace::Workspace(const PathSampler &s)
    : state_(std::make_unique<State>()) {
  state_->spare.resize(s.n_);
  if (s.mode_ == Mode::circulant) {
    state_->M = s.embed_len_;
    state_->in = fftw_alloc_complex(state_->M);
    state_->out = fftw_alloc_complex(state_->M);
    std::lock_guard<std::mutex> lock(fftw_mutex());
    state_->plan =
        fftw_plan_dft_1d(static_cast<int>(state_->M), state_->in, state_->out,
                         FFTW_BACKWARD, FFTW_ESTIMATE);
  } else if (s.mode_ == Mode::dense_chol) {
    state_->z.resize(s.n_);
  }
}

PathSampler::Workspace::~Workspace() = default;

void PathSampler::sample_pair(std::size_t p, std::span<double> a,
                              std::span<double> b, Workspace &ws) const {
  if (a.size() != n_ || b.size() != n_)
    throw contract_error("sample_pair: output spans must have length n");
  NormalStream ns(seed_, stream_base_ + p);
  switch (mode_) {
    case Mode::iid_direct: {
      ns.fill_normals(a, 0);
      ns.fill_normals(b, n_);
      return;
    }
    case Mode::circulant: {
      auto *st = ws.state_.get();
      std::size_t M = st->M;
      // w_l = sqrt(lambda_l/M) (U_l + i V_l); the real and imaginary parts
      // of its unnormalized inverse DFT are two independent N(0, T_n)
      // paths (the cross terms cancel because lambda is even).
      for (std::size_t l = 0; l < M; ++l) {
        double u = ns.normal(2 * l);
        double v = ns.normal(2 * l + 1);
        st->in[l][0] = scale_[l] * u;
        st->in[l][1] = scale_[l] * v;
      }
      fftw_execute(st->plan);
      for (std::size_t i = 0; i < n_; ++i) {
        a[i] = st->out[i][0];
        b[i] = st->out[i][1];
      }
      return;
    }
    case Mode::dense_chol: {
      auto *st = ws.state_.get();
      Eigen::Map<Eigen::VectorXd> z(st->z.data(), static_cast<Eigen::Index>(n_));
      ns.fill_normals(st->z, 0);
      Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(n_)) =
          factor_ * z;
      ns.fill_normals(st->z, n_);
      Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(n_)) =
          factor_ * z;
      return;
    }
  }
}

void PathSampler::sample_path(std::size_t r, std::span<double> out,
                              Workspace &ws) const {
  std::span<double> spare(ws.state_->spare);
  if ((r & 1) == 0)
    sample_pair(r / 2, out, spare, ws);
  else
    sample_pair(r / 2, spare, out, ws);
}

namespace {

std::vector<double> sample_stationary_impl(const AutocovarianceModel &model,
                                           std::size_t n, std::size_t R,
                                           std::uint64_t seed, bool parallel) {
  if (R == 0) throw contract_error("sample_stationary: R must be >= 1");
  PathSampler sampler(model, n, seed);
  std::vector<double> out(R * n);
  std::size_t pairs = (R + 1) / 2;
  auto body = [&](PathSampler::Workspace &ws, std::ptrdiff_t p) {
    auto pi = static_cast<std::size_t>(p);
    std::span<double> a(out.data() + (2 * pi) * n, n);
    if (2 * pi + 1 < R) {
      std::span<double> b(out.data() + (2 * pi + 1) * n, n);
      sampler.sample_pair(pi, a, b, ws);
    } else {
      sampler.sample_path(2 * pi, a, ws);
    }
  };
  auto make = [&] { return PathSampler::Workspace(sampler); };
  if (parallel)
    parallel_for_with(static_cast<std::ptrdiff_t>(pairs), make, body);
  else {
    auto ws = make();
    for (std::size_t p = 0; p < pairs; ++p)
      body(ws, static_cast<std::ptrdiff_t>(p));
  }
  return out;
}

}  // namespace

std::vector<double> sample_stationary(const AutocovarianceModel &model,
                                      std::size_t n, std::size_t R,
                                      std::uint64_t seed) {
  return sample_stationary_impl(model, n, R, seed, true);
}

std::vector<double> sample_stationary_serial(const AutocovarianceModel &model,
                                             std::size_t n, std::size_t R,
                                             std::uint64_t seed) {
  return sample_stationary_impl(model, n, R, seed, false);
}

SampleBatch sample_normal(const CovarianceMatrix &sigma, std::size_t R,
                          std::uint64_t seed, std::uint64_t stream_base) {
  if (R == 0) throw contract_error("sample_normal: R must be >= 1");
  std::size_t m = sigma.dim();
  SampleBatch batch;
  batch.m = m;
  batch.R = R;
  batch.data.assign(m * R, 0.0);
  batch.provenance = {seed, stream_base, "normal m=" + std::to_string(m)};
  const Eigen::MatrixXd &L = sigma.cholesky();
  bool ident = sigma.is_identity();
  std::size_t pairs = (R + 1) / 2;
  parallel_for(static_cast<std::ptrdiff_t>(pairs), [&](std::ptrdiff_t p) {
    NormalStream ns(seed, stream_base + static_cast<std::uint64_t>(p));
    std::vector<double> z(m);
    for (int half = 0; half < 2; ++half) {
      std::size_t r = 2 * static_cast<std::size_t>(p) + static_cast<std::size_t>(half);
      if (r >= R) break;
      ns.fill_normals(z, static_cast<std::uint64_t>(half) * m);
      Eigen::Map<Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(m));
      Eigen::Map<Eigen::VectorXd> row(batch.data.data() + r * m,
                                      static_cast<Eigen::Index>(m));
      if (ident)
        row = zv;
      else
        row = L * zv;
    }
  });
  return batch;
}

}  // namespace malstein
