#include "malstein/hermite.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include "malstein/common.hpp"

namespace malstein {

double hermite_value(int k, double x) {
  if (k < 0) throw contract_error("hermite_value: negative index");
  double hm = 1.0, h = x;
  if (k == 0) return hm;
  for (int j = 1; j < k; ++j) {
    double hn = x * h - static_cast<double>(j) * hm;
    hm = h;
    h = hn;
  }
  return h;
}

void hermite_values(int kmax, double x, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(kmax) + 1);
  out[0] = 1.0;
  if (kmax == 0) return;
  out[1] = x;
  for (int j = 1; j < kmax; ++j)
    out[j + 1] = x * out[j] - static_cast<double>(j) * out[j - 1];
}

double factorial_d(int k) {
  if (k < 0 || k > 170) throw contract_error("factorial_d: index out of double range");
  double f = 1.0;
  for (int j = 2; j <= k; ++j) f *= j;
  return f;
}

const std::vector<std::pair<double, double>>& gauss_hermite(int q) {
  if (q < 1 || q > 2000) throw contract_error("gauss_hermite: order out of range");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<std::vector<std::pair<double, double>>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(q);
  if (it != cache.end()) return *it->second;

  // Golub-Welsch on the monic Jacobi matrix: zero diagonal, offdiag sqrt(k).
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd sub(q > 1 ? q - 1 : 0);
  for (int k = 1; k < q; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  auto rule = std::make_unique<std::vector<std::pair<double, double>>>();
  rule->reserve(q);
  for (int i = 0; i < q; ++i) {
    double w0 = es.eigenvectors()(0, i);
    rule->emplace_back(es.eigenvalues()[i], w0 * w0);
  }
  auto& ref = *rule;
  cache[q] = std::move(rule);
  return ref;
}

HermiteExpansion HermiteExpansion::from_coeffs(std::vector<double> a) {
  HermiteExpansion e;
  for (double v : a)
    if (!std::isfinite(v)) throw contract_error("expansion coefficient not finite");
  e.coeff = std::move(a);
  if (e.coeff.empty()) e.coeff.push_back(0.0);
  e.l2_sq = e.sq_norm();
  e.tail_sq = 0.0;
  return e;
}

int HermiteExpansion::max_index() const {
  for (int k = static_cast<int>(coeff.size()) - 1; k >= 0; --k)
    if (coeff[static_cast<std::size_t>(k)] != 0.0) return k;
  return -1;
}

bool HermiteExpansion::centered() const { return coeff.empty() || coeff[0] == 0.0; }

int HermiteExpansion::hermite_rank() const {
  for (std::size_t k = 1; k < coeff.size(); ++k)
    if (coeff[k] != 0.0) return static_cast<int>(k);
  throw model_error("hermite_rank undefined: no nonzero coefficient with k >= 1");
}

bool HermiteExpansion::is_two_sparse() const {
  for (std::size_t k = 0; k + 1 < coeff.size(); ++k)
    if (coeff[k] != 0.0 && coeff[k + 1] != 0.0) return false;
  return true;
}

double HermiteExpansion::evaluate(double x) const {
  double hm = 1.0, h = x, acc = coeff.empty() ? 0.0 : coeff[0];
  for (std::size_t k = 1; k < coeff.size(); ++k) {
    if (k >= 2) {
      double hn = x * h - static_cast<double>(k - 1) * hm;
      hm = h;
      h = hn;
    }
    acc += coeff[k] * h;
  }
  if (!std::isfinite(acc))
    throw numeric_error("hermite evaluate overflow at x=" + format_double(x));
  return acc;
}

HermiteExpansion HermiteExpansion::derivative() const {
  hermite_rank();  // throws when no k >= 1 coefficient exists
  std::vector<double> c(coeff.size() > 1 ? coeff.size() - 1 : 1, 0.0);
  for (std::size_t k = 1; k < coeff.size(); ++k)
    c[k - 1] = static_cast<double>(k) * coeff[k];
  auto e = from_coeffs(std::move(c));
  e.tol = tol;
  return e;
}

HermiteExpansion HermiteExpansion::shift() const {
  hermite_rank();
  std::vector<double> c(coeff.size() > 1 ? coeff.size() - 1 : 1, 0.0);
  for (std::size_t k = 1; k < coeff.size(); ++k) c[k - 1] = coeff[k];
  auto e = from_coeffs(std::move(c));
  e.tol = tol;
  return e;
}

double HermiteExpansion::sq_norm() const {
  double s = 0.0;
  for (std::size_t k = 0; k < coeff.size(); ++k)
    s += coeff[k] * coeff[k] * factorial_d(static_cast<int>(k));
  return s;
}

std::string HermiteExpansion::to_text() const {
  std::ostringstream os;
  os << "hermite-expansion v1\n";
  os << "K " << (coeff.empty() ? 0 : coeff.size() - 1) << "\n";
  os << "tol " << format_double(tol) << "\n";
  for (std::size_t k = 0; k < coeff.size(); ++k)
    if (coeff[k] != 0.0) os << k << " " << format_double(coeff[k]) << "\n";
  return os.str();
}

HermiteExpansion HermiteExpansion::from_text(std::istream& in) {
  std::string header;
  std::getline(in, header);
  if (header != "hermite-expansion v1")
    throw config_error("expansion text: bad header '" + header + "'");
  std::string key;
  std::size_t kmax = 0;
  double tol = 0.0;
  in >> key >> kmax;
  if (key != "K") throw config_error("expansion text: expected K line");
  in >> key >> tol;
  if (key != "tol") throw config_error("expansion text: expected tol line");
  std::vector<double> c(kmax + 1, 0.0);
  std::size_t idx;
  double val;
  while (in >> idx >> val) {
    if (idx > kmax) throw config_error("expansion text: index exceeds K");
    c[idx] = val;
  }
  auto e = from_coeffs(std::move(c));
  e.tol = tol;
  return e;
}

HermiteExpansion expand(const std::function<double(double)>& phi, int kmax, int q) {
  if (kmax < 0 || kmax > 170) throw contract_error("expand: K out of range");
  if (q < 2 * kmax + 1)
    throw contract_error("expand: quadrature order must be >= 2K+1");
  const auto& rule = gauss_hermite(q);

  std::vector<double> fx(rule.size());
  double l2 = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    double v = phi(rule[i].first);
    if (!std::isfinite(v))
      throw numeric_error("expand: phi not finite at node " + std::to_string(i) +
                          " (x=" + format_double(rule[i].first) + ")");
    fx[i] = v;
    l2 += rule[i].second * v * v;
  }

  std::vector<double> a(static_cast<std::size_t>(kmax) + 1, 0.0);
  std::vector<double> h;
  std::vector<double> acc(a.size(), 0.0);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    hermite_values(kmax, rule[i].first, h);
    for (std::size_t k = 0; k < a.size(); ++k)
      acc[k] += rule[i].second * fx[i] * h[k];
  }
  double zero_tol = 1e-10 * std::max(1.0, std::sqrt(std::max(l2, 0.0)));
  double kept = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double ak = acc[k] / factorial_d(static_cast<int>(k));
    if (std::abs(ak) <= zero_tol) ak = 0.0;
    a[k] = ak;
    if (ak != 0.0) {
      any = true;
      kept += ak * ak * factorial_d(static_cast<int>(k));
    }
  }
  if (!any)
    throw model_error("expand: degenerate function, all coefficients below tolerance");

  auto e = HermiteExpansion::from_coeffs(std::move(a));
  e.tol = zero_tol;
  e.l2_sq = l2;
  e.tail_sq = std::max(0.0, l2 - kept);
  return e;
}

}  // namespace malstein
