#include "malstein/autocovariance.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "malstein/common.hpp"

namespace malstein {

struct AutocovarianceModel::Impl {
  AcvKind kind = AcvKind::iid;
  double param = 0.0;
  std::vector<double> table;
  mutable std::mutex mu;
  mutable std::map<std::pair<double, long long>, double> pow_sums;

  double rho(long long k) const {
    k = std::llabs(k);
    switch (kind) {
      case AcvKind::iid:
        return k == 0 ? 1.0 : 0.0;
      case AcvKind::ar1:
        return std::pow(param, static_cast<double>(k));
      case AcvKind::fgn: {
        if (k == 0) return 1.0;
        double h2 = 2.0 * param;
        double kp = static_cast<double>(k);
        return 0.5 * (std::pow(kp + 1.0, h2) - 2.0 * std::pow(kp, h2) +
                      std::pow(kp - 1.0, h2));
      }
      case AcvKind::table: {
        auto idx = static_cast<std::size_t>(k);
        return idx < table.size() ? table[idx] : 0.0;
      }
    }
    return 0.0;
  }
};

AutocovarianceModel::AutocovarianceModel(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)) {}

AutocovarianceModel AutocovarianceModel::iid() {
  auto impl = std::make_shared<Impl>();
  impl->kind = AcvKind::iid;
  return AutocovarianceModel(impl);
}

AutocovarianceModel AutocovarianceModel::ar1(double r) {
  if (!(std::abs(r) < 1.0)) throw model_error("ar1: |r| must be < 1");
  auto impl = std::make_shared<Impl>();
  impl->kind = AcvKind::ar1;
  impl->param = r;
  return AutocovarianceModel(impl);
}

AutocovarianceModel AutocovarianceModel::fgn(double hurst) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw model_error("fgn: H must be in (0,1)");
  auto impl = std::make_shared<Impl>();
  impl->kind = AcvKind::fgn;
  impl->param = hurst;
  return AutocovarianceModel(impl);
}

AutocovarianceModel AutocovarianceModel::table(std::vector<double> rho) {
  // Positive semidefiniteness is enforced where it matters: the sampler
  // rejects non-PSD Toeplitz matrices. Formal tables (summability
  // arithmetic only) are allowed here.
  if (rho.empty() || std::abs(rho[0] - 1.0) > 1e-12)
    throw model_error("table: rho(0) must be 1");
  for (double v : rho) {
    if (!std::isfinite(v)) throw model_error("table: non-finite entry");
    if (std::abs(v) > 1.0 + 1e-12)
      throw model_error("table: |rho(k)| must be <= 1");
  }
  auto impl = std::make_shared<Impl>();
  impl->kind = AcvKind::table;
  impl->table = std::move(rho);
  return AutocovarianceModel(impl);
}

double AutocovarianceModel::operator()(long long k) const { return impl_->rho(k); }

AcvKind AutocovarianceModel::kind() const { return impl_->kind; }

double AutocovarianceModel::param() const { return impl_->param; }

long long AutocovarianceModel::support() const {
  switch (impl_->kind) {
    case AcvKind::iid:
      return 0;
    case AcvKind::ar1:
      return impl_->param == 0.0 ? 0 : -1;
    case AcvKind::fgn:
      return impl_->param == 0.5 ? 0 : -1;
    case AcvKind::table: {
      for (long long k = static_cast<long long>(impl_->table.size()) - 1; k >= 0; --k)
        if (impl_->table[static_cast<std::size_t>(k)] != 0.0) return k;
      return 0;
    }
  }
  return -1;
}

double AutocovarianceModel::abs_pow_sum(double p, long long n) const {
  if (n < 1) throw contract_error("abs_pow_sum: n must be >= 1");
  if (p < 0.0) throw contract_error("abs_pow_sum: p must be >= 0");
  {
    std::lock_guard<std::mutex> lock(impl_->mu);
    auto it = impl_->pow_sums.find({p, n});
    if (it != impl_->pow_sums.end()) return it->second;
  }
  double s = 1.0;  // |rho(0)|^p
  for (long long k = 1; k < n; ++k) {
    double v = std::abs(impl_->rho(k));
    if (v != 0.0) s += 2.0 * std::pow(v, p);
  }
  std::lock_guard<std::mutex> lock(impl_->mu);
  impl_->pow_sums[{p, n}] = s;
  return s;
}

std::string AutocovarianceModel::id() const {
  std::ostringstream os;
  switch (impl_->kind) {
    case AcvKind::iid:
      os << "iid";
      break;
    case AcvKind::ar1:
      os << "ar1(" << format_double(impl_->param) << ")";
      break;
    case AcvKind::fgn:
      os << "fgn(" << format_double(impl_->param) << ")";
      break;
    case AcvKind::table:
      os << "table[W=" << impl_->table.size() - 1 << "]";
      break;
  }
  return os.str();
}

}  // namespace malstein
