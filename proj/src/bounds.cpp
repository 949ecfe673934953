#include "malstein/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "malstein/common.hpp"
#include "malstein/gausssim.hpp"
#include "malstein/kernels.hpp"

namespace malstein {

namespace {

constexpr double kInvE = 0.36787944117144233;

void check_dims(const CovarianceMatrix &sigma, std::size_t m, const char *who) {
  if (sigma.dim() != m) {
    std::ostringstream os;
    os << who << ": m=" << m << " does not match the covariance dimension "
       << sigma.dim();
    throw contract_error(os.str());
  }
}

std::string flag_join(const std::vector<std::string> &flags) {
  std::string out;
  for (const auto &f : flags) {
    if (!out.empty()) out += ";";
    out += f;
  }
  return out;
}

std::string kv_join(const std::map<std::string, double> &kv) {
  std::string out;
  for (const auto &[k, v] : kv) {
    if (!out.empty()) out += ";";
    out += k + "=" + format_double(v);
  }
  return out;
}

}  // namespace

bool BoundReport::has_flag(const std::string &f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

std::string BoundReport::to_json_text() const {
  nlohmann::json j;
  j["bound_id"] = id;
  j["inputs"] = inputs;
  j["terms"] = terms;
  j["value"] = value;
  j["clipped"] = clipped;
  j["constant"] =
      constant == ConstantKind::explicit_constant ? "explicit" : "shape-only";
  j["flags"] = flags;
  return j.dump();
}

std::string BoundReport::csv_header() {
  return "bound_id,value,clipped,constant,flags,inputs,terms";
}

std::string BoundReport::csv_row() const {
  std::ostringstream os;
  os << id << "," << format_double(value) << "," << format_double(clipped)
     << ","
     << (constant == ConstantKind::explicit_constant ? "explicit" : "shape-only")
     << "," << flag_join(flags) << "," << kv_join(inputs) << ","
     << kv_join(terms);
  return os.str();
}

BoundReport theorem1_bound(const CovarianceMatrix &sigma, std::size_t m,
                           double gamma_sq) {
  check_dims(sigma, m, "theorem1_bound");
  if (!(gamma_sq >= 0.0))
    throw contract_error("theorem1_bound: gamma_sq must be >= 0");
  BoundReport r;
  r.id = "theorem1";
  double inv_op = sigma.inv_op_norm();
  double md = static_cast<double>(m);
  double sigma_factor = std::pow(inv_op, 1.5) + 1.0;
  double m_factor = std::pow(md, 41.0 / 24.0);
  r.inputs = {{"m", md}, {"inv_op_norm", inv_op}, {"gamma_sq", gamma_sq}};
  r.terms = {{"constant", 402.0},
             {"sigma_factor", sigma_factor},
             {"m_factor", m_factor},
             {"sqrt_gamma_sq", std::sqrt(gamma_sq)}};
  r.value = 402.0 * sigma_factor * m_factor * std::sqrt(gamma_sq);
  r.clipped = std::min(r.value, 1.0);
  return r;
}

BoundReport corollary1_bound(const CovarianceMatrix &sigma, std::size_t m,
                             double fourth_gap, double neg_tol) {
  check_dims(sigma, m, "corollary1_bound");
  if (neg_tol < 0.0) throw contract_error("corollary1_bound: neg_tol must be >= 0");
  BoundReport r;
  r.id = "corollary1";
  double gap = fourth_gap;
  if (gap < 0.0) {
    if (gap < -neg_tol) {
      std::ostringstream os;
      os << "corollary1_bound: fourth-moment gap " << gap
         << " below -" << neg_tol
         << "; the moment identity for multiple integrals is violated";
      throw numeric_error(os.str());
    }
    gap = 0.0;
    r.flags.push_back("negative-gap-clamped");
  }
  double inv_op = sigma.inv_op_norm();
  double md = static_cast<double>(m);
  double sigma_factor = std::pow(inv_op, 1.5) + 1.0;
  double m_factor = std::pow(md, 41.0 / 24.0);
  r.inputs = {{"m", md},
              {"inv_op_norm", inv_op},
              {"fourth_gap", fourth_gap},
              {"neg_tol", neg_tol}};
  r.terms = {{"constant", 402.0},
             {"sigma_factor", sigma_factor},
             {"m_factor", m_factor},
             {"sqrt_gap", std::sqrt(gap)}};
  r.value = 402.0 * sigma_factor * m_factor * std::sqrt(gap);
  r.clipped = std::min(r.value, 1.0);
  return r;
}

BoundReport logfactor_bound(const CovarianceMatrix &sigma, std::size_t m,
                            double mean_hs) {
  check_dims(sigma, m, "logfactor_bound");
  if (!(mean_hs > 0.0))
    throw contract_error("logfactor_bound: mean_hs must be > 0");
  BoundReport r;
  r.id = "logfactor";
  r.constant = ConstantKind::shape_only;
  r.inputs = {{"m", static_cast<double>(m)}, {"mean_hs", mean_hs}};
  double log_factor = std::abs(std::log(mean_hs));
  r.terms = {{"log_factor", log_factor}, {"linear_term", mean_hs}};
  r.value = mean_hs * log_factor;
  r.clipped = std::min(r.value, 1.0);
  if (mean_hs >= 1.0) r.flags.push_back("out-of-regime");
  return r;
}

BoundReport d2_bound(double mean_hs) {
  if (!(mean_hs >= 0.0)) throw contract_error("d2_bound: mean_hs must be >= 0");
  BoundReport r;
  r.id = "d2";
  r.inputs = {{"mean_hs", mean_hs}};
  r.terms = {{"half", 0.5}};
  r.value = 0.5 * mean_hs;
  r.clipped = std::min(r.value, 1.0);
  return r;
}

BoundReport dW_bound(const CovarianceMatrix &sigma, std::size_t m,
                     double mean_hs) {
  check_dims(sigma, m, "dW_bound");
  if (!(mean_hs >= 0.0)) throw contract_error("dW_bound: mean_hs must be >= 0");
  BoundReport r;
  r.id = "dW";
  double c1 = std::sqrt(static_cast<double>(m)) * sigma.inv_op_norm() *
              std::sqrt(sigma.op_norm());
  r.inputs = {{"m", static_cast<double>(m)},
              {"inv_op_norm", sigma.inv_op_norm()},
              {"op_norm", sigma.op_norm()},
              {"mean_hs", mean_hs}};
  r.terms = {{"c1", c1}};
  r.value = c1 * mean_hs;
  r.clipped = std::min(r.value, 1.0);
  return r;
}

QuadSums quad_sums_convolution(const AutocovarianceModel &model, long long n) {
  if (n < 1) throw contract_error("quad_sums: n must be >= 1");
  if (n > (1LL << 16)) throw resource_error("quad_sums: n exceeds 2^16");
  // Factor the window: summing i (resp. l) over [0,n) gives
  // g(j) = sum_i |rho(i-j)|, so the quadruple sum is
  // sum_{j,k in [0,n)} g(j) mid(j-k) g(k) = sum_d mid(d) (g star g)(d).
  Sequence rho_abs = truncate(model, n).abs();
  Sequence g_full = convolve(rho_abs, block_window(n));
  Sequence g;
  g.lo = 0;
  g.v.resize(static_cast<std::size_t>(n));
  for (long long j = 0; j < n; ++j)
    g.v[static_cast<std::size_t>(j)] = g_full.at(j);
  Sequence acorr = convolve(g, g.reversed());
  double n2 = static_cast<double>(n) * static_cast<double>(n);
  QuadSums out;
  out.q1 = inner(rho_abs, acorr) / n2;
  out.q2 = inner(rho_abs.square(), acorr) / n2;
  return out;
}

QuadSums quad_sums_exact(const AutocovarianceModel &model, long long n) {
  if (n < 1) throw contract_error("quad_sums: n must be >= 1");
  if (n <= 64) {
    double n2 = static_cast<double>(n) * static_cast<double>(n);
    QuadSums out;
    out.q1 = quad_sum_brute(model, n, false) / n2;
    out.q2 = quad_sum_brute(model, n, true) / n2;
    return out;
  }
  return quad_sums_convolution(model, n);
}

BoundReport corollary2_rates(const AutocovarianceModel &model, long long n,
                             double b, bool two_sparse) {
  if (n < 1) throw contract_error("corollary2_rates: n must be >= 1");
  if (!(b >= 1.0 && b <= 2.0))
    throw contract_error("corollary2_rates: b must be in [1, 2]");
  BoundReport r;
  r.id = "corollary2";
  r.constant = ConstantKind::shape_only;
  double nd = static_cast<double>(n);

  Sequence rho = truncate(model, n);
  double l1 = rho.lp(1.0);
  double l2 = rho.lp(2.0);
  double lb = rho.lp(b);
  QuadSums q = quad_sums_exact(model, n);

  double rate_i = std::pow(nd, -0.5) * std::pow(l1, 1.5);
  double young_majorant = std::pow(l1, 3.0) / nd;

  r.inputs = {{"n", nd}, {"b", b}, {"two_sparse", two_sparse ? 1.0 : 0.0}};
  r.terms = {{"rho_l1", l1},
             {"rho_l2", l2},
             {"rho_lb", lb},
             {"q1", q.q1},
             {"sqrt_q1", std::sqrt(q.q1)},
             {"young_majorant_q1", young_majorant},
             {"rate_i", rate_i}};

  if (two_sparse) {
    double rate_ii = std::pow(nd, -(1.0 / b - 0.5)) * l2 * lb;
    double rho_sq_l1 = rho.square().lp(1.0);
    double holder_majorant = std::pow(2.0 * nd, (2.0 * b - 2.0) / b) *
                             rho_sq_l1 * lb * lb / nd;
    Sequence rho_ones = convolve(rho.abs(), ones_window(n));
    Sequence rho_rhosq = convolve(rho.abs(), rho.square());
    double holder_inner = inner(rho_ones, rho_rhosq);
    r.terms["q2"] = q.q2;
    r.terms["sqrt_q2"] = std::sqrt(q.q2);
    r.terms["rho_sq_l1"] = rho_sq_l1;
    r.terms["holder_majorant_q2"] = holder_majorant;
    r.terms["holder_inner"] = holder_inner;
    r.terms["rate_ii"] = rate_ii;
    r.value = rate_ii;
  } else {
    r.value = rate_i;
  }
  r.clipped = std::min(r.value, 1.0);
  return r;
}

namespace {

std::pair<double, double> split_terms(const AutocovarianceModel &model,
                                      long long n, long long split) {
  std::vector<double> sq;
  sq.reserve(static_cast<std::size_t>(std::max<long long>(0, n - split)));
  for (long long k = split; k < n; ++k) {
    double v = model(k);
    sq.push_back(2.0 * v * v);
  }
  double tail = std::sqrt(neumaier_sum(sq));
  double head = static_cast<double>(2 * split + 1) /
                std::sqrt(static_cast<double>(n));
  return {tail, head};
}

}  // namespace

ItemIiiSplit item_iii_split(const AutocovarianceModel &model, long long n,
                            long long split) {
  if (n < 1) throw contract_error("item_iii_split: n must be >= 1");
  if (split < 1 || split > n)
    throw contract_error("item_iii_split: split must be in [1, n]");
  ItemIiiSplit out;
  auto [tail, head] = split_terms(model, n, split);
  out.tail = tail;
  out.head = head;
  out.total = tail + head;

  // Geometric grid of candidate splits.
  out.best_total = out.total;
  out.best_split = split;
  out.best_tail = tail;
  out.best_head = head;
  long long cand = 1;
  while (cand <= n) {
    auto [t, h] = split_terms(model, n, cand);
    if (t + h < out.best_total) {
      out.best_total = t + h;
      out.best_split = cand;
      out.best_tail = t;
      out.best_head = h;
    }
    long long next = cand + std::max<long long>(1, cand / 8);
    cand = next;
  }
  return out;
}

double gamma_identity_bound(std::size_t m) {
  if (m == 0) throw contract_error("gamma_identity_bound: m must be >= 1");
  return 4.0 * std::pow(static_cast<double>(m), 0.25);
}

BoundReport conwass_bridge(const CovarianceMatrix &sigma, std::size_t m,
                           double dw_value) {
  check_dims(sigma, m, "conwass_bridge");
  if (!(dw_value >= 0.0))
    throw contract_error("conwass_bridge: dW must be >= 0");
  BoundReport r;
  r.id = "conwass-bridge";
  double gamma_est;
  if (sigma.is_identity()) {
    gamma_est = gamma_identity_bound(m);
    r.constant = ConstantKind::explicit_constant;
  } else {
    gamma_est = std::sqrt(sigma.hs_norm());
    r.constant = ConstantKind::shape_only;
    r.flags.push_back("gamma-shape-only");
  }
  r.inputs = {{"m", static_cast<double>(m)},
              {"dW", dw_value},
              {"hs_norm", sigma.hs_norm()}};
  r.terms = {{"two_sqrt2", 2.0 * std::sqrt(2.0)},
             {"gamma_estimate", gamma_est},
             {"sqrt_gamma", std::sqrt(gamma_est)},
             {"sqrt_dW", std::sqrt(dw_value)}};
  r.value = 2.0 * std::sqrt(2.0) * std::sqrt(gamma_est) * std::sqrt(dw_value);
  r.clipped = std::min(r.value, 1.0);
  return r;
}

RecursionAudit recursion_check(const CovarianceMatrix &sigma, std::size_t m,
                               double gamma, double t) {
  check_dims(sigma, m, "recursion_check");
  if (!(gamma > 0.0)) throw contract_error("recursion_check: gamma must be > 0");
  if (!(t > 0.0 && t < 1.0))
    throw contract_error("recursion_check: t must be in (0, 1)");
  RecursionAudit a;
  a.t = t;
  a.gamma = gamma;
  a.in_regime = gamma <= kInvE;
  double s = sigma.inv_op_norm();
  double md = static_cast<double>(m);

  // Recursion RHS with kappa = 1 plugged into the sqrt on the right.
  a.rhs_at_kappa1 = (4.0 / 3.0) * s *
                        (md * std::abs(std::log(t)) + 24.0 * std::pow(md, 17.0 / 12.0)) *
                        gamma +
                    (20.0 * md / std::sqrt(2.0)) * std::sqrt(t) / (1.0 - t);

  // |log gamma| sqrt(kappa) <= sqrt(8m/3) s^{1/2} x^{1/2}|log x|^{3/2}
  //   + (32 s m^{17/12} + 20 sqrt(2) m)^{1/2} x^{1/2}|log x|, x = gamma,
  // then both sup factors are bounded by 4 on (0, 1/e].
  a.step3_value = std::sqrt(8.0 * md / 3.0) * std::sqrt(s) * 4.0 +
                  std::sqrt(32.0 * s * std::pow(md, 17.0 / 12.0) +
                            20.0 * std::sqrt(2.0) * md) *
                      4.0;
  a.step3_cap = 58.0 * (std::sqrt(s) + 1.0) * std::pow(md, 17.0 / 24.0);

  // Resubstituting the step-3 cap at t = gamma^2 gives
  // kappa <= [(464/3)(s^{3/2}+s) m^{41/24} + 32 s m^{17/12}
  //           + 20 sqrt(2) m] gamma.
  double numer = (464.0 / 3.0) * (std::pow(s, 1.5) + s) * std::pow(md, 41.0 / 24.0) +
                 32.0 * s * std::pow(md, 17.0 / 12.0) +
                 20.0 * std::sqrt(2.0) * md;
  a.final_coeff = numer / ((std::pow(s, 1.5) + 1.0) * std::pow(md, 41.0 / 24.0));
  return a;
}

double sup_sqrt_log_check() {
  auto f = [](double x) {
    double lg = std::log(x);
    return std::sqrt(x) * std::pow(std::abs(lg), 1.5);
  };
  // Coarse geometric grid, then golden-section refinement around the best.
  double best_x = kInvE, best = f(kInvE);
  for (double x = kInvE; x > 1e-12; x *= 0.98) {
    double v = f(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  double lo = best_x * 0.9, hi = std::min(best_x * 1.1, kInvE);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
  for (int it = 0; it < 200; ++it) {
    if (f(c) < f(d)) {
      lo = c;
      c = d;
      d = lo + phi * (hi - lo);
    } else {
      hi = d;
      d = c;
      c = hi - phi * (hi - lo);
    }
  }
  return std::max(best, f(0.5 * (lo + hi)));
}

}  // namespace malstein
