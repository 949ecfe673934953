#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "malstein/common.hpp"
#include "malstein/distances.hpp"
#include "malstein/parallel.hpp"
#include "malstein/rng.hpp"

namespace malstein {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double pair_cost(const SampleBatch &f, std::size_t r, const SampleBatch &g,
                 std::size_t s) {
  double acc = 0.0;
  const double *a = f.data.data() + r * f.m;
  const double *b = g.data.data() + s * g.m;
  for (std::size_t i = 0; i < f.m; ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Shortest-augmenting-path assignment with potentials (the classical exact
// O(n^3) scheme). col4row receives the optimal column of each row.
double solve_assignment(std::size_t n, const std::vector<double> &cost,
                        std::vector<int> &col4row) {
  std::vector<double> u(n, 0.0), v(n, 0.0), shortest(n);
  std::vector<int> path(n, -1), row4col(n, -1);
  col4row.assign(n, -1);
  std::vector<char> SR(n), SC(n);
  std::vector<int> remaining(n);

  for (std::size_t cur = 0; cur < n; ++cur) {
    std::fill(SR.begin(), SR.end(), 0);
    std::fill(SC.begin(), SC.end(), 0);
    std::fill(shortest.begin(), shortest.end(), kInf);
    std::iota(remaining.begin(), remaining.end(), 0);
    std::size_t num_remaining = n;

    double min_val = 0.0;
    int sink = -1;
    std::size_t i = cur;
    while (sink == -1) {
      SR[i] = 1;
      const double *ci = cost.data() + i * n;
      double lowest = kInf;
      std::size_t index = 0;
      for (std::size_t it = 0; it < num_remaining; ++it) {
        int j = remaining[it];
        double r = min_val + ci[j] - u[i] - v[j];
        if (r < shortest[j]) {
          path[j] = static_cast<int>(i);
          shortest[j] = r;
        }
        if (shortest[j] < lowest ||
            (shortest[j] == lowest && row4col[j] == -1)) {
          lowest = shortest[j];
          index = it;
        }
      }
      min_val = lowest;
      if (!(min_val < kInf))
        throw numeric_error("assignment: no augmenting path (non-finite costs?)");
      int j = remaining[index];
      if (row4col[j] == -1)
        sink = j;
      else
        i = static_cast<std::size_t>(row4col[j]);
      SC[j] = 1;
      remaining[index] = remaining[--num_remaining];
    }

    u[cur] += min_val;
    for (std::size_t k = 0; k < n; ++k)
      if (SR[k] && k != cur) u[k] += min_val - shortest[col4row[k]];
    for (std::size_t j = 0; j < n; ++j)
      if (SC[j]) v[j] -= min_val - shortest[j];

    int j = sink;
    while (true) {
      int ii = path[j];
      row4col[j] = ii;
      std::swap(col4row[ii], j);
      if (ii == static_cast<int>(cur)) break;
    }
  }

  std::vector<double> parts(n);
  for (std::size_t r = 0; r < n; ++r)
    parts[r] = cost[r * n + static_cast<std::size_t>(col4row[r])];
  return neumaier_sum(parts);
}

double w1_sorted_1d(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> parts(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) parts[i] = std::abs(a[i] - b[i]);
  return neumaier_sum(parts) / static_cast<double>(a.size());
}

// W1 between weighted empirical measures on the line: integral of
// |F(t) - G(t)| over the merged support.
double w1_weighted_1d(const std::vector<double> &xs,
                      const std::vector<double> &wx,
                      const std::vector<double> &ys,
                      const std::vector<double> &wy) {
  double total_x = 0.0, total_y = 0.0;
  for (double w : wx) total_x += w;
  for (double w : wy) total_y += w;
  double Fx = 0.0, Fy = 0.0, acc = 0.0;
  std::size_t i = 0, j = 0;
  double prev = 0.0;
  bool started = false;
  while (i < xs.size() || j < ys.size()) {
    double t = (j >= ys.size() || (i < xs.size() && xs[i] <= ys[j])) ? xs[i]
                                                                     : ys[j];
    if (started) acc += std::abs(Fx / total_x - Fy / total_y) * (t - prev);
    while (i < xs.size() && xs[i] == t) Fx += wx[i++];
    while (j < ys.size() && ys[j] == t) Fy += wy[j++];
    prev = t;
    started = true;
  }
  return acc;
}

DistanceEstimate dw_1d(const SampleBatch &f, const SampleBatch &g,
                       const TransportOptions &opts) {
  DistanceEstimate est;
  est.kind = "dW";
  est.family = "1d-rearrangement";
  est.r_f = f.R;
  est.r_g = g.R;
  std::vector<double> xs(f.R), ys(g.R);
  for (std::size_t r = 0; r < f.R; ++r) xs[r] = f.at(r, 0);
  for (std::size_t r = 0; r < g.R; ++r) ys[r] = g.at(r, 0);
  est.value = w1_sorted_1d(xs, ys);
  est.details["solver_tol"] = 1e-14;

  if (opts.bootstrap >= 2) {
    std::vector<double> sx = xs, sy = ys;
    std::sort(sx.begin(), sx.end());
    std::sort(sy.begin(), sy.end());
    std::vector<double> boot(opts.bootstrap);
    parallel_for(static_cast<std::ptrdiff_t>(opts.bootstrap),
                 [&](std::ptrdiff_t bb) {
                   std::size_t b = static_cast<std::size_t>(bb);
                   NormalStream s1(opts.bootstrap_seed,
                                   derive_stream("dw-boot-f", b));
                   NormalStream s2(opts.bootstrap_seed,
                                   derive_stream("dw-boot-g", b));
                   std::vector<double> wx(sx.size(), 0.0), wy(sy.size(), 0.0);
                   for (std::size_t i = 0; i < sx.size(); ++i)
                     wx[s1.index(i, sx.size())] += 1.0;
                   for (std::size_t i = 0; i < sy.size(); ++i)
                     wy[s2.index(i, sy.size())] += 1.0;
                   boot[b] = w1_weighted_1d(sx, wx, sy, wy);
                 });
    double mean = neumaier_sum(boot) / static_cast<double>(boot.size());
    std::vector<double> sq(boot.size());
    for (std::size_t i = 0; i < boot.size(); ++i)
      sq[i] = (boot[i] - mean) * (boot[i] - mean);
    est.se = std::sqrt(neumaier_sum(sq) / static_cast<double>(boot.size() - 1));
    std::sort(boot.begin(), boot.end());
    est.envelope95 = boot[static_cast<std::size_t>(0.95 * (boot.size() - 1))];
    est.details["bootstrap"] = static_cast<double>(opts.bootstrap);
  }
  return est;
}

DistanceEstimate dw_exact(const SampleBatch &f, const SampleBatch &g) {
  std::size_t n = f.R;
  std::vector<double> cost(n * n);
  parallel_for(static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t r) {
    for (std::size_t s = 0; s < n; ++s)
      cost[static_cast<std::size_t>(r) * n + s] =
          pair_cost(f, static_cast<std::size_t>(r), g, s);
  });
  std::vector<int> col4row;
  double total = solve_assignment(n, cost, col4row);
  DistanceEstimate est;
  est.kind = "dW";
  est.family = "exact-assignment";
  est.r_f = n;
  est.r_g = n;
  est.value = total / static_cast<double>(n);
  est.details["solver_tol"] = 1e-9;
  return est;
}

DistanceEstimate dw_entropic(const SampleBatch &f, const SampleBatch &g,
                             const TransportOptions &opts) {
  std::size_t n = f.R;
  if (n > 6144)
    throw resource_error(
        "dW: entropic path holds the full cost matrix; capped at 6144 rows, "
        "subsample the batches");
  std::vector<double> cost(n * n);
  parallel_for(static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t r) {
    for (std::size_t s = 0; s < n; ++s)
      cost[static_cast<std::size_t>(r) * n + s] =
          pair_cost(f, static_cast<std::size_t>(r), g, s);
  });

  // Median pairwise cost from a strided sample; the regularization scale
  // only needs the right order of magnitude.
  std::vector<double> sample;
  std::size_t stride = std::max<std::size_t>(1, (n * n) / 65536);
  for (std::size_t k = 0; k < n * n; k += stride) sample.push_back(cost[k]);
  std::nth_element(sample.begin(), sample.begin() + sample.size() / 2,
                   sample.end());
  double median = sample[sample.size() / 2];
  double eps = std::max(1e-12, opts.reg_factor * median);

  std::vector<double> fpot(n, 0.0), gpot(n, 0.0);
  double logn = std::log(static_cast<double>(n));
  double marg_err = kInf;
  std::size_t iters = 0;

  auto lse_rows = [&](const std::vector<double> &other, bool over_cols,
                      std::vector<double> &out) {
    // out_i = eps * (logn - LSE_j((other_j - C_ij)/eps)) over columns, or the
    // transpose when over_cols is false.
    parallel_for(static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
      std::size_t i = static_cast<std::size_t>(ii);
      double mx = -kInf;
      for (std::size_t j = 0; j < n; ++j) {
        double c = over_cols ? cost[i * n + j] : cost[j * n + i];
        double t = (other[j] - c) / eps;
        if (t > mx) mx = t;
      }
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double c = over_cols ? cost[i * n + j] : cost[j * n + i];
        acc += std::exp((other[j] - c) / eps - mx);
      }
      out[i] = eps * (logn - (mx + std::log(acc)));
    });
  };

  for (; iters < opts.max_iter; ++iters) {
    lse_rows(gpot, true, fpot);
    lse_rows(fpot, false, gpot);
    // Row marginal violation of P_ij = exp((f_i + g_j - C_ij)/eps)/n^2.
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        row += std::exp((fpot[i] + gpot[j] - cost[i * n + j]) / eps);
      err += std::abs(row / (static_cast<double>(n) * static_cast<double>(n)) -
                      1.0 / static_cast<double>(n));
    }
    marg_err = err;
    if (err < opts.marginal_tol) {
      ++iters;
      break;
    }
  }

  // Round the plan onto the transport polytope, then price it. The rounded
  // primal cost and the c-transform dual value sandwich the exact optimum.
  double nn = static_cast<double>(n);
  std::vector<double> rowscale(n, 1.0), colsum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      row += std::exp((fpot[i] + gpot[j] - cost[i * n + j]) / eps) / (nn * nn);
    rowscale[i] = row > 1.0 / nn ? (1.0 / nn) / row : 1.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      col += rowscale[i] *
             std::exp((fpot[i] + gpot[j] - cost[i * n + j]) / eps) / (nn * nn);
    colsum[j] = col;
  }
  std::vector<double> colscale(n, 1.0);
  for (std::size_t j = 0; j < n; ++j)
    colscale[j] = colsum[j] > 1.0 / nn ? (1.0 / nn) / colsum[j] : 1.0;

  std::vector<double> row_def(n, 0.0), col_def(n, 0.0);
  double primal = 0.0, def_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double p = rowscale[i] * colscale[j] *
                 std::exp((fpot[i] + gpot[j] - cost[i * n + j]) / eps) / (nn * nn);
      primal += p * cost[i * n + j];
      row += p;
      col_def[j] += p;
    }
    row_def[i] = 1.0 / nn - row;
    def_total += row_def[i];
  }
  for (std::size_t j = 0; j < n; ++j) col_def[j] = 1.0 / nn - col_def[j];
  if (def_total > 1e-15) {
    double cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (row_def[i] <= 0.0) continue;
      for (std::size_t j = 0; j < n; ++j)
        cross += row_def[i] * std::max(0.0, col_def[j]) * cost[i * n + j];
    }
    primal += cross / def_total;
  }

  std::vector<double> gtil(n, kInf);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      gtil[j] = std::min(gtil[j], cost[i * n + j] - fpot[i]);
  double dual = (neumaier_sum(fpot) + neumaier_sum(gtil)) / nn;

  DistanceEstimate est;
  est.kind = "dW";
  est.family = "entropic";
  est.r_f = n;
  est.r_g = n;
  est.value = primal;
  est.se = std::max(0.0, primal - dual);
  est.details["regularization"] = eps;
  est.details["iterations"] = static_cast<double>(iters);
  est.details["marginal_err"] = marg_err;
  est.details["primal"] = primal;
  est.details["dual"] = dual;
  est.details["duality_gap"] = primal - dual;
  est.details["converged"] = marg_err < opts.marginal_tol ? 1.0 : 0.0;
  return est;
}

}  // namespace

DistanceEstimate dW_estimate(const SampleBatch &f, const SampleBatch &g,
                             const TransportOptions &opts) {
  if (f.m != g.m) throw contract_error("dW: batch dimensions differ");
  if (f.R != g.R)
    throw contract_error("dW: batches must have equal replicate counts");
  if (f.R == 0) throw contract_error("dW: empty batches");

  if (f.m == 1 && opts.method != TransportOptions::Method::entropic)
    return dw_1d(f, g, opts);

  TransportOptions::Method method = opts.method;
  if (method == TransportOptions::Method::automatic)
    method = f.R <= opts.exact_cap ? TransportOptions::Method::exact
                                   : TransportOptions::Method::entropic;
  if (method == TransportOptions::Method::exact) {
    if (f.R > opts.exact_cap)
      throw contract_error("dW: exact assignment path requires R <= exact_cap");
    return dw_exact(f, g);
  }
  return dw_entropic(f, g, opts);
}

}  // namespace malstein
