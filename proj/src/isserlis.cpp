#include "malstein/isserlis.hpp"

#include <functional>
#include <numeric>

#include "malstein/common.hpp"

namespace malstein {

GaussianMomentTable::GaussianMomentTable(Eigen::MatrixXd cov) : cov_(std::move(cov)) {
  if (cov_.rows() != cov_.cols() || cov_.rows() == 0)
    throw contract_error("moment table: covariance must be square");
}

double GaussianMomentTable::monomial(const std::vector<int> &powers) const {
  if (powers.size() != static_cast<std::size_t>(cov_.rows()))
    throw contract_error("moment table: power count must match dimension");
  for (int p : powers)
    if (p < 0) throw contract_error("moment table: negative power");
  std::vector<int> w = powers;
  return monomial_rec(w);
}

double GaussianMomentTable::monomial_rec(std::vector<int> &powers) const {
  int total = std::accumulate(powers.begin(), powers.end(), 0);
  if (total == 0) return 1.0;
  if (total % 2 == 1) return 0.0;
  auto it = memo_.find(powers);
  if (it != memo_.end()) return it->second;

  // Pull out one factor X_a and pair it with every remaining factor.
  std::size_t a = 0;
  while (powers[a] == 0) ++a;
  --powers[a];
  double sum = 0.0;
  for (std::size_t b = 0; b < powers.size(); ++b) {
    if (powers[b] == 0) continue;
    double c = cov_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    if (c == 0.0) continue;
    double mult = static_cast<double>(powers[b]);
    --powers[b];
    sum += mult * c * monomial_rec(powers);
    ++powers[b];
  }
  ++powers[a];
  memo_[powers] = sum;
  return sum;
}

double GaussianMomentTable::polynomial_product(
    const std::vector<int> &var, const std::vector<std::vector<double>> &poly) const {
  if (var.size() != poly.size())
    throw contract_error("moment table: var/poly size mismatch");
  std::size_t dim = static_cast<std::size_t>(cov_.rows());
  for (int v : var)
    if (v < 0 || static_cast<std::size_t>(v) >= dim)
      throw contract_error("moment table: variable index out of range");

  // Expand the product of polynomials into monomials depth-first.
  double total = 0.0;
  std::vector<int> powers(dim, 0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t t, double c) {
    if (c == 0.0) return;
    if (t == poly.size()) {
      total += c * monomial_rec(powers);
      return;
    }
    for (std::size_t p = 0; p < poly[t].size(); ++p) {
      if (poly[t][p] == 0.0) continue;
      powers[static_cast<std::size_t>(var[t])] += static_cast<int>(p);
      rec(t + 1, c * poly[t][p]);
      powers[static_cast<std::size_t>(var[t])] -= static_cast<int>(p);
    }
  };
  rec(0, 1.0);
  return total;
}

namespace {

// Leg bookkeeping for gaussian_form_moment. Legs are numbered; each leg
// belongs to a node and is linear (carries b) or one side of a quadratic.
struct Leg {
  int node = 0;
  bool linear = false;
  int twin = -1;  // the other leg of the same quadratic node
};

class MatchingEvaluator {
 public:
  explicit MatchingEvaluator(std::span<const GaussianFormNode> nodes)
      : nodes_(nodes) {}

  // Enumerate matchings of the given legs; legs whose node contributes its
  // linear part are flagged in `linear_choice`.
  double run(const std::vector<Leg> &legs) {
    legs_ = &legs;
    match_.assign(legs.size(), -1);
    return enumerate(0);
  }

 private:
  std::span<const GaussianFormNode> nodes_;
  const std::vector<Leg> *legs_ = nullptr;
  std::vector<int> match_;

  double enumerate(std::size_t first) {
    const auto &legs = *legs_;
    while (first < legs.size() && match_[first] != -1) ++first;
    if (first == legs.size()) return evaluate();
    double sum = 0.0;
    for (std::size_t j = first + 1; j < legs.size(); ++j) {
      if (match_[j] != -1) continue;
      if (legs[j].twin == static_cast<int>(first)) continue;  // no self-loop
      match_[first] = static_cast<int>(j);
      match_[j] = static_cast<int>(first);
      sum += enumerate(first + 1);
      match_[first] = -1;
      match_[j] = -1;
    }
    return sum;
  }

  double evaluate() const {
    const auto &legs = *legs_;
    std::vector<char> seen(legs.size(), 0);
    double value = 1.0;
    // Open chains: start from each linear leg.
    for (std::size_t s = 0; s < legs.size(); ++s) {
      if (seen[s] || !legs[s].linear) continue;
      seen[s] = 1;
      Eigen::VectorXd vec = nodes_[static_cast<std::size_t>(legs[s].node)].b;
      int cur = match_[s];
      while (!legs[static_cast<std::size_t>(cur)].linear) {
        seen[static_cast<std::size_t>(cur)] = 1;
        const auto &leg = legs[static_cast<std::size_t>(cur)];
        vec = nodes_[static_cast<std::size_t>(leg.node)].A * vec;
        cur = leg.twin;
        seen[static_cast<std::size_t>(cur)] = 1;
        cur = match_[static_cast<std::size_t>(cur)];
      }
      seen[static_cast<std::size_t>(cur)] = 1;
      value *= vec.dot(nodes_[static_cast<std::size_t>(legs[static_cast<std::size_t>(cur)].node)].b);
    }
    // Closed cycles of quadratic nodes.
    for (std::size_t s = 0; s < legs.size(); ++s) {
      if (seen[s]) continue;
      const auto &n0 = nodes_[static_cast<std::size_t>(legs[s].node)];
      Eigen::MatrixXd prod = n0.A;
      seen[s] = 1;
      std::size_t twin = static_cast<std::size_t>(legs[s].twin);
      seen[twin] = 1;
      int cur = match_[twin];
      while (static_cast<std::size_t>(cur) != s) {
        const auto &leg = legs[static_cast<std::size_t>(cur)];
        seen[static_cast<std::size_t>(cur)] = 1;
        prod = prod * nodes_[static_cast<std::size_t>(leg.node)].A;
        std::size_t tw = static_cast<std::size_t>(leg.twin);
        seen[tw] = 1;
        cur = match_[tw];
      }
      value *= prod.trace();
    }
    return value;
  }
};

}  // namespace

double gaussian_form_moment(std::span<const GaussianFormNode> nodes) {
  if (nodes.empty()) return 1.0;
  Eigen::Index N = 0;
  for (const auto &n : nodes) {
    Eigen::Index rows = n.A.size() > 0 ? n.A.rows() : n.b.size();
    if (n.A.size() > 0 && n.A.rows() != n.A.cols())
      throw contract_error("form moment: A must be square");
    if (N == 0) N = rows;
    if (n.A.size() > 0 && n.A.rows() != N)
      throw contract_error("form moment: mismatched dimensions");
    if (n.b.size() > 0 && n.b.size() != N)
      throw contract_error("form moment: mismatched dimensions");
  }
  if (N > 128)
    throw resource_error("form moment: basis dimension limited to 128");

  // Expand each node into linear part, quadratic part, or both.
  double total = 0.0;
  std::vector<Leg> legs;
  std::function<void(std::size_t)> expand = [&](std::size_t t) {
    if (t == nodes.size()) {
      if (legs.size() % 2 == 1) return;  // odd moment vanishes
      MatchingEvaluator ev(nodes);
      total += ev.run(legs);
      return;
    }
    const auto &n = nodes[t];
    bool has_b = n.b.size() > 0 && n.b.cwiseAbs().maxCoeff() > 0.0;
    bool has_a = n.A.size() > 0 && n.A.cwiseAbs().maxCoeff() > 0.0;
    if (!has_b && !has_a) return;  // identically zero factor
    if (has_b) {
      legs.push_back({static_cast<int>(t), true, -1});
      expand(t + 1);
      legs.pop_back();
    }
    if (has_a) {
      int base = static_cast<int>(legs.size());
      legs.push_back({static_cast<int>(t), false, base + 1});
      legs.push_back({static_cast<int>(t), false, base});
      expand(t + 1);
      legs.pop_back();
      legs.pop_back();
    }
  };
  expand(0);
  return total;
}

}  // namespace malstein
