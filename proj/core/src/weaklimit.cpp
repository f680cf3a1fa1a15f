#include "rolab/weaklimit.hpp"

#include <algorithm>
#include <map>

namespace rolab::weaklimit {

using boost::multiprecision::abs;
using boost::multiprecision::sqrt;

OperatorExpr OperatorExpr::identity() {
  OperatorExpr e;
  e.terms.push_back(ExprTerm{0, Rat(1)});
  e.label = "identity";
  return e;
}

OperatorExpr OperatorExpr::power(i64 k) {
  OperatorExpr e;
  e.terms.push_back(ExprTerm{k, Rat(1)});
  e.label = "power(" + std::to_string(k) + ")";
  return e;
}

OperatorExpr OperatorExpr::theta() {
  OperatorExpr e;
  e.theta_coeff = 1;
  e.label = "theta";
  return e;
}

Rat OperatorExpr::coefficient_mass() const {
  Rat m = 0;
  for (const auto& t : terms) m += abs(t.coeff);
  return m;
}

OperatorExpr& OperatorExpr::add_term(i64 power, const Rat& coeff) {
  for (auto& t : terms) {
    if (t.power == power) {
      t.coeff += coeff;
      return *this;
    }
  }
  terms.push_back(ExprTerm{power, coeff});
  std::sort(terms.begin(), terms.end(),
            [](const ExprTerm& a, const ExprTerm& b) { return a.power < b.power; });
  return *this;
}

OperatorExpr cesaro_expr(i64 q) {
  if (q < 2)
    throw DegenerateOrder("averaging order must be >= 2 (order 1 is the plain projection)");
  OperatorExpr e;
  Rat w(1, q);
  for (i64 p = 0; p <= q - 2; ++p) e.terms.push_back(ExprTerm{p, w});
  e.theta_coeff = w;
  e.label = "cesaro(" + std::to_string(q) + ")";
  return e;
}

OperatorExpr geometric_expr(const Rat& a, i64 K) {
  if (a <= 0 || a >= 1) throw BadParameter("geometric ratio must lie in (0, 1)");
  if (K < 1) throw BadParameter("truncation order must be >= 1");
  OperatorExpr e;
  Rat coeff = Rat(1) - a;
  Rat tail = 1;
  for (i64 k = 0; k < K; ++k) {
    e.terms.push_back(ExprTerm{k, coeff});
    coeff *= a;
    tail *= a;
  }
  e.tail_bound = tail;
  e.label = "geometric(" + rational_string(a) + "," + std::to_string(K) + ")";
  return e;
}

OperatorExpr expr_scale(OperatorExpr e, const Rat& s) {
  for (auto& t : e.terms) t.coeff *= s;
  e.theta_coeff *= s;
  e.tail_bound *= abs(s);
  e.label = "(" + rational_string(s) + ")*" + e.label;
  return e;
}

OperatorExpr expr_add(const OperatorExpr& a, const OperatorExpr& b) {
  OperatorExpr out = a;
  for (const auto& t : b.terms) out.add_term(t.power, t.coeff);
  out.theta_coeff += b.theta_coeff;
  out.tail_bound += b.tail_bound;
  out.label = a.label + "+" + b.label;
  return out;
}

namespace {

tower::CorrelationResult expr_element_with_engine(const tower::Construction& c,
                                                  tower::CorrelationEngine& engine,
                                                  const OperatorExpr& e, const tower::StepFn& f,
                                                  const tower::StepFn& g, const Rat& tol) {
  Rat sup_product = 0;
  if (e.tail_bound != 0 || e.theta_coeff != 0)
    sup_product = f.sup_norm(c) * g.sup_norm(c);

  Rat per_term_tol = tol;
  if (tol >= 0) {
    Rat tail_part = e.tail_bound * sup_product;
    if (tail_part > tol)
      throw StageBudgetExceeded("truncation tail " + rational_string(tail_part) +
                                " alone exceeds tolerance " + rational_string(tol));
    Rat mass = e.coefficient_mass();
    per_term_tol = mass > 0 ? (tol - tail_part) / mass : Rat(0);
  }

  Rat value = 0;
  Rat error = e.tail_bound * sup_product;
  for (const auto& t : e.terms) {
    tower::CorrelationResult r = engine.correlate(t.power, per_term_tol);
    value += t.coeff * r.value;
    error += abs(t.coeff) * r.error_bound;
  }
  if (e.theta_coeff != 0) value += e.theta_coeff * f.integral(c) * g.integral(c);
  return tower::CorrelationResult{value, error, engine.resolver()->stage()};
}

std::shared_ptr<tower::Resolver> resolver_for(
    const tower::Construction& c, std::map<i64, std::shared_ptr<tower::Resolver>>& pool,
    i64 base_stage) {
  auto it = pool.find(base_stage);
  if (it != pool.end()) return it->second;
  auto r = std::make_shared<tower::Resolver>(c, base_stage);
  pool.emplace(base_stage, r);
  return r;
}

}  // namespace

tower::CorrelationResult expr_matrix_element(const tower::Construction& c, const OperatorExpr& e,
                                             const tower::StepFn& f, const tower::StepFn& g,
                                             const Rat& tol) {
  tower::CorrelationEngine engine(c, f, g);
  return expr_element_with_engine(c, engine, e, f, g, tol);
}

TestFamily level_family(const tower::Construction& c, i64 stage) {
  const tower::Stage& s = c.stage(stage);
  TestFamily fam;
  fam.observation_stage = stage;
  std::vector<tower::StepFn> members;
  std::vector<Real> norms;
  for (i64 i = 0; i < s.height; ++i) {
    tower::StepFn f = zero_mean(c, indicator(c, stage, {i}));
    Rat n2 = tower::norm_squared(c, f);
    if (n2 == 0) continue;
    members.push_back(std::move(f));
    norms.push_back(sqrt(to_real(n2)));
  }
  for (std::size_t i = 0; i < members.size(); ++i)
    for (std::size_t j = 0; j < members.size(); ++j)
      fam.pairs.push_back(TestPair{members[i], members[j], norms[i] * norms[j]});
  if (fam.pairs.empty()) throw EmptyFamily("observation stage yields no usable test vectors");
  return fam;
}

WeakDistance weak_distance(const tower::Construction& c, i64 k, const OperatorExpr& e,
                           const TestFamily& fam, const Rat& tol) {
  if (fam.pairs.empty()) throw EmptyFamily("empty test family");
  std::map<i64, std::shared_ptr<tower::Resolver>> pool;
  Real distance = 0;
  Real error = 0;
  for (const auto& pair : fam.pairs) {
    i64 base = std::max(pair.f.stage, pair.g.stage);
    tower::CorrelationEngine engine(c, pair.f, pair.g, resolver_for(c, pool, base));
    tower::CorrelationResult at_k = engine.correlate(k, tol);
    tower::CorrelationResult at_e = expr_element_with_engine(c, engine, e, pair.f, pair.g, tol);
    Rat diff = at_k.value - at_e.value;
    Rat err = at_k.error_bound + at_e.error_bound;
    distance = std::max(distance, to_real(abs(diff)) / pair.norm_product);
    error = std::max(error, to_real(err) / pair.norm_product);
  }
  return WeakDistance{distance, error};
}

ScanReport scan_weak_limits(const tower::Construction& c, const std::vector<i64>& powers,
                            const std::vector<OperatorExpr>& candidates, const TestFamily& fam,
                            const Rat& tol) {
  if (powers.empty()) throw BadParameter("empty power list");
  if (candidates.empty()) throw BadParameter("empty candidate list");
  if (fam.pairs.empty()) throw EmptyFamily("empty test family");

  ScanReport report;
  for (const auto& e : candidates) report.candidate_labels.push_back(e.label);

  std::map<i64, std::shared_ptr<tower::Resolver>> pool;
  std::vector<tower::CorrelationEngine> engines;
  engines.reserve(fam.pairs.size());
  for (const auto& pair : fam.pairs) {
    i64 base = std::max(pair.f.stage, pair.g.stage);
    engines.emplace_back(c, pair.f, pair.g, resolver_for(c, pool, base));
  }

  for (i64 power : powers) {
    std::vector<tower::CorrelationResult> at_k;
    at_k.reserve(fam.pairs.size());
    for (auto& engine : engines) at_k.push_back(engine.correlate(power, tol));
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
      Real distance = 0, error = 0;
      for (std::size_t pi = 0; pi < fam.pairs.size(); ++pi) {
        const auto& pair = fam.pairs[pi];
        tower::CorrelationResult at_e =
            expr_element_with_engine(c, engines[pi], candidates[ci], pair.f, pair.g, tol);
        distance = std::max(distance,
                            to_real(abs(at_k[pi].value - at_e.value)) / pair.norm_product);
        error = std::max(error, to_real(at_k[pi].error_bound + at_e.error_bound) /
                                    pair.norm_product);
      }
      report.cells.push_back(ScanCell{power, ci, distance, error});
    }
  }

  std::stable_sort(report.cells.begin(), report.cells.end(),
                   [](const ScanCell& a, const ScanCell& b) { return a.distance < b.distance; });
  return report;
}

TwoTermFit fit_two_term(const tower::Construction& c, i64 k, const TestFamily& fam,
                        const Rat& tol) {
  if (fam.pairs.empty()) throw EmptyFamily("empty test family");
  std::map<i64, std::shared_ptr<tower::Resolver>> pool;

  Real s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0, syy = 0;
  std::vector<std::array<Real, 3>> rows;
  rows.reserve(fam.pairs.size());
  for (const auto& pair : fam.pairs) {
    i64 base = std::max(pair.f.stage, pair.g.stage);
    tower::CorrelationEngine engine(c, pair.f, pair.g, resolver_for(c, pool, base));
    Real x1 = to_real(engine.correlate(0, tol).value) / pair.norm_product;
    Real x2 = to_real(engine.correlate(1, tol).value) / pair.norm_product;
    Real y = to_real(engine.correlate(k, tol).value) / pair.norm_product;
    s11 += x1 * x1;
    s12 += x1 * x2;
    s22 += x2 * x2;
    b1 += x1 * y;
    b2 += x2 * y;
    syy += y * y;
    rows.push_back({x1, x2, y});
  }
  Real det = s11 * s22 - s12 * s12;
  Real scale = std::max(s11 * s22, Real(1));
  if (abs(det) < scale * Real("1e-40"))
    throw DegenerateFit("regressors <f,g> and <Uf,g> are collinear over this family");

  TwoTermFit fit;
  fit.a = (s22 * b1 - s12 * b2) / det;
  fit.b = (s11 * b2 - s12 * b1) / det;
  Real ss = 0;
  for (const auto& row : rows) {
    Real r = row[2] - fit.a * row[0] - fit.b * row[1];
    ss += r * r;
  }
  fit.residual = sqrt(ss / Real(static_cast<unsigned>(rows.size())));
  return fit;
}

}  // namespace rolab::weaklimit
