#include "rolab/product.hpp"

#include <algorithm>

#include "rolab/linalg.hpp"

namespace rolab::product {

namespace {

Symbol shifted(Symbol s, i64 by) {
  if (s.base == BaseRegistry::kOne) return Symbol{BaseRegistry::kOne, 0};
  s.power += by;
  return s;
}

Rat binomial(i64 n, i64 k) {
  Rat r = 1;
  for (i64 i = 0; i < k; ++i) r *= Rat(n - i, i + 1);
  return r;
}

Rat rat_pow(const Rat& a, i64 p) {
  Rat r = 1;
  for (i64 i = 0; i < p; ++i) r *= a;
  return r;
}

}  // namespace

BaseRegistry::BaseRegistry() { entries_.push_back(Entry{"1", Rat(1), std::nullopt}); }

int BaseRegistry::add(const std::string& name, const Rat& integral) {
  entries_.push_back(Entry{name, integral, std::nullopt});
  return static_cast<int>(entries_.size() - 1);
}

int BaseRegistry::add_bound(const tower::Construction& c, const std::string& name,
                            tower::StepFn fn) {
  Rat integral = fn.integral(c);
  entries_.push_back(Entry{name, integral, std::move(fn)});
  return static_cast<int>(entries_.size() - 1);
}

const std::string& BaseRegistry::name(int id) const {
  if (id < 0 || id >= static_cast<int>(entries_.size())) throw UnboundBase("unknown base id");
  return entries_[static_cast<std::size_t>(id)].name;
}

const Rat& BaseRegistry::integral(int id) const {
  if (id < 0 || id >= static_cast<int>(entries_.size())) throw UnboundBase("unknown base id");
  return entries_[static_cast<std::size_t>(id)].integral;
}

const tower::StepFn* BaseRegistry::bound(int id) const {
  if (id < 0 || id >= static_cast<int>(entries_.size())) throw UnboundBase("unknown base id");
  const auto& fn = entries_[static_cast<std::size_t>(id)].fn;
  return fn ? &*fn : nullptr;
}

FormalTensor FormalTensor::term(Symbol left, Symbol right, const Rat& coeff) {
  FormalTensor t;
  if (coeff != 0) {
    if (left.base == BaseRegistry::kOne) left.power = 0;
    if (right.base == BaseRegistry::kOne) right.power = 0;
    t.terms_.push_back(TensorTerm{left, right, coeff});
  }
  return t;
}

Rat FormalTensor::coefficient(Symbol left, Symbol right) const {
  for (const auto& t : terms_)
    if (t.left == left && t.right == right) return t.coeff;
  return Rat(0);
}

Rat FormalTensor::coefficient_mass() const {
  Rat m = 0;
  for (const auto& t : terms_) m += abs(t.coeff);
  return m;
}

void FormalTensor::canonicalize() {
  std::sort(terms_.begin(), terms_.end(), [](const TensorTerm& a, const TensorTerm& b) {
    if (a.left != b.left) return a.left < b.left;
    return a.right < b.right;
  });
  std::vector<TensorTerm> merged;
  for (auto& t : terms_) {
    if (!merged.empty() && merged.back().left == t.left && merged.back().right == t.right) {
      merged.back().coeff += t.coeff;
    } else {
      merged.push_back(std::move(t));
    }
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const TensorTerm& t) { return t.coeff == 0; }),
               merged.end());
  terms_ = std::move(merged);
}

FormalTensor& FormalTensor::operator+=(const FormalTensor& other) {
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  canonicalize();
  return *this;
}

FormalTensor& FormalTensor::operator-=(const FormalTensor& other) {
  for (const auto& t : other.terms_) terms_.push_back(TensorTerm{t.left, t.right, -t.coeff});
  canonicalize();
  return *this;
}

FormalTensor& FormalTensor::operator*=(const Rat& s) {
  if (s == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& t : terms_) t.coeff *= s;
  return *this;
}

FormalTensor pair_power_tensor(int base, i64 m, i64 n) {
  return FormalTensor::term(Symbol{base, m}, Symbol{base, n});
}

FormalTensor symmetric_pair(int base, i64 i, i64 j) {
  FormalTensor t = pair_power_tensor(base, i, j);
  t += pair_power_tensor(base, j, i);
  return t;
}

FormalTensor apply_swap_shift(const FormalTensor& t) {
  FormalTensor out;
  for (const auto& term : t.terms())
    out += FormalTensor::term(term.right, shifted(term.left, 1), term.coeff);
  return out;
}

FormalTensor apply_swap_shift_inverse(const FormalTensor& t) {
  FormalTensor out;
  for (const auto& term : t.terms())
    out += FormalTensor::term(shifted(term.right, -1), term.left, term.coeff);
  return out;
}

FormalTensor apply_shift_both(const FormalTensor& t, i64 k) {
  FormalTensor out;
  for (const auto& term : t.terms())
    out += FormalTensor::term(shifted(term.left, k), shifted(term.right, k), term.coeff);
  return out;
}

OperatorPoly OperatorPoly::identity() { return OperatorPoly{{{0, Rat(1)}}, Rat(0)}; }

OperatorPoly OperatorPoly::shift(i64 p) { return OperatorPoly{{{p, Rat(1)}}, Rat(0)}; }

OperatorPoly OperatorPoly::theta_only() { return OperatorPoly{{}, Rat(1)}; }

OperatorPoly OperatorPoly::blend_power(const Rat& a, const Rat& b, i64 p) {
  if (p < 0) throw BadParameter("blend power must be >= 0");
  OperatorPoly poly;
  for (i64 i = 0; i <= p; ++i)
    poly.powers.emplace_back(i, binomial(p, i) * rat_pow(a, p - i) * rat_pow(b, i));
  return poly;
}

OperatorPoly OperatorPoly::damped_power(const Rat& a, i64 n) {
  if (n < 0) throw BadParameter("damped power must be >= 0");
  OperatorPoly poly;
  for (i64 i = 0; i <= n; ++i) {
    Rat coeff = binomial(n, i) * rat_pow(-a, i);
    poly.powers.emplace_back(i, coeff);
  }
  return poly;
}

OperatorPoly OperatorPoly::truncated_geometric(const Rat& a, i64 K) {
  if (a <= 0 || a >= 1) throw BadParameter("geometric ratio must lie in (0, 1)");
  if (K < 1) throw BadParameter("truncation order must be >= 1");
  OperatorPoly poly;
  Rat c = Rat(1) - a;
  for (i64 k = 0; k < K; ++k) {
    poly.powers.emplace_back(k, c);
    c *= a;
  }
  return poly;
}

namespace {

// One factor applied to one symbol: list of (symbol, coefficient).
std::vector<std::pair<Symbol, Rat>> apply_factor(const BaseRegistry& reg,
                                                 const OperatorPoly& poly, Symbol s) {
  std::vector<std::pair<Symbol, Rat>> out;
  for (const auto& [p, c] : poly.powers) out.emplace_back(shifted(s, p), c);
  if (poly.theta != 0) {
    // Projection onto constants: integral of U^p base = integral of base.
    Rat mass = reg.integral(s.base);
    if (mass != 0) out.emplace_back(Symbol{BaseRegistry::kOne, 0}, poly.theta * mass);
  }
  return out;
}

}  // namespace

FormalTensor apply_poly(const BaseRegistry& reg, const OperatorPoly& left,
                        const OperatorPoly& right, const FormalTensor& t) {
  FormalTensor out;
  for (const auto& term : t.terms()) {
    auto lefts = apply_factor(reg, left, term.left);
    auto rights = apply_factor(reg, right, term.right);
    for (const auto& [ls, lc] : lefts)
      for (const auto& [rs, rc] : rights)
        out += FormalTensor::term(ls, rs, term.coeff * lc * rc);
  }
  return out;
}

PowerBlendCheck verify_power_blend_expansion(const Rat& a, const Rat& b, i64 p) {
  if (p < 0) throw BadParameter("power must be >= 0");
  BaseRegistry reg;
  int f = reg.add("f", Rat(0));
  OperatorPoly blend = OperatorPoly::blend_power(a, b, p);
  FormalTensor expanded = apply_poly(reg, blend, blend, pair_power_tensor(f, 0, 0));

  PowerBlendCheck check;
  check.coefficient_total = 0;
  Rat corner = rat_pow(a, p) * rat_pow(b, p);
  check.corner_coefficient = expanded.coefficient(Symbol{f, p}, Symbol{f, 0});
  bool support_ok = true;
  for (const auto& term : expanded.terms()) {
    auto key = std::make_pair(term.left.power, term.right.power);
    check.table[key] = term.coeff;
    check.coefficient_total += term.coeff;
    i64 gap = key.first - key.second;
    if (gap < 0) gap = -gap;
    bool is_corner = (key == std::make_pair(p, i64(0)) || key == std::make_pair(i64(0), p));
    if (!is_corner && gap >= p && p > 0) support_ok = false;
  }
  check.support_ok = support_ok;
  check.corners_ok = check.corner_coefficient == corner &&
                     expanded.coefficient(Symbol{f, 0}, Symbol{f, p}) == corner;
  return check;
}

namespace {

// S_m = sum_{k=0}^{m-2} U^k B + mu * 1 (empty power sum for m <= 1).
std::vector<std::pair<Symbol, Rat>> cesaro_factor(int base, i64 m, const Rat& mu) {
  std::vector<std::pair<Symbol, Rat>> parts;
  for (i64 k = 0; k + 2 <= m; ++k) parts.emplace_back(Symbol{base, k}, Rat(1));
  if (mu != 0) parts.emplace_back(Symbol{BaseRegistry::kOne, 0}, mu);
  return parts;
}

FormalTensor cesaro_square_raw(int base, i64 m, const Rat& mu) {
  auto parts = cesaro_factor(base, m, mu);
  FormalTensor out;
  for (const auto& [ls, lc] : parts)
    for (const auto& [rs, rc] : parts) out += FormalTensor::term(ls, rs, lc * rc);
  Rat denom = (Rat(1) + mu) * (Rat(1) + mu);
  out *= Rat(1) / denom;
  return out;
}

}  // namespace

FormalTensor cesaro_square_tensor(const BaseRegistry& reg, int base, i64 m, const Rat& mu) {
  reg.integral(base);  // validates the id
  if (m < 2) throw DegenerateOrder("cesaro square needs order >= 2");
  return cesaro_square_raw(base, m, mu);
}

TelescopingCheck verify_cesaro_telescoping(const BaseRegistry& reg, int base, i64 q,
                                           const Rat& mu) {
  reg.integral(base);
  if (q < 0) throw BadParameter("power gap must be >= 0");

  FormalTensor lhs = symmetric_pair(base, q, 0);
  FormalTensor bracket = cesaro_square_raw(base, q + 2, mu);
  bracket -= cesaro_square_raw(base, q + 1, mu);
  bracket -= apply_shift_both(cesaro_square_raw(base, q + 1, mu), 1);
  bracket += apply_shift_both(cesaro_square_raw(base, q, mu), 1);

  TelescopingCheck check;
  check.expected_constant = (Rat(1) + mu) * (Rat(1) + mu);
  if (bracket.zero()) {
    check.constant = 0;
    check.holds = lhs.zero();
    return check;
  }
  // Scalar relating the sides, if any: ratio on the first bracket term.
  const TensorTerm& first = bracket.terms().front();
  Rat ratio = lhs.coefficient(first.left, first.right) / first.coeff;
  FormalTensor scaled = bracket;
  scaled *= ratio;
  bool proportional = scaled == lhs;
  check.constant = proportional ? ratio : Rat(0);
  check.holds = proportional && ratio == check.expected_constant;
  return check;
}

FormalTensor damped_pair_tensor(int base, const Rat& a, i64 n) {
  if (a <= 0 || a >= 1) throw BadParameter("damping ratio must lie in (0, 1)");
  if (n < 0) throw BadParameter("order must be >= 0");
  BaseRegistry dummy;  // no projection inside, registry never consulted
  OperatorPoly d = OperatorPoly::damped_power(a, n);
  return apply_poly(dummy, d, d, pair_power_tensor(base, 0, 0));
}

namespace {

/// Correlations between bound bases, memoized; engines over the same base
/// stage share one resolver.
class PairingContext {
 public:
  PairingContext(const tower::Construction& c, const BaseRegistry& reg, const Rat& tol)
      : c_(c), reg_(reg), tol_(tol) {
    one_.stage = 1;
    one_.coeffs.assign(static_cast<std::size_t>(c.stage(1).height), Rat(0));
    one_.gamma = 1;
    one_.rho = 0;
    one_.construction = c.fingerprint();
  }

  tower::CorrelationResult pair(Symbol a, Symbol b) {
    // <U^pa f_a, U^pb f_b> = <U^{pa-pb} f_a, f_b>
    i64 lag = a.power - b.power;
    auto key = std::make_tuple(a.base, b.base, lag);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    tower::CorrelationEngine& engine = engine_for(a.base, b.base);
    tower::CorrelationResult r = engine.correlate(lag, tol_);
    memo_.emplace(key, r);
    return r;
  }

 private:
  const tower::StepFn& fn(int base) {
    if (base == BaseRegistry::kOne) return one_;
    const tower::StepFn* f = reg_.bound(base);
    if (!f) throw UnboundBase("base '" + reg_.name(base) + "' has no bound step function");
    return *f;
  }

  tower::CorrelationEngine& engine_for(int a, int b) {
    auto key = std::make_pair(a, b);
    auto it = engines_.find(key);
    if (it != engines_.end()) return it->second;
    const tower::StepFn& fa = fn(a);
    const tower::StepFn& fb = fn(b);
    i64 base_stage = std::max(fa.stage, fb.stage);
    auto rit = resolvers_.find(base_stage);
    std::shared_ptr<tower::Resolver> resolver;
    if (rit == resolvers_.end()) {
      resolver = std::make_shared<tower::Resolver>(c_, base_stage);
      resolvers_.emplace(base_stage, resolver);
    } else {
      resolver = rit->second;
    }
    auto [eit, _] = engines_.emplace(
        std::piecewise_construct, std::forward_as_tuple(key),
        std::forward_as_tuple(c_, fa, fb, resolver));
    return eit->second;
  }

  const tower::Construction& c_;
  const BaseRegistry& reg_;
  Rat tol_;
  tower::StepFn one_;
  std::map<std::pair<int, int>, tower::CorrelationEngine> engines_;
  std::map<i64, std::shared_ptr<tower::Resolver>> resolvers_;
  std::map<std::tuple<int, int, i64>, tower::CorrelationResult> memo_;
};

tower::CorrelationResult inner_with(PairingContext& ctx, const FormalTensor& t1,
                                    const FormalTensor& t2) {
  Rat value = 0;
  Rat error = 0;
  for (const auto& s : t1.terms()) {
    for (const auto& t : t2.terms()) {
      tower::CorrelationResult l = ctx.pair(s.left, t.left);
      tower::CorrelationResult r = ctx.pair(s.right, t.right);
      Rat w = s.coeff * t.coeff;
      value += w * l.value * r.value;
      error += abs(w) * (abs(l.value) * r.error_bound + abs(r.value) * l.error_bound +
                         l.error_bound * r.error_bound);
    }
  }
  return tower::CorrelationResult{value, error, 0};
}

}  // namespace

tower::CorrelationResult tensor_inner(const tower::Construction& c, const BaseRegistry& reg,
                                      const FormalTensor& t1, const FormalTensor& t2,
                                      const Rat& tol) {
  Rat per_term_tol = tol;
  if (tol > 0) {
    Rat weight = t1.coefficient_mass() * t2.coefficient_mass();
    if (weight > 0) per_term_tol = tol / (weight * 4);
  }
  PairingContext ctx(c, reg, tol < 0 ? tol : per_term_tol);
  tower::CorrelationResult r = inner_with(ctx, t1, t2);
  if (tol >= 0 && r.error_bound > tol)
    throw StageBudgetExceeded("tensor pairing error " + rational_string(r.error_bound) +
                              " exceeds tolerance " + rational_string(tol));
  return r;
}

CyclicResult cyclic_residual(const tower::Construction& c, const BaseRegistry& reg,
                             const FormalTensor& generator, PairOp op, i64 span,
                             const FormalTensor& target, const Rat& tol, const Real& reg_rel) {
  if (span < 0) throw BadParameter("span must be >= 0");

  auto apply_op = [&](const FormalTensor& t, i64 times) {
    if (op == PairOp::shift_both) return apply_shift_both(t, times);
    FormalTensor out = t;
    for (i64 i = 0; i < times; ++i) out = apply_swap_shift(out);
    for (i64 i = 0; i > times; --i) out = apply_swap_shift_inverse(out);
    return out;
  };

  Rat per_tol = tol;
  PairingContext ctx(c, reg, per_tol);

  const std::size_t dim = static_cast<std::size_t>(2 * span + 1);
  Rat budget = 0;

  // Both operators are unitary, so the Gram is Toeplitz: one row suffices.
  std::vector<Rat> row(static_cast<std::size_t>(4 * span + 1));
  for (i64 d = -2 * span; d <= 2 * span; ++d) {
    tower::CorrelationResult r = inner_with(ctx, apply_op(generator, d), generator);
    row[static_cast<std::size_t>(d + 2 * span)] = r.value;
    budget += r.error_bound;
  }
  std::vector<Rat> cross(dim);
  for (i64 i = -span; i <= span; ++i) {
    tower::CorrelationResult r = inner_with(ctx, target, apply_op(generator, i));
    cross[static_cast<std::size_t>(i + span)] = r.value;
    budget += r.error_bound;
  }
  tower::CorrelationResult tn = inner_with(ctx, target, target);
  budget += tn.error_bound;

  linalg::SymMatrix gram(dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      gram.at(i, j) = to_real(
          row[static_cast<std::size_t>(static_cast<i64>(i) - static_cast<i64>(j) + 2 * span)]);

  linalg::EigenDecomposition eig = linalg::jacobi_eigen(gram);
  Real lambda_max = eig.values.empty() ? Real(0) : eig.values.back();
  Real cutoff = lambda_max * reg_rel;

  std::vector<Real> b(dim);
  for (std::size_t i = 0; i < dim; ++i) b[i] = to_real(cross[i]);

  Real projected = 0;
  std::size_t kept = 0;
  Real lambda_min_kept = lambda_max;
  for (std::size_t e = 0; e < dim; ++e) {
    Real lambda = eig.values[e];
    if (lambda <= 0 || lambda < cutoff) continue;
    Real dot = 0;
    for (std::size_t i = 0; i < dim; ++i) dot += eig.vectors[e][i] * b[i];
    projected += dot * dot / lambda;
    ++kept;
    lambda_min_kept = std::min(lambda_min_kept, lambda);
  }

  CyclicResult out;
  out.target_norm = sqrt(std::max(Real(0), to_real(tn.value)));
  Real residual_sq = to_real(tn.value) - projected;
  if (residual_sq < 0) residual_sq = 0;
  out.residual = sqrt(residual_sq);
  if (out.residual > out.target_norm) out.residual = out.target_norm;
  out.kept = kept;
  out.discarded = dim - kept;
  out.condition = (kept > 0 && lambda_min_kept > 0) ? lambda_max / lambda_min_kept : Real(0);
  out.ill_conditioned = out.discarded * 2 > dim;
  out.error_budget = budget;
  return out;
}

}  // namespace rolab::product
