#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rolab/numeric.hpp"
#include "rolab/tower.hpp"

namespace rolab::product {

/// Registered base functions for the formal tensor algebra. Id 0 is always
/// the constant one. Every base carries its exact integral (consumed when a
/// projection onto constants hits the symbol); it may additionally be bound
/// to a step function for numeric pairings.
class BaseRegistry {
 public:
  static constexpr int kOne = 0;

  BaseRegistry();

  int add(const std::string& name, const Rat& integral);
  int add_bound(const tower::Construction& c, const std::string& name, tower::StepFn fn);

  const std::string& name(int id) const;
  const Rat& integral(int id) const;
  const tower::StepFn* bound(int id) const;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::string name;
    Rat integral;
    std::optional<tower::StepFn> fn;
  };
  std::vector<Entry> entries_;
};

/// U^power applied to a registered base. The constant one absorbs shifts.
struct Symbol {
  int base = BaseRegistry::kOne;
  i64 power = 0;

  friend auto operator<=>(const Symbol&, const Symbol&) = default;
};

struct TensorTerm {
  Symbol left;
  Symbol right;
  Rat coeff;

  friend bool operator==(const TensorTerm& a, const TensorTerm& b) {
    return a.left == b.left && a.right == b.right && a.coeff == b.coeff;
  }
};

/// Finite linear combination of (U^i x) (x) (U^j y) symbols, kept in canonical
/// form: sorted, merged, zero coefficients dropped. Equality is decidable and
/// exact.
class FormalTensor {
 public:
  FormalTensor() = default;
  static FormalTensor term(Symbol left, Symbol right, const Rat& coeff = Rat(1));

  const std::vector<TensorTerm>& terms() const { return terms_; }
  bool zero() const { return terms_.empty(); }
  Rat coefficient(Symbol left, Symbol right) const;
  /// l1 norm of the coefficient vector.
  Rat coefficient_mass() const;

  FormalTensor& operator+=(const FormalTensor& other);
  FormalTensor& operator-=(const FormalTensor& other);
  FormalTensor& operator*=(const Rat& s);
  friend FormalTensor operator+(FormalTensor a, const FormalTensor& b) { return a += b; }
  friend FormalTensor operator-(FormalTensor a, const FormalTensor& b) { return a -= b; }
  friend FormalTensor operator*(const Rat& s, FormalTensor t) { return t *= s; }
  bool operator==(const FormalTensor& other) const { return terms_ == other.terms_; }

 private:
  void canonicalize();
  std::vector<TensorTerm> terms_;
};

/// (U^m base) (x) (U^n base).
FormalTensor pair_power_tensor(int base, i64 m, i64 n);

/// Symmetric pair: (U^i B)(x)(U^j B) + (U^j B)(x)(U^i B).
FormalTensor symmetric_pair(int base, i64 i, i64 j);

/// The swap-advance map (a (x) b) -> (b (x) Ua); applying it twice shifts both
/// factors by one.
FormalTensor apply_swap_shift(const FormalTensor& t);
FormalTensor apply_swap_shift_inverse(const FormalTensor& t);

/// (U (x) U)^k, any integer k.
FormalTensor apply_shift_both(const FormalTensor& t, i64 k);

/// One tensor-factor operator: sum of coeff * U^p terms plus theta * (projection
/// onto constants). The projection consumes the registered integral.
struct OperatorPoly {
  std::vector<std::pair<i64, Rat>> powers;
  Rat theta = 0;

  static OperatorPoly identity();
  static OperatorPoly shift(i64 p);
  static OperatorPoly theta_only();
  /// (a I + b U)^p by binomial expansion.
  static OperatorPoly blend_power(const Rat& a, const Rat& b, i64 p);
  /// (I - a U)^n.
  static OperatorPoly damped_power(const Rat& a, i64 n);
  /// (1-a) * sum_{k<K} a^k U^k; the dropped coefficient mass is a^K.
  static OperatorPoly truncated_geometric(const Rat& a, i64 K);
};

FormalTensor apply_poly(const BaseRegistry& reg, const OperatorPoly& left,
                        const OperatorPoly& right, const FormalTensor& t);

struct PowerBlendCheck {
  bool corners_ok = false;
  bool support_ok = false;
  Rat corner_coefficient;
  Rat coefficient_total;
  std::map<std::pair<i64, i64>, Rat> table;
  bool ok() const { return corners_ok && support_ok; }
};

/// Expands ((aI+bU)^p (x) (aI+bU)^p) applied to f(x)f and checks that the two
/// extreme terms (p,0) and (0,p) carry coefficient a^p b^p while every other
/// term has power gap < p.
PowerBlendCheck verify_power_blend_expansion(const Rat& a, const Rat& b, i64 p);

/// Cesaro-square building block: with S_m = sum_{k<=m-2} U^k B + mu * 1, returns
/// S_m (x) S_m / (1+mu)^2. Requires m >= 2.
FormalTensor cesaro_square_tensor(const BaseRegistry& reg, int base, i64 m, const Rat& mu);

struct TelescopingCheck {
  bool holds = false;
  Rat constant;         // scalar that actually relates the two sides, 0 if none
  Rat expected_constant;  // (1+mu)^2
};

/// Checks that the symmetric pair (U^q B, B) is recovered exactly by the
/// telescoped difference of Cesaro squares, and reports the scalar found.
TelescopingCheck verify_cesaro_telescoping(const BaseRegistry& reg, int base, i64 q,
                                           const Rat& mu);

/// ((I-aU)^n (x) (I-aU)^n) applied to f(x)f.
FormalTensor damped_pair_tensor(int base, const Rat& a, i64 n);

/// Numeric pairing <t1, t2> through one-dimensional correlations of the bound
/// base functions. Exact where the correlations are exact; error bounds
/// aggregate through the bilinear expansion.
tower::CorrelationResult tensor_inner(const tower::Construction& c, const BaseRegistry& reg,
                                      const FormalTensor& t1, const FormalTensor& t2,
                                      const Rat& tol);

enum class PairOp { shift_both, swap_shift };

struct CyclicResult {
  Real residual;
  Real target_norm;
  std::size_t kept = 0;
  std::size_t discarded = 0;
  Real condition;
  bool ill_conditioned = false;
  Rat error_budget;
};

/// Distance from `target` to span{ op^i generator : |i| <= span }, computed
/// from the Gram matrix with a relative eigenvalue cutoff `reg_rel`. The Gram
/// is assembled exactly when every pairing is exact, then solved at 100-bit
/// precision.
CyclicResult cyclic_residual(const tower::Construction& c, const BaseRegistry& reg,
                             const FormalTensor& generator, PairOp op, i64 span,
                             const FormalTensor& target, const Rat& tol,
                             const Real& reg_rel = Real("1e-24"));

}  // namespace rolab::product
