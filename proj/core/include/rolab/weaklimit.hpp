#pragma once

#include <string>
#include <vector>

#include "rolab/numeric.hpp"
#include "rolab/tower.hpp"

namespace rolab::weaklimit {

struct ExprTerm {
  i64 power;
  Rat coeff;
};

/// Finite combination sum_j coeff_j U^{p_j} + theta_coeff * (projection onto
/// constants), plus the coefficient mass dropped by any truncation.
struct OperatorExpr {
  std::vector<ExprTerm> terms;
  Rat theta_coeff = 0;
  Rat tail_bound = 0;
  std::string label = "custom";

  static OperatorExpr identity();
  static OperatorExpr power(i64 k);
  static OperatorExpr theta();

  Rat coefficient_mass() const;
  OperatorExpr& add_term(i64 power, const Rat& coeff);
};

/// Averaging candidate (1/q)(I + U + ... + U^{q-2} + projection).
OperatorExpr cesaro_expr(i64 q);

/// Truncated resolvent candidate (1-a)(I + aU + ... + a^{K-1}U^{K-1});
/// tail_bound = a^K.
OperatorExpr geometric_expr(const Rat& a, i64 K);

OperatorExpr expr_scale(OperatorExpr e, const Rat& s);
OperatorExpr expr_add(const OperatorExpr& a, const OperatorExpr& b);

/// <e f, g> evaluated through correlations; the truncation tail enters the
/// error bound scaled by the sup norms.
tower::CorrelationResult expr_matrix_element(const tower::Construction& c,
                                             const OperatorExpr& e, const tower::StepFn& f,
                                             const tower::StepFn& g, const Rat& tol);

struct TestPair {
  tower::StepFn f;
  tower::StepFn g;
  Real norm_product;  // distances are reported per unit-normalized pair
};

struct TestFamily {
  i64 observation_stage = 0;
  std::vector<TestPair> pairs;
};

/// All ordered pairs of zero-meaned level indicators of one stage, with exact
/// norms attached (normalization is applied when distances are assembled, so
/// the arithmetic underneath stays rational).
TestFamily level_family(const tower::Construction& c, i64 stage);

struct WeakDistance {
  Real distance;
  Real error;
};

/// max over the family of |<U^k f, g> - <e f, g>| on normalized pairs.
WeakDistance weak_distance(const tower::Construction& c, i64 k, const OperatorExpr& e,
                           const TestFamily& fam, const Rat& tol);

struct ScanCell {
  i64 power;
  std::size_t candidate;
  Real distance;
  Real error;
};

struct ScanReport {
  std::vector<std::string> candidate_labels;
  std::vector<ScanCell> cells;  // sorted by distance, ties by (power, candidate) order
};

ScanReport scan_weak_limits(const tower::Construction& c, const std::vector<i64>& powers,
                            const std::vector<OperatorExpr>& candidates, const TestFamily& fam,
                            const Rat& tol);

struct TwoTermFit {
  Real a;          // weight in front of <f, g>
  Real b;          // weight in front of <U f, g>
  Real residual;   // rms misfit over the family
};

/// Least squares of <U^k f, g> against the regressors <f, g> and <U f, g>
/// over the family. The fitted pair (a, b) is unconstrained; a limit shaped
/// like a I + (1-a) U shows up as b close to 1-a.
TwoTermFit fit_two_term(const tower::Construction& c, i64 k, const TestFamily& fam,
                        const Rat& tol);

}  // namespace rolab::weaklimit
