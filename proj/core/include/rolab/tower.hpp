#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rolab/errors.hpp"
#include "rolab/numeric.hpp"

namespace rolab::tower {

/// One cutting step: the tower is sliced into `cuts` equal-width subcolumns
/// and `spacers[j]` reservoir levels are stacked on top of subcolumn j before
/// the subcolumns are stacked left to right.
struct StageSpec {
  i64 cuts = 0;
  std::vector<i64> spacers;
};

struct RankOneSpec {
  i64 initial_height = 1;
  Rat initial_width{1, 4};
  Rat initial_residual{3, 4};
  std::vector<StageSpec> stages;

  /// Throws InvalidSpec unless h1*w1 + y1 == 1, every stage has cuts >= 2 and
  /// a matching nonnegative spacer vector.
  void validate() const;

  /// Spacer profile (0, 1, ..., r-1) per stage, driven by the cut sequence.
  /// Width defaults to 1/(4*h1) with the rest of the mass in the reservoir.
  static RankOneSpec staircase(i64 h1, const std::vector<i64>& cut_sequence,
                               std::optional<Rat> w1 = std::nullopt,
                               std::optional<Rat> y1 = std::nullopt);

  /// Three cuts per stage with a single spacer over the middle subcolumn.
  static RankOneSpec chacon(i64 h1, std::size_t stage_count,
                            std::optional<Rat> w1 = std::nullopt,
                            std::optional<Rat> y1 = std::nullopt);

  /// Explicit spacer vectors.
  static RankOneSpec custom(i64 h1, std::vector<StageSpec> stages,
                            std::optional<Rat> w1 = std::nullopt,
                            std::optional<Rat> y1 = std::nullopt);
};

/// Snapshot of the tower at one stage. Stage numbers are 1-based: stage 1 is
/// the initial tower. `offsets[j]` is the position of the j-th subcolumn copy
/// of this tower inside stage number+1; empty for the last built stage.
struct Stage {
  i64 number = 0;
  i64 height = 0;
  Rat width;
  Rat residual;
  i64 cuts = 0;
  std::vector<i64> spacers;
  std::vector<i64> offsets;
};

class Construction {
 public:
  const RankOneSpec& spec() const { return spec_; }
  std::size_t stage_count() const { return stages_.size(); }
  const Stage& stage(i64 number) const;
  const std::vector<Stage>& stages() const { return stages_; }
  i64 deepest_stage() const { return static_cast<i64>(stages_.size()); }

  /// Stage-(n+1) positions of the copies of level i of stage n.
  std::vector<i64> children(i64 stage_number, i64 level) const;

  /// Positions (relative to the base level) of all stage-`to` descendants of
  /// one stage-`from` level. Sorted; the descendants of level i are these
  /// offsets shifted by i.
  std::vector<i64> descendant_offsets(i64 from_stage, i64 to_stage) const;

  /// Content fingerprint; step functions carry it so mismatched pairings are
  /// rejected.
  std::uint64_t fingerprint() const { return fingerprint_; }

  friend Construction build_construction(const RankOneSpec& spec, i64 stage_budget);

 private:
  RankOneSpec spec_;
  std::vector<Stage> stages_;
  std::uint64_t fingerprint_ = 0;
};

/// Builds stages 1..stage_budget. Throws InvalidSpec for malformed input or a
/// budget the declared stages cannot cover, ReservoirExhausted(n) if spacer
/// mass at stage n+1 would exceed the reservoir.
Construction build_construction(const RankOneSpec& spec, i64 stage_budget);

/// Stage-M levels refining a single stage-n level, with their widths.
std::vector<std::pair<i64, Rat>> refine_level(const Construction& c, i64 stage_number,
                                              i64 level, i64 target_stage);

/// Function constant on the levels of one stage: value on level i is
/// gamma + coeffs[i], value on the residual is gamma + rho.
struct StepFn {
  i64 stage = 1;
  std::vector<Rat> coeffs;
  Rat gamma = 0;
  Rat rho = 0;
  std::uint64_t construction = 0;

  Rat integral(const Construction& c) const;
  Rat sup_norm(const Construction& c) const;
};

StepFn indicator(const Construction& c, i64 stage_number, const std::vector<i64>& levels);

/// Same function expressed on the levels of a deeper stage. Preserves the
/// integral and all inner products exactly.
StepFn lift(const Construction& c, const StepFn& f, i64 target_stage);

StepFn zero_mean(const Construction& c, StepFn f);
StepFn scale(StepFn f, const Rat& s);
/// Pointwise sum; operands are lifted to the deeper of the two stages.
StepFn add(const Construction& c, const StepFn& f, const StepFn& g);

struct CorrelationResult {
  Rat value;
  Rat error_bound;
  i64 resolved_stage = 0;

  bool exact() const { return error_bound == 0; }
};

struct SeqEntry {
  Rat value;
  Rat error;
};

/// Correlations <U^k f, g> over a contiguous k-range.
struct CorrelationSequence {
  i64 k_min = 0;
  i64 k_max = -1;
  std::vector<SeqEntry> entries;
  std::string base;
  bool autocorrelation = false;

  i64 max_lag() const { return k_max; }
  bool contains(i64 k) const { return k >= k_min && k <= k_max; }
  const SeqEntry& at(i64 k) const;
  SeqEntry& at(i64 k);
};

/// Shared refinement state: the sorted descendant-offset table of one base
/// stage into deeper stages, plus memoized pair-difference counts. Engines
/// over the same base stage share one resolver so the (often large) offset
/// table is built once.
class Resolver {
 public:
  Resolver(const Construction& c, i64 base_stage);

  const Construction& construction() const { return *c_; }
  i64 base_stage() const { return base_; }
  i64 stage() const { return stage_; }
  bool can_deepen() const;
  void deepen();
  void ensure_stage(i64 stage_number);

  const std::vector<i64>& offsets() const { return desc_; }

  /// #{(u,v) in D x D : v - u = d} for the current stage's offset table D.
  i64 pair_count(i64 d);

  /// pair_count for every d in [d_lo, d_hi], one sweep.
  std::vector<i64> pair_count_window(i64 d_lo, i64 d_hi) const;

  /// #{u in D : u >= bound}.
  i64 count_at_or_above(i64 bound) const;
  /// #{u in D : u < bound}.
  i64 count_below(i64 bound) const;

 private:
  const Construction* c_;
  i64 base_;
  i64 stage_;
  std::vector<i64> desc_;
  std::map<i64, i64> count_cache_;
};

/// Evaluates <U^k f, g> with rigorous error bounds. The constant component is
/// U-invariant and handled exactly; the level component is matched by integer
/// window sweeps over the shared offset table; whatever a shift pushes past
/// the top of the deepest resolved tower is bounded by sup norms.
class CorrelationEngine {
 public:
  CorrelationEngine(const Construction& c, const StepFn& f, const StepFn& g,
                    std::shared_ptr<Resolver> resolver = nullptr);

  /// tol >= 0: resolve at the shallowest stage whose bound meets tol, else
  /// throw StageBudgetExceeded. tol < 0: resolve at the deepest built stage
  /// and report whatever bound that yields.
  CorrelationResult correlate(i64 k, const Rat& tol);

  std::vector<CorrelationResult> batch(i64 k_min, i64 k_max, const Rat& tol,
                                       unsigned threads = 1);

  const std::shared_ptr<Resolver>& resolver() const { return resolver_; }

 private:
  Rat bound_at(i64 k) const;  // min over both orientations at the current stage
  Rat assemble(i64 k);
  Rat assemble_with_counts(i64 k, const std::vector<i64>& counts, i64 d_lo) const;

  std::shared_ptr<Resolver> resolver_;
  i64 base_stage_;
  Rat base_width_;
  // Centered coefficients at the base stage: the residual value is folded
  // into the constant part, so spacer-descended levels carry coefficient 0.
  std::vector<Rat> cf_, cg_;
  std::vector<std::pair<i64, Rat>> f_support_, g_support_;
  Rat gamma_f_, gamma_g_;
  Rat const_part_;          // k-independent exact contribution
  Rat sup_f_, sup_g_;       // sup of the centered parts
  std::map<i64, Rat> cross_;  // X(delta) = sum_i cf[i] * cg[i - delta]
};

/// <U^k f, g>. Negative k is evaluated as <f, U^{-k} g>.
CorrelationResult correlation(const Construction& c, const StepFn& f, const StepFn& g,
                              i64 k, const Rat& tol);

CorrelationSequence correlation_sequence(const Construction& c, const StepFn& f,
                                         const StepFn& g, i64 k_min, i64 k_max,
                                         const Rat& tol, unsigned threads = 1);

/// <f, f>, always exact.
Rat norm_squared(const Construction& c, const StepFn& f);

/// Unconstrained evaluation: resolve at the deepest built stage.
inline const Rat kBestEffort{-1};

}  // namespace rolab::tower
