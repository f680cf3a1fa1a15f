#include "rolab/tower.hpp"

#include <algorithm>
#include <set>

#include "rolab/parallel.hpp"

namespace rolab::tower {

namespace {

constexpr i64 kMaxHeightBits = 62;
// Caps the dense coefficient vectors a lift may materialize and the size of a
// shared descendant-offset table.
constexpr i64 kMaxDenseLevels = i64(1) << 24;
constexpr i64 kMaxOffsetTable = i64(1) << 26;

Rat default_width(i64 h1) { return Rat(1, 4 * h1); }

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

void check_belongs(const Construction& c, const StepFn& f, const char* role) {
  if (f.construction != c.fingerprint())
    throw MismatchedConstruction(std::string("step function '") + role +
                                 "' does not belong to this construction");
  if (f.stage < 1 || f.stage > c.deepest_stage())
    throw OutOfRange("step function stage outside built range");
  if (static_cast<i64>(f.coeffs.size()) != c.stage(f.stage).height)
    throw InvalidSpec("step function coefficient count does not match its stage height");
}

}  // namespace

void RankOneSpec::validate() const {
  if (initial_height < 1) throw InvalidSpec("initial height must be >= 1");
  if (initial_width <= 0 || initial_width > 1)
    throw InvalidSpec("initial width must lie in (0, 1]");
  if (initial_residual < 0) throw InvalidSpec("initial residual must be >= 0");
  if (Rat(initial_height) * initial_width + initial_residual != 1)
    throw InvalidSpec("h1*w1 + y1 must equal 1 exactly");
  for (std::size_t n = 0; n < stages.size(); ++n) {
    const StageSpec& s = stages[n];
    if (s.cuts < 2) throw InvalidSpec("stage " + std::to_string(n + 1) + ": cuts must be >= 2");
    if (static_cast<i64>(s.spacers.size()) != s.cuts)
      throw InvalidSpec("stage " + std::to_string(n + 1) +
                        ": spacer vector length must equal the cut count");
    for (i64 sp : s.spacers)
      if (sp < 0) throw InvalidSpec("stage " + std::to_string(n + 1) + ": negative spacer count");
  }
}

RankOneSpec RankOneSpec::staircase(i64 h1, const std::vector<i64>& cut_sequence,
                                   std::optional<Rat> w1, std::optional<Rat> y1) {
  RankOneSpec spec;
  spec.initial_height = h1;
  spec.initial_width = w1.value_or(default_width(h1));
  spec.initial_residual = y1 ? *y1 : Rat(1) - Rat(h1) * spec.initial_width;
  for (i64 r : cut_sequence) {
    StageSpec s;
    s.cuts = r;
    s.spacers.resize(r >= 0 ? static_cast<std::size_t>(r) : 0);
    for (i64 j = 0; j < r; ++j) s.spacers[static_cast<std::size_t>(j)] = j;
    spec.stages.push_back(std::move(s));
  }
  return spec;
}

RankOneSpec RankOneSpec::chacon(i64 h1, std::size_t stage_count, std::optional<Rat> w1,
                                std::optional<Rat> y1) {
  RankOneSpec spec;
  spec.initial_height = h1;
  spec.initial_width = w1.value_or(default_width(h1));
  spec.initial_residual = y1 ? *y1 : Rat(1) - Rat(h1) * spec.initial_width;
  for (std::size_t n = 1; n < stage_count; ++n)
    spec.stages.push_back(StageSpec{3, {0, 1, 0}});
  return spec;
}

RankOneSpec RankOneSpec::custom(i64 h1, std::vector<StageSpec> stages, std::optional<Rat> w1,
                                std::optional<Rat> y1) {
  RankOneSpec spec;
  spec.initial_height = h1;
  spec.initial_width = w1.value_or(default_width(h1));
  spec.initial_residual = y1 ? *y1 : Rat(1) - Rat(h1) * spec.initial_width;
  spec.stages = std::move(stages);
  return spec;
}

const Stage& Construction::stage(i64 number) const {
  if (number < 1 || number > deepest_stage())
    throw OutOfRange("stage " + std::to_string(number) + " not built (have 1.." +
                     std::to_string(deepest_stage()) + ")");
  return stages_[static_cast<std::size_t>(number - 1)];
}

std::vector<i64> Construction::children(i64 stage_number, i64 level) const {
  const Stage& s = stage(stage_number);
  if (s.offsets.empty())
    throw OutOfRange("stage " + std::to_string(stage_number) + " is the deepest built stage");
  if (level < 0 || level >= s.height) throw OutOfRange("level index out of range");
  std::vector<i64> out;
  out.reserve(s.offsets.size());
  for (i64 off : s.offsets) out.push_back(off + level);
  return out;
}

std::vector<i64> Construction::descendant_offsets(i64 from_stage, i64 to_stage) const {
  stage(from_stage);
  stage(to_stage);
  if (to_stage < from_stage) throw OutOfRange("target stage is shallower than source stage");
  std::vector<i64> desc{0};
  for (i64 n = from_stage; n < to_stage; ++n) {
    const Stage& s = stage(n);
    if (static_cast<i64>(desc.size()) * s.cuts > kMaxOffsetTable)
      throw StageBudgetExceeded("descendant table would exceed the in-memory cap");
    std::vector<i64> next;
    next.reserve(desc.size() * s.offsets.size());
    for (i64 off : s.offsets)
      for (i64 u : desc) next.push_back(off + u);
    desc = std::move(next);  // copies are disjoint ordered blocks: stays sorted
  }
  return desc;
}

Construction build_construction(const RankOneSpec& spec, i64 stage_budget) {
  spec.validate();
  if (stage_budget < 1) throw InvalidSpec("stage budget must be >= 1");
  if (static_cast<std::size_t>(stage_budget - 1) > spec.stages.size())
    throw InvalidSpec("stage budget " + std::to_string(stage_budget) + " needs " +
                      std::to_string(stage_budget - 1) + " declared stages, have " +
                      std::to_string(spec.stages.size()));

  Construction c;
  c.spec_ = spec;
  Stage first;
  first.number = 1;
  first.height = spec.initial_height;
  first.width = spec.initial_width;
  first.residual = spec.initial_residual;
  c.stages_.push_back(first);

  for (i64 n = 1; n < stage_budget; ++n) {
    Stage& cur = c.stages_.back();
    const StageSpec& sp = spec.stages[static_cast<std::size_t>(n - 1)];
    cur.cuts = sp.cuts;
    cur.spacers = sp.spacers;

    cur.offsets.resize(static_cast<std::size_t>(sp.cuts));
    Int next_height = 0;
    i64 spacer_total = 0;
    i64 off = 0;
    for (i64 j = 0; j < sp.cuts; ++j) {
      cur.offsets[static_cast<std::size_t>(j)] = off;
      i64 sj = sp.spacers[static_cast<std::size_t>(j)];
      next_height += cur.height + sj;
      spacer_total += sj;
      if (next_height > (Int(1) << kMaxHeightBits))
        throw InvalidSpec("stage height exceeds 2^62 at stage " + std::to_string(n + 1) +
                          "; reduce the stage budget");
      off = next_height.convert_to<i64>();
    }

    Stage next;
    next.number = n + 1;
    next.height = next_height.convert_to<i64>();
    next.width = cur.width / sp.cuts;
    next.residual = cur.residual - next.width * spacer_total;
    if (next.residual < 0)
      throw ReservoirExhausted(
          n, "spacer mass " + rational_string(next.width * spacer_total) + " exceeds residual " +
                 rational_string(cur.residual) + " while building stage " + std::to_string(n + 1));
    c.stages_.push_back(std::move(next));
  }

  std::string tag = "h1=" + std::to_string(spec.initial_height) +
                    ";w1=" + rational_string(spec.initial_width) +
                    ";y1=" + rational_string(spec.initial_residual) + ";";
  for (const StageSpec& s : spec.stages) {
    tag += "r=" + std::to_string(s.cuts) + ":";
    for (i64 sp : s.spacers) tag += std::to_string(sp) + ",";
    tag += ";";
  }
  tag += "stages=" + std::to_string(stage_budget);
  c.fingerprint_ = fnv1a(tag);
  return c;
}

std::vector<std::pair<i64, Rat>> refine_level(const Construction& c, i64 stage_number, i64 level,
                                              i64 target_stage) {
  const Stage& s = c.stage(stage_number);
  if (level < 0 || level >= s.height) throw OutOfRange("level index out of range");
  std::vector<i64> offs = c.descendant_offsets(stage_number, target_stage);
  const Rat& w = c.stage(target_stage).width;
  std::vector<std::pair<i64, Rat>> out;
  out.reserve(offs.size());
  for (i64 u : offs) out.emplace_back(u + level, w);
  return out;
}

Rat StepFn::integral(const Construction& c) const {
  check_belongs(c, *this, "integrand");
  const Stage& s = c.stage(stage);
  Rat sum = 0;
  for (const Rat& v : coeffs) sum += v;
  return gamma + sum * s.width + rho * s.residual;
}

Rat StepFn::sup_norm(const Construction& c) const {
  check_belongs(c, *this, "operand");
  const Stage& s = c.stage(stage);
  Rat sup = s.residual > 0 ? abs(gamma + rho) : Rat(0);
  for (const Rat& v : coeffs) sup = std::max(sup, abs(gamma + v));
  return sup;
}

StepFn indicator(const Construction& c, i64 stage_number, const std::vector<i64>& levels) {
  const Stage& s = c.stage(stage_number);
  StepFn f;
  f.stage = stage_number;
  f.coeffs.assign(static_cast<std::size_t>(s.height), Rat(0));
  f.construction = c.fingerprint();
  for (i64 lvl : levels) {
    if (lvl < 0 || lvl >= s.height)
      throw OutOfRange("indicator level " + std::to_string(lvl) + " outside [0, " +
                       std::to_string(s.height) + ")");
    f.coeffs[static_cast<std::size_t>(lvl)] = 1;  // duplicates collapse: index set
  }
  return f;
}

StepFn lift(const Construction& c, const StepFn& f, i64 target_stage) {
  check_belongs(c, f, "lift operand");
  if (target_stage < f.stage) throw OutOfRange("cannot lift to a shallower stage");
  if (target_stage == f.stage) return f;
  if (c.stage(target_stage).height > kMaxDenseLevels)
    throw OutOfRange("lift target stage too large for a dense representation");
  StepFn out = f;
  for (i64 n = f.stage; n < target_stage; ++n) {
    const Stage& s = c.stage(n);
    const Stage& next = c.stage(n + 1);
    std::vector<Rat> lifted(static_cast<std::size_t>(next.height), out.rho);
    for (i64 off : s.offsets)
      for (i64 i = 0; i < s.height; ++i)
        lifted[static_cast<std::size_t>(off + i)] = out.coeffs[static_cast<std::size_t>(i)];
    out.coeffs = std::move(lifted);
    out.stage = n + 1;
  }
  return out;
}

StepFn zero_mean(const Construction& c, StepFn f) {
  f.gamma -= f.integral(c);
  return f;
}

StepFn scale(StepFn f, const Rat& s) {
  for (Rat& v : f.coeffs) v *= s;
  f.gamma *= s;
  f.rho *= s;
  return f;
}

StepFn add(const Construction& c, const StepFn& f, const StepFn& g) {
  if (f.construction != g.construction)
    throw MismatchedConstruction("cannot add step functions from different constructions");
  i64 stage = std::max(f.stage, g.stage);
  StepFn a = lift(c, f, stage);
  StepFn b = lift(c, g, stage);
  for (std::size_t i = 0; i < a.coeffs.size(); ++i) a.coeffs[i] += b.coeffs[i];
  a.gamma += b.gamma;
  a.rho += b.rho;
  return a;
}

const SeqEntry& CorrelationSequence::at(i64 k) const {
  if (!contains(k)) throw OutOfRange("lag outside sequence range");
  return entries[static_cast<std::size_t>(k - k_min)];
}

SeqEntry& CorrelationSequence::at(i64 k) {
  if (!contains(k)) throw OutOfRange("lag outside sequence range");
  return entries[static_cast<std::size_t>(k - k_min)];
}

Resolver::Resolver(const Construction& c, i64 base_stage)
    : c_(&c), base_(base_stage), stage_(base_stage), desc_{0} {
  c.stage(base_stage);
}

bool Resolver::can_deepen() const {
  if (stage_ >= c_->deepest_stage()) return false;
  const Stage& s = c_->stage(stage_);
  return static_cast<i64>(desc_.size()) * s.cuts <= kMaxOffsetTable;
}

void Resolver::deepen() {
  if (!can_deepen())
    throw StageBudgetExceeded("no deeper stage available below stage " + std::to_string(stage_));
  const Stage& s = c_->stage(stage_);
  std::vector<i64> next;
  next.reserve(desc_.size() * s.offsets.size());
  for (i64 off : s.offsets)
    for (i64 u : desc_) next.push_back(off + u);
  desc_ = std::move(next);
  ++stage_;
  count_cache_.clear();
}

void Resolver::ensure_stage(i64 stage_number) {
  while (stage_ < stage_number) deepen();
}

i64 Resolver::pair_count(i64 d) {
  d = d < 0 ? -d : d;  // difference counts are symmetric
  auto it = count_cache_.find(d);
  if (it != count_cache_.end()) return it->second;
  i64 n = 0;
  std::size_t i = 0, j = 0;
  while (i < desc_.size() && j < desc_.size()) {
    i64 target = desc_[i] + d;
    if (desc_[j] < target) {
      ++j;
    } else if (desc_[j] > target) {
      ++i;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  count_cache_.emplace(d, n);
  return n;
}

std::vector<i64> Resolver::pair_count_window(i64 d_lo, i64 d_hi) const {
  if (d_hi < d_lo) throw BadParameter("empty pair-count window");
  std::vector<i64> counts(static_cast<std::size_t>(d_hi - d_lo + 1), 0);
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < desc_.size(); ++i) {
    while (lo < desc_.size() && desc_[lo] < desc_[i] + d_lo) ++lo;
    if (hi < lo) hi = lo;
    while (hi < desc_.size() && desc_[hi] <= desc_[i] + d_hi) ++hi;
    for (std::size_t j = lo; j < hi; ++j)
      ++counts[static_cast<std::size_t>(desc_[j] - desc_[i] - d_lo)];
  }
  return counts;
}

i64 Resolver::count_at_or_above(i64 bound) const {
  auto it = std::lower_bound(desc_.begin(), desc_.end(), bound);
  return static_cast<i64>(desc_.end() - it);
}

i64 Resolver::count_below(i64 bound) const {
  auto it = std::lower_bound(desc_.begin(), desc_.end(), bound);
  return static_cast<i64>(it - desc_.begin());
}

CorrelationEngine::CorrelationEngine(const Construction& c, const StepFn& f, const StepFn& g,
                                     std::shared_ptr<Resolver> resolver) {
  check_belongs(c, f, "f");
  check_belongs(c, g, "g");
  base_stage_ = std::max(f.stage, g.stage);
  if (resolver) {
    if (&resolver->construction() != &c || resolver->base_stage() != base_stage_)
      throw MismatchedConstruction("shared resolver does not match this correlation");
    resolver_ = std::move(resolver);
  } else {
    resolver_ = std::make_shared<Resolver>(c, base_stage_);
  }

  StepFn fl = lift(c, f, base_stage_);
  StepFn gl = lift(c, g, base_stage_);
  const Stage& bs = c.stage(base_stage_);
  base_width_ = bs.width;

  // Fold the residual value into the constant component: U fixes constants,
  // so only the centered level part can cross the top of a tower.
  gamma_f_ = fl.gamma + fl.rho;
  gamma_g_ = gl.gamma + gl.rho;
  cf_.resize(fl.coeffs.size());
  cg_.resize(gl.coeffs.size());
  sup_f_ = 0;
  sup_g_ = 0;
  Rat int_f = 0, int_g = 0;
  for (std::size_t i = 0; i < fl.coeffs.size(); ++i) {
    cf_[i] = fl.coeffs[i] - fl.rho;
    if (cf_[i] != 0) {
      f_support_.emplace_back(static_cast<i64>(i), cf_[i]);
      sup_f_ = std::max(sup_f_, abs(cf_[i]));
      int_f += cf_[i];
    }
  }
  for (std::size_t i = 0; i < gl.coeffs.size(); ++i) {
    cg_[i] = gl.coeffs[i] - gl.rho;
    if (cg_[i] != 0) {
      g_support_.emplace_back(static_cast<i64>(i), cg_[i]);
      sup_g_ = std::max(sup_g_, abs(cg_[i]));
      int_g += cg_[i];
    }
  }
  int_f *= base_width_;
  int_g *= base_width_;
  const_part_ = gamma_f_ * gamma_g_ + gamma_f_ * int_g + gamma_g_ * int_f;

  for (const auto& [i, a] : f_support_)
    for (const auto& [j, b] : g_support_) cross_[i - j] += a * b;
}

Rat CorrelationEngine::bound_at(i64 k) const {
  if (k == 0) return 0;
  const Construction& c = resolver_->construction();
  const Stage& s = c.stage(resolver_->stage());
  Rat b1 = 0;  // shift carried by f: mass pushed past a tower boundary
  for (const auto& [i, a] : f_support_) {
    i64 cnt = k > 0 ? resolver_->count_at_or_above(s.height - k - i)
                    : resolver_->count_below(-k - i);
    if (cnt) b1 += abs(a) * cnt;
  }
  b1 *= s.width * sup_g_;
  Rat b2 = 0;  // same correlation read as <f, U^{-k} g>
  for (const auto& [j, b] : g_support_) {
    i64 cnt = k > 0 ? resolver_->count_below(k - j)
                    : resolver_->count_at_or_above(s.height + k - j);
    if (cnt) b2 += abs(b) * cnt;
  }
  b2 *= s.width * sup_f_;
  return std::min(b1, b2);
}

Rat CorrelationEngine::assemble(i64 k) {
  const Construction& c = resolver_->construction();
  const Stage& s = c.stage(resolver_->stage());
  i64 span = resolver_->offsets().back();
  Rat sum = 0;
  for (const auto& [delta, x] : cross_) {
    i64 d = k + delta;
    if (d < -span || d > span) continue;
    i64 n = resolver_->pair_count(d);
    if (n) sum += x * n;
  }
  return const_part_ + sum * s.width;
}

Rat CorrelationEngine::assemble_with_counts(i64 k, const std::vector<i64>& counts,
                                            i64 d_lo) const {
  const Construction& c = resolver_->construction();
  const Stage& s = c.stage(resolver_->stage());
  Rat sum = 0;
  for (const auto& [delta, x] : cross_) {
    i64 idx = k + delta - d_lo;
    if (idx < 0 || idx >= static_cast<i64>(counts.size())) continue;
    i64 n = counts[static_cast<std::size_t>(idx)];
    if (n) sum += x * n;
  }
  return const_part_ + sum * s.width;
}

CorrelationResult CorrelationEngine::correlate(i64 k, const Rat& tol) {
  if (tol < 0) {
    while (resolver_->can_deepen()) resolver_->deepen();
  } else {
    while (bound_at(k) > tol && resolver_->can_deepen()) resolver_->deepen();
  }
  Rat b = bound_at(k);
  if (tol >= 0 && b > tol)
    throw StageBudgetExceeded("lag " + std::to_string(k) + ": best error bound " +
                              rational_string(b) + " exceeds tolerance " + rational_string(tol) +
                              " at stage " + std::to_string(resolver_->stage()));
  return CorrelationResult{assemble(k), b, resolver_->stage()};
}

std::vector<CorrelationResult> CorrelationEngine::batch(i64 k_min, i64 k_max, const Rat& tol,
                                                        unsigned threads) {
  if (k_max < k_min) throw BadParameter("empty lag range");
  if (k_max - k_min > (i64(1) << 24)) throw BadParameter("lag range too large");

  // All deepening happens here, sequentially, so results are identical for
  // every worker count.
  if (tol < 0) {
    while (resolver_->can_deepen()) resolver_->deepen();
  } else {
    for (i64 k = k_min; k <= k_max; ++k)
      while (bound_at(k) > tol && resolver_->can_deepen()) resolver_->deepen();
    for (i64 k = k_min; k <= k_max; ++k) {
      Rat b = bound_at(k);
      if (b > tol)
        throw StageBudgetExceeded("lag " + std::to_string(k) + ": best error bound " +
                                  rational_string(b) + " exceeds tolerance " +
                                  rational_string(tol));
    }
  }

  i64 h_base = static_cast<i64>(cf_.size());
  i64 d_lo = k_min - (h_base - 1);
  i64 d_hi = k_max + (h_base - 1);
  std::vector<i64> counts = resolver_->pair_count_window(d_lo, d_hi);

  std::vector<CorrelationResult> out(static_cast<std::size_t>(k_max - k_min + 1));
  parallel_for(out.size(), threads, [&](std::size_t idx) {
    i64 k = k_min + static_cast<i64>(idx);
    out[idx] = CorrelationResult{assemble_with_counts(k, counts, d_lo), bound_at(k),
                                 resolver_->stage()};
  });
  return out;
}

CorrelationResult correlation(const Construction& c, const StepFn& f, const StepFn& g, i64 k,
                              const Rat& tol) {
  CorrelationEngine engine(c, f, g);
  return engine.correlate(k, tol);
}

CorrelationSequence correlation_sequence(const Construction& c, const StepFn& f, const StepFn& g,
                                         i64 k_min, i64 k_max, const Rat& tol, unsigned threads) {
  CorrelationEngine engine(c, f, g);
  auto results = engine.batch(k_min, k_max, tol, threads);
  CorrelationSequence seq;
  seq.k_min = k_min;
  seq.k_max = k_max;
  seq.entries.reserve(results.size());
  for (const auto& r : results) seq.entries.push_back(SeqEntry{r.value, r.error_bound});
  seq.autocorrelation = f.stage == g.stage && f.coeffs == g.coeffs && f.gamma == g.gamma &&
                        f.rho == g.rho;
  return seq;
}

Rat norm_squared(const Construction& c, const StepFn& f) {
  return correlation(c, f, f, 0, Rat(0)).value;
}

}  // namespace rolab::tower
