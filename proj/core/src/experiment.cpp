#include "rolab/experiment.hpp"

#include <chrono>
#include <fstream>

#include "rolab/cache.hpp"
#include "rolab/errors.hpp"
#include "rolab/product.hpp"
#include "rolab/spectral.hpp"
#include "rolab/tower.hpp"
#include "rolab/version.hpp"
#include "rolab/weaklimit.hpp"

namespace rolab::experiment {

namespace fs = std::filesystem;

namespace {

// ---- schema helpers: every failure names the offending key ----

const json& require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  return j;
}

const json& require_key(const json& j, const std::string& path, const std::string& key) {
  require_object(j, path);
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "." + key, "missing required key");
  return *it;
}

i64 get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<i64>();
}

i64 get_int(const json& parent, const std::string& path, const std::string& key) {
  return get_int(require_key(parent, path, key), path + "." + key);
}

i64 get_int_or(const json& parent, const std::string& path, const std::string& key, i64 dflt) {
  if (!parent.is_object() || !parent.contains(key)) return dflt;
  return get_int(parent.at(key), path + "." + key);
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

std::string get_string(const json& parent, const std::string& path, const std::string& key) {
  return get_string(require_key(parent, path, key), path + "." + key);
}

Rat get_rat(const json& j, const std::string& path) {
  try {
    if (j.is_number_integer()) return Rat(j.get<i64>());
    if (j.is_string()) return parse_rational(j.get<std::string>());
  } catch (const BadParameter& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(path, "expected an integer or a rational string like \"3/4\"");
}

std::vector<i64> get_int_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of integers");
  std::vector<i64> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(get_int(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// ---- construction ----

std::vector<i64> parse_cuts(const json& cons, const std::string& path, i64 stages) {
  if (cons.contains("cuts")) return get_int_array(cons.at("cuts"), path + ".cuts");
  if (cons.contains("cuts_generator")) {
    const json& gen = cons.at("cuts_generator");
    std::string gpath = path + ".cuts_generator";
    std::string kind = get_string(gen, gpath, "kind");
    i64 count = get_int_or(gen, gpath, "count", stages > 0 ? stages - 1 : 0);
    std::vector<i64> cuts;
    if (kind == "constant") {
      i64 value = get_int(gen, gpath, "value");
      cuts.assign(static_cast<std::size_t>(count), value);
    } else if (kind == "cycle") {
      std::vector<i64> pattern = get_int_array(require_key(gen, gpath, "pattern"),
                                               gpath + ".pattern");
      if (pattern.empty()) throw ConfigError(gpath + ".pattern", "must not be empty");
      for (i64 i = 0; i < count; ++i)
        cuts.push_back(pattern[static_cast<std::size_t>(i) % pattern.size()]);
    } else {
      throw ConfigError(gpath + ".kind", "unknown generator '" + kind + "'");
    }
    return cuts;
  }
  throw ConfigError(path, "needs either 'cuts' or 'cuts_generator'");
}

tower::Construction parse_construction(const json& config, const RunOptions& options) {
  const json& cons = require_key(config, "config", "construction");
  const std::string path = "config.construction";
  std::string preset = get_string(cons, path, "preset");
  i64 h1 = get_int_or(cons, path, "h1", 1);
  if (h1 < 1) throw ConfigError(path + ".h1", "must be >= 1");
  std::optional<Rat> w1, y1;
  if (cons.contains("w1")) w1 = get_rat(cons.at("w1"), path + ".w1");
  if (cons.contains("y1")) y1 = get_rat(cons.at("y1"), path + ".y1");

  i64 stages = options.stages.value_or(get_int_or(cons, path, "stages", 0));

  tower::RankOneSpec spec;
  if (preset == "staircase") {
    std::vector<i64> cuts = parse_cuts(cons, path, stages);
    for (std::size_t i = 0; i < cuts.size(); ++i)
      if (cuts[i] < 2)
        throw ConfigError(path + ".cuts[" + std::to_string(i) + "]",
                          "cut count must be >= 2");
    spec = tower::RankOneSpec::staircase(h1, cuts, w1, y1);
    if (stages == 0) stages = static_cast<i64>(cuts.size()) + 1;
  } else if (preset == "chacon") {
    if (stages == 0) throw ConfigError(path + ".stages", "chacon preset needs a stage count");
    spec = tower::RankOneSpec::chacon(h1, static_cast<std::size_t>(stages), w1, y1);
  } else if (preset == "custom") {
    const json& spacers = require_key(cons, path, "spacers");
    if (!spacers.is_array()) throw ConfigError(path + ".spacers", "expected an array of arrays");
    std::vector<tower::StageSpec> specs;
    for (std::size_t i = 0; i < spacers.size(); ++i) {
      std::string spath = path + ".spacers[" + std::to_string(i) + "]";
      std::vector<i64> sp = get_int_array(spacers[i], spath);
      if (sp.size() < 2) throw ConfigError(spath, "each stage needs at least 2 subcolumns");
      for (std::size_t k = 0; k < sp.size(); ++k)
        if (sp[k] < 0)
          throw ConfigError(spath + "[" + std::to_string(k) + "]", "spacers must be >= 0");
      specs.push_back(tower::StageSpec{static_cast<i64>(sp.size()), sp});
    }
    spec = tower::RankOneSpec::custom(h1, std::move(specs), w1, y1);
    if (stages == 0) stages = static_cast<i64>(spec.stages.size()) + 1;
  } else {
    throw ConfigError(path + ".preset", "unknown preset '" + preset + "'");
  }
  if (stages < 1) throw ConfigError(path + ".stages", "must be >= 1");
  try {
    spec.validate();
  } catch (const InvalidSpec& e) {
    throw ConfigError(path, e.what());
  }
  return tower::build_construction(spec, stages);
}

// ---- shared experiment state ----

struct Context {
  const tower::Construction& c;
  const json& section;
  std::string path;
  std::uint64_t seed;
  Rat tol;
  unsigned threads;
};

tower::StepFn parse_vector(const Context& ctx, const json& j, const std::string& path) {
  require_object(j, path);
  std::string kind = get_string(j, path, "kind");
  if (kind == "indicator") {
    i64 stage = get_int(j, path, "stage");
    std::vector<i64> levels = get_int_array(require_key(j, path, "levels"), path + ".levels");
    bool zm = j.value("zero_mean", false);
    try {
      tower::StepFn f = tower::indicator(ctx.c, stage, levels);
      return zm ? tower::zero_mean(ctx.c, std::move(f)) : f;
    } catch (const OutOfRange& e) {
      throw ConfigError(path, e.what());
    }
  }
  if (kind == "random_zero_mean") {
    i64 stage = get_int(j, path, "stage");
    try {
      return spectral::random_zero_mean(ctx.c, stage, ctx.seed);
    } catch (const OutOfRange& e) {
      throw ConfigError(path, e.what());
    }
  }
  throw ConfigError(path + ".kind", "unknown vector kind '" + kind + "'");
}

json result_value(const Rat& value, const Rat& error) {
  json out;
  out["value"] = rational_string(value);
  out["decimal"] = decimal_string(value);
  out["error_bound"] = rational_string(error);
  out["provenance"] = error == 0 ? "exact" : "truncated";
  return out;
}

// ---- sections ----

json section_build(const Context& ctx) {
  json items = json::array();
  for (const tower::Stage& s : ctx.c.stages()) {
    json row;
    row["stage"] = s.number;
    row["height"] = s.height;
    row["width"] = rational_string(s.width);
    row["width_decimal"] = decimal_string(s.width);
    row["residual"] = rational_string(s.residual);
    row["residual_decimal"] = decimal_string(s.residual);
    if (s.cuts > 0) {
      row["cuts"] = s.cuts;
      row["spacers"] = s.spacers;
    }
    items.push_back(std::move(row));
  }
  return items;
}

json section_correlate(const Context& ctx) {
  tower::StepFn f = parse_vector(ctx, require_key(ctx.section, ctx.path, "f"), ctx.path + ".f");
  tower::StepFn g = ctx.section.contains("g")
                        ? parse_vector(ctx, ctx.section.at("g"), ctx.path + ".g")
                        : f;
  i64 k_min = get_int(ctx.section, ctx.path, "k_min");
  i64 k_max = get_int(ctx.section, ctx.path, "k_max");
  if (k_max < k_min) throw ConfigError(ctx.path + ".k_max", "must be >= k_min");

  tower::CorrelationEngine engine(ctx.c, f, g);
  auto results = engine.batch(k_min, k_max, ctx.tol, ctx.threads);

  json series = json::array();
  i64 exact = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    json row = result_value(results[i].value, results[i].error_bound);
    row["k"] = k_min + static_cast<i64>(i);
    row["stage"] = results[i].resolved_stage;
    if (results[i].exact()) ++exact;
    series.push_back(std::move(row));
  }
  json items;
  items["series"] = std::move(series);
  items["exact_entries"] = exact;
  items["total_entries"] = static_cast<i64>(results.size());
  return items;
}

weaklimit::OperatorExpr parse_candidate(const json& j, const std::string& path) {
  std::string kind = get_string(j, path, "kind");
  try {
    if (kind == "cesaro") return weaklimit::cesaro_expr(get_int(j, path, "q"));
    if (kind == "geometric")
      return weaklimit::geometric_expr(get_rat(require_key(j, path, "a"), path + ".a"),
                                       get_int(j, path, "K"));
    if (kind == "theta") return weaklimit::OperatorExpr::theta();
    if (kind == "identity") return weaklimit::OperatorExpr::identity();
    if (kind == "power") return weaklimit::OperatorExpr::power(get_int(j, path, "k"));
  } catch (const DegenerateOrder& e) {
    throw ConfigError(path, e.what());
  } catch (const BadParameter& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(path + ".kind", "unknown candidate kind '" + kind + "'");
}

std::vector<i64> parse_powers(const Context& ctx, const json& j, const std::string& path) {
  if (j.is_array()) return get_int_array(j, path);
  require_object(j, path);
  const json& th = require_key(j, path, "tower_heights");
  std::string tpath = path + ".tower_heights";
  std::vector<i64> stages = get_int_array(require_key(th, tpath, "stages"), tpath + ".stages");
  std::string signs = th.contains("signs") ? get_string(th.at("signs"), tpath + ".signs")
                                           : std::string("both");
  std::vector<i64> powers;
  for (i64 n : stages) {
    i64 h = ctx.c.stage(n).height;
    if (signs == "plus" || signs == "both") powers.push_back(h);
    if (signs == "minus" || signs == "both") powers.push_back(-h);
    if (signs != "plus" && signs != "minus" && signs != "both")
      throw ConfigError(tpath + ".signs", "expected plus|minus|both");
  }
  return powers;
}

json section_weaklimit(const Context& ctx) {
  i64 family_stage = get_int(ctx.section, ctx.path, "family_stage");
  weaklimit::TestFamily fam = weaklimit::level_family(ctx.c, family_stage);
  std::vector<i64> powers =
      parse_powers(ctx, require_key(ctx.section, ctx.path, "powers"), ctx.path + ".powers");

  const json& cand_json = require_key(ctx.section, ctx.path, "candidates");
  if (!cand_json.is_array() || cand_json.empty())
    throw ConfigError(ctx.path + ".candidates", "expected a nonempty array");
  std::vector<weaklimit::OperatorExpr> candidates;
  for (std::size_t i = 0; i < cand_json.size(); ++i)
    candidates.push_back(
        parse_candidate(cand_json[i], ctx.path + ".candidates[" + std::to_string(i) + "]"));

  weaklimit::ScanReport scan =
      weaklimit::scan_weak_limits(ctx.c, powers, candidates, fam, ctx.tol);

  json rows = json::array();
  for (const auto& cell : scan.cells) {
    json row;
    row["power"] = cell.power;
    row["candidate"] = scan.candidate_labels[cell.candidate];
    row["distance"] = real_string(cell.distance);
    row["error"] = real_string(cell.error);
    rows.push_back(std::move(row));
  }

  json items;
  items["family_stage"] = family_stage;
  items["pairs"] = static_cast<i64>(fam.pairs.size());
  items["scan"] = std::move(rows);

  if (ctx.section.contains("fit_lags")) {
    std::vector<i64> lags =
        get_int_array(ctx.section.at("fit_lags"), ctx.path + ".fit_lags");
    json fits = json::array();
    for (i64 k : lags) {
      weaklimit::TwoTermFit fit = weaklimit::fit_two_term(ctx.c, k, fam, ctx.tol);
      json row;
      row["k"] = k;
      row["a"] = real_string(fit.a);
      row["b"] = real_string(fit.b);
      row["residual"] = real_string(fit.residual);
      fits.push_back(std::move(row));
    }
    items["fits"] = std::move(fits);
  }
  return items;
}

json sequence_to_json(const tower::CorrelationSequence& seq) {
  json rows = json::array();
  for (i64 k = seq.k_min; k <= seq.k_max; ++k) {
    const tower::SeqEntry& e = seq.at(k);
    json row = result_value(e.value, e.error);
    row["k"] = k;
    rows.push_back(std::move(row));
  }
  return rows;
}

tower::CorrelationSequence base_sequence(const Context& ctx, const json& vec,
                                         const std::string& vec_path, i64 lags) {
  tower::StepFn f = parse_vector(ctx, vec, vec_path);
  tower::CorrelationSequence seq =
      tower::correlation_sequence(ctx.c, f, f, -lags, lags, ctx.tol, ctx.threads);
  seq.base = "seed=" + std::to_string(ctx.seed);
  return seq;
}

json section_spectrum(const Context& ctx) {
  i64 lags = get_int(ctx.section, ctx.path, "lags");
  if (lags < 1) throw ConfigError(ctx.path + ".lags", "must be >= 1");
  tower::CorrelationSequence seq = base_sequence(
      ctx, require_key(ctx.section, ctx.path, "vector"), ctx.path + ".vector", lags);

  json items;
  items["sequence"] = sequence_to_json(seq);

  i64 pd_window = get_int_or(ctx.section, ctx.path, "pd_window", std::min<i64>(lags, 32));
  spectral::MinEigenEstimate pd = spectral::check_positive_definite(seq, pd_window);
  items["pd_window"] = pd_window;
  items["min_eigenvalue"] = real_string(pd.value);
  items["min_eigenvalue_radius"] = real_string(pd.radius);

  i64 grid_factor = get_int_or(ctx.section, ctx.path, "grid_factor", 4);
  std::vector<i64> orders =
      get_int_array(require_key(ctx.section, ctx.path, "orders"), ctx.path + ".orders");
  json density_items = json::array();
  for (i64 m : orders) {
    spectral::SpectralEstimate est = spectral::fejer_density(seq, m, grid_factor * m);
    Real mean = 0, min_rho = est.density.empty() ? Real(0) : est.density.front();
    for (const Real& v : est.density) {
      mean += v;
      min_rho = std::min(min_rho, v);
    }
    mean /= Real(static_cast<unsigned>(est.density.size()));
    json row;
    row["order"] = m;
    row["grid"] = est.grid;
    row["eps_est"] = real_string(est.eps_est);
    row["grid_mean"] = real_string(mean);
    row["min_density"] = real_string(min_rho);
    json dens = json::array();
    for (const Real& v : est.density) dens.push_back(real_string(v));
    row["density"] = std::move(dens);
    density_items.push_back(std::move(row));
  }
  items["densities"] = std::move(density_items);
  items["seed"] = ctx.seed;
  return items;
}

json section_convolution(const Context& ctx) {
  i64 lags = get_int(ctx.section, ctx.path, "lags");
  if (lags < 1) throw ConfigError(ctx.path + ".lags", "must be >= 1");
  tower::CorrelationSequence seq = base_sequence(
      ctx, require_key(ctx.section, ctx.path, "vector"), ctx.path + ".vector", lags);

  json pairs_json = ctx.section.contains("pairs") ? ctx.section.at("pairs")
                                                  : json::parse("[[1,2],[2,3]]");
  if (!pairs_json.is_array()) throw ConfigError(ctx.path + ".pairs", "expected an array");
  std::vector<i64> orders =
      get_int_array(require_key(ctx.section, ctx.path, "orders"), ctx.path + ".orders");
  i64 grid_factor = get_int_or(ctx.section, ctx.path, "grid_factor", 4);

  json rows = json::array();
  for (std::size_t pi = 0; pi < pairs_json.size(); ++pi) {
    std::string ppath = ctx.path + ".pairs[" + std::to_string(pi) + "]";
    std::vector<i64> pair = get_int_array(pairs_json[pi], ppath);
    if (pair.size() != 2) throw ConfigError(ppath, "expected [n, m]");
    std::vector<Real> trend = spectral::overlap_trend(seq, pair[0], pair[1], orders,
                                                      grid_factor);
    for (std::size_t oi = 0; oi < orders.size(); ++oi) {
      json row;
      row["n"] = pair[0];
      row["m"] = pair[1];
      row["order"] = orders[oi];
      row["affinity"] = real_string(trend[oi]);
      rows.push_back(std::move(row));
    }
  }
  json items;
  items["affinities"] = std::move(rows);
  items["seed"] = ctx.seed;
  items["note"] = "finite-resolution evidence only; mutual singularity is not decidable "
                  "at any fixed order";
  return items;
}

json section_cyclic(const Context& ctx) {
  const json& base = require_key(ctx.section, ctx.path, "base");
  std::string bpath = ctx.path + ".base";
  i64 stage = get_int(base, bpath, "stage");
  i64 level = get_int(base, bpath, "level");
  tower::StepFn chi;
  try {
    chi = tower::indicator(ctx.c, stage, {level});
  } catch (const OutOfRange& e) {
    throw ConfigError(bpath, e.what());
  }

  product::BaseRegistry reg;
  int b = reg.add_bound(ctx.c, "B", chi);
  product::FormalTensor generator = product::pair_power_tensor(b, 0, 0);

  const json& target_json = require_key(ctx.section, ctx.path, "target");
  std::string tpath = ctx.path + ".target";
  std::string tkind = get_string(target_json, tpath, "kind");
  product::FormalTensor target;
  if (tkind == "symmetric_pair") {
    target = product::symmetric_pair(b, get_int(target_json, tpath, "i"),
                                     get_int(target_json, tpath, "j"));
  } else if (tkind == "pair_power") {
    target = product::pair_power_tensor(b, get_int(target_json, tpath, "m"),
                                        get_int(target_json, tpath, "n"));
  } else {
    throw ConfigError(tpath + ".kind", "unknown target kind '" + tkind + "'");
  }

  std::string op_name = ctx.section.contains("op")
                            ? get_string(ctx.section.at("op"), ctx.path + ".op")
                            : std::string("shift_both");
  product::PairOp op;
  if (op_name == "shift_both")
    op = product::PairOp::shift_both;
  else if (op_name == "swap_shift")
    op = product::PairOp::swap_shift;
  else
    throw ConfigError(ctx.path + ".op", "expected shift_both|swap_shift");

  Real reg_rel("1e-24");
  if (ctx.section.contains("reg"))
    reg_rel = Real(get_string(ctx.section.at("reg"), ctx.path + ".reg"));

  std::vector<i64> spans =
      get_int_array(require_key(ctx.section, ctx.path, "spans"), ctx.path + ".spans");
  json rows = json::array();
  for (i64 span : spans) {
    if (span < 0) throw ConfigError(ctx.path + ".spans", "spans must be >= 0");
    product::CyclicResult r =
        product::cyclic_residual(ctx.c, reg, generator, op, span, target, ctx.tol, reg_rel);
    json row;
    row["span"] = span;
    row["residual"] = real_string(r.residual);
    row["target_norm"] = real_string(r.target_norm);
    row["kept"] = static_cast<i64>(r.kept);
    row["discarded"] = static_cast<i64>(r.discarded);
    row["condition"] = real_string(r.condition);
    row["provenance"] = "regularized";
    row["error_budget"] = rational_string(r.error_budget);
    if (r.ill_conditioned) row["warning"] = "IllConditioned";
    rows.push_back(std::move(row));
  }
  json items;
  items["rows"] = std::move(rows);
  items["op"] = op_name;
  return items;
}

json section_lemma(const Context& ctx) {
  std::vector<i64> qs =
      get_int_array(require_key(ctx.section, ctx.path, "q"), ctx.path + ".q");
  const json& mu_json = require_key(ctx.section, ctx.path, "mu");
  if (!mu_json.is_array()) throw ConfigError(ctx.path + ".mu", "expected an array");

  product::BaseRegistry reg;
  json rows = json::array();
  for (std::size_t mi = 0; mi < mu_json.size(); ++mi) {
    Rat mu = get_rat(mu_json[mi], ctx.path + ".mu[" + std::to_string(mi) + "]");
    int b = reg.add("B_mu=" + rational_string(mu), mu);
    for (i64 q : qs) {
      if (q < 0) throw ConfigError(ctx.path + ".q", "q must be >= 0");
      product::TelescopingCheck check = product::verify_cesaro_telescoping(reg, b, q, mu);
      json row;
      row["q"] = q;
      row["mu"] = rational_string(mu);
      row["holds"] = check.holds;
      row["constant"] = rational_string(check.constant);
      row["expected_constant"] = rational_string(check.expected_constant);
      rows.push_back(std::move(row));
    }
  }
  json items;
  items["telescoping"] = std::move(rows);

  if (ctx.section.contains("blend")) {
    const json& blend = ctx.section.at("blend");
    std::string bpath = ctx.path + ".blend";
    Rat a = get_rat(require_key(blend, bpath, "a"), bpath + ".a");
    Rat bb = get_rat(require_key(blend, bpath, "b"), bpath + ".b");
    std::vector<i64> ps = get_int_array(require_key(blend, bpath, "powers"), bpath + ".powers");
    json brows = json::array();
    for (i64 p : ps) {
      if (p < 0) throw ConfigError(bpath + ".powers", "powers must be >= 0");
      product::PowerBlendCheck check = product::verify_power_blend_expansion(a, bb, p);
      json row;
      row["p"] = p;
      row["corners_ok"] = check.corners_ok;
      row["support_ok"] = check.support_ok;
      row["corner_coefficient"] = rational_string(check.corner_coefficient);
      row["coefficient_total"] = rational_string(check.coefficient_total);
      brows.push_back(std::move(row));
    }
    items["blend"] = std::move(brows);
  }
  return items;
}

// ---- CSV writers ----

void write_csv(const fs::path& file, const std::string& header,
               const std::vector<std::string>& lines) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << header << "\n";
  for (const auto& line : lines) out << line << "\n";
}

void write_series_csv(const fs::path& dir, const std::string& name, const json& series) {
  std::vector<std::string> lines;
  for (const auto& row : series) {
    Rat v = parse_rational(row.at("value").get<std::string>());
    lines.push_back(std::to_string(row.at("k").get<i64>()) + "," +
                    numerator(v).str() + "," + denominator(v).str() + "," +
                    row.at("decimal").get<std::string>() + "," +
                    row.at("error_bound").get<std::string>());
  }
  write_csv(dir / name, "k,value_numerator,value_denominator,value_decimal,error_bound", lines);
}

void write_section_csv(const fs::path& dir, const std::string& command, const json& items) {
  if (command == "build") {
    std::vector<std::string> lines;
    for (const auto& row : items)
      lines.push_back(std::to_string(row.at("stage").get<i64>()) + "," +
                      std::to_string(row.at("height").get<i64>()) + "," +
                      row.at("width").get<std::string>() + "," +
                      row.at("residual").get<std::string>());
    write_csv(dir / "build_stages.csv", "stage,height,width,residual", lines);
  } else if (command == "correlate") {
    write_series_csv(dir, "correlate_series.csv", items.at("series"));
  } else if (command == "spectrum") {
    write_series_csv(dir, "spectrum_sequence.csv", items.at("sequence"));
    for (const auto& d : items.at("densities")) {
      std::vector<std::string> lines;
      const auto& dens = d.at("density");
      for (std::size_t g = 0; g < dens.size(); ++g)
        lines.push_back(std::to_string(g) + "," + dens[g].get<std::string>());
      write_csv(dir / ("spectrum_density_m" + std::to_string(d.at("order").get<i64>()) + ".csv"),
                "grid_index,density", lines);
    }
  } else if (command == "convolution") {
    std::vector<std::string> lines;
    for (const auto& row : items.at("affinities"))
      lines.push_back(std::to_string(row.at("n").get<i64>()) + "," +
                      std::to_string(row.at("m").get<i64>()) + "," +
                      std::to_string(row.at("order").get<i64>()) + "," +
                      row.at("affinity").get<std::string>());
    write_csv(dir / "convolution_affinity.csv", "n,m,order,affinity", lines);
  } else if (command == "weaklimit") {
    std::vector<std::string> lines;
    for (const auto& row : items.at("scan"))
      lines.push_back(std::to_string(row.at("power").get<i64>()) + "," +
                      row.at("candidate").get<std::string>() + "," +
                      row.at("distance").get<std::string>() + "," +
                      row.at("error").get<std::string>());
    write_csv(dir / "weaklimit_scan.csv", "power,candidate,distance,error", lines);
  } else if (command == "cyclic") {
    std::vector<std::string> lines;
    for (const auto& row : items.at("rows"))
      lines.push_back(std::to_string(row.at("span").get<i64>()) + "," +
                      row.at("residual").get<std::string>() + "," +
                      row.at("target_norm").get<std::string>());
    write_csv(dir / "cyclic_residuals.csv", "span,residual,target_norm", lines);
  }
}

json run_section(const std::string& command, const Context& ctx) {
  if (command == "build") return section_build(ctx);
  if (command == "correlate") return section_correlate(ctx);
  if (command == "weaklimit") return section_weaklimit(ctx);
  if (command == "spectrum") return section_spectrum(ctx);
  if (command == "convolution") return section_convolution(ctx);
  if (command == "cyclic") return section_cyclic(ctx);
  if (command == "lemma") return section_lemma(ctx);
  throw ConfigError("command", "unknown experiment kind '" + command + "'");
}

}  // namespace

const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> commands = {
      "build", "correlate", "weaklimit", "spectrum", "convolution", "cyclic", "lemma"};
  return commands;
}

json RunResult::full() const {
  json out = payload;
  out["timings"] = timings;
  return out;
}

RunResult run(const std::string& command, const json& config, const RunOptions& options) {
  require_object(config, "config");
  bool is_report = command == "report";
  if (!is_report) {
    auto& known = known_commands();
    if (std::find(known.begin(), known.end(), command) == known.end())
      throw ConfigError("command", "unknown command '" + command + "'");
  }

  std::uint64_t seed = options.seed.value_or(
      config.contains("seed") ? static_cast<std::uint64_t>(get_int(config.at("seed"), "config.seed"))
                              : 1);
  Rat tol = tower::kBestEffort;
  if (options.tol) {
    tol = *options.tol;
  } else if (config.contains("tol")) {
    tol = get_rat(config.at("tol"), "config.tol");
  }

  auto t0 = std::chrono::steady_clock::now();
  tower::Construction c = parse_construction(config, options);

  const json experiments = config.contains("experiments")
                               ? require_object(config.at("experiments"), "config.experiments")
                               : json::object();

  std::vector<std::string> to_run;
  if (is_report) {
    for (const std::string& name : known_commands())
      if (name == "build" || experiments.contains(name)) to_run.push_back(name);
  } else {
    if (command != "build" && !experiments.contains(command))
      throw ConfigError("config.experiments." + command, "missing section for this command");
    to_run.push_back(command);
  }

  fs::create_directories(options.out_dir);
  cache::Store store(options.cache_dir, options.out_dir / "cache", !options.no_cache);

  json construction_fragment;
  construction_fragment["construction"] = config.at("construction");
  if (options.stages) construction_fragment["stages_override"] = *options.stages;

  RunResult result;
  result.payload["tool"] = "rolab";
  result.payload["version"] = kVersion;
  result.payload["command"] = command;
  result.payload["config"] = config;
  result.payload["seed"] = seed;
  result.payload["tol"] = tol < 0 ? json("best-effort") : json(rational_string(tol));
  result.payload["sections"] = json::array();

  double total_s = 0;
  json section_timings = json::object();
  for (const std::string& name : to_run) {
    json fragment = construction_fragment;
    fragment["kind"] = name;
    fragment["seed"] = seed;
    fragment["tol"] = tol < 0 ? json("best-effort") : json(rational_string(tol));
    fragment["section"] = experiments.contains(name) ? experiments.at(name) : json::object();
    std::string key = cache::cache_key(fragment);

    auto s0 = std::chrono::steady_clock::now();
    json items;
    bool hit = false;
    if (auto cached = store.load(key)) {
      items = std::move(*cached);
      hit = true;
    } else {
      Context ctx{c, fragment.at("section"), "config.experiments." + name, seed, tol,
                  options.threads};
      items = run_section(name, ctx);
      store.save(key, items);
    }
    write_section_csv(options.out_dir, name, items);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
    total_s += secs;
    section_timings[name] = secs;

    json section;
    section["kind"] = name;
    section["cache"] = {{"key", key}, {"hit", hit}};
    section["items"] = std::move(items);
    result.payload["sections"].push_back(std::move(section));
  }

  result.timings["sections_s"] = section_timings;
  result.timings["total_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.timings["threads"] = options.threads;

  std::ofstream report(options.out_dir / "report.json");
  if (!report) throw Error("cannot write report.json under " + options.out_dir.string());
  report << result.full().dump(2) << "\n";
  return result;
}

}  // namespace rolab::experiment
