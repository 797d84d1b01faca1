#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dust/dust.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInput = 2;

struct ModelFlags {
  std::string model = "gauss";
  double count_norm = 10.0;
  bool standardize = false;
};

void add_model_flags(CLI::App* cmd, ModelFlags& mf) {
  cmd->add_option("--model", mf.model,
                  "cost model (gauss poisson exponential geometric bernoulli "
                  "binomial negbin variance meanvar quadratic-regression)");
  cmd->add_option("--count-norm", mf.count_norm,
                  "binomial count / negbin size");
  cmd->add_flag("--standardize", mf.standardize,
                "divide gauss data by its global standard deviation");
}

dust::ModelFamily make_model(const ModelFlags& mf) {
  dust::ModelFamily m;
  m.family = dust::parse_family(mf.model);
  m.count_norm = mf.count_norm;
  m.standardize = mf.standardize;
  return m;
}

struct StrategyFlags {
  std::string strategy = "exact1d";
  int constraints = 1;
  std::uint64_t seed = 1;
  bool random_r = false;
};

void add_strategy_flags(CLI::App* cmd, StrategyFlags& sf) {
  cmd->add_option("--strategy", sf.strategy,
                  "none | pelt | exact1d | zero | random | qn | meanvar | "
                  "gauss (none/pelt disable dual pruning)");
  cmd->add_option("--constraints", sf.constraints,
                  "constraints per dual test (meanvar/qn)");
  cmd->add_option("--seed", sf.seed, "random seed");
  cmd->add_flag("--rand-r", sf.random_r,
                "draw the constraint index uniformly instead of the nearest");
}

// "none" and "pelt" are pruning modes; everything else is a DUST strategy
std::pair<dust::Pruning, dust::DualEvalPlan> resolve_strategy(
    const StrategyFlags& sf) {
  dust::DualEvalPlan plan;
  plan.constraints = sf.constraints;
  plan.rng_seed = sf.seed;
  plan.random_r = sf.random_r;
  if (sf.strategy == "none") return {dust::Pruning::none, plan};
  if (sf.strategy == "pelt") return {dust::Pruning::pelt, plan};
  plan.strategy = dust::parse_strategy(sf.strategy);
  return {dust::Pruning::dust, plan};
}

dust::Series load_csv(const std::string& path, bool header) {
  if (path == "-") return dust::read_csv(std::cin, header);
  std::ifstream in(path);
  if (!in) {
    throw dust::CsvError("cannot open input file '" + path + "'", 0, 0);
  }
  return dust::read_csv(in, header);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) {
    throw dust::ConfigError("cannot open output file '" + path + "'");
  }
  out << text;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int cmd_segment(const ModelFlags& mf, const StrategyFlags& sf,
                const std::string& input, bool header,
                const std::string& penalty, bool scale_table,
                std::optional<double> q0, bool trace,
                const std::string& output) {
  const dust::ModelFamily model = make_model(mf);
  const dust::PenaltySpec spec = dust::parse_penalty(penalty);
  const auto [pruning, plan] = resolve_strategy(sf);

  const dust::Series data = load_csv(input, header);
  const double beta = dust::resolve_penalty(
      spec, model, static_cast<double>(data.n), scale_table);
  const dust::SegmentationResult res =
      dust::run(model, data, beta, pruning, plan, q0);

  std::ostringstream rep;
  rep << "dustseg.segment.v1\n";
  rep << "model " << dust::family_name(model.family) << "\n";
  rep << "n " << data.n << "\n";
  rep << "cols " << data.cols << "\n";
  rep << "penalty " << penalty << "\n";
  rep << "beta " << fmt_double(beta) << "\n";
  rep << "pruning " << dust::pruning_name(pruning) << "\n";
  if (pruning == dust::Pruning::dust) {
    rep << "strategy " << dust::strategy_name(plan.strategy) << "\n";
    rep << "constraints " << plan.constraints << "\n";
  }
  rep << "q0 " << fmt_double(q0.value_or(0.0)) << "\n";
  rep << "cost " << fmt_double(res.global_cost) << "\n";
  rep << "changepoints";
  for (std::size_t c : res.changepoints) rep << ' ' << c;
  rep << "\n";
  rep << "remaining " << res.remaining_candidates << "\n";
  if (trace) {
    rep << "trace";
    for (std::size_t c : res.candidate_trace) rep << ' ' << c;
    rep << "\n";
  }
  write_text(output, rep.str());
  std::fprintf(stderr, "solved n=%zu in %.6f s, %zu candidates remaining\n",
               data.n, res.wall_time_s, res.remaining_candidates);
  return kExitOk;
}

int cmd_simulate(const ModelFlags& mf, std::size_t n, std::size_t segments,
                 double p1, double p2, double s1, double s2,
                 std::uint64_t seed, std::size_t components, bool header,
                 const std::string& output) {
  dust::SimSpec spec;
  spec.family = dust::parse_family(mf.model);
  spec.n = n;
  spec.segments = segments;
  spec.p1 = p1;
  spec.p2 = p2;
  spec.s1 = s1;
  spec.s2 = s2;
  spec.seed = seed;
  spec.components = components;
  spec.count_norm = mf.count_norm;
  const dust::SimResult sim = dust::simulate(spec);

  std::ostringstream csv;
  dust::write_csv(csv, sim.data, header);
  write_text(output, csv.str());
  std::ostringstream cps;
  for (std::size_t c : sim.changepoints) cps << ' ' << c;
  std::fprintf(stderr, "true segment ends:%s\n", cps.str().c_str());
  return kExitOk;
}

int cmd_worstcase(const ModelFlags& mf, std::size_t n,
                  const std::string& penalty, bool scale_table, double ymean,
                  bool round_values, bool header, const std::string& output) {
  const dust::ModelFamily model = make_model(mf);
  const dust::PenaltySpec spec = dust::parse_penalty(penalty);
  const double beta = dust::resolve_penalty(spec, model,
                                            static_cast<double>(n),
                                            scale_table);
  dust::Series data;
  if (model.family == dust::Family::gauss && !(ymean > 0)) {
    data = dust::worstcase_gauss(n, beta);
  } else {
    if (!(ymean > 0) && model.family != dust::Family::gauss) {
      throw dust::ConfigError("worstcase: --ymean is required for this model");
    }
    dust::WorstcaseOptions opt;
    opt.round_values = round_values;
    opt.count_norm = mf.count_norm;
    data = dust::worstcase_expfam(model.family, n, ymean, beta, opt);
  }
  std::ostringstream csv;
  dust::write_csv(csv, data, header);
  write_text(output, csv.str());
  std::fprintf(stderr, "worst-case %s series, n=%zu, beta=%.6g\n",
               dust::family_name(model.family), n, beta);
  return kExitOk;
}

int cmd_bench(const ModelFlags& mf, const StrategyFlags& sf,
              const std::string& penalty, bool scale_table,
              const std::string& lengths_csv, const std::string& coeffs_csv,
              std::size_t reps, unsigned jobs, std::size_t segments, double p1,
              double p2, double s1, double s2, bool fit,
              const std::string& output) {
  dust::SweepConfig cfg;
  cfg.model = make_model(mf);
  cfg.penalty = dust::parse_penalty(penalty);
  cfg.scale_table = scale_table;
  std::tie(cfg.pruning, cfg.plan) = resolve_strategy(sf);
  cfg.reps = reps;
  cfg.seed = sf.seed;
  cfg.jobs = jobs;
  cfg.sim.segments = segments;
  cfg.sim.p1 = p1;
  cfg.sim.p2 = p2;
  cfg.sim.s1 = s1;
  cfg.sim.s2 = s2;

  std::stringstream ls(lengths_csv);
  std::string tok;
  while (std::getline(ls, tok, ',')) {
    if (tok.empty()) continue;
    cfg.lengths.push_back(static_cast<std::size_t>(std::stoull(tok)));
  }
  if (!coeffs_csv.empty()) {
    std::stringstream cs(coeffs_csv);
    while (std::getline(cs, tok, ',')) {
      if (tok.empty()) continue;
      cfg.coeffs.push_back(std::stod(tok));
    }
  }

  const std::vector<dust::BenchRecord> records = dust::run_sweep(cfg);

  std::ostringstream out;
  {
    nlohmann::json h;
    h["kind"] = "header";
    h["format"] = "dustseg.bench.v1";
    h["model"] = dust::family_name(cfg.model.family);
    h["strategy"] = sf.strategy;
    h["penalty"] = penalty;
    h["reps"] = reps;
    h["seed"] = sf.seed;
    out << h.dump() << "\n";
  }
  for (const auto& rec : records) {
    nlohmann::json j = rec;
    j["kind"] = "record";
    out << j.dump() << "\n";
  }
  // per-(n, a) summaries over reps
  std::vector<double> med_n, med_remaining;
  for (std::size_t li = 0; li < cfg.lengths.size(); ++li) {
    const std::size_t ncoef = cfg.coeffs.empty() ? 1 : cfg.coeffs.size();
    for (std::size_t ci = 0; ci < ncoef; ++ci) {
      std::vector<double> rem, wall;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const std::size_t idx = (li * ncoef + ci) * reps + rep;
        rem.push_back(static_cast<double>(records[idx].remaining));
        wall.push_back(records[idx].wall_s);
      }
      nlohmann::json s;
      s["kind"] = "summary";
      s["n"] = cfg.lengths[li];
      s["a"] = cfg.coeffs.empty() ? cfg.penalty.value : cfg.coeffs[ci];
      s["remaining_q"] = {dust::quantile_nearest(rem, 0.025),
                          dust::quantile_nearest(rem, 0.5),
                          dust::quantile_nearest(rem, 0.975)};
      s["wall_q"] = {dust::quantile_nearest(wall, 0.025),
                     dust::quantile_nearest(wall, 0.5),
                     dust::quantile_nearest(wall, 0.975)};
      out << s.dump() << "\n";
      med_n.push_back(static_cast<double>(cfg.lengths[li]));
      med_remaining.push_back(
          std::max(1.0, dust::quantile_nearest(rem, 0.5)));
    }
  }
  if (fit && cfg.lengths.size() >= 2 && cfg.coeffs.size() <= 1) {
    const dust::LineFit lf = dust::loglog_fit(med_n, med_remaining);
    nlohmann::json f;
    f["kind"] = "fit";
    f["what"] = "log remaining ~ log n";
    f["slope"] = lf.slope;
    f["intercept"] = lf.intercept;
    out << f.dump() << "\n";
  }
  write_text(output, out.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact multiple change-point detection with dual-based pruning"};
  app.require_subcommand(1);

  ModelFlags mf;
  StrategyFlags sf;
  std::string input = "-";
  std::string output;
  std::string penalty = "log:2";
  bool scale_table = false;
  bool header = false;
  bool trace = false;
  std::optional<double> q0;

  auto* seg = app.add_subcommand("segment", "segment a CSV series");
  add_model_flags(seg, mf);
  add_strategy_flags(seg, sf);
  seg->add_option("--input,-i", input, "CSV path or - for stdin");
  seg->add_option("--penalty", penalty, "abs:<v> or log:<a>");
  seg->add_flag("--scale-table", scale_table,
                "rescale log penalties by the per-model table");
  seg->add_flag("--header", header, "skip the first CSV line");
  seg->add_option("--q0", q0, "initial cost Q_0 (default 0)");
  seg->add_flag("--trace", trace, "include the candidate-count trace");
  seg->add_option("--output,-o", output, "report path (default stdout)");

  std::size_t sim_n = 1000, sim_segments = 1, sim_components = 1;
  double p1 = 0, p2 = 1, s1 = 1, s2 = 1;
  auto* sim = app.add_subcommand("simulate", "sample a piecewise series");
  add_model_flags(sim, mf);
  sim->add_option("--n", sim_n, "series length");
  sim->add_option("--segments", sim_segments, "number of equal blocks");
  sim->add_option("--p1", p1, "parameter of even blocks");
  sim->add_option("--p2", p2, "parameter of odd blocks");
  sim->add_option("--s1", s1, "meanvar sd of even blocks");
  sim->add_option("--s2", s2, "meanvar sd of odd blocks");
  sim->add_option("--seed", sf.seed, "random seed");
  sim->add_option("--components", sim_components, "independent components");
  sim->add_flag("--header", header, "write a c0..cK header line");
  sim->add_option("--output,-o", output, "CSV path (default stdout)");

  std::size_t wc_n = 1000;
  double ymean = 0.0;
  bool round_values = false;
  auto* wc = app.add_subcommand(
      "worstcase", "generate a series immune to pruning");
  add_model_flags(wc, mf);
  wc->add_option("--n", wc_n, "series length");
  wc->add_option("--penalty", penalty, "abs:<v> or log:<a>");
  wc->add_flag("--scale-table", scale_table,
               "rescale log penalties by the per-model table");
  wc->add_option("--ymean", ymean,
                 "target statistic mean (defaulted for gauss)");
  wc->add_flag("--round", round_values, "round integer-valued families");
  wc->add_flag("--header", header, "write a c0..cK header line");
  wc->add_option("--output,-o", output, "CSV path (default stdout)");

  std::string lengths_csv = "1000";
  std::string coeffs_csv;
  std::size_t reps = 5;
  unsigned jobs = 1;
  bool fit = false;
  auto* bench = app.add_subcommand("bench", "run a timing/pruning sweep");
  add_model_flags(bench, mf);
  add_strategy_flags(bench, sf);
  bench->add_option("--penalty", penalty, "abs:<v> or log:<a>");
  bench->add_flag("--scale-table", scale_table,
                  "rescale log penalties by the per-model table");
  bench->add_option("--lengths", lengths_csv, "comma-separated series lengths");
  bench->add_option("--coeffs", coeffs_csv,
                    "comma-separated penalty values to sweep");
  bench->add_option("--reps", reps, "repetitions per grid point");
  bench->add_option("--jobs", jobs, "worker threads");
  bench->add_option("--segments", sim_segments, "true segments per instance");
  bench->add_option("--p1", p1, "parameter of even blocks");
  bench->add_option("--p2", p2, "parameter of odd blocks");
  bench->add_option("--s1", s1, "meanvar sd of even blocks");
  bench->add_option("--s2", s2, "meanvar sd of odd blocks");
  bench->add_flag("--fit", fit, "append a log-log slope fit record");
  bench->add_option("--output,-o", output, "JSONL path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (seg->parsed()) {
      return cmd_segment(mf, sf, input, header, penalty, scale_table, q0,
                         trace, output);
    }
    if (sim->parsed()) {
      return cmd_simulate(mf, sim_n, sim_segments, p1, p2, s1, s2, sf.seed,
                          sim_components, header, output);
    }
    if (wc->parsed()) {
      return cmd_worstcase(mf, wc_n, penalty, scale_table, ymean, round_values,
                           header, output);
    }
    if (bench->parsed()) {
      return cmd_bench(mf, sf, penalty, scale_table, lengths_csv, coeffs_csv,
                       reps, jobs, sim_segments, p1, p2, s1, s2, fit, output);
    }
  } catch (const dust::CsvError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const dust::DomainError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const dust::SolveError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const dust::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
