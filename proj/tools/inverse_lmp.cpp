// inverse-lmp: dataset generation, price recovery and the experiment reports.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "invlmp/experiments.hpp"
#include "invlmp/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace invlmp;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kSolverFailure = 1;
constexpr int kUsage = 2;

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string block_name(int gen, int block) { return "g" + std::to_string(gen + 1) + "_b" + std::to_string(block + 1); }

std::string p_name(double p) { return "p" + fmt(p); }

// ---------------------------------------------------------------------------
// Config plumbing. Unknown keys are rejected so a typo never silently falls
// back to a default.

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw InputError("config " + path + ": top level must be an object");
  return j;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw InputError(where + ": unknown key '" + k + "'");
  }
}

template <typename T>
T get(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError("config: '" + key + "' has the wrong type");
  }
}

std::pair<double, double> get_range(const json& j, const std::string& key, std::pair<double, double> fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = get<std::vector<double>>(j, key, {});
  if (v.size() != 2 || !(v[0] <= v[1])) throw InputError("config: '" + key + "' must be [lo, hi] with lo <= hi");
  return {v[0], v[1]};
}

Grid make_grid(const json& spec) {
  if (spec.is_string()) {
    const std::string s = spec.get<std::string>();
    if (s == "ieee14") return ieee14();
    return load_grid(s);
  }
  if (spec.is_object() && spec.contains("synthetic")) {
    const json& o = spec.at("synthetic");
    check_keys(o, {"n_buses", "n_gens", "extra_line_ratio", "min_output", "seed"}, "grid.synthetic");
    SyntheticGridOptions opt;
    opt.n_buses = get(o, "n_buses", opt.n_buses);
    opt.n_gens = get(o, "n_gens", opt.n_gens);
    opt.extra_line_ratio = get(o, "extra_line_ratio", opt.extra_line_ratio);
    opt.min_output = get(o, "min_output", opt.min_output);
    opt.seed = get(o, "seed", opt.seed);
    return synthetic_grid(opt);
  }
  throw InputError("grid: expected \"ieee14\", a file path or {\"synthetic\": {...}}");
}

Offers read_offers_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read offers " + path);
  Offers out;
  try {
    const json j = json::parse(in);
    for (const auto& c : j.at("offers")) {
      OfferCurve o;
      const auto e = c.at("edges").get<std::vector<double>>();
      const auto p = c.at("prices").get<std::vector<double>>();
      o.edges = Eigen::Map<const Vector>(e.data(), static_cast<Eigen::Index>(e.size()));
      o.prices = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
      o.no_load_cost = c.value("no_load_cost", 0.0);
      o.validate();
      out.push_back(o);
    }
  } catch (const json::exception& e) {
    throw InputError("offers " + path + ": " + e.what());
  }
  return out;
}

Offers make_offers(const json& spec, const Grid& grid) {
  json s = spec.is_string() ? json{{"kind", spec}} : spec;
  check_keys(s, {"kind", "price_scale", "n_blocks", "c1", "c2", "seed", "path"}, "offers");
  const std::string kind = get<std::string>(s, "kind", "ieee14");
  Offers out;
  if (kind == "ieee14") {
    out = ieee14_baseline(get(s, "price_scale", 100.0), get(s, "n_blocks", 5));
  } else if (kind == "random") {
    const auto c1 = get_range(s, "c1", {10.0, 40.0});
    const auto c2 = get_range(s, "c2", {0.02, 0.12});
    out = random_offers(grid, get(s, "n_blocks", 5), c1.first, c1.second, c2.first, c2.second,
                        get<std::uint64_t>(s, "seed", 1));
  } else if (kind == "file") {
    out = read_offers_file(get<std::string>(s, "path", ""));
  } else {
    throw InputError("offers.kind: expected ieee14, random or file");
  }
  if (static_cast<int>(out.size()) != grid.n_gens()) {
    throw InputError("offers: " + std::to_string(out.size()) + " curves for " + std::to_string(grid.n_gens()) +
                     " generators");
  }
  return out;
}

LoadSweep make_sweep(const json& j) {
  LoadSweep s;
  if (j.is_null()) return s;
  check_keys(j, {"lo", "hi", "jitter"}, "load_sweep");
  s.lo = get(j, "lo", s.lo);
  s.hi = get(j, "hi", s.hi);
  s.jitter = get(j, "jitter", s.jitter);
  return s;
}

json sweep_json(const LoadSweep& s) { return {{"lo", s.lo}, {"hi", s.hi}, {"jitter", s.jitter}}; }

// ---------------------------------------------------------------------------
// Output helpers.

struct Outputs {
  fs::path dir;
  std::vector<std::string> files;

  void write(const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    out << text;
    if (!out) throw InputError("write failed: " + p.string());
    files.push_back(name);
  }

  /// The manifest lists every output with its hash; nothing in it depends on
  /// the clock, so a replay with the same config reproduces it byte for byte.
  void manifest(const std::string& command, const json& config, const json& seeds, const std::string& grid_hash) {
    json m;
    m["format"] = "invlmp-run";
    m["version"] = 1;
    m["command"] = command;
    m["build"] = build_description();
    m["config"] = config;
    m["seeds"] = seeds;
    m["grid_hash"] = grid_hash;
    json out = json::object();
    for (const auto& f : files) {
      std::ifstream in(dir / f, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      out[f] = hex64(fnv1a64(ss.str()));
    }
    m["outputs"] = out;
    std::ofstream(dir / "run_manifest.json") << m.dump(1) << '\n';
  }
};

std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s + "\n";
}

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const json& cfg, std::optional<std::uint64_t> seed, const fs::path& out_dir) {
  check_keys(cfg, {"grid", "offers", "n_scenarios", "seed", "offer_sigma", "load_sweep", "require_all_marginal",
                   "max_attempts"},
             "generate");
  const Grid grid = make_grid(cfg.value("grid", json("ieee14")));
  const json offers_spec = cfg.value("offers", json("ieee14"));
  const Offers baseline = make_offers(offers_spec, grid);
  DatasetConfig dc;
  dc.n_scenarios = get(cfg, "n_scenarios", 200L);
  dc.seed = seed ? *seed : get<std::uint64_t>(cfg, "seed", 1);
  dc.offer_sigma = get(cfg, "offer_sigma", dc.offer_sigma);
  dc.sweep = make_sweep(cfg.value("load_sweep", json()));
  dc.require_all_marginal = get(cfg, "require_all_marginal", false);
  dc.max_attempts = get(cfg, "max_attempts", dc.max_attempts);

  const Dataset data = generate_dataset(grid, baseline, dc);
  write_dataset(data, grid, dc, out_dir);

  Outputs o{out_dir, {"observations.jsonl", "ground_truth.json", "manifest.json", "grid.json"}};
  json effective = {{"grid", cfg.value("grid", json("ieee14"))},
                    {"offers", offers_spec},
                    {"n_scenarios", dc.n_scenarios},
                    {"seed", dc.seed},
                    {"offer_sigma", dc.offer_sigma},
                    {"load_sweep", sweep_json(dc.sweep)},
                    {"require_all_marginal", dc.require_all_marginal},
                    {"max_attempts", dc.max_attempts}};
  o.manifest("generate", effective, {{"dataset", dc.seed}, {"seed_used", data.seed_used}}, hex64(grid_hash(grid)));
  std::cout << "generated " << data.observations.size() << " observations (" << data.skipped.size()
            << " skipped) in " << out_dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// recover

int cmd_recover(const json& cfg, std::optional<std::uint64_t> seed, const fs::path& out_dir, const fs::path& dataset) {
  check_keys(cfg, {"p", "iterations", "eta", "auto_eta", "c_bar", "bounds", "init", "trajectory_stride", "tolerance"},
             "recover");
  const LoadedDataset d = read_dataset(dataset);
  const BlockLayout layout = layout_of(d.edges);
  const auto samples = recover_samples(d.observations, d.grid, d.edges);
  const TrainingSet training = assemble_training_set(samples, layout.total());
  const RecoveryAccounting acc = recovery_accounting(training, layout);

  std::vector<double> ps;
  if (!cfg.contains("p")) {
    ps = {1.0, 2.0};
  } else if (cfg.at("p").is_array()) {
    ps = get<std::vector<double>>(cfg, "p", {});
  } else {
    ps = {get(cfg, "p", 1.0)};
  }
  if (ps.empty()) throw InputError("recover: p must not be empty");

  GdConfig base;
  base.iterations = get(cfg, "iterations", 5000L);
  base.eta = get(cfg, "eta", 0.05);
  base.auto_eta = get(cfg, "auto_eta", false);
  base.c_bar = get(cfg, "c_bar", 0.0);
  base.trajectory_stride = get(cfg, "trajectory_stride", 10L);
  if (cfg.contains("bounds")) base.bounds = get_range(cfg, "bounds", {0.0, 0.0});
  const double tolerance = get(cfg, "tolerance", 0.01);

  // Default start: 10, 20, ... per block when every unit has five blocks,
  // a flat 30 otherwise.
  json init_spec = cfg.value("init", json());
  Vector init(layout.total());
  bool five = true;
  for (int g = 0; g < layout.n_gens(); ++g) five = five && layout.offset[g + 1] - layout.offset[g] == 5;
  if (init_spec.is_number()) {
    init.setConstant(init_spec.get<double>());
  } else if (init_spec.is_array() || (init_spec.is_null() && five)) {
    const auto per_block = init_spec.is_array() ? get<std::vector<double>>(cfg, "init", {})
                                                : std::vector<double>{10, 20, 30, 40, 50};
    for (int g = 0; g < layout.n_gens(); ++g) {
      const int nb = layout.offset[g + 1] - layout.offset[g];
      if (static_cast<int>(per_block.size()) != nb) throw InputError("init: one value per block required");
      for (int j = 0; j < nb; ++j) init(layout.index(g, j)) = per_block[j];
    }
  } else if (init_spec.is_null()) {
    init.setConstant(30.0);
  } else {
    throw InputError("init: expected a number or a per-block list");
  }
  base.init = init;

  std::map<long, std::size_t> where;
  for (std::size_t i = 0; i < d.observations.size(); ++i) where[d.observations[i].id] = i;
  const bool sealed = !d.truth.empty();

  Outputs o{out_dir, {}};
  json runs = json::array();
  std::vector<GdResult> results;
  for (double p : ps) {
    GdConfig gc = base;
    gc.p = p;
    gc.validate();
    const GdResult r = gd_recover(training, gc);
    json blocks = json::array();
    for (int g = 0; g < layout.n_gens(); ++g) {
      for (int j = 0; j < layout.offset[g + 1] - layout.offset[g]; ++j) {
        const int k = layout.index(g, j);
        json b;
        b["gen"] = g + 1;
        b["block"] = j + 1;
        b["N_k"] = training.count(k);
        b["recovered"] = training.count(k) > 0;
        b["c_hat"] = r.c_hat(k);
        b["bound_epsilon"] = error_bound(1, p, r.c_bar, gc.iterations);
        // For p = 1 every point of the median interval is a minimiser, so the
        // error is the distance to that interval.
        double truth = NAN, lo = NAN, hi = NAN;
        if (sealed && training.count(k) > 0) {
          std::vector<double> t;
          for (long id : training.ids[k]) t.push_back(d.truth[where.at(id)](k));
          truth = p_location(t, p);
          lo = hi = truth;
          if (p == 1.0) {
            TrainingSet one;
            one.values = {t};
            std::tie(lo, hi) = median_intervals(one)[0];
          }
          b["iterations_to_tolerance"] = iterations_to_settle(r, k, lo, hi, truth, tolerance);
        }
        b["true"] = number_or_null(truth);
        if (p == 1.0 && std::isfinite(truth)) b["true_interval"] = {lo, hi};
        const double c = r.c_hat(k);
        b["rel_error"] = number_or_null((c < lo ? lo - c : (c > hi ? c - hi : 0.0)) / std::abs(truth));
        blocks.push_back(b);
      }
    }
    runs.push_back({{"p", p},
                    {"eta", r.eta},
                    {"c_bar", r.c_bar},
                    {"iterations", gc.iterations},
                    {"final_loss", r.final_loss},
                    {"average_loss", r.average_loss},
                    {"bound_active", r.bound_active},
                    {"bound_all", r.bound_all},
                    {"blocks", blocks}});

    std::string csv = "iteration";
    for (int k = 0; k < layout.total(); ++k) {
      csv += "," + block_name(layout.gen_of[k], k - layout.offset[layout.gen_of[k]]);
    }
    csv += "\n";
    for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
      csv += std::to_string(r.trajectory_iterations[i]);
      for (int k = 0; k < layout.total(); ++k) csv += "," + fmt(r.trajectory[i](k));
      csv += "\n";
    }
    o.write("trajectory_" + p_name(p) + ".csv", csv);
    results.push_back(r);
  }

  // One file per block with every norm side by side.
  for (int k = 0; k < layout.total(); ++k) {
    const int g = layout.gen_of[k];
    std::string csv = "iteration";
    for (double p : ps) csv += "," + p_name(p);
    csv += "\n";
    for (std::size_t i = 0; i < results[0].trajectory.size(); ++i) {
      csv += std::to_string(results[0].trajectory_iterations[i]);
      for (const auto& r : results) csv += "," + fmt(r.trajectory[i](k));
      csv += "\n";
    }
    o.write("trajectories/" + block_name(g, k - layout.offset[g]) + ".csv", csv);
  }

  json report;
  report["format"] = "invlmp-recovery";
  report["version"] = 1;
  report["observations"] = d.observations.size();
  report["ground_truth"] = sealed;
  report["accounting"] = {{"total", acc.total},
                          {"recovered", acc.recovered},
                          {"non_free", acc.non_free},
                          {"never_marginal", acc.never_marginal},
                          {"rate", acc.rate()},
                          {"consistent", acc.consistent()}};
  report["runs"] = runs;
  o.write("recovery_report.json", report.dump(1) + "\n");

  json effective = {{"dataset", dataset.string()},
                    {"p", ps},
                    {"iterations", base.iterations},
                    {"eta", base.eta},
                    {"auto_eta", base.auto_eta},
                    {"c_bar", base.c_bar},
                    {"trajectory_stride", base.trajectory_stride},
                    {"tolerance", tolerance},
                    {"init", std::vector<double>(init.data(), init.data() + init.size())}};
  if (base.bounds) effective["bounds"] = {base.bounds->first, base.bounds->second};
  json seeds = json::object();
  if (seed) seeds["cli"] = *seed;
  o.manifest("recover", effective, seeds, hex64(grid_hash(d.grid)));
  std::cout << "recovered " << acc.recovered << "/" << acc.total << " blocks from " << d.observations.size()
            << " observations\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// table3

int cmd_table3(const json& cfg, std::optional<std::uint64_t> seed, const fs::path& out_dir) {
  check_keys(cfg, {"grid", "offers", "n_scenarios", "seeds", "offer_sigma", "load_sweep", "target_gen", "target_block",
                   "iterations", "eta", "init", "granularity", "settings", "l1_tolerance", "ratio"},
             "table3");
  const Grid grid = make_grid(cfg.value("grid", json("ieee14")));
  const json offers_spec = cfg.value("offers", json("ieee14"));
  const Offers baseline = make_offers(offers_spec, grid);
  RobustnessConfig rc;
  rc.dataset.n_scenarios = get(cfg, "n_scenarios", 10000L);
  rc.dataset.offer_sigma = get(cfg, "offer_sigma", rc.dataset.offer_sigma);
  rc.dataset.sweep = make_sweep(cfg.value("load_sweep", json()));
  rc.target_gen = get(cfg, "target_gen", 3) - 1;
  rc.target_block = get(cfg, "target_block", 3) - 1;
  rc.iterations = get(cfg, "iterations", rc.iterations);
  rc.eta = get(cfg, "eta", rc.eta);
  rc.init = get(cfg, "init", rc.init);
  const std::string gran = get<std::string>(cfg, "granularity", "entry");
  if (gran != "entry" && gran != "observation") throw InputError("granularity: expected entry or observation");
  rc.granularity = gran == "entry" ? NoiseSpec::Granularity::kEntry : NoiseSpec::Granularity::kObservation;
  if (cfg.contains("settings")) {
    rc.settings.clear();
    for (const auto& s : cfg.at("settings")) {
      check_keys(s, {"name", "frequency", "mu", "sigma"}, "settings[]");
      rc.settings.push_back({get<std::string>(s, "name", ""), get(s, "frequency", 0.0), get(s, "mu", 0.0),
                             get(s, "sigma", 0.0)});
    }
  }
  if (rc.target_gen < 0 || rc.target_gen >= grid.n_gens() || rc.target_block < 0 ||
      rc.target_block >= baseline[rc.target_gen].n_blocks()) {
    throw InputError("target_gen/target_block: out of range (both are 1-based)");
  }
  const double l1_tol = get(cfg, "l1_tolerance", 0.01);
  const double ratio = get(cfg, "ratio", 5.0);
  std::vector<std::uint64_t> seeds = get<std::vector<std::uint64_t>>(cfg, "seeds", {1});
  if (seed) seeds = {*seed};
  if (seeds.empty()) throw InputError("seeds: empty list");

  const std::vector<std::string> header{"seed",       "setting",   "samples",  "corrupted_samples", "truth",
                                        "c_hat_l1",   "err_l1",    "c_hat_l2", "err_l2"};
  std::string csv = csv_line(header);
  std::vector<RobustnessRun> runs;
  json per_seed = json::array();
  int passing = 0;
  for (auto s : seeds) {
    rc.dataset.seed = s;
    runs.push_back(run_robustness(grid, baseline, rc));
    const bool ok = runs.back().pattern_holds(l1_tol, ratio);
    passing += ok;
    per_seed.push_back({{"seed", s}, {"pattern_holds", ok}});
    for (const auto& r : runs.back().rows) {
      csv += csv_line({std::to_string(s), r.setting, std::to_string(r.samples), std::to_string(r.corrupted_samples),
                       fmt(r.truth), fmt(r.c_hat_l1), fmt(r.err_l1), fmt(r.c_hat_l2), fmt(r.err_l2)});
    }
  }
  // Aggregate rows: mean over seeds, setting by setting.
  const double n = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < rc.settings.size(); ++i) {
    double samples = 0, corrupted = 0, truth = 0, c1 = 0, e1 = 0, c2 = 0, e2 = 0;
    for (const auto& run : runs) {
      const auto& r = run.rows[i];
      samples += r.samples;
      corrupted += r.corrupted_samples;
      truth += r.truth;
      c1 += r.c_hat_l1;
      e1 += r.err_l1;
      c2 += r.c_hat_l2;
      e2 += r.err_l2;
    }
    csv += csv_line({"mean", rc.settings[i].name, fmt(samples / n), fmt(corrupted / n), fmt(truth / n), fmt(c1 / n),
                     fmt(e1 / n), fmt(c2 / n), fmt(e2 / n)});
  }
  Outputs o{out_dir, {}};
  o.write("table3.csv", csv);
  json summary = {{"seeds", per_seed}, {"passing", passing}, {"total", runs.size()}};
  o.write("table3_summary.json", summary.dump(1) + "\n");

  json settings = json::array();
  for (const auto& s : rc.settings) {
    settings.push_back({{"name", s.name}, {"frequency", s.frequency}, {"mu", s.mu}, {"sigma", s.sigma}});
  }
  json effective = {{"grid", cfg.value("grid", json("ieee14"))},
                    {"offers", offers_spec},
                    {"n_scenarios", rc.dataset.n_scenarios},
                    {"offer_sigma", rc.dataset.offer_sigma},
                    {"load_sweep", sweep_json(rc.dataset.sweep)},
                    {"target_gen", rc.target_gen + 1},
                    {"target_block", rc.target_block + 1},
                    {"iterations", rc.iterations},
                    {"eta", rc.eta},
                    {"init", rc.init},
                    {"granularity", gran},
                    {"settings", settings},
                    {"l1_tolerance", l1_tol},
                    {"ratio", ratio}};
  o.manifest("table3", effective, {{"datasets", seeds}}, hex64(grid_hash(grid)));
  std::cout << "pattern holds on " << passing << "/" << runs.size() << " seeds\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// mismatch

int cmd_mismatch(const json& cfg, std::optional<std::uint64_t> seed, const fs::path& out_dir) {
  check_keys(cfg, {"grid", "seed", "windows", "hours_per_window", "n_blocks", "c1", "c2", "offer_sigma", "level",
                   "daily_amplitude", "hourly_jitter", "bus_jitter", "reserve_up", "reserve_down", "ramp_fraction",
                   "lmp_noise", "p", "iterations", "eta", "init", "histogram", "node_limit"},
             "mismatch");
  MismatchConfig mc;
  if (cfg.contains("grid")) {
    const json& g = cfg.at("grid");
    check_keys(g, {"n_buses", "n_gens", "extra_line_ratio", "min_output", "seed"}, "mismatch.grid");
    mc.grid.n_buses = get(g, "n_buses", mc.grid.n_buses);
    mc.grid.n_gens = get(g, "n_gens", mc.grid.n_gens);
    mc.grid.extra_line_ratio = get(g, "extra_line_ratio", mc.grid.extra_line_ratio);
    mc.grid.min_output = get(g, "min_output", mc.grid.min_output);
    mc.grid.seed = get(g, "seed", mc.grid.seed);
  }
  mc.seed = seed ? *seed : get<std::uint64_t>(cfg, "seed", mc.seed);
  mc.windows = get(cfg, "windows", mc.windows);
  mc.hours_per_window = get(cfg, "hours_per_window", mc.hours_per_window);
  mc.n_blocks = get(cfg, "n_blocks", mc.n_blocks);
  std::tie(mc.c1_lo, mc.c1_hi) = get_range(cfg, "c1", {mc.c1_lo, mc.c1_hi});
  std::tie(mc.c2_lo, mc.c2_hi) = get_range(cfg, "c2", {mc.c2_lo, mc.c2_hi});
  mc.offer_sigma = get(cfg, "offer_sigma", mc.offer_sigma);
  std::tie(mc.level_lo, mc.level_hi) = get_range(cfg, "level", {mc.level_lo, mc.level_hi});
  mc.daily_amplitude = get(cfg, "daily_amplitude", mc.daily_amplitude);
  mc.hourly_jitter = get(cfg, "hourly_jitter", mc.hourly_jitter);
  mc.bus_jitter = get(cfg, "bus_jitter", mc.bus_jitter);
  mc.reserve_up = get(cfg, "reserve_up", mc.reserve_up);
  mc.reserve_down = get(cfg, "reserve_down", mc.reserve_down);
  mc.ramp_fraction = get(cfg, "ramp_fraction", mc.ramp_fraction);
  if (cfg.contains("lmp_noise")) {
    const json& n = cfg.at("lmp_noise");
    check_keys(n, {"frequency", "mu", "sigma", "seed"}, "lmp_noise");
    mc.lmp_noise.frequency = get(n, "frequency", mc.lmp_noise.frequency);
    mc.lmp_noise.mu = get(n, "mu", mc.lmp_noise.mu);
    mc.lmp_noise.sigma = get(n, "sigma", mc.lmp_noise.sigma);
    mc.lmp_noise.seed = get(n, "seed", mc.lmp_noise.seed);
  }
  mc.p = get(cfg, "p", mc.p);
  mc.iterations = get(cfg, "iterations", mc.iterations);
  mc.eta = get(cfg, "eta", mc.eta);
  mc.init = get(cfg, "init", mc.init);
  if (cfg.contains("histogram")) {
    const json& h = cfg.at("histogram");
    check_keys(h, {"lo", "hi", "bins"}, "histogram");
    mc.histogram_lo = get(h, "lo", mc.histogram_lo);
    mc.histogram_hi = get(h, "hi", mc.histogram_hi);
    mc.histogram_bins = get(h, "bins", mc.histogram_bins);
  }
  mc.scuc.market.milp.node_limit = get(cfg, "node_limit", mc.scuc.market.milp.node_limit);
  mc.validate();

  const MismatchResult r = run_mismatch(mc);
  if (r.windows_solved == 0) {
    std::cerr << "error: no window could be cleared\n";
    return kSolverFailure;
  }
  const BlockLayout layout(r.baseline);
  const Vector truth = flat_prices(r.baseline);

  Outputs o{out_dir, {}};
  std::string errors = csv_line({"setting", "gen", "block", "truth", "c_hat", "rel_error"});
  for (const auto& s : r.settings) {
    for (std::size_t i = 0; i < s.blocks.size(); ++i) {
      const int k = s.blocks[i];
      const int g = layout.gen_of[k];
      errors += csv_line({s.name, std::to_string(g + 1), std::to_string(k - layout.offset[g] + 1), fmt(truth(k)),
                          fmt(s.gd.c_hat(k)), fmt(s.rel_errors[i])});
    }
  }
  o.write("mismatch_errors.csv", errors);

  std::vector<std::string> hist_header{"bin_lo", "bin_hi"};
  std::vector<std::string> names;
  std::vector<std::vector<double>> counts;
  for (const auto& s : r.settings) {
    hist_header.push_back(s.name);
    names.push_back(s.name);
    counts.emplace_back(s.histogram.begin(), s.histogram.end());
  }
  std::string hist = csv_line(hist_header);
  std::vector<double> edges;
  const double width = (mc.histogram_hi - mc.histogram_lo) / mc.histogram_bins;
  for (int b = 0; b <= mc.histogram_bins; ++b) edges.push_back(mc.histogram_lo + width * b);
  for (int b = 0; b < mc.histogram_bins; ++b) {
    std::vector<std::string> row{fmt(edges[b]), fmt(edges[b + 1])};
    for (const auto& c : counts) row.push_back(fmt(c[b]));
    hist += csv_line(row);
  }
  o.write("mismatch_histogram.csv", hist);
  o.write("mismatch_histogram.svg",
          svg_histogram(edges, names, counts, "Relative error of recovered prices", "relative error (%)"));

  const double total = static_cast<double>(std::max(1L, r.binding.total()));
  std::string binding = csv_line({"category", "count", "fraction"});
  const std::vector<std::pair<std::string, long>> cats{{"only_power", r.binding.only_power},
                                                       {"only_ramp", r.binding.only_ramp},
                                                       {"both", r.binding.both},
                                                       {"neither", r.binding.neither}};
  for (const auto& [name, c] : cats) binding += csv_line({name, std::to_string(c), fmt(c / total)});
  o.write("binding.csv", binding);
  o.write("grid.json", grid_to_json_text(r.grid));

  const bool ramp_rarest = r.binding.only_ramp < r.binding.only_power && r.binding.only_ramp < r.binding.both &&
                           r.binding.only_ramp < r.binding.neither;
  json settings = json::array();
  for (const auto& s : r.settings) {
    double mean = 0.0;
    for (double e : s.rel_errors) mean += e;
    if (!s.rel_errors.empty()) mean /= static_cast<double>(s.rel_errors.size());
    settings.push_back({{"name", s.name},
                        {"blocks", s.blocks.size()},
                        {"mean_rel_error", mean},
                        {"mean_abs_rel_error", s.mean_abs_rel_error},
                        {"accounting",
                         {{"total", s.accounting.total},
                          {"recovered", s.accounting.recovered},
                          {"non_free", s.accounting.non_free},
                          {"never_marginal", s.accounting.never_marginal},
                          {"rate", s.accounting.rate()}}}});
  }
  json summary = {{"windows_solved", r.windows_solved},
                  {"skipped", r.skipped},
                  {"scuc_nodes", r.scuc_nodes},
                  {"binding",
                   {{"only_power", r.binding.only_power},
                    {"only_ramp", r.binding.only_ramp},
                    {"both", r.binding.both},
                    {"neither", r.binding.neither}}},
                  {"only_ramp_rarest", ramp_rarest},
                  {"settings", settings}};
  o.write("mismatch_summary.json", summary.dump(1) + "\n");

  json effective = {{"grid",
                     {{"n_buses", mc.grid.n_buses},
                      {"n_gens", mc.grid.n_gens},
                      {"extra_line_ratio", mc.grid.extra_line_ratio},
                      {"min_output", mc.grid.min_output},
                      {"seed", mc.grid.seed}}},
                    {"seed", mc.seed},
                    {"windows", mc.windows},
                    {"hours_per_window", mc.hours_per_window},
                    {"n_blocks", mc.n_blocks},
                    {"c1", {mc.c1_lo, mc.c1_hi}},
                    {"c2", {mc.c2_lo, mc.c2_hi}},
                    {"offer_sigma", mc.offer_sigma},
                    {"level", {mc.level_lo, mc.level_hi}},
                    {"daily_amplitude", mc.daily_amplitude},
                    {"hourly_jitter", mc.hourly_jitter},
                    {"bus_jitter", mc.bus_jitter},
                    {"reserve_up", mc.reserve_up},
                    {"reserve_down", mc.reserve_down},
                    {"ramp_fraction", mc.ramp_fraction},
                    {"lmp_noise",
                     {{"frequency", mc.lmp_noise.frequency},
                      {"mu", mc.lmp_noise.mu},
                      {"sigma", mc.lmp_noise.sigma},
                      {"seed", mc.lmp_noise.seed}}},
                    {"p", mc.p},
                    {"iterations", mc.iterations},
                    {"eta", mc.eta},
                    {"init", mc.init},
                    {"histogram", {{"lo", mc.histogram_lo}, {"hi", mc.histogram_hi}, {"bins", mc.histogram_bins}}},
                    {"node_limit", mc.scuc.market.milp.node_limit}};
  o.manifest("mismatch", effective, {{"mismatch", mc.seed}, {"grid", mc.grid.seed}, {"lmp_noise", mc.lmp_noise.seed}},
             hex64(grid_hash(r.grid)));
  std::cout << "solved " << r.windows_solved << "/" << mc.windows << " windows; only-ramp rarest: "
            << (ramp_rarest ? "yes" : "no") << "\n";
  for (const auto& s : r.settings) {
    std::cout << "  " << s.name << ": " << s.blocks.size() << " blocks, mean |error| "
              << fmt(100.0 * s.mean_abs_rel_error) << "%\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// plot

int cmd_plot(const std::vector<std::string>& csvs, const fs::path& out_dir, const std::string& title) {
  Outputs o{out_dir, {}};
  json inputs = json::array();
  for (const auto& path : csvs) {
    const CsvTable t = read_csv(path);
    const std::string stem = fs::path(path).stem().string();
    o.write(stem + ".svg", svg_from_csv(t, title.empty() ? stem : title));
    inputs.push_back(path);
  }
  o.manifest("plot", {{"inputs", inputs}, {"title", title}}, json::object(), "");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse optimization of offer prices from published market outcomes"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed_value = 0;
  std::string out = ".";

  auto add_common = [&](CLI::App* sub, const std::string& default_out) {
    sub->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed_value, "Override the configured seed");
    sub->add_option("--out", out, "Output directory")->default_val(default_out);
  };
  auto* gen = app.add_subcommand("generate", "Clear sampled markets and write a dataset");
  add_common(gen, "dataset");
  auto* rec = app.add_subcommand("recover", "Recover offer prices from a dataset");
  add_common(rec, "recovery");
  std::string dataset_dir;
  rec->add_option("--dataset", dataset_dir, "Dataset directory written by generate")->required();
  auto* t3 = app.add_subcommand("table3", "Robustness of l1 and l2 recovery to LMP errors");
  add_common(t3, "table3");
  auto* mis = app.add_subcommand("mismatch", "Recover plain-model prices from reserve and ramping clearings");
  add_common(mis, "mismatch");
  auto* plt = app.add_subcommand("plot", "Render CSV files as SVG");
  std::vector<std::string> csvs;
  std::string title;
  plt->add_option("csv", csvs, "CSV files")->required();
  plt->add_option("--out", out, "Output directory")->default_val(".");
  plt->add_option("--title", title, "Chart title (default: file stem)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub == plt) return cmd_plot(csvs, out, title);
    const json cfg = load_config(config_path);
    std::optional<std::uint64_t> seed;
    if (sub->count("--seed")) seed = seed_value;
    if (sub == gen) return cmd_generate(cfg, seed, out);
    if (sub == rec) return cmd_recover(cfg, seed, out, dataset_dir);
    if (sub == t3) return cmd_table3(cfg, seed, out);
    if (sub == mis) return cmd_mismatch(cfg, seed, out);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ClearingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kUsage;
}
