// privsec: corpus synthesis, single pipeline stages and the experiment grid.
//
// Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 budget refusal.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "privsec/attack.hpp"
#include "privsec/dbscan.hpp"
#include "privsec/error.hpp"
#include "privsec/experiment.hpp"
#include "privsec/porto.hpp"
#include "privsec/privacy.hpp"
#include "privsec/report.hpp"
#include "privsec/roc.hpp"
#include "privsec/seq_model.hpp"
#include "privsec/synth.hpp"

namespace fs = std::filesystem;
using namespace privsec;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::string out;
  std::string detector;
  std::string privacy;
  std::optional<double> epsilon;
  std::optional<double> c;
  std::optional<double> q;
  std::string od;
};

void print_summary(const Corpus& c, double cell_side) {
  const auto groups = c.trajectories.empty() ? OdGroups{} : group_by_od(c, cell_side);
  std::printf("trips=%zu bbox=[%.6f,%.6f,%.6f,%.6f] od_groups=%zu\n", c.size(), c.bbox.min_lon,
              c.bbox.min_lat, c.bbox.max_lon, c.bbox.max_lat, groups.size());
}

std::string require_out(const Flags& f) {
  if (f.out.empty()) throw ValidationError("--out is required");
  return f.out;
}

RunConfig base_config(const Flags& f) {
  RunConfig rc;
  if (!f.config.empty()) rc = load_run_config(f.config);
  if (f.seed) rc.grid.seed = *f.seed;
  if (f.jobs) rc.grid.jobs = *f.jobs;
  return rc;
}

// Writes outputs under a temporary name first so a failure leaves nothing.
template <class F>
void write_atomically(const std::string& path, F&& write) {
  const std::string tmp = path + ".partial";
  try {
    write(tmp);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    fs::remove(meta_path(tmp), ec);
    throw;
  }
  fs::rename(tmp, path);
  if (fs::exists(meta_path(tmp))) fs::rename(meta_path(tmp), meta_path(path));
}

int cmd_synth(const Flags& f, std::optional<int> n_trips, std::optional<int> n_od) {
  RunConfig rc = base_config(f);
  SynthParams p = rc.corpus.synth;
  if (f.seed) p.seed = *f.seed;
  if (n_trips) p.n_trips = *n_trips;
  if (n_od) p.n_od_pairs = *n_od;
  const Corpus c = synth_corpus(p);
  const std::string out = require_out(f);
  write_atomically(out, [&](const std::string& tmp) { write_corpus(c, tmp); });
  print_summary(c, rc.grid.cell_side_m);
  return 0;
}

int cmd_ingest(const Flags& f, const std::string& input, int min_points) {
  const std::string out = require_out(f);
  const auto r = ingest_porto(input, min_points);
  write_atomically(out, [&](const std::string& tmp) { write_corpus(r.corpus, tmp); });
  std::printf("rows=%zu kept=%zu dropped=%zu (missing_data=%zu short=%zu malformed=%zu)\n",
              r.stats.rows, r.stats.kept, r.stats.dropped(), r.stats.dropped_missing,
              r.stats.dropped_short, r.stats.malformed);
  print_summary(r.corpus, kDefaultCellSideM);
  return 0;
}

int cmd_perturb(const Flags& f, const std::string& input, double threshold_l, double test_fraction) {
  const std::string out = require_out(f);
  if (f.privacy.empty()) throw ValidationError("--privacy is required");
  PrivacyConfig cfg;
  cfg.mode = parse_privacy_mode(f.privacy);
  if (cfg.mode != PrivacyMode::None) {
    if (!f.epsilon) throw ValidationError("--epsilon is required for --privacy " + f.privacy);
    cfg.epsilon = *f.epsilon;
  }
  cfg.threshold_l = threshold_l;
  cfg.test_fraction = test_fraction;
  cfg.seed = f.seed.value_or(0);
  cfg.validate();
  const Corpus c = read_corpus(input).corpus;
  const auto p = perturb_corpus(c, cfg);
  write_atomically(out, [&](const std::string& tmp) { write_corpus(p.corpus, tmp); });
  auto rep = csv::open_out(out + ".report.csv");
  rep << "trip_id,n_points,n_predicted,epsilon_mode\n";
  const std::string mode = cfg.mode == PrivacyMode::None
                               ? "none"
                               : std::string(to_string(cfg.mode)) + ":" + csv::fmt_exact(cfg.epsilon);
  for (std::size_t i = 0; i < p.reports.size(); ++i) {
    rep << p.corpus.trajectories[i].id << "," << p.reports[i].n_points << ","
        << p.reports[i].n_predicted << "," << mode << "\n";
  }
  if (!rep) throw IoError("write failed: " + out + ".report.csv");
  std::printf("perturbed %zu trips (%s)\n", p.corpus.size(), mode.c_str());
  return 0;
}

int cmd_attack(const Flags& f, const std::string& input, double fraction, std::string manifest) {
  const std::string out = require_out(f);
  MaliciousIntent intent;
  if (f.c) intent.c = *f.c;
  if (f.q) intent.q = *f.q;
  if (!f.od.empty()) intent.od_mode = parse_od_mode(f.od);
  intent.validate();
  RunConfig rc = base_config(f);
  Corpus c = read_corpus(input).corpus;
  if (c.count(Split::Test) == 0) {
    // No split yet: use the experiment's seeded per-group split.
    apply_split(c, split_test(c, group_by_od(c, rc.grid.cell_side_m), rc.grid.test_per_group,
                              derive_seed(rc.grid.seed, "split")));
  }
  const auto targets = ids_in_split(c, Split::Test);
  const auto r = inject_attacks(c, targets, intent, fraction, f.seed.value_or(0));
  write_atomically(out, [&](const std::string& tmp) { write_corpus(r.corpus, tmp); });
  if (manifest.empty()) manifest = out + ".manifest.csv";
  write_manifest(r.manifest, manifest);
  std::printf("injected=%zu rejected=%zu manifest=%s\n", r.manifest.size(), r.rejected,
              manifest.c_str());
  return 0;
}

int cmd_detect(const Flags& f, const std::string& input, std::optional<int> min_pts, double eps_m,
               std::optional<unsigned long long> budget, const std::string& model_in,
               const std::string& model_out) {
  const std::string out = require_out(f);
  RunConfig rc = base_config(f);
  const DetectorKind det = parse_detector(f.detector.empty() ? "dbscan" : f.detector);
  const Corpus c = read_corpus(input).corpus;
  std::vector<ScoredTrip> scores;
  if (det == DetectorKind::Dbscan) {
    DbscanDetectOptions opt;
    opt.params = {eps_m, min_pts.value_or(rc.grid.min_pts_candidates.front() + 1), 0};
    opt.cell_side = rc.grid.cell_side_m;
    opt.pair_budget = budget.value_or(rc.grid.pair_budget);
    opt.jobs = rc.grid.jobs;
    opt.cache_dir = rc.grid.matrix_cache_dir;
    const auto r = dbscan_detect(c, opt);
    scores = r.scores;
    std::printf("groups=%zu clusters=%zu noise=%zu unscorable=%zu pairs=%llu s_per_1k_pairs=%.6f\n",
                r.groups, r.clusters, r.noise_trips, r.sentinel_scores, r.timing.pairs,
                r.timing.seconds_per_1k_pairs());
  } else {
    std::optional<SeqModel> model;
    if (!model_in.empty()) {
      model.emplace(SeqModel::load(model_in));
    } else {
      SeqModelConfig cfg = rc.grid.seq;
      if (f.seed) cfg.seed = *f.seed;
      TrainReport rep;
      model.emplace(train_seq_detector(c, cfg, &rep));
      if (!rep.epoch_loss.empty()) {
        std::printf("trained %zu params, final epoch loss %.6g\n", rep.parameter_count,
                    rep.epoch_loss.back());
      }
    }
    if (!model_out.empty()) model->save(model_out);
    scores = seq_score_tests(*model, c);
  }
  attach_truth(scores, c);
  write_scores(scores, out);
  bool pos = false, neg = false;
  for (const auto& s : scores) (s.truth == Label::Malicious ? pos : neg) = true;
  if (pos && neg) std::printf("auc=%.6f\n", roc(scores).auc);
  std::printf("scored %zu test trips -> %s\n", scores.size(), out.c_str());
  return 0;
}

int cmd_experiment(const Flags& f) {
  RunConfig rc = base_config(f);
  if (!f.out.empty()) rc.out_dir = f.out;
  auto& g = rc.grid;
  // Optional slicing of the grid from the command line.
  if (!f.detector.empty()) g.detectors = {parse_detector(f.detector)};
  if (!f.privacy.empty()) {
    const PrivacyMode m = parse_privacy_mode(f.privacy);
    std::vector<PrivacySetting> keep;
    for (const auto& p : g.privacy) {
      if (p.mode == m && (!f.epsilon || m == PrivacyMode::None || p.epsilon == *f.epsilon)) {
        keep.push_back(p);
      }
    }
    if (keep.empty() && m != PrivacyMode::None && f.epsilon) keep.push_back({m, *f.epsilon});
    if (keep.empty()) keep.push_back({m, f.epsilon.value_or(0.0)});
    g.privacy = keep;
  } else if (f.epsilon) {
    std::vector<PrivacySetting> keep;
    for (const auto& p : g.privacy) {
      if (p.mode == PrivacyMode::None || p.epsilon == *f.epsilon) keep.push_back(p);
    }
    g.privacy = keep;
  }
  if (f.c || f.q) {
    std::vector<Intent> keep;
    for (const auto& i : g.intents) {
      if ((!f.c || i.c == *f.c) && (!f.q || i.q == *f.q)) keep.push_back(i);
    }
    if (keep.empty()) keep.push_back({f.c.value_or(300.0), f.q.value_or(0.5)});
    g.intents = keep;
  }
  if (!f.od.empty()) g.od_modes = {parse_od_mode(f.od)};
  g.validate();

  const Corpus corpus = prepare_corpus(rc);
  std::printf("corpus: ");
  print_summary(corpus, g.cell_side_m);
  const auto result = run_grid(corpus, g);
  const fs::path dir(rc.out_dir);
  write_results(result, dir);
  const auto panels = write_report(dir);
  std::size_t ok = 0;
  for (const auto& c : result.cells) ok += c.auc ? 1 : 0;
  std::printf("cells=%zu scored=%zu panels=%zu -> %s\n", result.cells.size(), ok, panels.size(),
              dir.string().c_str());
  return 0;
}

int cmd_report(const Flags& f, std::string dir) {
  if (dir.empty()) dir = f.out;
  if (dir.empty()) throw ValidationError("results directory required");
  const auto panels = write_report(dir);
  std::printf("summary.md + %zu panels -> %s\n", panels.size(), dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Location privacy vs. trajectory anomaly detection workbench"};
  app.require_subcommand(1);
  Flags f;
  auto env = [](const char* name) { return std::string("PRIVSEC_") + name; };
  app.add_option("--config", f.config, "JSON run configuration")->envname(env("CONFIG"));
  app.add_option("--seed", f.seed, "Random seed")->envname(env("SEED"));
  app.add_option("--jobs", f.jobs, "Worker threads")->envname(env("JOBS"));
  app.add_option("--out", f.out, "Output file or directory")->envname(env("OUT"));
  app.add_option("--detector", f.detector, "dbscan|seq")->envname(env("DETECTOR"));
  app.add_option("--privacy", f.privacy, "none|location|trajectory")->envname(env("PRIVACY"));
  app.add_option("--epsilon", f.epsilon, "Privacy level per point, 1/m")->envname(env("EPSILON"));
  app.add_option("--c", f.c, "Attack displacement per point, m")->envname(env("C"));
  app.add_option("--q", f.q, "Fraction of points tampered")->envname(env("Q"));
  app.add_option("--od", f.od, "same|shifted")->envname(env("OD"));

  std::optional<int> n_trips, n_od;
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus");
  synth->add_option("--n-trips", n_trips);
  synth->add_option("--n-od-pairs", n_od);

  std::string input;
  int min_points = kDefaultMinPoints;
  auto* ingest = app.add_subcommand("ingest", "Ingest a Porto-format CSV");
  ingest->add_option("input", input)->required();
  ingest->add_option("--min-points", min_points, "Keep trips with more points than this");

  double threshold_l = -1.0, test_fraction = 0.1;
  auto* perturb = app.add_subcommand("perturb", "Apply a privacy mechanism");
  perturb->add_option("input", input)->required();
  perturb->add_option("--threshold-l", threshold_l, "Prediction test radius, m (default 2/eps)");
  perturb->add_option("--test-fraction", test_fraction);

  double fraction = 1.0;
  std::string manifest;
  auto* attack = app.add_subcommand("attack", "Inject fabricated trips");
  attack->add_option("input", input)->required();
  attack->add_option("--fraction", fraction, "Share of target trips attacked");
  attack->add_option("--manifest", manifest);

  std::optional<int> min_pts;
  double eps_m = 200.0;
  std::optional<unsigned long long> budget;
  std::string model_in, model_out;
  auto* detect = app.add_subcommand("detect", "Score test trips");
  detect->add_option("input", input)->required();
  detect->add_option("--min-pts", min_pts);
  detect->add_option("--eps-m", eps_m);
  detect->add_option("--budget", budget, "Max pairwise distances");
  detect->add_option("--model", model_in, "Load a sequence model checkpoint");
  detect->add_option("--save-model", model_out);

  auto* experiment = app.add_subcommand("experiment", "Run the experiment grid");

  std::string results_dir;
  auto* report = app.add_subcommand("report", "Re-render summary and plots from results");
  report->add_option("dir", results_dir);

  for (auto* s : {synth, ingest, perturb, attack, detect, experiment, report}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(f, n_trips, n_od);
    if (*ingest) return cmd_ingest(f, input, min_points);
    if (*perturb) return cmd_perturb(f, input, threshold_l, test_fraction);
    if (*attack) return cmd_attack(f, input, fraction, manifest);
    if (*detect) return cmd_detect(f, input, min_pts, eps_m, budget, model_in, model_out);
    if (*experiment) return cmd_experiment(f);
    if (*report) return cmd_report(f, results_dir);
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
