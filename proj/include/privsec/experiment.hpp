#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "privsec/attack.hpp"
#include "privsec/csv.hpp"
#include "privsec/dbscan.hpp"
#include "privsec/error.hpp"
#include "privsec/porto.hpp"
#include "privsec/privacy.hpp"
#include "privsec/roc.hpp"
#include "privsec/seq_model.hpp"
#include "privsec/synth.hpp"
#include "privsec/trajectory.hpp"

namespace privsec {

struct PrivacySetting {
  PrivacyMode mode = PrivacyMode::None;
  double epsilon = 0.0;  // unused for None

  std::string label() const {
    if (mode == PrivacyMode::None) return "none";
    return std::string(to_string(mode)) + "@" + csv::fmt_double(epsilon, 3);
  }
  auto operator<=>(const PrivacySetting&) const = default;
};

struct Intent {
  double c = 0.0;
  double q = 0.0;
  auto operator<=>(const Intent&) const = default;
};

enum class DetectorKind { Dbscan, Seq };

inline const char* to_string(DetectorKind d) { return d == DetectorKind::Dbscan ? "dbscan" : "seq"; }

inline DetectorKind parse_detector(const std::string& s) {
  if (s == "dbscan") return DetectorKind::Dbscan;
  if (s == "seq") return DetectorKind::Seq;
  throw ValidationError("unknown detector '" + s + "' (expected dbscan|seq)");
}

struct ExperimentGrid {
  std::vector<PrivacySetting> privacy{{PrivacyMode::None, 0.0},
                                      {PrivacyMode::LocationBased, 0.1},
                                      {PrivacyMode::LocationBased, 0.01},
                                      {PrivacyMode::TrajectoryBased, 0.1},
                                      {PrivacyMode::TrajectoryBased, 0.01}};
  std::vector<Intent> intents{{300, 0.5}, {500, 0.7}, {700, 1.0}};
  std::vector<OdMode> od_modes{OdMode::SameOD, OdMode::ShiftedOD};
  std::vector<DetectorKind> detectors{DetectorKind::Dbscan, DetectorKind::Seq};
  std::uint64_t seed = 2024;

  // Split and attack injection.
  int test_per_group = 5;
  double attack_fraction = 1.0;
  double cell_side_m = kDefaultCellSideM;

  // Trajectory-based mechanism.
  double threshold_l = -1.0;
  double test_fraction = 0.1;

  // Clustering detector.
  double dbscan_eps_m = 200.0;
  std::vector<int> min_pts_candidates{2, 3, 4, 5};
  unsigned long long pair_budget = 5'000'000;
  std::string matrix_cache_dir;

  SeqModelConfig seq;
  unsigned jobs = 1;

  void validate() const {
    if (privacy.empty() || intents.empty() || od_modes.empty() || detectors.empty()) {
      throw ValidationError("grid: every axis needs at least one value");
    }
    for (const auto& p : privacy) {
      PrivacyConfig cfg{p.mode, p.mode == PrivacyMode::None ? 0.1 : p.epsilon, threshold_l,
                        test_fraction, 0};
      cfg.validate();
    }
    for (const auto& i : intents) MaliciousIntent{i.c, i.q, OdMode::SameOD}.validate();
    if (test_per_group < 1) throw ValidationError("grid: test_per_group must be >= 1");
    if (!(attack_fraction > 0 && attack_fraction <= 1)) {
      throw ValidationError("grid: attack_fraction must lie in (0, 1]");
    }
    if (!(cell_side_m > 0)) throw ValidationError("grid: cell_side_m must be > 0");
    if (min_pts_candidates.empty()) throw ValidationError("grid: no min_pts candidates");
    for (int k : min_pts_candidates) DbscanParams{dbscan_eps_m, k, 0}.validate();
    seq.validate();
  }
};

struct CellResult {
  DetectorKind detector = DetectorKind::Dbscan;
  PrivacySetting privacy;
  Intent intent;
  OdMode od_mode = OdMode::SameOD;
  std::string status = "ok";  // ok | n/a | refused: ... | error: ...
  std::optional<double> auc;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  int min_pts = 0;  // clustering detector only
  double runtime_s = 0.0;
  std::vector<RocPoint> roc;

  auto key() const { return std::tie(detector, privacy, intent, od_mode); }

  std::string cell_name() const {
    std::string p = privacy.mode == PrivacyMode::None
                        ? "none"
                        : std::string(to_string(privacy.mode)) + "_eps" + csv::fmt_double(privacy.epsilon, 3);
    return std::string(to_string(detector)) + "_" + p + "_c" + csv::fmt_double(intent.c, 0) + "_q" +
           csv::fmt_double(intent.q, 2) + "_" + to_string(od_mode);
  }
};

struct GridResult {
  std::vector<CellResult> cells;  // sorted by key
  std::vector<std::pair<std::string, TrainReport>> seq_training;  // per privacy label
};

namespace detail {

inline PrivacyConfig privacy_config(const ExperimentGrid& g, const PrivacySetting& p) {
  return {p.mode, p.mode == PrivacyMode::None ? 0.1 : p.epsilon, g.threshold_l, g.test_fraction,
          derive_seed(g.seed, "privacy/" + p.label())};
}

inline std::uint64_t attack_seed(const ExperimentGrid& g, const Intent& i, OdMode od) {
  return derive_seed(g.seed, "attack/" + csv::fmt_double(i.c, 3) + "/" + csv::fmt_double(i.q, 3) +
                                 "/" + to_string(od));
}

inline Corpus select(const Corpus& c, Split s) {
  Corpus out = c.empty_like();
  for (const auto& t : c.trajectories) {
    if (t.split == s) out.trajectories.push_back(t);
  }
  return out;
}

// Malicious counterparts of train trips, for threshold calibration only.
inline std::vector<Trajectory> calibration_probes(const Corpus& train, const MaliciousIntent& intent,
                                                  std::uint64_t seed) {
  std::vector<Trajectory> out;
  for (const auto& t : train.trajectories) {
    try {
      auto a = generate_malicious(t, intent, train.bbox, train.projection_origin,
                                  derive_seed(seed, "probe/" + t.id));
      a.trajectory.id = t.id + "-P";
      out.push_back(std::move(a.trajectory));
    } catch (const ValidationError&) {
    }
  }
  return out;
}

}  // namespace detail

/// Runs every cell of the grid on a split corpus.
///
/// Per privacy setting the train split is perturbed once and (if needed) the
/// sequence model is trained once on it. Per (intent, od mode) the attacks
/// are injected into the true test trips and then the whole test split is
/// perturbed with the same mechanism. Each trip's noise stream depends only
/// on the seed, the privacy setting and the trip id, so a test normal gets
/// the same noise in every cell of one privacy setting.
inline GridResult run_grid(const Corpus& corpus, const ExperimentGrid& grid) {
  grid.validate();
  if (corpus.count(Split::Test) == 0 || corpus.count(Split::Train) == 0) {
    throw ValidationError("run_grid: corpus needs both train and test trips");
  }
  const Corpus train = detail::select(corpus, Split::Train);
  const Corpus test = detail::select(corpus, Split::Test);
  const std::vector<std::string> test_ids = ids_in_split(test, Split::Test);
  const bool want_seq = std::count(grid.detectors.begin(), grid.detectors.end(), DetectorKind::Seq) > 0;
  const bool want_dbscan =
      std::count(grid.detectors.begin(), grid.detectors.end(), DetectorKind::Dbscan) > 0;

  // Attacks do not depend on the privacy setting.
  struct AttackSet {
    Intent intent;
    OdMode od;
    InjectResult injected;
  };
  std::vector<AttackSet> attacks;
  for (const auto& i : grid.intents) {
    for (auto od : grid.od_modes) {
      const MaliciousIntent mi{i.c, i.q, od};
      attacks.push_back({i, od, inject_attacks(test, test_ids, mi, grid.attack_fraction,
                                               detail::attack_seed(grid, i, od))});
    }
  }

  GridResult result;
  std::mutex mu;
  auto run_privacy = [&](const PrivacySetting& ps) {
    const PrivacyConfig pcfg = detail::privacy_config(grid, ps);
    const Corpus ptrain = perturb_corpus(train, pcfg).corpus;
    std::optional<SeqModel> model;
    std::string model_error;
    double train_seconds = 0.0;
    if (want_seq) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        SeqModelConfig scfg = grid.seq;
        scfg.seed = derive_seed(grid.seed, "seq/" + ps.label());
        TrainReport rep;
        model.emplace(train_seq_detector(ptrain, scfg, &rep));
        std::lock_guard lock(mu);
        result.seq_training.push_back({ps.label(), std::move(rep)});
      } catch (const Error& e) {
        model_error = e.what();
      }
      train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    std::vector<CellResult> local;
    for (const auto& a : attacks) {
      const MaliciousIntent mi{a.intent.c, a.intent.q, a.od};
      const std::size_t manifest = a.injected.manifest.size();
      Corpus ptest = perturb_corpus(a.injected.corpus, pcfg).corpus;
      for (auto det : grid.detectors) {
        CellResult cell;
        cell.detector = det;
        cell.privacy = ps;
        cell.intent = a.intent;
        cell.od_mode = a.od;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          std::vector<ScoredTrip> scores;
          if (det == DetectorKind::Dbscan) {
            if (ps.mode == PrivacyMode::TrajectoryBased) {
              // Offline clustering has no per-point stream to predict from.
              cell.status = "n/a";
              local.push_back(std::move(cell));
              continue;
            }
            const auto probes = perturb_corpus(
                [&] {
                  Corpus p = train.empty_like();
                  p.trajectories = detail::calibration_probes(
                      train, mi, derive_seed(detail::attack_seed(grid, a.intent, a.od), "calibrate"));
                  return p;
                }(),
                pcfg).corpus.trajectories;
            const auto cal = calibrate_min_pts(ptrain, probes, grid.min_pts_candidates, grid.cell_side_m);
            cell.min_pts = cal.best_min_pts;
            Corpus all = ptrain;
            all.trajectories.insert(all.trajectories.end(), ptest.trajectories.begin(),
                                    ptest.trajectories.end());
            DbscanDetectOptions opt;
            opt.params = {grid.dbscan_eps_m, cal.best_min_pts, 0};
            opt.cell_side = grid.cell_side_m;
            opt.pair_budget = grid.pair_budget;
            opt.cache_dir = grid.matrix_cache_dir;
            opt.jobs = 1;
            scores = dbscan_detect(all, opt).scores;
            attach_truth(scores, all);
          } else {
            if (!model) throw TrainingError(model_error);
            scores = seq_score_tests(*model, ptest);
            attach_truth(scores, ptest);
          }
          const RocResult r = roc(scores);
          if (r.n_pos != manifest) {
            throw Error("label count mismatch: " + std::to_string(r.n_pos) + " malicious scored, " +
                        std::to_string(manifest) + " injected");
          }
          cell.auc = r.auc;
          cell.n_pos = r.n_pos;
          cell.n_neg = r.n_neg;
          cell.roc = r.points;
        } catch (const BudgetExceeded& e) {
          cell.status = std::string("refused: ") + e.what();
        } catch (const std::exception& e) {
          cell.status = std::string("error: ") + e.what();
        }
        cell.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (det == DetectorKind::Seq) cell.runtime_s += train_seconds / static_cast<double>(attacks.size());
        local.push_back(std::move(cell));
      }
    }
    std::lock_guard lock(mu);
    for (auto& c : local) result.cells.push_back(std::move(c));
  };
  (void)want_dbscan;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.privacy.size(); i = next++) run_privacy(grid.privacy[i]);
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(grid.jobs, static_cast<unsigned>(grid.privacy.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::sort(result.cells.begin(), result.cells.end(),
            [](const CellResult& a, const CellResult& b) { return a.key() < b.key(); });
  std::sort(result.seq_training.begin(), result.seq_training.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return result;
}

// ---------------------------------------------------------------------------
// O-D sensitivity

struct OdSensitivityRow {
  DetectorKind detector = DetectorKind::Dbscan;
  PrivacySetting privacy;
  Intent intent;
  double auc_same = 0.0;
  double auc_shifted = 0.0;
  double gap() const { return auc_shifted - auc_same; }
};

inline std::vector<OdSensitivityRow> od_sensitivity(const std::vector<CellResult>& cells) {
  std::map<std::tuple<DetectorKind, PrivacySetting, Intent>, std::pair<std::optional<double>, std::optional<double>>> m;
  for (const auto& c : cells) {
    if (!c.auc) continue;
    auto& slot = m[{c.detector, c.privacy, c.intent}];
    (c.od_mode == OdMode::SameOD ? slot.first : slot.second) = c.auc;
  }
  std::vector<OdSensitivityRow> out;
  for (const auto& [k, v] : m) {
    if (!v.first || !v.second) continue;
    out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), *v.first, *v.second});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Result files

inline constexpr const char* kResultsHeader =
    "detector,privacy,epsilon,c,q,od_mode,status,auc,n_pos,n_neg,min_pts,roc_file";

inline std::string epsilon_field(const PrivacySetting& p) {
  return p.mode == PrivacyMode::None ? "" : csv::fmt_double(p.epsilon, 3);
}

inline void write_results(const GridResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "roc");
  auto out = csv::open_out((dir / "results.csv").string());
  out << kResultsHeader << "\n";
  auto times = csv::open_out((dir / "timings.csv").string());
  times << "detector,privacy,epsilon,c,q,od_mode,runtime_s\n";
  for (const auto& c : r.cells) {
    std::string roc_file;
    if (c.auc) {
      roc_file = "roc/" + c.cell_name() + ".csv";
      write_roc_points({c.roc, *c.auc, c.n_pos, c.n_neg}, (dir / roc_file).string());
    }
    const std::string keys = std::string(to_string(c.detector)) + "," + to_string(c.privacy.mode) +
                             "," + epsilon_field(c.privacy) + "," + csv::fmt_double(c.intent.c, 3) +
                             "," + csv::fmt_double(c.intent.q, 3) + "," + to_string(c.od_mode);
    out << keys << "," << csv::quote(c.status) << "," << (c.auc ? csv::fmt_double(*c.auc, 6) : "")
        << "," << c.n_pos << "," << c.n_neg << "," << (c.min_pts ? std::to_string(c.min_pts) : "")
        << "," << roc_file << "\n";
    times << keys << "," << csv::fmt_double(c.runtime_s, 3) << "\n";
  }
  if (!out || !times) throw IoError("write failed in " + dir.string());

  auto od = csv::open_out((dir / "od_sensitivity.csv").string());
  od << "detector,privacy,epsilon,c,q,auc_same,auc_shifted,gap\n";
  for (const auto& row : od_sensitivity(r.cells)) {
    od << to_string(row.detector) << "," << to_string(row.privacy.mode) << ","
       << epsilon_field(row.privacy) << "," << csv::fmt_double(row.intent.c, 3) << ","
       << csv::fmt_double(row.intent.q, 3) << "," << csv::fmt_double(row.auc_same, 6) << ","
       << csv::fmt_double(row.auc_shifted, 6) << "," << csv::fmt_double(row.gap(), 6) << "\n";
  }

  auto tr = csv::open_out((dir / "seq_training.csv").string());
  tr << "privacy,epoch,loss\n";
  for (const auto& [label, rep] : r.seq_training) {
    for (std::size_t e = 0; e < rep.epoch_loss.size(); ++e) {
      tr << label << "," << e << "," << csv::fmt_double(rep.epoch_loss[e], 8) << "\n";
    }
  }
}

/// Reads results.csv back (ROC points are not loaded).
inline std::vector<CellResult> read_results(const std::filesystem::path& dir) {
  const std::string path = (dir / "results.csv").string();
  if (!std::filesystem::exists(path)) throw IoError("missing " + path);
  const auto t = csv::read_table(path);
  const csv::Header h(t.columns);
  const auto i_det = h.require("detector", path), i_priv = h.require("privacy", path),
             i_eps = h.require("epsilon", path), i_c = h.require("c", path), i_q = h.require("q", path),
             i_od = h.require("od_mode", path), i_status = h.require("status", path),
             i_auc = h.require("auc", path), i_pos = h.require("n_pos", path),
             i_neg = h.require("n_neg", path), i_mp = h.require("min_pts", path);
  std::vector<CellResult> out;
  for (const auto& row : t.rows) {
    if (row.size() < h.size()) throw ValidationError(path + ": short row");
    CellResult c;
    try {
      c.detector = parse_detector(row[i_det]);
      c.privacy.mode = parse_privacy_mode(row[i_priv]);
      c.privacy.epsilon = row[i_eps].empty() ? 0.0 : std::stod(row[i_eps]);
      c.intent = {std::stod(row[i_c]), std::stod(row[i_q])};
      c.od_mode = parse_od_mode(row[i_od]);
      c.status = row[i_status];
      if (!row[i_auc].empty()) c.auc = std::stod(row[i_auc]);
      c.n_pos = std::stoul(row[i_pos]);
      c.n_neg = std::stoul(row[i_neg]);
      c.min_pts = row[i_mp].empty() ? 0 : std::stoi(row[i_mp]);
    } catch (const std::invalid_argument&) {
      throw ValidationError(path + ": malformed number");
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run configuration (JSON)

struct CorpusSource {
  std::string path;  // empty: synthesize
  SynthParams synth;
  int min_points = 1;  // ingest filter when reading Porto files
};

struct RunConfig {
  CorpusSource corpus;
  ExperimentGrid grid;
  std::string out_dir = "results";
};

namespace detail {

template <class F>
void each_key(const nlohmann::json& j, const std::string& where, F&& f) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!f(it.key(), it.value())) throw ValidationError(where + ": unknown key '" + it.key() + "'");
  }
}

inline SynthParams synth_from_json(const nlohmann::json& j) {
  SynthParams p;
  each_key(j, "corpus.synth", [&](const std::string& k, const nlohmann::json& v) {
    if (k == "n_trips") p.n_trips = v.get<int>();
    else if (k == "n_od_pairs") p.n_od_pairs = v.get<int>();
    else if (k == "grid_extent_m") p.grid_extent_m = v.get<double>();
    else if (k == "speed_mps") p.speed_mps = v.get<double>();
    else if (k == "sample_period_s") p.sample_period_s = v.get<double>();
    else if (k == "jitter_m") p.jitter_m = v.get<double>();
    else if (k == "seed") p.seed = v.get<std::uint64_t>();
    else if (k == "block_m") p.block_m = v.get<double>();
    else if (k == "route_variants") p.route_variants = v.get<int>();
    else if (k == "speed_spread") p.speed_spread = v.get<double>();
    else if (k == "detour_fraction") p.detour_fraction = v.get<double>();
    else if (k == "min_od_distance_m") p.min_od_distance_m = v.get<double>();
    else if (k == "max_od_distance_m") p.max_od_distance_m = v.get<double>();
    else return false;
    return true;
  });
  p.validate();
  return p;
}

inline PrivacySetting privacy_setting_from_json(const nlohmann::json& j) {
  PrivacySetting p;
  bool has_eps = false;
  each_key(j, "grid.privacy[]", [&](const std::string& k, const nlohmann::json& v) {
    if (k == "mode") p.mode = parse_privacy_mode(v.get<std::string>());
    else if (k == "epsilon") { p.epsilon = v.get<double>(); has_eps = true; }
    else return false;
    return true;
  });
  if (p.mode != PrivacyMode::None && !has_eps) throw ValidationError("grid.privacy[]: epsilon required");
  if (p.mode == PrivacyMode::None) p.epsilon = 0.0;
  return p;
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig rc;
  try {
    detail::each_key(j, "config", [&](const std::string& k, const nlohmann::json& v) {
      if (k == "out_dir") rc.out_dir = v.get<std::string>();
      else if (k == "seed") rc.grid.seed = v.get<std::uint64_t>();
      else if (k == "jobs") rc.grid.jobs = v.get<unsigned>();
      else if (k == "corpus") {
        detail::each_key(v, "corpus", [&](const std::string& ck, const nlohmann::json& cv) {
          if (ck == "path") rc.corpus.path = cv.get<std::string>();
          else if (ck == "min_points") rc.corpus.min_points = cv.get<int>();
          else if (ck == "synth") rc.corpus.synth = detail::synth_from_json(cv);
          else return false;
          return true;
        });
      } else if (k == "grid") {
        auto& g = rc.grid;
        detail::each_key(v, "grid", [&](const std::string& gk, const nlohmann::json& gv) {
          if (gk == "privacy") {
            g.privacy.clear();
            for (const auto& e : gv) g.privacy.push_back(detail::privacy_setting_from_json(e));
          } else if (gk == "intents") {
            g.intents.clear();
            for (const auto& e : gv) {
              Intent in;
              detail::each_key(e, "grid.intents[]", [&](const std::string& ik, const nlohmann::json& iv) {
                if (ik == "c") in.c = iv.get<double>();
                else if (ik == "q") in.q = iv.get<double>();
                else return false;
                return true;
              });
              g.intents.push_back(in);
            }
          } else if (gk == "od_modes") {
            g.od_modes.clear();
            for (const auto& e : gv) g.od_modes.push_back(parse_od_mode(e.get<std::string>()));
          } else if (gk == "detectors") {
            g.detectors.clear();
            for (const auto& e : gv) g.detectors.push_back(parse_detector(e.get<std::string>()));
          } else if (gk == "test_per_group") g.test_per_group = gv.get<int>();
          else if (gk == "attack_fraction") g.attack_fraction = gv.get<double>();
          else if (gk == "cell_side_m") g.cell_side_m = gv.get<double>();
          else if (gk == "threshold_l") g.threshold_l = gv.get<double>();
          else if (gk == "test_fraction") g.test_fraction = gv.get<double>();
          else if (gk == "dbscan_eps_m") g.dbscan_eps_m = gv.get<double>();
          else if (gk == "min_pts_candidates") g.min_pts_candidates = gv.get<std::vector<int>>();
          else if (gk == "pair_budget") g.pair_budget = gv.get<unsigned long long>();
          else if (gk == "matrix_cache_dir") g.matrix_cache_dir = gv.get<std::string>();
          else if (gk == "seq") g.seq = seq_config_from_json(gv);
          else return false;
          return true;
        });
      } else {
        return false;
      }
      return true;
    });
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  rc.grid.validate();
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError(path + ": not valid JSON");
  return run_config_from_json(j);
}

/// Loads or synthesizes the corpus and applies the per-group test split.
inline Corpus prepare_corpus(const RunConfig& rc) {
  Corpus c;
  if (rc.corpus.path.empty()) {
    c = synth_corpus(rc.corpus.synth);
  } else {
    c = read_corpus(rc.corpus.path, rc.corpus.min_points).corpus;
    // Labels in the file are ignored: the grid injects its own attacks.
    std::vector<Trajectory> normals;
    for (auto& t : c.trajectories) {
      if (t.label == Label::Normal) normals.push_back(std::move(t));
    }
    c.trajectories = std::move(normals);
  }
  if (c.trajectories.empty()) throw ValidationError("corpus is empty");
  const auto groups = group_by_od(c, rc.grid.cell_side_m);
  apply_split(c, split_test(c, groups, rc.grid.test_per_group, derive_seed(rc.grid.seed, "split")));
  return c;
}

}  // namespace privsec
