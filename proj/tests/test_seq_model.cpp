#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "privsec/attack.hpp"
#include "privsec/seq_model.hpp"
#include "privsec/synth.hpp"

using namespace privsec;

namespace {
const GeoPoint kOrigin{-8.61, 41.15};
const BBox kRegion{unproject({-1000, -1000}, kOrigin).lon, unproject({-1000, -1000}, kOrigin).lat,
                   unproject({1000, 1000}, kOrigin).lon, unproject({1000, 1000}, kOrigin).lat};

std::vector<GeoPoint> geo(const std::vector<PlanarPoint>& pts) {
  std::vector<GeoPoint> out;
  for (const auto& p : pts) out.push_back(unproject(p, kOrigin));
  return out;
}

SeqModelConfig tiny(bool variational = false, int mixture = 1) {
  SeqModelConfig c;
  c.hidden_dim = 4;
  c.latent_dim = 2;
  c.max_len = 5;
  c.variational = variational;
  c.n_mixture = mixture;
  c.beta = 0.1;
  c.seed = 3;
  return c;
}

std::vector<Sequence> toy_data(std::size_t n, std::size_t len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sequence> out;
  for (std::size_t k = 0; k < n; ++k) {
    const double x0 = rng.uniform(0.1, 0.4), y0 = rng.uniform(0.1, 0.4);
    const double dx = rng.uniform(0.2, 0.5), dy = rng.uniform(-0.1, 0.4);
    Sequence s;
    for (std::size_t t = 0; t < len; ++t) {
      const double f = static_cast<double>(t) / static_cast<double>(len - 1);
      s.push_back({x0 + dx * f, y0 + dy * f * f});
    }
    out.push_back(s);
  }
  return out;
}
}  // namespace

TEST(Preprocess, NormalisesToUnitSquare) {
  const Normalizer norm(kRegion, kOrigin);
  const auto s = preprocess(geo({{-1000, -1000}, {0, 0}, {1000, 1000}}), norm, 3);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_NEAR(s[0][0], 0.0, 1e-9);
  EXPECT_NEAR(s[0][1], 0.0, 1e-9);
  EXPECT_NEAR(s[1][0], 0.5, 1e-6);
  EXPECT_NEAR(s[2][0], 1.0, 1e-9);
  EXPECT_NEAR(s[2][1], 1.0, 1e-9);
}

TEST(Preprocess, ResamplesByArcLength) {
  const PlanarPath path{{0, 0}, {100, 0}, {100, 300}};
  const auto r = resample(path, 5);  // total 400 m, spacing 100 m
  ASSERT_EQ(r.size(), 5u);
  EXPECT_NEAR(r[1].x, 100, 1e-9);
  EXPECT_NEAR(r[1].y, 0, 1e-9);
  EXPECT_NEAR(r[2].y, 100, 1e-9);
  EXPECT_NEAR(r[4].y, 300, 1e-9);
  const auto up = resample({{0, 0}, {90, 0}}, 4);
  EXPECT_NEAR(up[1].x, 30, 1e-9);
  EXPECT_THROW(resample({{0, 0}}, 4), ValidationError);
}

TEST(Preprocess, DegenerateBoxRejected) {
  EXPECT_THROW(Normalizer(BBox{1, 1, 1, 2}, kOrigin), ValidationError);
}

TEST(SeqModel, GradientCheckPlainAutoencoder) {
  SeqModel m(tiny());
  const auto data = toy_data(2, 5, 1);
  const auto rep = gradient_check(m, {&data[0], &data[1]}, {});
  for (const auto& e : rep.entries) EXPECT_LT(e.max_rel_error, 1e-4) << e.tensor;
}

TEST(SeqModel, GradientCheckVariationalMixture) {
  SeqModel m(tiny(true, 2));
  const auto data = toy_data(2, 5, 2);
  Rng rng(4);
  std::vector<double> noise(2 * 2);
  for (auto& v : noise) v = rng.normal();
  const auto rep = gradient_check(m, {&data[0], &data[1]}, noise);
  for (const auto& e : rep.entries) EXPECT_LT(e.max_rel_error, 1e-4) << e.tensor;
}

TEST(SeqModel, BetaZeroLossIsReconstructionMse) {
  auto cfg = tiny(true, 2);
  cfg.beta = 0.0;
  SeqModel m(cfg);
  const auto data = toy_data(3, 5, 5);
  const std::vector<double> noise(6, 0.7);  // ignored: the latent is not sampled
  const double loss = batch_loss_and_grad(m, {&data[0], &data[1], &data[2]}, noise, nullptr);
  double mse = 0;
  for (const auto& x : data) {
    const auto y = m.reconstruct(x);
    double s = 0;
    for (std::size_t t = 0; t < x.size(); ++t)
      s += (y[t][0] - x[t][0]) * (y[t][0] - x[t][0]) + (y[t][1] - x[t][1]) * (y[t][1] - x[t][1]);
    // Mean over points of the squared Euclidean error.
    mse += s / static_cast<double>(x.size());
    EXPECT_NEAR(m.score(x), s / static_cast<double>(x.size()), 1e-15);
  }
  EXPECT_NEAR(loss, mse / 3.0, 1e-15);
}

TEST(SeqModel, ZeroEpochsLeavesParametersUnchanged) {
  auto cfg = tiny();
  cfg.epochs = 0;
  SeqModel m(cfg);
  const auto before = m.params();
  const auto rep = train(m, toy_data(4, 5, 6));
  EXPECT_TRUE(rep.epoch_loss.empty());
  EXPECT_EQ(m.params(), before);
}

namespace {
// One trajectory repeated: a memorisation run.
struct Memorised {
  Sequence x;
  SeqModel model{SeqModelConfig{}};
  TrainReport report;
};

const Memorised& memorised() {
  static const Memorised m = [] {
    SeqModelConfig cfg;
    cfg.hidden_dim = 8;
    cfg.latent_dim = 4;
    cfg.max_len = 16;
    cfg.epochs = 200;
    cfg.batch_size = 4;
    cfg.learning_rate = 0.01;
    Memorised out;
    std::vector<PlanarPoint> pts;
    for (int t = 0; t < 40; ++t) {
      const double f = t / 39.0;
      pts.push_back({-600 + 1200 * f, -400 + 800 * f * f});
    }
    out.x = preprocess(geo(pts), Normalizer(kRegion, kOrigin), 16);
    out.model = SeqModel(cfg);
    out.report = train(out.model, std::vector<Sequence>(8, out.x));
    return out;
  }();
  return m;
}
}  // namespace

TEST(SeqModel, MemorisesRepeatedTrajectory) {
  const auto& m = memorised();
  const Normalizer norm(kRegion, kOrigin);
  const auto y = m.model.reconstruct(m.x);
  double se = 0;
  for (std::size_t t = 0; t < m.x.size(); ++t) {
    const double d = distance(norm.from_unit(m.x[t]), norm.from_unit(y[t]));
    se += d * d;
  }
  EXPECT_LT(std::sqrt(se / static_cast<double>(m.x.size())), 0.01 * norm.diagonal_m());
}

TEST(SeqModel, MovingAverageLossNonIncreasing) {
  const auto& loss = memorised().report.epoch_loss;
  ASSERT_EQ(loss.size(), 200u);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t e = 4; e < loss.size(); ++e) {
    double a = 0;
    for (std::size_t k = e - 4; k <= e; ++k) a += loss[k];
    a /= 5;
    EXPECT_LE(a, prev) << "epoch " << e;
    prev = a;
  }
}

TEST(SeqModel, TrainingIsDeterministic) {
  auto cfg = tiny(true, 2);
  cfg.epochs = 5;
  SeqModel a(cfg), b(cfg);
  const auto data = toy_data(10, 5, 9);
  train(a, data);
  train(b, data);
  EXPECT_EQ(a.params(), b.params());
}

TEST(SeqModel, ScoreIndependentOfBatchContext) {
  SeqModel m(tiny());
  const auto data = toy_data(5, 5, 10);
  const double alone = m.score(data[2]);
  for (const auto& x : data) m.score(x);
  EXPECT_EQ(m.score(data[2]), alone);
  Corpus c;
  c.bbox = kRegion;
  c.projection_origin = kOrigin;
  Trajectory t;
  t.id = "x";
  t.split = Split::Test;
  t.points = geo({{0, 0}, {100, 50}, {300, 200}});
  c.trajectories.push_back(t);
  const auto one = seq_score_tests(m, c);
  c.trajectories.push_back(t);
  c.trajectories.back().id = "y";
  const auto two = seq_score_tests(m, c);
  EXPECT_EQ(one[0].score, two[0].score);
}

TEST(SeqModel, CheckpointRoundTrip) {
  auto cfg = tiny(true, 2);
  cfg.epochs = 3;
  SeqModel m(cfg);
  const auto data = toy_data(6, 5, 11);
  train(m, data);
  const auto path = (std::filesystem::temp_directory_path() / "privsec_unit_model.txt").string();
  m.save(path);
  const SeqModel back = SeqModel::load(path);
  EXPECT_EQ(back.params(), m.params());
  EXPECT_EQ(back.config().n_mixture, 2);
  for (const auto& x : data) EXPECT_EQ(back.score(x), m.score(x));
  EXPECT_THROW(SeqModel::load("/nonexistent/model.txt"), IoError);
}

TEST(SeqModel, NonFiniteInputRaisesTrainingError) {
  auto cfg = tiny();
  cfg.epochs = 2;
  SeqModel m(cfg);
  auto data = toy_data(4, 5, 12);
  data[1][2][0] = std::numeric_limits<double>::quiet_NaN();
  try {
    train(m, data);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
  }
}

TEST(SeqModel, ConfigJsonRoundTripAndUnknownKey) {
  auto cfg = tiny(true, 3);
  const auto back = seq_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
  EXPECT_EQ(back.n_mixture, 3);
  EXPECT_TRUE(back.variational);
  EXPECT_THROW(seq_config_from_json(nlohmann::json{{"hiden_dim", 4}}), ValidationError);
  EXPECT_THROW(seq_config_from_json(nlohmann::json{{"hidden_dim", 0}}), ValidationError);
}

TEST(SeqDetector, SeparatesAttacksFromNormals) {
  SynthParams p;
  p.n_trips = 200;
  p.n_od_pairs = 5;
  Corpus c = synth_corpus(p);
  apply_split(c, split_test(c, group_by_od(c), 4, 1));
  SeqModelConfig cfg;
  cfg.hidden_dim = 16;
  cfg.latent_dim = 4;
  cfg.max_len = 16;
  cfg.epochs = 60;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  TrainReport rep;
  const SeqModel m = train_seq_detector(c, cfg, &rep);
  EXPECT_EQ(rep.epoch_loss.size(), 60u);
  const Normalizer norm(c.bbox, c.projection_origin);
  std::vector<ScoredTrip> scores;
  for (const auto& t : c.trajectories) {
    if (t.split != Split::Test) continue;
    const auto a = generate_malicious(t, {500, 0.7, OdMode::SameOD}, c.bbox, c.projection_origin, 3);
    scores.push_back({t.id, Label::Normal, m.score(preprocess(t.points, norm, 16)), ""});
    scores.push_back({t.id, Label::Malicious, m.score(preprocess(a.trajectory.points, norm, 16)), ""});
  }
  EXPECT_GT(roc(scores).auc, 0.9);
}
