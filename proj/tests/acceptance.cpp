// Acceptance harness: one PASS/FAIL line per criterion, non-zero exit when
// any criterion fails.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <sys/wait.h>

#include "scenecode/code_text.hpp"
#include "scenecode/decoder.hpp"
#include "scenecode/llm_client.hpp"
#include "scenecode/metrics.hpp"
#include "scenecode/nn/attention.hpp"
#include "scenecode/nn/gradcheck.hpp"
#include "scenecode/nn/layers.hpp"
#include "scenecode/nn/mcg.hpp"
#include "scenecode/synth.hpp"
#include "scenecode/training.hpp"
#include "support.hpp"

using namespace scenecode;
using namespace scenecode::testing;
namespace fs = std::filesystem;
using nn::Matrix;

namespace {

struct Outcome {
  bool pass{true};
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

int oracle_bin(double d, double gap, int max_bin) {
  int k = 0;
  while (k < max_bin && (k + 1) * gap <= d) ++k;
  return k;
}

/// Clockwise angle from the heading, bucketed with sector 0 centered on it.
int oracle_sector(double clockwise_angle, int areas) {
  const double width = 2.0 * std::numbers::pi / areas;
  double a = std::fmod(clockwise_angle + width / 2.0, 2.0 * std::numbers::pi);
  if (a < 0) a += 2.0 * std::numbers::pi;
  return static_cast<int>(a / width) % areas;
}

Outcome codec_oracles() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> dist(0.0, 120.0), speed(0.0, 30.0);
  int mismatches = 0;
  for (int k = 0; k < 5000; ++k) {
    const double d = dist(rng), v = speed(rng);
    mismatches += distance_bin(d, 15.0, 5) != oracle_bin(d, 15.0, 5);
    mismatches += distance_bin(d, 15.0, 3) != oracle_bin(d, 15.0, 3);
    mismatches += speed_bin(v) != oracle_bin(v, 2.5, 8);
  }
  for (int k = 0; k <= 10; ++k) {
    mismatches += distance_bin(15.0 * k, 15.0, 5) != std::min(k, 5);
    mismatches += speed_bin(2.5 * k) != std::min(k, 8);
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " bin mismatches");

  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  int sector_mismatch = 0, jumps = 0;
  for (int areas : {4, 6, 8}) {
    for (int trial = 0; trial < 3; ++trial) {
      const double h = ang(rng);
      const Vec2 heading{std::cos(h), std::sin(h)};
      std::vector<int> counts(static_cast<std::size_t>(areas), 0);
      int prev = -1;
      for (int k = 0; k < 10000; ++k) {
        const double cw = 2.0 * std::numbers::pi * (k + 0.5) / 10000.0;
        const Vec2 rel = rotate(Vec2{std::cos(-cw), std::sin(-cw)} * 7.0, heading);
        const int s = sector_of(rel, heading, areas);
        sector_mismatch += s != oracle_sector(cw, areas);
        if (s < 0 || s >= areas) continue;
        ++counts[static_cast<std::size_t>(s)];
        if (prev >= 0) {
          const int diff = std::abs(s - prev);
          jumps += std::min(diff, areas - diff) > 1;
        }
        prev = s;
      }
      for (int c : counts) o.require(std::abs(c - 10000 / areas) <= 1, "uneven sector coverage");
    }
  }
  o.require(sector_mismatch == 0, std::to_string(sector_mismatch) + " sector mismatches");
  o.require(jumps == 0, std::to_string(jumps) + " non-adjacent sector steps");
  const double secs = seconds_since(t0);
  o.require(secs < 10.0, "took " + fmt(secs) + " s");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "runtime " + fmt(secs) + " s";
  return o;
}

// ---------------------------------------------------------------- 2

TrajectoryType oracle_type(const Trajectory& t, const CodecConfig& cfg) {
  double max_disp = 0.0;
  for (const auto& p : t.positions) {
    for (const auto& q : t.positions) max_disp = std::max(max_disp, (p - q).norm());
  }
  const auto [lo, hi] = std::minmax_element(t.speeds.begin(), t.speeds.end());
  const bool is_stop = max_disp <= 1.0 && *hi - *lo <= 0.2;

  const Vec2 h0 = t.headings.front(), h1 = t.headings.back();
  const double theta = std::atan2(h0.x * h1.y - h0.y * h1.x, h0.x * h1.x + h0.y * h1.y);
  const Vec2 disp = t.positions.back() - t.positions.front();
  const double along = disp.x * h0.x + disp.y * h0.y;
  const double lateral = std::hypot(disp.x - along * h0.x, disp.y - along * h0.y);
  const double da = cfg.angle_threshold;
  const bool wide = lateral >= cfg.lane_width;
  const bool left_turn = theta >= 2 * da && wide;
  const bool right_turn = theta <= -2 * da && wide;
  const bool left_change = theta >= da && theta < 2 * da && wide;
  const bool right_change = theta > -2 * da && theta <= -da && wide;

  if (is_stop) return TrajectoryType::stop;
  if (left_turn) return TrajectoryType::left_turn;
  if (right_turn) return TrajectoryType::right_turn;
  if (left_change) return TrajectoryType::left_lane_change;
  if (right_change) return TrajectoryType::right_lane_change;
  return TrajectoryType::straight;
}

Outcome classifier_equivalence() {
  Outcome o;
  const CodecConfig cfg;
  int cases = 0, agree = 0, requested = 0;
  for (int type = 0; type < kTrajectoryTypeCount; ++type) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto tt = static_cast<TrajectoryType>(type);
      const Scenario s = synth_scenario(random_single_type_spec(tt, seed), seed);
      for (const Trajectory& t : s.trajectories) {
        ++cases;
        const TrajectoryType got = classify_trajectory(t, cfg);
        agree += got == oracle_type(t, cfg);
        requested += got == tt;
      }
    }
  }
  for (const Scenario& s : synth_dataset(50, 202, 6)) {
    for (const Trajectory& t : s.trajectories) {
      ++cases;
      agree += classify_trajectory(t, cfg) == oracle_type(t, cfg);
    }
  }
  o.require(agree == cases, std::to_string(cases - agree) + " disagreements");
  o.require(requested == 6 * 50, std::to_string(300 - requested) + " single-type scenarios off their requested type");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + std::to_string(agree) + "/" + std::to_string(cases) + " agree";
  return o;
}

// ---------------------------------------------------------------- 3

Outcome code_round_trip() {
  Outcome o;
  std::mt19937_64 rng(303);
  int failures = 0, wrapped_failures = 0;
  for (int k = 0; k < 1000; ++k) {
    const CodeBundle b = random_bundle(rng, 12);
    const std::string text = serialize_codes(b);
    const ParsedCodes plain = parse_codes(text);
    failures += !(plain.bundle == b) || !plain.warnings.empty();
    const std::string wrapped = "Here is the scene you asked for.\n\n```\n" + text +
                                "```\n\nLet me know if anything should change.";
    wrapped_failures += !(parse_codes(wrapped).bundle == b);
  }
  o.require(failures == 0, std::to_string(failures) + " plain round-trip failures");
  o.require(wrapped_failures == 0, std::to_string(wrapped_failures) + " prose-wrapped failures");
  if (o.pass) o.detail = "1000 bundles";
  return o;
}

// ---------------------------------------------------------------- 4

Matrix random_matrix(Eigen::Index r, Eigen::Index c, nn::Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void randomize(nn::ParamStore& store, nn::Rng& rng) {
  for (nn::Param* p : store.params()) p->value = random_matrix(p->value.rows(), p->value.cols(), rng, 0.5);
}

double probe(const Matrix& y, const Matrix& r) { return (y.array() * r.array()).sum(); }

Outcome gradient_checks() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double worst_layer = 0.0, worst_decoder = 0.0;
  nn::GradcheckOptions layer_opts;
  layer_opts.tolerance = 1e-4;
  nn::GradcheckOptions pooled_opts = layer_opts;
  pooled_opts.step = 1e-5;
  auto record = [&](const std::string& what, const nn::GradcheckReport& rep, double& worst) {
    worst = std::max(worst, rep.max_relative_error);
    o.require(rep.passed, what + " failed at " + rep.worst_entry + " (" + fmt(rep.max_relative_error) + ")");
  };

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    nn::Rng rng(seed);
    {
      nn::ParamStore store;
      nn::Linear lin(store, "l", 4, 3, rng);
      nn::Param& x = store.add("x", 5, 4, nn::Init::zeros, rng);
      randomize(store, rng);
      const Matrix r = random_matrix(5, 3, rng);
      record("linear", nn::gradcheck(store.params(), [&](bool g) {
        nn::LinearCache c;
        const double v = probe(lin.forward(x.value, g ? &c : nullptr), r);
        if (g) {
          store.zero_grad();
          x.grad += lin.backward(c, r);
        }
        return v;
      }, layer_opts), worst_layer);
    }
    {
      nn::ParamStore store;
      nn::Mlp mlp(store, "m", {4, 8, 2}, rng);
      nn::Param& x = store.add("x", 3, 4, nn::Init::zeros, rng);
      randomize(store, rng);
      const Matrix r = random_matrix(3, 2, rng);
      record("mlp", nn::gradcheck(store.params(), [&](bool g) {
        nn::MlpCache c;
        const double v = probe(mlp.forward(x.value, g ? &c : nullptr), r);
        if (g) {
          store.zero_grad();
          x.grad += mlp.backward(c, r);
        }
        return v;
      }, layer_opts), worst_layer);
    }
    {
      nn::ParamStore store;
      nn::LayerNorm ln(store, "n", 6, rng);
      nn::Param& x = store.add("x", 4, 6, nn::Init::zeros, rng);
      randomize(store, rng);
      const Matrix r = random_matrix(4, 6, rng);
      record("layer norm", nn::gradcheck(store.params(), [&](bool g) {
        nn::LayerNormCache c;
        const double v = probe(ln.forward(x.value, g ? &c : nullptr), r);
        if (g) {
          store.zero_grad();
          x.grad += ln.backward(c, r);
        }
        return v;
      }, layer_opts), worst_layer);
    }
    {
      nn::ParamStore store;
      nn::MultiHeadAttention att(store, "a", 8, 6, 2, rng);
      nn::Param& q = store.add("q", 3, 8, nn::Init::zeros, rng);
      nn::Param& k = store.add("k", 4, 6, nn::Init::zeros, rng);
      nn::Param& v = store.add("v", 4, 6, nn::Init::zeros, rng);
      randomize(store, rng);
      const std::vector<bool> mask{true, true, false, true};
      const Matrix r = random_matrix(3, 8, rng);
      record("attention", nn::gradcheck(store.params(), [&](bool g) {
        nn::AttentionCache c;
        const double val = probe(att.forward(q.value, k.value, v.value, mask, g ? &c : nullptr), r);
        if (g) {
          store.zero_grad();
          const auto grads = att.backward(c, r);
          q.grad += grads.dq;
          k.grad += grads.dk;
          v.grad += grads.dv;
        }
        return val;
      }, layer_opts), worst_layer);
    }
    {
      nn::ParamStore store;
      nn::McgStack mcg(store, "g", 3, 5, 3, rng);
      nn::Param& x = store.add("x", 4, 3, nn::Init::zeros, rng);
      randomize(store, rng);
      const std::vector<bool> mask{true, false, true, true};
      const Matrix r = random_matrix(4, 5, rng), rc = random_matrix(1, 5, rng);
      record("mcg", nn::gradcheck(store.params(), [&](bool g) {
        nn::McgStackCache c;
        const nn::McgOutput out = mcg.forward(x.value, mask, g ? &c : nullptr);
        if (g) {
          store.zero_grad();
          x.grad += mcg.backward(c, r, rc);
        }
        return probe(out.elements, r) + probe(out.context, rc);
      }, pooled_opts), worst_layer);
    }
    {
      const DecoderConfig dc = DecoderConfig::shrink(5, 8);
      DecoderModel model(dc, seed);
      const Scenario s = synth_dataset(1, seed + 20, 3).front();
      const DecoderInput in = make_decoder_input(extract_codes(s, {}), s.map, dc, {});
      const Matrix r = random_matrix(in.vehicle_codes.rows(), 2 * dc.timesteps, rng);
      nn::GradcheckOptions opts;
      opts.tolerance = 1e-3;
      record("decoder", nn::gradcheck(model.params().params(), [&](bool g) {
        DecoderCache cache;
        const Matrix pos = model.forward(in, g ? &cache : nullptr);
        if (g) {
          model.params().zero_grad();
          model.backward(cache, r);
        }
        return probe(pos, r);
      }, opts), worst_decoder);
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 120.0, "took " + fmt(secs) + " s");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "worst layer " + fmt(worst_layer) + ", worst decoder " +
             fmt(worst_decoder) + ", 5 seeds, " + fmt(secs) + " s";
  return o;
}

// ---------------------------------------------------------------- 5

Outcome loss_correctness() {
  Outcome o;
  const Scenario s = synth_dataset(1, 55, 4).front();
  const TrajectoryTarget target = make_target(s);
  const LossBreakdown exact = trajectory_loss(target, target.positions);
  o.require(exact.total == 0.0, "exact match gives " + fmt(exact.total));

  Matrix shifted = target.positions;
  for (Eigen::Index c = 0; c < shifted.cols(); c += 2) {
    shifted.col(c).array() += 3.0;
    shifted.col(c + 1).array() += 4.0;
  }
  const LossBreakdown l = trajectory_loss(target, shifted);
  o.require(std::abs(l.traj_term - 25.0) < 1e-9, "(3,4) offset traj term " + fmt(l.traj_term));
  o.require(std::abs(l.rela_term) < 1e-9, "(3,4) offset rela term " + fmt(l.rela_term));

  Scenario moved = s;
  for (Trajectory& t : moved.trajectories) {
    for (auto& p : t.positions) p = p + Vec2{3, 4};
  }
  for (std::size_t i = 0; i < s.trajectories.size(); ++i) {
    const double a = ade(s.trajectories[i], moved.trajectories[i]);
    o.require(std::abs(a - 5.0) < 1e-9, "ade " + fmt(a));
  }

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  int positive = 0;
  for (int k = 0; k < 100; ++k) {
    Matrix p = target.positions;
    p(static_cast<Eigen::Index>(rng() % p.rows()), static_cast<Eigen::Index>(rng() % p.cols())) += 1e-3;
    positive += trajectory_loss(target, p).total > 0.0;
  }
  o.require(positive == 100, "perturbed predictions with zero loss");

  Matrix pred = target.positions;
  for (Eigen::Index i = 0; i < pred.size(); ++i) pred.data()[i] += nd(rng);
  Matrix grad;
  trajectory_loss(target, pred, &grad);
  double worst = 0.0;
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    Matrix a = pred, b = pred;
    a.data()[i] += h;
    b.data()[i] -= h;
    const double num = (trajectory_loss(target, a).total - trajectory_loss(target, b).total) / (2 * h);
    const double ex = grad.data()[i];
    worst = std::max(worst, std::abs(num - ex) / std::max({std::abs(num), std::abs(ex), 1e-8}));
  }
  o.require(worst < 1e-5, "gradient rel. err " + fmt(worst));
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "traj term " + fmt(l.traj_term) + ", gradient rel. err " +
             fmt(worst);
  return o;
}

// ---------------------------------------------------------------- 6

struct OverfitRun {
  double made{0.0};
  double mfde{0.0};
  std::vector<double> losses;
  std::string weights;
  double seconds{0.0};
};

OverfitRun overfit_once() {
  const auto t0 = std::chrono::steady_clock::now();
  const DecoderConfig dc = DecoderConfig::shrink(50, 16);
  const auto scenarios = synth_dataset(8, 7, 4);
  std::vector<TrainingSample> samples;
  for (const Scenario& s : scenarios) samples.push_back(make_training_sample(s, dc, {}));
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 8;
  cfg.epochs = 2000;
  cfg.seed = 0;
  DecoderModel model(dc, 0);
  Trainer trainer(model, cfg);
  OverfitRun run;
  for (const auto& r : trainer.fit(samples)) run.losses.push_back(r.loss.total);
  for (const Scenario& s : scenarios) {
    const ScenarioMetrics m = scenario_metrics(s, decode(extract_codes(s, {}), s.map, model));
    run.made += m.made / static_cast<double>(scenarios.size());
    run.mfde += m.mfde / static_cast<double>(scenarios.size());
  }
  run.weights = encode_checkpoint(model);
  run.seconds = seconds_since(t0);
  return run;
}

Outcome overfit() {
  Outcome o;
  const OverfitRun a = overfit_once();
  const OverfitRun b = overfit_once();
  o.require(a.losses.size() == 2000, std::to_string(a.losses.size()) + " steps");
  o.require(a.made < 0.5, "mADE " + fmt(a.made));
  o.require(a.mfde < 1.0, "mFDE " + fmt(a.mfde));
  o.require(a.seconds < 600.0, "took " + fmt(a.seconds) + " s");
  o.require(a.losses == b.losses && a.weights == b.weights, "two same-seed runs differ");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "mADE " + fmt(a.made) + " m, mFDE " + fmt(a.mfde) +
             " m, 2000 steps in " + fmt(a.seconds) + " s, runs identical: " + (a.weights == b.weights ? "yes" : "no");
  return o;
}

// ---------------------------------------------------------------- 7

Outcome metric_oracles() {
  Outcome o;
  std::mt19937_64 rng(707);
  std::normal_distribution<double> nd(0.0, 10.0);
  int hd_mismatch = 0;
  for (int k = 0; k < 500; ++k) {
    std::vector<Position2D> a(1 + rng() % 50), b(1 + rng() % 50);
    for (auto& p : a) p = {nd(rng), nd(rng)};
    for (auto& p : b) p = {nd(rng), nd(rng)};
    hd_mismatch += hausdorff(a, b) != naive_hausdorff(a, b);
  }
  o.require(hd_mismatch == 0, std::to_string(hd_mismatch) + " Hausdorff mismatches");

  double worst_mc = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto [a, b] = random_box_pair(rng);
    worst_mc = std::max(worst_mc, std::abs(obb_iou(a, b) - monte_carlo_iou(a, b, 1000000, rng)));
  }
  o.require(worst_mc < 0.01, "Monte-Carlo deviation " + fmt(worst_mc));

  for (const Scenario& s : synth_dataset(5, 77, 4)) {
    const ScenarioMetrics m = scenario_metrics(s, s);
    o.require(m.made == 0.0 && m.min_ade == 0.0 && m.mfde == 0.0 && m.min_fde == 0.0 && m.hd == 0.0,
              "identical inputs give non-zero distance metrics");
  }

  OrientedBox p, q;
  p.length = p.width = q.length = q.width = 1.0;
  q.center = {0.5, 0.0};
  const double third = obb_iou(p, q);
  o.require(std::abs(third - 1.0 / 3.0) < 1e-12, "square case " + fmt(third));
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "worst Monte-Carlo deviation " + fmt(worst_mc) +
             " over 100 pairs";
  return o;
}

// ---------------------------------------------------------------- 8

Outcome equivariance() {
  Outcome o;
  const DecoderConfig dc = DecoderConfig::shrink(50, 16);
  DecoderModel model(dc, 8);
  double worst = 0.0;
  std::mt19937_64 rng(808);
  for (const Scenario& s : synth_dataset(20, 88, 6)) {
    const DecoderInput in = make_decoder_input(extract_codes(s, {}), s.map, dc, {});
    const auto n = static_cast<std::size_t>(in.vehicle_codes.rows());
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin() + 1, perm.end(), rng);
    DecoderInput pin = in;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      pin.vehicle_codes.row(r) = in.vehicle_codes.row(perm[i]);
      pin.interaction_codes.row(r) = in.interaction_codes.row(perm[i]);
      pin.anchors.row(r) = in.anchors.row(perm[i]);
      pin.types[i] = in.types[static_cast<std::size_t>(perm[i])];
    }
    const Matrix a = model.forward(in, nullptr), b = model.forward(pin, nullptr);
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max(worst, (b.row(static_cast<Eigen::Index>(i)) - a.row(perm[i])).cwiseAbs().maxCoeff());
    }
  }
  o.require(worst < 1e-9, "permutation deviation " + fmt(worst));

  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi), off(-500.0, 500.0);
  int changed = 0, total = 0;
  for (const Scenario& s : synth_dataset(30, 89, 6)) {
    const CodeBundle ref = extract_codes(s, {});
    for (int k = 0; k < 5; ++k) {
      const double t = ang(rng);
      ++total;
      changed += !(extract_codes(transform_scenario(s, {std::cos(t), std::sin(t)}, {off(rng), off(rng)}), {}) == ref);
    }
  }
  o.require(changed == 0, std::to_string(changed) + "/" + std::to_string(total) + " transforms changed the codes");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "max permutation deviation " + fmt(worst) + ", " +
             std::to_string(total) + " rigid transforms";
  return o;
}

// ---------------------------------------------------------------- 9, 10

const fs::path kWork = SCENECODE_WORK_DIR;

int run(const std::string& args, const std::string& log_name) {
  const std::string cmd = std::string("\"") + SCENECODE_CLI + "\" " + args + " > \"" +
                          (kWork / log_name).string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

fs::path desk_config() {
  const fs::path p = kWork / "desk.json";
  const nlohmann::json cfg{
      {"decoder",
       {{"lane_dim", 16}, {"vehicle_dim", 16}, {"interaction_dim", 16}, {"mcg_layers", 2}, {"head_hidden", 32},
        {"max_lanes", 16}, {"pe_frequencies", 2}}},
      {"train", {{"learning_rate", 1e-3}, {"batch_size", 20}, {"epochs", 3000}, {"log_every", 500}}},
      // Unreachable on purpose: any attempt to use the network fails.
      {"llm", {{"endpoint", "http://127.0.0.1:9/v1/chat/completions"}, {"max_retries", 0}, {"timeout_seconds", 1.0}}}};
  write_file(p, cfg.dump(2));
  return p;
}

Outcome pipeline() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const std::string cfg = "--config \"" + desk_config().string() + "\" ";
  const fs::path gt = kWork / "gt", codes = kWork / "codes", pred = kWork / "pred";
  for (const fs::path& d : {gt, codes, pred}) fs::remove_all(d);
  const fs::path ckpt = kWork / "overfit.ckpt", index = kWork / "maps.json", metrics = kWork / "metrics.json";

  auto step = [&](const std::string& name, const std::string& args) {
    const int code = run(cfg + args, name + ".log");
    o.require(code == 0, name + " exited " + std::to_string(code) + " (see " + (kWork / (name + ".log")).string() + ")");
    return code == 0;
  };
  if (!step("synth", "--seed 11 synth --out \"" + gt.string() + "\" --count 20 --max-vehicles 4")) return o;
  if (!step("analyze", "analyze \"" + gt.string() + "\" -o \"" + codes.string() + "\"")) return o;
  if (!step("index", "retrieve-map --build --scenarios \"" + gt.string() + "\" -o \"" + index.string() + "\"")) return o;
  if (!step("train", "--seed 0 train --data \"" + gt.string() + "\" -o \"" + ckpt.string() + "\" --log \"" +
                         (kWork / "train_log.txt").string() + "\"")) {
    return o;
  }
  if (!step("generate", "generate --codes \"" + codes.string() + "\" --checkpoint \"" + ckpt.string() +
                            "\" --map-index \"" + index.string() + "\" -o \"" + pred.string() + "\"")) {
    return o;
  }
  if (!step("evaluate", "evaluate --gt \"" + gt.string() + "\" --pred \"" + pred.string() + "\" -o \"" +
                            metrics.string() + "\" --json")) {
    return o;
  }
  const auto report = nlohmann::json::parse(read_file(metrics));
  const double made = report["aggregate"]["mADE"].get<double>();
  o.require(report["scenarios"].size() == 20, std::to_string(report["scenarios"].size()) + " scenarios evaluated");
  o.require(made < 0.5, "aggregate mADE " + fmt(made));
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "20 scenarios, aggregate mADE " + fmt(made) + " m, " +
             fmt(seconds_since(t0)) + " s";
  return o;
}

Outcome llm_path() {
  Outcome o;
  o.require(llm::sha256_hex(read_file(SCENECODE_PROMPT_ASSET)) == llm::kPromptSha256, "asset hash differs");
  o.require(llm::sha256_hex(llm::system_prompt_text()) == llm::kPromptSha256, "embedded prompt hash differs");

  const fs::path ckpt = kWork / "overfit.ckpt", index = kWork / "maps.json";
  if (!fs::exists(ckpt) || !fs::exists(index)) {
    o.require(false, "pipeline artifacts missing");
    return o;
  }
  const std::string description = "The ego drives straight at 10 m/s; a car 20 m behind follows in the same lane.";
  const std::string reply =
      "Sure. Here are the codes.\n"
      "Vehicle Code:\n- 'V1': [-1,0,0,4,4,4,4,4,4,1]\n- 'V2': [3,1,0,4,4,4,4,4,4,1]\n\n"
      "Map Code:\n- 'Map': [2,0,0,0,-1,1]\n\n"
      "Interaction Code:\n- 'I1': [0,0,0,0,0] | [0,0,0,0,0]\n- 'I2': [1,1,1,1,1] | [3,3,3,3,3]\n";
  const fs::path script = kWork / "mock_script.json";
  write_file(script, nlohmann::json{{"fallback", "no codes"}, {"replies", {{description, reply}}}}.dump(2));

  const std::string base = "--config \"" + (kWork / "desk.json").string() + "\" generate --description \"" +
                           description + "\" --mock-script \"" + script.string() + "\" --checkpoint \"" +
                           ckpt.string() + "\" --map-index \"" + index.string() + "\" -o ";
  const fs::path out1 = kWork / "described_1.json", out2 = kWork / "described_2.json";
  const int c1 = run(base + "\"" + out1.string() + "\" --render \"" + (kWork / "described.svg").string() + "\"",
                     "describe_1.log");
  const int c2 = run(base + "\"" + out2.string() + "\"", "describe_2.log");
  o.require(c1 == 0 && c2 == 0, "generate exited " + std::to_string(c1) + "/" + std::to_string(c2));
  if (c1 == 0 && c2 == 0) {
    const Scenario s = load_scenario(out1.string());
    o.require(validate_scenario(s).empty(), "generated scenario is invalid");
    o.require(s.vehicle_count() == 2, std::to_string(s.vehicle_count()) + " vehicles");
    o.require(read_file(out1) == read_file(out2), "two runs differ");
    o.require(fs::exists(kWork / "described.svg"), "no SVG rendered");
  }
  if (o.pass) o.detail = "2-vehicle scenario, deterministic, prompt hash " + std::string(llm::kPromptSha256.substr(0, 12));
  return o;
}

}  // namespace

int main() {
  fs::create_directories(kWork);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"codec oracle suite", codec_oracles},
      {"classifier equivalence", classifier_equivalence},
      {"code round trip", code_round_trip},
      {"gradient checks", gradient_checks},
      {"loss correctness", loss_correctness},
      {"overfit convergence", overfit},
      {"metric oracles", metric_oracles},
      {"equivariance", equivariance},
      {"end-to-end pipeline", pipeline},
      {"language path", llm_path},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << "criterion " << i + 1 << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
