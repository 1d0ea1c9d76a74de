#include "scenecode/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

namespace scenecode {

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& rule) {
    throw InvalidInputError("train config field '" + field + "': " + rule);
  };
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be > 0");
  if (!(weight_decay >= 0.0)) fail("weight_decay", "must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", "must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2", "must be in [0, 1)");
  if (!(epsilon > 0.0)) fail("epsilon", "must be > 0");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (max_steps < 0) fail("max_steps", "must be >= 0");
  if (log_every < 0) fail("log_every", "must be >= 0");
  if (shrink_dims) shrink_dims->validate();
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j{{"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay},
                   {"beta1", c.beta1},                 {"beta2", c.beta2},
                   {"epsilon", c.epsilon},             {"batch_size", c.batch_size},
                   {"epochs", c.epochs},               {"max_steps", c.max_steps},
                   {"seed", c.seed},                   {"log_every", c.log_every}};
  if (c.shrink_dims) j["shrink_dims"] = decoder_config_to_json(*c.shrink_dims);
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "epsilon") c.epsilon = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "max_steps") c.max_steps = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "log_every") c.log_every = value.get<int>();
      else if (key == "shrink_dims") c.shrink_dims = decoder_config_from_json(value);
      else throw InvalidInputError("unknown train config field '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw InvalidInputError("train config field '" + key + "' has the wrong type");
    }
  }
  c.validate();
  return c;
}

std::vector<Vec2> relative_displacements(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw InvalidInputError("relative_displacements: no trajectories");
  const Vec2 ego = trajectories.front().positions.back();
  std::vector<Vec2> out;
  out.reserve(trajectories.size());
  for (const Trajectory& t : trajectories) out.push_back(t.positions.back() - ego);
  return out;
}

std::vector<Vec2> relative_displacements(const Matrix& positions) {
  if (positions.rows() < 1 || positions.cols() < 2) throw InvalidInputError("relative_displacements: no trajectories");
  const Eigen::Index c = positions.cols() - 2;
  std::vector<Vec2> out;
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    out.push_back({positions(i, c) - positions(0, c), positions(i, c + 1) - positions(0, c + 1)});
  }
  return out;
}

TrajectoryTarget make_target(const Scenario& s) {
  const auto n = static_cast<Eigen::Index>(s.trajectories.size());
  const auto t_count = n ? static_cast<Eigen::Index>(s.trajectories.front().size()) : 0;
  TrajectoryTarget out;
  out.positions = Matrix::Zero(n, 2 * t_count);
  out.valid.resize(n, t_count);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Trajectory& tr = s.trajectories[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(tr.size()) != t_count) throw InvalidInputError("make_target: ragged trajectories");
    for (Eigen::Index t = 0; t < t_count; ++t) {
      out.positions(i, 2 * t) = tr.positions[static_cast<std::size_t>(t)].x;
      out.positions(i, 2 * t + 1) = tr.positions[static_cast<std::size_t>(t)].y;
      out.valid(i, t) = tr.valid_mask.empty() || tr.valid_mask[static_cast<std::size_t>(t)];
    }
  }
  return out;
}

LossBreakdown trajectory_loss(const TrajectoryTarget& gt, const Matrix& pred, Matrix* d_pred) {
  if (pred.rows() != gt.positions.rows() || pred.cols() != gt.positions.cols() ||
      gt.valid.rows() != pred.rows() || 2 * gt.valid.cols() != pred.cols()) {
    throw nn::ShapeError("trajectory_loss: prediction is " + std::to_string(pred.rows()) + "x" +
                         std::to_string(pred.cols()) + ", target is " + std::to_string(gt.positions.rows()) + "x" +
                         std::to_string(gt.positions.cols()));
  }
  const Eigen::Index n = pred.rows();
  const Eigen::Index steps = gt.valid.cols();
  if (n == 0) throw InvalidInputError("trajectory_loss: empty scenario");
  const double inv_n = 1.0 / static_cast<double>(n);
  if (d_pred) *d_pred = Matrix::Zero(n, pred.cols());

  LossBreakdown out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index valid = gt.valid.row(i).count();
    if (valid == 0) continue;
    double sum = 0.0;
    for (Eigen::Index t = 0; t < steps; ++t) {
      if (!gt.valid(i, t)) continue;
      const double ex = pred(i, 2 * t) - gt.positions(i, 2 * t);
      const double ey = pred(i, 2 * t + 1) - gt.positions(i, 2 * t + 1);
      sum += ex * ex + ey * ey;
      if (d_pred) {
        (*d_pred)(i, 2 * t) += 2.0 * ex * inv_n / static_cast<double>(valid);
        (*d_pred)(i, 2 * t + 1) += 2.0 * ey * inv_n / static_cast<double>(valid);
      }
    }
    out.traj_term += sum / static_cast<double>(valid);
  }

  const Eigen::Index last = steps - 1;
  if (gt.valid(0, last)) {
    const Eigen::Index cx = 2 * last;
    for (Eigen::Index i = 1; i < n; ++i) {
      if (!gt.valid(i, last)) continue;
      for (Eigen::Index k = 0; k < 2; ++k) {
        const double d_hat = pred(i, cx + k) - pred(0, cx + k);
        const double d = gt.positions(i, cx + k) - gt.positions(0, cx + k);
        const double e = d_hat - d;
        out.rela_term += e * e;
        if (d_pred) {
          (*d_pred)(i, cx + k) += 2.0 * e * inv_n;
          (*d_pred)(0, cx + k) -= 2.0 * e * inv_n;
        }
      }
    }
  }
  out.traj_term *= inv_n;
  out.rela_term *= inv_n;
  out.total = out.traj_term + out.rela_term;
  return out;
}

TrainingSample make_training_sample(const Scenario& s, const DecoderConfig& dc, const CodecConfig& cc) {
  const CodeBundle codes = extract_codes(s, cc);
  TrainingSample out{make_decoder_input(codes, s.map, dc, cc), make_target(s)};
  if (out.target.valid.cols() != dc.timesteps) {
    throw InvalidInputError("training sample has " + std::to_string(out.target.valid.cols()) +
                            " timesteps, decoder generates " + std::to_string(dc.timesteps));
  }
  return out;
}

AdamW::AdamW(const TrainConfig& cfg, nn::ParamStore& store)
    : lr_(cfg.learning_rate), wd_(cfg.weight_decay), b1_(cfg.beta1), b2_(cfg.beta2), eps_(cfg.epsilon) {
  for (const nn::Param* p : store.params()) {
    state_.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    state_.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::set_state(AdamState s) {
  if (s.m.size() != state_.m.size() || s.v.size() != state_.v.size()) {
    throw InvalidInputError("optimizer state does not match the model");
  }
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    if (s.m[i].rows() != state_.m[i].rows() || s.m[i].cols() != state_.m[i].cols()) {
      throw InvalidInputError("optimizer state tensor " + std::to_string(i) + " has the wrong shape");
    }
  }
  state_ = std::move(s);
}

void AdamW::step(nn::ParamStore& store) {
  auto params = store.params();
  ++state_.step;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(state_.step));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(state_.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Param& p = *params[i];
    Matrix& m = state_.m[i];
    Matrix& v = state_.v[i];
    m = b1_ * m + (1.0 - b1_) * p.grad;
    v = b2_ * v + (1.0 - b2_) * p.grad.cwiseProduct(p.grad);
    const Matrix update = (m / c1).array() / ((v / c2).array().sqrt() + eps_);
    p.value -= lr_ * (update + wd_ * p.value);
  }
}

void write_log_record(std::ostream& out, const TrainLogRecord& r) {
  out << "step=" << r.step << " traj=" << r.loss.traj_term << " rela=" << r.loss.rela_term
      << " total=" << r.loss.total << " wall=" << r.wall_seconds << '\n';
}

Trainer::Trainer(DecoderModel& model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), optimizer_(cfg, model.params()) {
  cfg_.validate();
}

LossBreakdown Trainer::train_step(const std::vector<const TrainingSample*>& batch) {
  if (batch.empty()) throw InvalidInputError("train_step: empty batch");
  model_.params().zero_grad();
  LossBreakdown sum;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const TrainingSample* sample : batch) {
    DecoderCache cache;
    const Matrix pred = model_.forward(sample->input, &cache);
    Matrix d_pred;
    const LossBreakdown l = trajectory_loss(sample->target, pred, &d_pred);
    if (!std::isfinite(l.total)) {
      throw TrainingError("non-finite loss at step " + std::to_string(steps_done() + 1) +
                          " (traj=" + std::to_string(l.traj_term) + ", rela=" + std::to_string(l.rela_term) + ")");
    }
    sum.traj_term += scale * l.traj_term;
    sum.rela_term += scale * l.rela_term;
    sum.total += scale * l.total;
    model_.backward(cache, d_pred * scale);
  }
  for (const nn::Param* p : model_.params().params()) {
    if (!p->grad.allFinite()) {
      throw TrainingError("non-finite gradient in '" + p->name + "' at step " + std::to_string(steps_done() + 1));
    }
  }
  optimizer_.step(model_.params());
  return sum;
}

std::vector<TrainLogRecord> Trainer::fit(const std::vector<TrainingSample>& samples, std::ostream* log) {
  if (samples.empty()) throw InvalidInputError("fit: no training samples");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  nn::Rng rng(cfg_.seed);
  const auto start = std::chrono::steady_clock::now();
  std::vector<TrainLogRecord> records;
  const auto batch_size = static_cast<std::size_t>(cfg_.batch_size);
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      if (cfg_.max_steps > 0 && records.size() >= static_cast<std::size_t>(cfg_.max_steps)) return records;
      std::vector<const TrainingSample*> batch;
      for (std::size_t k = begin; k < std::min(order.size(), begin + batch_size); ++k) {
        batch.push_back(&samples[order[k]]);
      }
      TrainLogRecord r;
      r.loss = train_step(batch);
      r.step = steps_done();
      r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (log && cfg_.log_every > 0 && r.step % cfg_.log_every == 0) write_log_record(*log, r);
      spdlog::debug("step {} total {:.6f}", r.step, r.loss.total);
      records.push_back(r);
    }
  }
  return records;
}

LossBreakdown evaluate_loss(const DecoderModel& model, const std::vector<TrainingSample>& samples) {
  LossBreakdown sum;
  if (samples.empty()) return sum;
  const double scale = 1.0 / static_cast<double>(samples.size());
  for (const TrainingSample& s : samples) {
    const LossBreakdown l = trajectory_loss(s.target, model.forward(s.input, nullptr));
    sum.traj_term += scale * l.traj_term;
    sum.rela_term += scale * l.rela_term;
    sum.total += scale * l.total;
  }
  return sum;
}

}  // namespace scenecode
