// Decoder training: code extraction from ground truth, the two-term
// trajectory loss, and AdamW.
#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "scenecode/checkpoint.hpp"
#include "scenecode/codec.hpp"
#include "scenecode/decoder.hpp"

namespace scenecode {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate{3e-4};
  double weight_decay{1e-4};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
  int batch_size{8};
  int epochs{1};
  /// Stops early once this many optimizer steps have run; 0 means no limit.
  int max_steps{0};
  std::uint64_t seed{0};
  /// Replaces the model config when set.
  std::optional<DecoderConfig> shrink_dims;
  /// Log every n-th step; 0 disables logging.
  int log_every{1};

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossBreakdown {
  double traj_term{0.0};
  double rela_term{0.0};
  double total{0.0};
};

/// d_i = final position of vehicle i minus the ego's final position.
std::vector<Vec2> relative_displacements(const std::vector<Trajectory>& trajectories);
std::vector<Vec2> relative_displacements(const Matrix& positions);

/// Ground truth laid out like decoder output: N x 2T positions with an
/// N x T validity mask.
struct TrajectoryTarget {
  Matrix positions;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> valid;
};

TrajectoryTarget make_target(const Scenario& s);

/// Per vehicle, the trajectory term is the mean over valid timesteps of the
/// squared Euclidean error; the relative term is the squared Euclidean error
/// of d_i. Both sums share one 1/N factor. When `d_pred` is non-null it
/// receives dL/d(pred).
LossBreakdown trajectory_loss(const TrajectoryTarget& gt, const Matrix& pred, Matrix* d_pred = nullptr);

/// A scenario prepared for training: decoder inputs from its extracted codes
/// and its own map, plus the ground-truth target.
struct TrainingSample {
  DecoderInput input;
  TrajectoryTarget target;
};

TrainingSample make_training_sample(const Scenario& s, const DecoderConfig& dc, const CodecConfig& cc);

class AdamW {
 public:
  AdamW(const TrainConfig& cfg, nn::ParamStore& store);

  void step(nn::ParamStore& store);
  [[nodiscard]] const AdamState& state() const { return state_; }
  void set_state(AdamState s);

 private:
  double lr_, wd_, b1_, b2_, eps_;
  AdamState state_;
};

struct TrainLogRecord {
  long step{0};
  LossBreakdown loss;
  double wall_seconds{0.0};
};

/// Writes "step=<n> traj=<v> rela=<v> total=<v> wall=<s>".
void write_log_record(std::ostream& out, const TrainLogRecord& r);

class Trainer {
 public:
  Trainer(DecoderModel& model, const TrainConfig& cfg);

  /// Forward, backward and one AdamW update on the batch. Throws
  /// TrainingError on a non-finite loss or gradient.
  LossBreakdown train_step(const std::vector<const TrainingSample*>& batch);

  /// Runs the configured epochs over `samples`, shuffling with the
  /// configured seed. Returns one record per step.
  std::vector<TrainLogRecord> fit(const std::vector<TrainingSample>& samples, std::ostream* log = nullptr);

  [[nodiscard]] long steps_done() const { return optimizer_.state().step; }
  [[nodiscard]] AdamW& optimizer() { return optimizer_; }

 private:
  DecoderModel& model_;
  TrainConfig cfg_;
  AdamW optimizer_;
};

/// Evaluates the loss without touching gradients.
LossBreakdown evaluate_loss(const DecoderModel& model, const std::vector<TrainingSample>& samples);

}  // namespace scenecode
