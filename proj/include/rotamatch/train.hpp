#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rotamatch/pipeline.hpp"
#include "rotamatch/scenes.hpp"

namespace rotamatch::train {

// Where rotation augmentation is applied during training:
//   norot         nowhere
//   rotmatch      matcher loop only (independent angles)
//   rotdescmatch  descriptor and matcher loops (independent angles)
//   jointdesc     descriptor loop with one shared angle per pair, matcher
//                 loop independent
enum class Regime { kNoRot, kRotMatch, kRotDescMatch, kJointDescRotMatch };

std::string regime_name(Regime r);
Regime regime_from_name(const std::string& s);

struct TrainConfig {
  Regime regime = Regime::kNoRot;
  int desc_steps = 2000;
  int matcher_steps = 4000;
  int batch_size = 8;  // image pairs per gradient step
  double lr = 2e-4;
  double weight_decay = 0.01;
  uint64_t seed = 0;
  int n_keypoints = 256;
  double tau = 0.1;
  double data_fraction = 1.0;
  double infonce_temp = 0.07;
  pipeline::PipelineConfig arch;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainLogEntry {
  int64_t step;
  double loss;
  double wall_time_ms;
};

struct TrainLog {
  std::vector<TrainLogEntry> rows;
  void write_csv(const std::filesystem::path& path) const;
};

// Symmetric InfoNCE over GT-corresponding descriptors with in-batch
// negatives. Zero GT matches gives a constant 0 with zero gradients.
Tensor descriptor_loss(Tape* tape, const KeypointSet& kps_a, const KeypointSet& kps_b,
                       const std::vector<MatchPair>& gt, double temperature);

// NLL of the soft assignment at GT positive entries: -mean log P_ij.
Tensor matcher_loss(Tape* tape, const pipeline::AssignmentMatrix& am,
                    const std::vector<MatchPair>& gt);

pipeline::DescriptorNet train_descriptor(const TrainConfig& config,
                                         const scenes::Dataset& dataset,
                                         TrainLog* log = nullptr);

pipeline::MatcherNet train_matcher(const TrainConfig& config,
                                   const pipeline::DescriptorNet& frozen_desc,
                                   const scenes::Dataset& dataset,
                                   TrainLog* log = nullptr);

struct TrainResult {
  pipeline::DescriptorNet desc;
  pipeline::MatcherNet matcher;
  TrainLog desc_log, matcher_log;
};

// Full staged recipe: descriptor first, then matcher against the frozen
// descriptor. Deterministic given config.
TrainResult run_regime(const TrainConfig& config, const scenes::Dataset& dataset);

}  // namespace rotamatch::train
