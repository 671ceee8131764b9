// Copyright (c) 2026 The sndcr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "sndcr/config.hpp"
#include "sndcr/data.hpp"
#include "sndcr/discriminator.hpp"
#include "sndcr/features.hpp"
#include "sndcr/generator.hpp"
#include "sndcr/losses.hpp"
#include "sndcr/optim.hpp"
#include "sndcr/qs_attn.hpp"

namespace sndcr {

/// Learning rate at a 1-based epoch: constant through decay_start_epoch,
/// then linear decay to zero at cfg.epochs.
double lr_at(int64_t epoch, const TrainConfig& cfg);

/// Full training state: generator, discriminator, projection heads, frozen
/// extractor, history buffer, the two Adam optimizers, the data pipeline
/// and every random stream. Checkpoints capture all of it, so a resumed
/// run replays the exact loss trace of an uninterrupted one.
class TrainSession {
 public:
  explicit TrainSession(const TrainConfig& cfg);
  /// Resumes from a checkpoint written by fit/save_checkpoint; the stored
  /// config is authoritative.
  static std::unique_ptr<TrainSession> resume(const std::string& checkpoint_path);
  ~TrainSession();

  /// One optimization step on a batch pair: discriminator first (real y
  /// against a buffer-replayed fake), then the generator against the full
  /// objective. Throws TrainingAbort with diagnostics on non-finite losses.
  LossReport<float> train_step(const Tensor<float>& x, const Tensor<float>& y);

  /// Runs the remaining epochs, logging one key=value line per iteration to
  /// out_dir/loss_log.txt (and `echo` when given), checkpointing every
  /// checkpoint_every epochs plus at the end, and writing sample sheets.
  /// Returns the final checkpoint path.
  std::string fit(const std::string& out_dir, std::ostream* echo = nullptr);

  void save_checkpoint(const std::string& path);

  /// Inference-mode translation of a [B, 3, H, W] batch.
  Tensor<float> translate(const Tensor<float>& x);

  int64_t completed_epochs() const { return epoch_; }
  int64_t global_iteration() const { return global_iter_; }
  const TrainConfig& config() const { return cfg_; }

  UnpairedDataset& dataset() { return *data_; }
  ResnetGenerator<float>& generator() { return *gen_; }
  VggExtractor<float>& extractor() { return *vgg_; }
  ImageBuffer<float>& buffer() { return *buffer_; }

  uint64_t generator_param_hash();
  uint64_t discriminator_param_hash();

 private:
  TrainSession(const TrainConfig& cfg, const TensorStore* store);

  ParamRefs<float> gen_params();
  ParamRefs<float> disc_params();
  Tensor<float> sample_real(bool from_y);
  void write_samples(const std::string& out_dir, int64_t epoch);

  TrainConfig cfg_;
  std::unique_ptr<ResnetGenerator<float>> gen_;
  std::unique_ptr<PatchDiscriminator<float>> disc_;
  std::unique_ptr<PatchProjector<float>> heads_;
  std::unique_ptr<VggExtractor<float>> vgg_;
  std::unique_ptr<ImageBuffer<float>> buffer_;
  std::unique_ptr<UnpairedDataset> data_;
  std::unique_ptr<Adam<float>> opt_g_, opt_d_;
  RandomStream pick_rng_;
  int64_t epoch_ = 0;        // completed epochs
  int64_t global_iter_ = 0;  // completed iterations
};

/// Generator-only load for the translate command: rebuilds the architecture
/// from the embedded config and restores weights and SN state.
struct LoadedGenerator {
  TrainConfig cfg;
  std::unique_ptr<ResnetGenerator<float>> gen;
};
LoadedGenerator load_generator(const std::string& checkpoint_path);

}  // namespace sndcr
