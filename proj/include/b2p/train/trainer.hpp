#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "b2p/ad/tape.hpp"
#include "b2p/metrics/eval.hpp"
#include "b2p/net/model.hpp"
#include "b2p/net/network.hpp"
#include "b2p/rng.hpp"
#include "b2p/train/adam.hpp"
#include "b2p/voxel/hierarchy.hpp"
#include "b2p/voxel/point_cloud.hpp"

namespace b2p::train {

struct TrainConfig {
  double lambda = 10.0;
  double alpha = 3.0;
  double beta = 0.2;
  double gamma = 0.0;  // LPIPS weight; no LPIPS hook is shipped
  double lr = 1e-4;
  int batch = 4;
  int iters = 60000;
  int views = 4;
  net::ModelConfig model;
  uint64_t seed = 0;
  int image_width = 64;
  int image_height = 64;

  // Throws ConfigError on negative weights, bad counts or a bad model config.
  void validate() const;
  nlohmann::json to_json() const;
};

// A training scene: a voxelized cloud and the circle its views are drawn from.
struct Scene {
  voxel::PointCloud cloud;
  metrics::ViewRig rig;
};

Scene make_scene(voxel::PointCloud cloud, int width, int height);

// Per-level distortion of one sample, averaged over its views.
struct LevelDistortion {
  double l1 = 0.0;
  double ssim_term = 0.0;  // 1 - SSIM
};

// rate + lambda * sum over levels of (alpha L1 + beta (1 - SSIM)).
double total_loss(double rate, const std::map<int, LevelDistortion>& dist, const TrainConfig& cfg);
ad::Var total_loss(ad::Tape& t, ad::Var rate, const std::map<int, std::pair<ad::Var, ad::Var>>& dist,
                   const TrainConfig& cfg);

struct LossRecord {
  int iter = 0;
  double rate_bits = 0.0;  // summed over coded levels
  double rate = 0.0;       // the rate term: bits per original point
  double l1 = 0.0;         // summed over rendered levels
  double ssim_term = 0.0;
  double distortion = 0.0;  // lambda-free: sum of alpha L1 + beta (1 - SSIM)
  double total = 0.0;
  std::map<int, LevelDistortion> levels;
};

// Jittered azimuths: view k of `count` at 2 pi (k + u_k) / count.
std::vector<double> sample_azimuths(Rng& rng, int count);

class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<Scene> scenes);
  // Continues from existing weights.
  Trainer(TrainConfig cfg, std::vector<Scene> scenes, net::B2PModel init);

  const TrainConfig& config() const { return cfg_; }
  const net::B2PModel& model() const { return model_; }
  int iteration() const { return iter_; }

  // Loss and gradients of one sample under the noise proxy; `rng` draws the
  // views and the noise.
  LossRecord sample_loss(size_t scene, Rng& rng, std::vector<Matrix>* grads);

  // One optimizer step over `batch` samples. Throws NumericError naming the
  // term when a loss is not finite.
  LossRecord step();

  // Runs the remaining iterations; `log` sees every record.
  void run(const std::function<void(const LossRecord&)>& log = {});

  // Model with config and the loss curve in its metadata.
  net::B2PModel checkpoint() const;
  const std::vector<LossRecord>& history() const { return history_; }

 private:
  struct SceneCache {
    voxel::OctreeHierarchy hier;
    std::unique_ptr<net::LevelMaps> maps;
    std::vector<splat::Gaussian3D> reference;
    Matrix colors;
  };

  TrainConfig cfg_;
  std::vector<Scene> scenes_;
  std::vector<std::unique_ptr<SceneCache>> cache_;
  net::B2PModel model_;
  AdamState adam_;
  Rng rng_;
  int iter_ = 0;
  std::vector<LossRecord> history_;

  void prepare();
};

std::string log_csv_header();
std::string log_csv_row(const LossRecord& r);

}  // namespace b2p::train
