#include "b2p/train/trainer.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "b2p/ad/losses.hpp"
#include "b2p/ad/ops.hpp"
#include "b2p/error.hpp"
#include "b2p/net/pipeline.hpp"
#include "b2p/splat/rasterizer.hpp"

namespace b2p::train {

void TrainConfig::validate() const {
  model.validate();
  for (auto [name, v] : {std::pair{"lambda", lambda}, {"alpha", alpha}, {"beta", beta}, {"gamma", gamma}, {"lr", lr}}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string("train: ") + name + " must be finite and >= 0");
  }
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (iters < 0) throw ConfigError("train: iters must be >= 0");
  if (views < 1) throw ConfigError("train: views must be >= 1");
  if (image_width < 16 || image_height < 16) throw ConfigError("train: images must be at least 16x16");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lambda", lambda}, {"alpha", alpha},   {"beta", beta},
          {"gamma", gamma},   {"lr", lr},         {"batch", batch},
          {"iters", iters},   {"views", views},   {"seed", seed},
          {"image_width", image_width}, {"image_height", image_height}, {"model", model.to_json()}};
}

Scene make_scene(voxel::PointCloud cloud, int width, int height) {
  Scene s;
  s.rig = metrics::fit_rig(cloud, width, height);
  s.cloud = std::move(cloud);
  return s;
}

double total_loss(double rate, const std::map<int, LevelDistortion>& dist, const TrainConfig& cfg) {
  double d = 0.0;
  for (const auto& [m, v] : dist) d += cfg.alpha * v.l1 + cfg.beta * v.ssim_term;
  return rate + cfg.lambda * d;
}

ad::Var total_loss(ad::Tape& t, ad::Var rate, const std::map<int, std::pair<ad::Var, ad::Var>>& dist,
                   const TrainConfig& cfg) {
  ad::Var d;
  for (const auto& [m, v] : dist) {
    const ad::Var term = ad::add(t, ad::scale(t, v.first, cfg.alpha), ad::scale(t, v.second, cfg.beta));
    d = d.valid() ? ad::add(t, d, term) : term;
  }
  if (!d.valid()) return rate;
  return ad::add(t, rate, ad::scale(t, d, cfg.lambda));
}

std::vector<double> sample_azimuths(Rng& rng, int count) {
  std::vector<double> a;
  for (int k = 0; k < count; ++k) a.push_back(2.0 * std::numbers::pi * (k + rng.uniform()) / count);
  return a;
}

Trainer::Trainer(TrainConfig cfg, std::vector<Scene> scenes)
    : Trainer(cfg, std::move(scenes), net::B2PModel::initialize(cfg.model, cfg.seed)) {}

Trainer::Trainer(TrainConfig cfg, std::vector<Scene> scenes, net::B2PModel init)
    : cfg_(std::move(cfg)), scenes_(std::move(scenes)), model_(std::move(init)), rng_(Rng(cfg_.seed).split("train")) {
  cfg_.validate();
  if (scenes_.empty()) throw ConfigError("train: no scenes");
  if (model_.config().to_json() != cfg_.model.to_json()) {
    throw ConfigError("train: model configuration differs from the training configuration");
  }
  adam_ = adam_init(model_.params());
  prepare();
}

void Trainer::prepare() {
  for (const Scene& s : scenes_) {
    if (s.cloud.bit_depth != cfg_.model.depth) {
      throw ConfigError("train: scene bit depth " + std::to_string(s.cloud.bit_depth) + " differs from N=" +
                        std::to_string(cfg_.model.depth));
    }
    auto c = std::make_unique<SceneCache>();
    c->hier = voxel::build_hierarchy(s.cloud, cfg_.model.base_level);
    c->maps = std::make_unique<net::LevelMaps>(c->hier);
    c->reference = metrics::reference_gaussians(s.cloud);
    c->colors = net::color_matrix(s.cloud);
    cache_.push_back(std::move(c));
  }
}

namespace {

void check_finite(double v, const char* term, int iter) {
  if (!std::isfinite(v)) {
    throw NumericError("training diverged at iteration " + std::to_string(iter) + ": " + term + " is not finite");
  }
}

}  // namespace

LossRecord Trainer::sample_loss(size_t scene, Rng& rng, std::vector<Matrix>* grads) {
  const net::ModelConfig& mc = cfg_.model;
  SceneCache& c = *cache_.at(scene);
  const Scene& sc = scenes_[scene];
  ad::Tape t(grads != nullptr);
  net::Network net(t, model_, *c.maps);
  LossRecord rec;
  rec.iter = iter_;

  Rng noise_rng = rng.split("noise");
  std::string term = "rate term";
  try {
    const auto feats = net.extract(t.constant(c.colors));
    std::map<int, ad::Var> recon;
    ad::Var bits;
    for (int n = mc.base_level; n <= mc.m_max; ++n) {
      const ad::Var ctx = net.context(n, recon);
      const ad::Var y = net.squeeze(n, feats.at(n), ctx);
      const auto ep = net.entropy(n, ctx);
      Matrix noise(t.value(y).rows(), t.value(y).cols());
      for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = noise_rng.uniform(-0.5, 0.5);
      const ad::Var yt = ad::add(t, y, t.constant(std::move(noise)));
      const ad::Var r = ad::rate_bits(t, yt, ep.mu, ep.sigma);
      bits = bits.valid() ? ad::add(t, bits, r) : r;
      recon[n] = net.reconstruct(n, yt, ctx);
    }
    rec.rate_bits = t.value(bits)(0, 0);
    check_finite(rec.rate_bits, "rate term", iter_);
    term = "distortion term";
    const ad::Var rate = ad::scale(t, bits, 1.0 / static_cast<double>(sc.cloud.size()));
    rec.rate = t.value(rate)(0, 0);

    Rng view_rng = rng.split("views");
    std::vector<splat::Camera> cams;
    std::vector<Image> gt;
    for (double az : sample_azimuths(view_rng, cfg_.views)) {
      cams.push_back(metrics::circle_camera(az, sc.rig));
      gt.push_back(splat::rasterize(c.reference, cams.back()));
    }
    const double inv_views = 1.0 / static_cast<double>(cfg_.views);
    std::map<int, std::pair<ad::Var, ad::Var>> dist;
    for (int m = mc.m_min; m <= mc.m_max; ++m) {
      const ad::Var g = net.generate(m, recon.at(m));
      ad::Var l1, ss;
      for (size_t v = 0; v < cams.size(); ++v) {
        const ad::Var img = ad::render(t, g, cams[v]);
        const ad::Var a = ad::l1_loss(t, img, gt[v]);
        const ad::Var b = ad::ssim_loss(t, img, gt[v]);
        l1 = l1.valid() ? ad::add(t, l1, a) : a;
        ss = ss.valid() ? ad::add(t, ss, b) : b;
      }
      l1 = ad::scale(t, l1, inv_views);
      ss = ad::scale(t, ss, inv_views);
      LevelDistortion ld{t.value(l1)(0, 0), t.value(ss)(0, 0)};
      check_finite(ld.l1, "L1 term", iter_);
      check_finite(ld.ssim_term, "SSIM term", iter_);
      rec.levels[m] = ld;
      rec.l1 += ld.l1;
      rec.ssim_term += ld.ssim_term;
      rec.distortion += cfg_.alpha * ld.l1 + cfg_.beta * ld.ssim_term;
      dist[m] = {l1, ss};
    }
    const ad::Var loss = total_loss(t, rate, dist, cfg_);
    rec.total = t.value(loss)(0, 0);
    check_finite(rec.total, "total loss", iter_);
    term = "backward pass";
    if (grads) t.backward(loss);
  } catch (const NumericError& e) {
    const std::string what = e.what();
    if (what.rfind("training diverged", 0) == 0) throw;
    throw NumericError("training diverged at iteration " + std::to_string(iter_) + ": " + term + ": " + what);
  }
  if (grads) {
    const auto g = t.param_grads(model_.params());
    if (grads->empty()) {
      *grads = g;
    } else {
      for (size_t i = 0; i < g.size(); ++i) (*grads)[i] += g[i];
    }
  }
  return rec;
}

LossRecord Trainer::step() {
  std::vector<Matrix> grads;
  LossRecord avg;
  avg.iter = iter_;
  const Rng it = rng_.split(static_cast<uint64_t>(iter_));
  const double inv = 1.0 / cfg_.batch;
  for (int b = 0; b < cfg_.batch; ++b) {
    const size_t scene = (static_cast<size_t>(iter_) * cfg_.batch + b) % scenes_.size();
    Rng r = it.split(static_cast<uint64_t>(b));
    const LossRecord rec = sample_loss(scene, r, &grads);
    avg.rate_bits += inv * rec.rate_bits;
    avg.rate += inv * rec.rate;
    avg.l1 += inv * rec.l1;
    avg.ssim_term += inv * rec.ssim_term;
    avg.distortion += inv * rec.distortion;
    avg.total += inv * rec.total;
    for (const auto& [m, d] : rec.levels) {
      avg.levels[m].l1 += inv * d.l1;
      avg.levels[m].ssim_term += inv * d.ssim_term;
    }
  }
  for (Matrix& g : grads) g *= inv;
  for (size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite()) {
      throw NumericError("training diverged at iteration " + std::to_string(iter_) + ": gradient of " +
                         model_.params().at(i).name + " is not finite");
    }
  }
  AdamConfig ac;
  ac.lr = cfg_.lr;
  adam_step(model_.params(), grads, adam_, ac);
  model_.params().round_to_float();
  history_.push_back(avg);
  ++iter_;
  return avg;
}

void Trainer::run(const std::function<void(const LossRecord&)>& log) {
  while (iter_ < cfg_.iters) {
    const LossRecord r = step();
    if (log) log(r);
  }
}

net::B2PModel Trainer::checkpoint() const {
  net::B2PModel m = model_;
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& r : history_) curve.push_back(r.total);
  m.meta()["train"] = cfg_.to_json();
  m.meta()["train"]["completed_iters"] = iter_;
  m.meta()["train"]["rate_units"] = "bits per original point";
  m.meta()["train"]["lpips"] = "absent: gamma term contributes 0 (paper uses gamma = 1)";
  m.meta()["train"]["loss_curve"] = curve;
  return m;
}

std::string log_csv_header() { return "iter,rate_bits,rate_bpp,l1,ssim_term,distortion,total\n"; }

std::string log_csv_row(const LossRecord& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.iter << "," << r.rate_bits << "," << r.rate << "," << r.l1 << "," << r.ssim_term << "," << r.distortion
     << "," << r.total << "\n";
  return os.str();
}

}  // namespace b2p::train
