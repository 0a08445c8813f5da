// b2p: encode, decode, render, train, eval and synth.
//
// Exit codes: 0 ok, 1 usage or configuration, 2 missing input, 3 stream or
// level error, 4 numeric failure.

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "b2p/codec/bitstream.hpp"
#include "b2p/codec/geometry.hpp"
#include "b2p/error.hpp"
#include "b2p/metrics/eval.hpp"
#include "b2p/net/pipeline.hpp"
#include "b2p/splat/image_io.hpp"
#include "b2p/splat/rasterizer.hpp"
#include "b2p/train/trainer.hpp"
#include "b2p/voxel/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace b2p;

namespace {

enum Exit { kOk = 0, kUsage = 1, kMissing = 2, kStream = 3, kNumeric = 4 };

// Name of the step in progress, reported when a command fails.
std::string g_stage = "startup";
bool g_quiet = false;

void stage(std::string s) { g_stage = std::move(s); }

void info(const std::string& s) {
  if (!g_quiet) std::cout << s;
}

std::vector<uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingInputError("input not found: " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<uint8_t>& b) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << s;
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw MissingInputError("input not found: " + p.string());
}

net::B2PModel load_model(const fs::path& p) {
  stage("load model");
  return net::B2PModel::load(p);
}

voxel::PointCloud load_cloud(const fs::path& p, int depth) {
  stage("read point cloud");
  require_file(p);
  return voxel::load_ply(p, depth);
}

codec::LayeredBitstream load_stream(const fs::path& p) {
  stage("read stream");
  const auto bytes = read_bytes(p);
  stage("parse stream");
  return codec::deserialize(bytes);
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// "7:9" -> {7, 9}; "9" -> {L, 9}.
std::pair<int, int> parse_levels(const std::string& s, int base) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) return {base, std::stoi(s)};
    return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ConfigError("--levels: expected LO:HI, got '" + s + "'");
  }
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string kind = "sphere";
  int depth = 10;
  double radius = 0.0;
  int checker = 8;
  uint64_t seed = 0;
  std::string out;
  bool ascii = false;
};

int cmd_synth(const SynthArgs& a) {
  stage("validate flags");
  if (a.depth < 2 || a.depth > 16) throw ConfigError("synth: --depth must be in [2, 16]");
  voxel::SynthParams p;
  p.bit_depth = a.depth;
  p.radius = a.radius;
  p.checker = a.checker;
  p.seed = a.seed;
  stage("generate " + a.kind);
  const voxel::PointCloud pc = voxel::synth(a.kind, p);
  stage("write point cloud");
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  voxel::save_ply(a.out, pc, a.ascii ? voxel::PlyEncoding::kAscii : voxel::PlyEncoding::kBinaryLittleEndian);
  info(a.kind + " N=" + std::to_string(a.depth) + ": " + std::to_string(pc.size()) + " points -> " + a.out + "\n");
  return kOk;
}

// ---------------------------------------------------------------- encode

struct EncodeArgs {
  std::string in, model, out, levels;
  bool json = false;
};

json encode_report(const net::EncodeResult& r, const codec::LayeredBitstream& s, size_t file_bytes) {
  const double pts = static_cast<double>(s.header.original_points);
  json levels = json::array();
  double feat = 0.0;
  for (const auto& l : r.levels) {
    const double bits = 8.0 * static_cast<double>(s.level_bytes(l.level));
    feat += bits;
    levels.push_back({{"level", l.level},
                      {"points", l.points},
                      {"symbols", l.symbols},
                      {"clamped", l.clamped},
                      {"bytes", s.level_bytes(l.level)},
                      {"bpp", bits / pts},
                      {"estimate_bits", l.estimate_bits}});
  }
  return {{"points", s.header.original_points},
          {"header_bytes", codec::kHeaderBytes},
          {"geometry_bytes", s.geometry_bytes()},
          {"bpp_geometry", 8.0 * static_cast<double>(s.geometry_bytes()) / pts},
          {"levels", levels},
          {"bpp_features", feat / pts},
          {"file_bytes", file_bytes},
          {"bpp_total", 8.0 * static_cast<double>(file_bytes) / pts}};
}

int cmd_encode(const EncodeArgs& a) {
  const net::B2PModel model = load_model(a.model);
  const auto& mc = model.config();
  const voxel::PointCloud pc = load_cloud(a.in, mc.depth);
  stage("validate flags");
  int top = mc.m_max;
  if (!a.levels.empty()) {
    const auto [lo, hi] = parse_levels(a.levels, mc.base_level);
    if (lo != mc.base_level) {
      throw ConfigError("--levels must start at the base level L=" + std::to_string(mc.base_level));
    }
    if (hi < lo || hi > mc.m_max) {
      throw ConfigError("--levels: top level must be in [" + std::to_string(lo) + ", " + std::to_string(mc.m_max) + "]");
    }
    top = hi;
  }
  stage("encode");
  const net::EncodeResult r = net::encode_pipeline(pc, model, top);
  stage("write stream");
  const auto bytes = codec::serialize(r.stream);
  write_bytes(a.out, bytes);
  const json rep = encode_report(r, r.stream, bytes.size());
  if (a.json) {
    std::cout << rep.dump(2) << "\n";
    return kOk;
  }
  std::ostringstream os;
  os << "points " << pc.size() << ", levels " << mc.base_level << ".." << top << "\n";
  os << "level   points  symbols    bytes     bpp\n";
  for (const auto& l : rep["levels"]) {
    char line[128];
    std::snprintf(line, sizeof line, "%5d %8zu %8zu %8zu %7.4f\n", l["level"].get<int>(), l["points"].get<size_t>(),
                  l["symbols"].get<size_t>(), l["bytes"].get<size_t>(), l["bpp"].get<double>());
    os << line;
  }
  os << "geometry " << fmt(rep["bpp_geometry"].get<double>()) << " bpp, features "
     << fmt(rep["bpp_features"].get<double>()) << " bpp, total " << fmt(rep["bpp_total"].get<double>()) << " bpp ("
     << bytes.size() << " bytes) -> " << a.out << "\n";
  info(os.str());
  return kOk;
}

// ---------------------------------------------------------------- decode

struct DecodeArgs {
  std::string in, model, out, render;
  int level = -1;
  int width = 256, height = 256;
};

splat::Camera front_camera(const std::vector<Coord>& pts, int w, int h) {
  std::vector<Vec3> c;
  for (const Coord& p : pts) c.push_back({p[0] + 0.5, p[1] + 0.5, p[2] + 0.5});
  return metrics::camera_circle(1, metrics::fit_rig(c, w, h))[0];
}

int cmd_decode(const DecodeArgs& a) {
  const net::B2PModel model = load_model(a.model);
  const codec::LayeredBitstream s = load_stream(a.in);
  const int m = a.level < 0 ? std::min(model.config().m_max, s.top_level()) : a.level;
  stage("decode level " + std::to_string(m));
  const net::DecodeResult r = net::decode_pipeline(s, model, m);
  stage("write gaussians");
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  splat::save_gaussians(a.out, r.gaussians);
  if (!a.render.empty()) {
    stage("render");
    const auto pts = codec::decode_geometry_points(s.geometry, s.header.depth);
    const Image img = splat::rasterize(r.gaussians, front_camera(pts, a.width, a.height));
    splat::write_png(a.render, img);
  }
  info("decoded M=" + std::to_string(m) + ": " + std::to_string(r.gaussians.size()) + " gaussians -> " + a.out + "\n");
  return kOk;
}

// ---------------------------------------------------------------- render

struct RenderArgs {
  std::string in, model, out_dir;
  int level = -1;
  int views = 12;
  int width = 256, height = 256;
  int depth = 10;
};

int cmd_render(const RenderArgs& a) {
  stage("validate flags");
  if (a.views < 1) throw ConfigError("--views must be >= 1");
  std::vector<splat::Gaussian3D> g;
  std::vector<Vec3> centers;
  const std::string ext = fs::path(a.in).extension().string();
  if (ext == ".b2p") {
    if (a.model.empty()) throw ConfigError("render: a .b2p input needs --model");
    const net::B2PModel model = load_model(a.model);
    const codec::LayeredBitstream s = load_stream(a.in);
    const int m = a.level < 0 ? std::min(model.config().m_max, s.top_level()) : a.level;
    stage("decode level " + std::to_string(m));
    g = net::decode_pipeline(s, model, m).gaussians;
    for (const Coord& p : codec::decode_geometry_points(s.geometry, s.header.depth)) {
      centers.push_back({p[0] + 0.5, p[1] + 0.5, p[2] + 0.5});
    }
  } else if (ext == ".ply") {
    const voxel::PointCloud pc = load_cloud(a.in, a.depth);
    g = metrics::reference_gaussians(pc);
    for (const auto& x : g) centers.push_back(x.mean);
  } else {
    stage("read gaussians");
    require_file(a.in);
    g = splat::load_gaussians(a.in);
    for (const auto& x : g) centers.push_back(x.mean);
  }
  stage("render");
  const auto cams = metrics::camera_circle(a.views, metrics::fit_rig(centers, a.width, a.height));
  fs::create_directories(a.out_dir);
  for (size_t v = 0; v < cams.size(); ++v) {
    char name[32];
    std::snprintf(name, sizeof name, "view_%02zu.png", v);
    splat::write_png(fs::path(a.out_dir) / name, splat::rasterize(g, cams[v]));
  }
  info("rendered " + std::to_string(cams.size()) + " views of " + std::to_string(g.size()) + " gaussians -> " +
       a.out_dir + "\n");
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::vector<std::string> scenes;
  std::string synth_kind, config, init, out, log;
  train::TrainConfig cfg;
};

// Keys accepted in a training config file.
const std::vector<std::string> kTrainKeys = {"lambda", "alpha", "beta",  "gamma",    "lr",       "batch",
                                             "iters",  "views", "seed",  "N",        "L",        "M_min",
                                             "M_max",  "channels", "squeezed", "width", "height"};

// Values from `file` for every key not given on the command line.
void apply_config_file(const fs::path& file, const CLI::App& sub, train::TrainConfig& c) {
  stage("read config");
  const auto bytes = read_bytes(file);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + file.string() + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(kTrainKeys.begin(), kTrainKeys.end(), k) == kTrainKeys.end()) {
      throw ConfigError("config " + file.string() + ": unknown key '" + k + "'");
    }
  }
  auto take = [&](const std::string& key, const std::string& flag, auto& dst) {
    if (j.contains(key) && sub.count(flag) == 0) {
      try {
        j.at(key).get_to(dst);
      } catch (const json::exception&) {
        throw ConfigError("config " + file.string() + ": bad value for '" + key + "'");
      }
    }
  };
  take("lambda", "--lambda", c.lambda);
  take("alpha", "--alpha", c.alpha);
  take("beta", "--beta", c.beta);
  take("gamma", "--gamma", c.gamma);
  take("lr", "--lr", c.lr);
  take("batch", "--batch", c.batch);
  take("iters", "--iters", c.iters);
  take("views", "--views", c.views);
  take("seed", "--seed", c.seed);
  take("N", "--N", c.model.depth);
  take("L", "--L", c.model.base_level);
  take("M_min", "--M-min", c.model.m_min);
  take("M_max", "--M-max", c.model.m_max);
  take("channels", "--channels", c.model.channels);
  take("squeezed", "--squeezed", c.model.squeezed);
  take("width", "--width", c.image_width);
  take("height", "--height", c.image_height);
}

int cmd_train(TrainArgs a, const CLI::App& sub) {
  if (!a.config.empty()) apply_config_file(a.config, sub, a.cfg);
  stage("validate flags");
  a.cfg.validate();
  if (a.cfg.gamma != 0.0) std::cerr << "warning: no LPIPS hook is available; the gamma term contributes 0\n";
  if (!a.scenes.empty() && !a.synth_kind.empty()) throw ConfigError("train: give --scene or --synth, not both");
  std::vector<train::Scene> scenes;
  if (a.scenes.empty()) {
    stage("generate scene");
    voxel::SynthParams p;
    p.bit_depth = a.cfg.model.depth;
    p.seed = a.cfg.seed;
    scenes.push_back(train::make_scene(voxel::synth(a.synth_kind.empty() ? "sphere" : a.synth_kind, p),
                                       a.cfg.image_width, a.cfg.image_height));
  }
  for (const auto& s : a.scenes) {
    scenes.push_back(train::make_scene(load_cloud(s, a.cfg.model.depth), a.cfg.image_width, a.cfg.image_height));
  }
  stage("initialize");
  std::unique_ptr<train::Trainer> tr;
  if (a.init.empty()) {
    tr = std::make_unique<train::Trainer>(a.cfg, std::move(scenes));
  } else {
    tr = std::make_unique<train::Trainer>(a.cfg, std::move(scenes), load_model(a.init));
  }
  std::ofstream log;
  if (!a.log.empty()) {
    if (fs::path(a.log).has_parent_path()) fs::create_directories(fs::path(a.log).parent_path());
    log.open(a.log, std::ios::binary);
    if (!log) throw ConfigError("cannot write " + a.log);
    log << train::log_csv_header();
  }
  stage("train");
  const int every = std::max(1, a.cfg.iters / 20);
  tr->run([&](const train::LossRecord& r) {
    if (log) log << train::log_csv_row(r);
    if ((r.iter + 1) % every == 0 || r.iter + 1 == a.cfg.iters) {
      info("iter " + std::to_string(r.iter + 1) + " total " + fmt(r.total) + " rate " + fmt(r.rate) + " bpp, L1 " +
           fmt(r.l1) + ", 1-SSIM " + fmt(r.ssim_term) + "\n");
    }
  });
  stage("write checkpoint");
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  tr->checkpoint().save(a.out);
  info("checkpoint after " + std::to_string(tr->iteration()) + " iterations -> " + a.out + "\n");
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string in, model, cloud, csv, json_out, dump_views;
  int views = 12;
  int width = 256, height = 256;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  bool json = false;
  bool no_timing = false;
};

int cmd_eval(const EvalArgs& a) {
  const net::B2PModel model = load_model(a.model);
  const codec::LayeredBitstream s = load_stream(a.in);
  const voxel::PointCloud pc = load_cloud(a.cloud, model.config().depth);
  stage("validate flags");
  if (a.views < 1) throw ConfigError("--views must be >= 1");
  if (pc.size() != s.header.original_points) {
    throw ConsistencyError("eval: cloud has " + std::to_string(pc.size()) + " points, stream header says " +
                           std::to_string(s.header.original_points));
  }
  stage("render ground truth");
  const auto cams = metrics::camera_circle(a.views, metrics::fit_rig(pc, a.width, a.height));
  const auto gt = metrics::ground_truth_views(pc, cams);
  stage("evaluate");
  metrics::EvalConfig ec;
  ec.lambda = a.lambda;
  ec.views = a.views;
  ec.timing = !a.no_timing;
  if (!a.dump_views.empty()) ec.dump_views = a.dump_views;
  const metrics::RDReport rep = metrics::evaluate(s, model, cams, gt, ec);
  stage("write report");
  const std::string csv = metrics::report_csv(rep);
  const json j = metrics::report_json(rep);
  if (!a.csv.empty()) write_text(a.csv, csv);
  if (!a.json_out.empty()) write_text(a.json_out, j.dump(2) + "\n");
  if (a.json) {
    std::cout << j.dump(2) << "\n";
  } else if (a.csv.empty()) {
    info(csv);
  } else {
    for (const auto& row : rep.rows) {
      info("M=" + std::to_string(row.level) + " bpp " + fmt(row.bpp_total) + " PSNR " + fmt(row.psnr, 2) +
           " SSIM " + fmt(row.ssim) + " MS-SSIM " + fmt(row.ms_ssim) + "\n");
    }
  }
  return kOk;
}

int configure_threads() {
  const char* env = std::getenv("B2P_THREADS");
  if (!env || !*env) return kOk;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) {
    std::cerr << "b2p: B2P_THREADS must be a positive integer, got '" << env << "'\n";
    return kUsage;
  }
  omp_set_num_threads(static_cast<int>(n));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bits-to-Photon: scalable point cloud compression into 3D Gaussians"};
  app.require_subcommand(1);
  app.add_flag("-q,--quiet", g_quiet, "Suppress progress output");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate a textured test cloud");
  synth->add_option("--kind", sy.kind, "sphere, cube or union")->capture_default_str();
  synth->add_option("--depth,--N", sy.depth, "Bit depth N")->capture_default_str();
  synth->add_option("--radius", sy.radius, "Sphere radius / half cube edge in voxels (0 = auto)");
  synth->add_option("--checker", sy.checker, "Checker squares around the equator")->capture_default_str();
  synth->add_option("--seed", sy.seed, "Seed")->capture_default_str();
  synth->add_option("-o,--out", sy.out, "Output .ply")->required();
  synth->add_flag("--ascii", sy.ascii, "Write ASCII PLY");

  EncodeArgs en;
  auto* encode = app.add_subcommand("encode", "Encode a point cloud into a layered stream");
  encode->add_option("-i,--in", en.in, "Input .ply")->required();
  encode->add_option("-m,--model", en.model, "Model checkpoint")->required();
  encode->add_option("-o,--out", en.out, "Output .b2p")->required();
  encode->add_option("--levels", en.levels, "Coded levels LO:HI (LO must be L; default L:M_max)");
  encode->add_flag("--json", en.json, "Print the rate report as JSON");

  DecodeArgs de;
  auto* decode = app.add_subcommand("decode", "Decode Gaussians at one level");
  decode->add_option("-i,--in", de.in, "Input .b2p")->required();
  decode->add_option("-m,--model", de.model, "Model checkpoint")->required();
  decode->add_option("-M,--level", de.level, "Rendering level M (default: highest available)");
  decode->add_option("-o,--out", de.out, "Gaussian dump (u32 count + 14 float32 per Gaussian)")->required();
  decode->add_option("--render", de.render, "Also render the front view to this PNG");
  decode->add_option("--width", de.width)->capture_default_str();
  decode->add_option("--height", de.height)->capture_default_str();

  RenderArgs re;
  auto* render = app.add_subcommand("render", "Render views on the camera circle");
  render->add_option("-i,--in", re.in, ".b2p stream, .ply cloud or Gaussian dump")->required();
  render->add_option("-m,--model", re.model, "Model checkpoint (for .b2p input)");
  render->add_option("-M,--level", re.level, "Rendering level M (.b2p input)");
  render->add_option("--views", re.views, "Number of views")->capture_default_str();
  render->add_option("--width", re.width)->capture_default_str();
  render->add_option("--height", re.height)->capture_default_str();
  render->add_option("--depth,--N", re.depth, "Bit depth of a .ply input")->capture_default_str();
  render->add_option("-o,--out-dir", re.out_dir, "Directory for view_XX.png")->required();

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train a model on synthetic or given scenes");
  trn->add_option("--scene", tr.scenes, "Training cloud (.ply, repeatable)");
  trn->add_option("--synth", tr.synth_kind, "Synthetic training scene kind (default sphere)");
  trn->add_option("--config", tr.config, "JSON config file (flags take precedence)");
  trn->add_option("--init", tr.init, "Start from this checkpoint");
  trn->add_option("-o,--out", tr.out, "Output checkpoint")->required();
  trn->add_option("--log", tr.log, "Training log CSV");
  trn->add_option("--lambda", tr.cfg.lambda)->capture_default_str();
  trn->add_option("--alpha", tr.cfg.alpha)->capture_default_str();
  trn->add_option("--beta", tr.cfg.beta)->capture_default_str();
  trn->add_option("--gamma", tr.cfg.gamma, "LPIPS weight (no hook available)")->capture_default_str();
  trn->add_option("--lr", tr.cfg.lr)->capture_default_str();
  trn->add_option("--batch", tr.cfg.batch)->capture_default_str();
  trn->add_option("--iters", tr.cfg.iters)->capture_default_str();
  trn->add_option("--views", tr.cfg.views, "Views per scene and step")->capture_default_str();
  trn->add_option("--seed", tr.cfg.seed)->capture_default_str();
  trn->add_option("--N", tr.cfg.model.depth)->capture_default_str();
  trn->add_option("--L", tr.cfg.model.base_level)->capture_default_str();
  trn->add_option("--M-min", tr.cfg.model.m_min)->capture_default_str();
  trn->add_option("--M-max", tr.cfg.model.m_max)->capture_default_str();
  trn->add_option("--channels", tr.cfg.model.channels)->capture_default_str();
  trn->add_option("--squeezed", tr.cfg.model.squeezed)->capture_default_str();
  trn->add_option("--width", tr.cfg.image_width)->capture_default_str();
  trn->add_option("--height", tr.cfg.image_height)->capture_default_str();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Rate-distortion report over the camera circle");
  eval->add_option("-i,--in", ev.in, "Input .b2p")->required();
  eval->add_option("-m,--model", ev.model, "Model checkpoint")->required();
  eval->add_option("-c,--cloud", ev.cloud, "Original .ply (ground truth)")->required();
  eval->add_option("--views", ev.views)->capture_default_str();
  eval->add_option("--width", ev.width)->capture_default_str();
  eval->add_option("--height", ev.height)->capture_default_str();
  eval->add_option("--lambda", ev.lambda, "Lambda tag for the report rows");
  eval->add_option("--csv", ev.csv, "Write the CSV report here");
  eval->add_option("--json-out", ev.json_out, "Write the JSON report here");
  eval->add_flag("--json", ev.json, "Print the JSON report");
  eval->add_option("--dump-views", ev.dump_views, "Directory for per-view PNGs");
  eval->add_flag("--no-timing", ev.no_timing, "Report zero timings (byte-identical reports)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  if (const int rc = configure_threads(); rc != kOk) return rc;

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "synth") return cmd_synth(sy);
    if (cmd == "encode") return cmd_encode(en);
    if (cmd == "decode") return cmd_decode(de);
    if (cmd == "render") return cmd_render(re);
    if (cmd == "train") return cmd_train(tr, *trn);
    if (cmd == "eval") return cmd_eval(ev);
  } catch (const MissingInputError& e) {
    std::cerr << "b2p " << cmd << ": " << g_stage << ": " << e.what() << "\n";
    return kMissing;
  } catch (const NumericError& e) {
    std::cerr << "b2p " << cmd << ": " << g_stage << ": " << e.what() << "\n";
    return kNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "b2p " << cmd << ": " << g_stage << ": " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "b2p " << cmd << ": " << g_stage << ": " << e.what() << "\n";
    return kStream;
  } catch (const std::exception& e) {
    std::cerr << "b2p " << cmd << ": " << g_stage << ": " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
