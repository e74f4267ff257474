// sdfgen command-line interface.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sdfgen/pipeline.hpp"
#include "sdfgen/sdf_kernel.hpp"
#include "sdfgen/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sdfgen;

namespace {

json vec_json(const Vec3& v) { return {v.x, v.y, v.z}; }

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

std::optional<json> read_sidecar(const fs::path& sdf) {
  const auto path = sidecar_path(sdf);
  if (!fs::exists(path)) return std::nullopt;
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": invalid sidecar JSON: " + e.what());
  }
}

struct ConvertArgs {
  std::string input, output;
  std::size_t resolution = 64;
  double threshold = kDefaultWindingThreshold;
  unsigned threads = 0;
};

void run_convert(const ConvertArgs& a) {
  const auto loaded = load_mesh(a.input);
  const TriMesh mesh = normalize_mesh(loaded.mesh);
  SdfOptions options;
  options.threshold = a.threshold;
  options.threads = a.threads;
  const SdfGrid grid = mesh_to_sdf(mesh, a.resolution, options);
  write_sdf(grid, a.output);
  const auto& n = *mesh.normalization;
  write_json_file(sidecar_path(a.output), {{"source", fs::path(a.input).filename().string()},
                                           {"resolution", a.resolution},
                                           {"threshold", a.threshold},
                                           {"tool_version", SDFGEN_VERSION},
                                           {"normalization", {{"center", vec_json(n.center)}, {"scale", n.scale}}},
                                           {"degenerate_dropped", loaded.degenerate_dropped}});
  print_json({{"output", a.output},
              {"resolution", a.resolution},
              {"triangles", mesh.triangles.size()},
              {"degenerate_dropped", loaded.degenerate_dropped}});
}

struct SplitArgs {
  std::string input, low, high;
  int cutoff = 8;
};

void run_split(const SplitArgs& a) {
  const SdfGrid grid = read_sdf(a.input);
  const Bands bands = split_bands(grid, FilterSpec{a.cutoff});
  write_sdf(bands.low, a.low);
  write_sdf(bands.high, a.high);
  const std::string source = fs::path(a.input).filename().string();
  write_json_file(sidecar_path(a.low), {{"source", source}, {"band", "low"}, {"cutoff", a.cutoff}, {"tool_version", SDFGEN_VERSION}});
  write_json_file(sidecar_path(a.high), {{"source", source}, {"band", "high"}, {"cutoff", a.cutoff}, {"tool_version", SDFGEN_VERSION}});
  print_json({{"low", a.low}, {"high", a.high}, {"cutoff", a.cutoff}});
}

struct ExtractArgs {
  std::string input, output;
  IsoSurfaceConfig surface;
  bool canonical = false;
};

void run_extract(const ExtractArgs& a) {
  const SdfGrid grid = read_sdf(a.input);
  TriMesh mesh = extract_surface(grid, a.surface);
  bool restored = false;
  if (!a.canonical) {
    if (const auto side = read_sidecar(a.input); side && side->contains("normalization")) {
      const auto& n = (*side)["normalization"];
      const auto c = n.at("center").get<std::array<double, 3>>();
      const Normalization norm{{c[0], c[1], c[2]}, n.at("scale").get<double>()};
      for (auto& v : mesh.vertices) v = norm.to_original(v);
      restored = true;
    }
  }
  save_mesh(mesh, a.output);
  print_json({{"output", a.output},
              {"vertices", mesh.vertices.size()},
              {"triangles", mesh.triangles.size()},
              {"original_coordinates", restored}});
}

struct SynthArgs {
  std::string out_dir;
  std::string family = "chairs";
  std::size_t count = 20;
  std::uint64_t seed = 0;
  std::size_t resolution = 16;
  unsigned threads = 0;
};

void run_synth(const SynthArgs& a) {
  SynthSpec spec;
  spec.family = synth_family_from_string(a.family);
  spec.count = a.count;
  spec.seed = a.seed;
  spec.resolution = a.resolution;
  SdfOptions options;
  options.threads = a.threads;
  const auto manifest = synth_dataset(spec, a.out_dir, options);
  print_json({{"out_dir", a.out_dir}, {"count", manifest.size()}, {"family", a.family}});
}

struct TrainArgs {
  std::string dataset, checkpoint, log;
  gan::TrainSchedule schedule;
  double tau = gan::kDefaultTau;
  gan::LfgConfig lfg;
  gan::HfgConfig hfg;
  int cutoff = 2;
  bool no_skips = false;
};

json summary(const gan::TrainResult& r) {
  std::size_t skipped = 0;
  for (const auto& m : r.metrics) skipped += m.d_skipped;
  json j = {{"steps", r.metrics.size()}, {"d_skipped_steps", skipped}};
  if (!r.metrics.empty()) j["final"] = r.metrics.back().log_record();
  return j;
}

void run_train_lfg(const TrainArgs& a) {
  std::vector<SdfGrid> targets;
  for (const auto& g : load_dataset(a.dataset)) targets.push_back(truncate_field(g, a.tau));
  const auto result = gan::train_lfg(targets, a.lfg, a.schedule, a.tau, a.checkpoint, a.log);
  json j = summary(result);
  j["checkpoint"] = a.checkpoint;
  print_json(j);
}

void run_train_hfg(const TrainArgs& a) {
  std::vector<SdfGrid> targets;
  for (const auto& g : load_dataset(a.dataset)) targets.push_back(truncate_field(g, a.tau));
  gan::HfgConfig config = a.hfg;
  config.skips = !a.no_skips;
  config.resolution = targets.front().dims[0];
  const auto pairs = make_hfg_pairs(targets, a.cutoff);
  const auto result = gan::train_hfg(pairs.low, pairs.high, config, a.schedule, a.tau, a.cutoff, a.checkpoint, a.log);
  json j = summary(result);
  j["checkpoint"] = a.checkpoint;
  print_json(j);
}

struct GenerateArgs {
  std::string lfg, hfg, out_sdf, out_obj, out_dir, symmetry;
  std::uint64_t seed = 0, seed_b = 1;
  std::optional<int> cutoff;
  std::size_t steps = 9;
  IsoSurfaceConfig surface;
};

GenerateOptions generate_options(const GenerateArgs& a) {
  GenerateOptions o;
  if (!a.symmetry.empty()) o.symmetry = axis_from_string(a.symmetry);
  o.cutoff = a.cutoff;
  o.surface = a.surface;
  return o;
}

void run_generate(const GenerateArgs& a) {
  auto gen = ShapeGenerator::load(a.lfg, a.hfg, a.cutoff);
  const Generation g = gen.run_seed(a.seed, generate_options(a));
  json out = {{"seed", a.seed}, {"triangles", g.mesh.triangles.size()}};
  if (!a.out_sdf.empty()) {
    write_sdf(g.field, a.out_sdf);
    write_json_file(sidecar_path(a.out_sdf), {{"seed", a.seed},
                                              {"cutoff", gen.cutoff()},
                                              {"tau", gen.tau()},
                                              {"symmetry", a.symmetry.empty() ? json(nullptr) : json(a.symmetry)},
                                              {"tool_version", SDFGEN_VERSION}});
    out["sdf"] = a.out_sdf;
  }
  if (!a.out_obj.empty()) {
    if (g.mesh.triangles.empty()) throw Error("generated field has no zero crossing; no mesh to write");
    save_mesh(g.mesh, a.out_obj);
    out["obj"] = a.out_obj;
  }
  print_json(out);
}

void run_interpolate(const GenerateArgs& a) {
  auto gen = ShapeGenerator::load(a.lfg, a.hfg, a.cutoff);
  const auto frames = gen.interpolate(a.seed, a.seed_b, a.steps, generate_options(a));
  fs::create_directories(a.out_dir);
  json files = json::array();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu", i);
    const fs::path obj = fs::path(a.out_dir) / (std::string(name) + ".obj");
    if (frames[i].mesh.triangles.empty()) {
      files.push_back(nullptr);
      continue;
    }
    save_mesh(frames[i].mesh, obj);
    write_sdf(frames[i].field, fs::path(a.out_dir) / (std::string(name) + ".sdf"));
    files.push_back(obj.string());
  }
  print_json({{"frames", frames.size()}, {"meshes", files}});
}

struct VerifyArgs {
  std::string input;
};

void run_verify(const VerifyArgs& a) {
  const SdfGrid grid = read_sdf(a.input);
  const auto e = eikonal_residual(grid);
  const auto l = lipschitz_check(grid);
  json j = {{"file", a.input},
            {"format", "SDF1"},
            {"dims", grid.dims},
            {"spacing", grid.spacing},
            {"positive_inside", grid.positive_inside},
            {"eikonal", {{"mean", e.mean}, {"median", e.median}, {"p95", e.p95}, {"max", e.max},
                         {"evaluated", e.evaluated}, {"excluded", e.excluded}}},
            {"lipschitz", {{"max_ratio", l.max_ratio}, {"violations", l.violations}, {"pairs", l.pairs}}}};
  if (const auto side = read_sidecar(a.input)) j["sidecar"] = *side;
  print_json(j);
}

void add_surface_flags(CLI::App* cmd, IsoSurfaceConfig& s) {
  cmd->add_option("--iso", s.iso_value, "Iso value");
  cmd->add_option("--smooth", s.smoothing_iterations, "Laplace smoothing iterations")->check(CLI::NonNegativeNumber);
  cmd->add_option("--lambda", s.smoothing_lambda, "Smoothing step in (0, 1]");
}

void add_schedule_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("dataset", a.dataset, "Dataset directory (manifest.jsonl or *.sdf)")->required();
  cmd->add_option("checkpoint", a.checkpoint, "Output checkpoint")->required();
  cmd->add_option("--log", a.log, "JSON-lines training log");
  cmd->add_option("--steps", a.schedule.total_steps);
  cmd->add_option("--batch", a.schedule.batch_size);
  cmd->add_option("--seed", a.schedule.seed);
  cmd->add_option("--lr-d", a.schedule.lr_discriminator);
  cmd->add_option("--lr-g", a.schedule.lr_generator);
  cmd->add_option("--skip-threshold", a.schedule.skip_accuracy_threshold);
  cmd->add_option("--tau", a.tau, "Truncation distance");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signed distance fields, spectral splitting and two-stage shape GANs"};
  app.set_version_flag("--version", SDFGEN_VERSION);
  app.require_subcommand(1);
  std::string command;

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "Mesh (OBJ/STL) to SDF1 grid");
  c->add_option("input", convert.input)->required()->check(CLI::ExistingFile);
  c->add_option("output", convert.output)->required();
  c->add_option("--res", convert.resolution, "Grid resolution")->check(CLI::Range(8, 1024));
  c->add_option("--threshold", convert.threshold, "Winding-number threshold");
  c->add_option("--threads", convert.threads, "Worker threads (0 = auto)");

  SplitArgs split;
  auto* s = app.add_subcommand("split", "Split an SDF into low and high frequency bands");
  s->add_option("input", split.input)->required()->check(CLI::ExistingFile);
  s->add_option("low", split.low)->required();
  s->add_option("high", split.high)->required();
  s->add_option("--cutoff", split.cutoff, "Mode cutoff")->required();

  ExtractArgs extract;
  auto* x = app.add_subcommand("extract", "SDF1 grid to OBJ surface");
  x->add_option("input", extract.input)->required()->check(CLI::ExistingFile);
  x->add_option("output", extract.output)->required();
  x->add_flag("--canonical", extract.canonical, "Keep canonical coordinates");
  add_surface_flags(x, extract.surface);

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "Synthetic shape dataset");
  y->add_option("out_dir", synth.out_dir)->required();
  y->add_option("--family", synth.family, "boxes, cylinders or chairs");
  y->add_option("--count", synth.count);
  y->add_option("--seed", synth.seed);
  y->add_option("--res", synth.resolution);
  y->add_option("--threads", synth.threads);

  TrainArgs train_l;
  auto* tl = app.add_subcommand("train-lfg", "Train the low-frequency generator");
  add_schedule_flags(tl, train_l);
  tl->add_option("--latent", train_l.lfg.latent_dim);
  tl->add_option("--base-res", train_l.lfg.base_resolution);
  tl->add_option("--base-channels", train_l.lfg.base_channels);
  tl->add_option("--layers", train_l.lfg.n_upconv_layers);

  TrainArgs train_h;
  auto* th = app.add_subcommand("train-hfg", "Train the high-frequency generator on band-split pairs");
  add_schedule_flags(th, train_h);
  th->add_option("--cutoff", train_h.cutoff, "Mode cutoff for the band split");
  th->add_option("--l1-weight", train_h.schedule.l1_weight);
  th->add_option("--levels", train_h.hfg.levels);
  th->add_option("--base-channels", train_h.hfg.base_channels);
  th->add_option("--patch-layers", train_h.hfg.patch_layers);
  th->add_flag("--no-skips", train_h.no_skips, "Disable encoder-decoder skips");

  GenerateArgs generate;
  auto* g = app.add_subcommand("generate", "Compose LFG and HFG output for one latent seed");
  g->add_option("--lfg", generate.lfg)->required()->check(CLI::ExistingFile);
  g->add_option("--hfg", generate.hfg)->required()->check(CLI::ExistingFile);
  g->add_option("--seed", generate.seed);
  g->add_option("--cutoff", generate.cutoff);
  g->add_option("--symmetry", generate.symmetry, "Mirror axis: x, y or z");
  g->add_option("--out-sdf", generate.out_sdf);
  g->add_option("--out-obj", generate.out_obj);
  add_surface_flags(g, generate.surface);

  GenerateArgs interp;
  auto* ip = app.add_subcommand("interpolate", "Meshes along a line between two latent seeds");
  ip->add_option("--lfg", interp.lfg)->required()->check(CLI::ExistingFile);
  ip->add_option("--hfg", interp.hfg)->required()->check(CLI::ExistingFile);
  ip->add_option("--seed-a", interp.seed);
  ip->add_option("--seed-b", interp.seed_b);
  ip->add_option("--steps", interp.steps);
  ip->add_option("--cutoff", interp.cutoff);
  ip->add_option("--symmetry", interp.symmetry);
  ip->add_option("--out-dir", interp.out_dir)->required();
  add_surface_flags(ip, interp.surface);

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "Check an SDF1 file and report eikonal and Lipschitz statistics");
  v->add_option("input", verify.input)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << std::endl;
    return 2;
  }

  command = app.get_subcommands().front()->get_name();
  try {
    if (command == "convert") run_convert(convert);
    else if (command == "split") run_split(split);
    else if (command == "extract") run_extract(extract);
    else if (command == "synth") run_synth(synth);
    else if (command == "train-lfg") run_train_lfg(train_l);
    else if (command == "train-hfg") run_train_hfg(train_h);
    else if (command == "generate") run_generate(generate);
    else if (command == "interpolate") run_interpolate(interp);
    else if (command == "verify") run_verify(verify);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"command", command}}.dump() << std::endl;
    return 1;
  }
  return 0;
}
