// slp: batch entry points for dataset generation, propagation runs,
// parameter sweeps, evaluation, and spot checks.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "slp/dataset.hpp"
#include "slp/evaluation.hpp"
#include "slp/oracle_segmenter.hpp"
#include "slp/propagation.hpp"
#include "slp/run_io.hpp"
#include "slp/stream_segmenter.hpp"
#include "slp/synthetic_scene.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;

struct RunOptions {
  std::string data;
  std::string out;
  std::string variant = "sam-only-1";
  int k = 1;
  int skip_frames = 0;
  int grid = 32;
  double threshold = 0.5;
  int kernel = 5;
  int iterations = 3;
  std::uint64_t seed = 0;
  double dedup = slp::kDefaultDedupIou;
  std::string segmenter = "oracle";
  std::string server;
  double sigma = 0.05;
  int dim = 32;

  [[nodiscard]] slp::SlpConfig config() const {
    slp::SlpConfig c;
    c.variant = slp::parse_variant(variant);
    c.k = k;
    c.skip_frames = skip_frames;
    c.grid_side = grid;
    c.threshold = threshold;
    c.kernel_side = kernel;
    c.iterations = iterations;
    c.seed = seed;
    c.dedup_iou = dedup;
    return c;
  }
};

// Manifest [config] values act as defaults: flag > env > manifest > default.
void apply_manifest(const fs::path& path, RunOptions& o) {
  const auto sections = slp::read_manifest(path);
  const auto it = sections.find("config");
  if (it == sections.end()) throw slp::ConfigError(path.string() + ": no [config] section");
  try {
    for (const auto& [key, value] : it->second) {
      if (key == "variant") o.variant = value;
      else if (key == "k") o.k = std::stoi(value);
      else if (key == "F") o.skip_frames = std::stoi(value);
      else if (key == "g") o.grid = std::stoi(value);
      else if (key == "threshold") o.threshold = std::stod(value);
      else if (key == "kernel") o.kernel = std::stoi(value);
      else if (key == "iterations") o.iterations = std::stoi(value);
      else if (key == "seed") o.seed = std::stoull(value);
      else if (key == "dedup") o.dedup = std::stod(value);
      else if (key == "segmenter") o.segmenter = value;
      else if (key == "sigma") o.sigma = std::stod(value);
      else if (key == "dim") o.dim = std::stoi(value);
      else if (key == "data" && o.data.empty()) o.data = value;
    }
  } catch (const std::logic_error& e) {
    throw slp::ConfigError(path.string() + ": bad value (" + e.what() + ")");
  }
}

std::string find_manifest_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--manifest" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--manifest=", 0) == 0) return a.substr(11);
  }
  if (const char* env = std::getenv("SLP_MANIFEST")) return env;
  return {};
}

void add_run_options(CLI::App* cmd, RunOptions& o, bool single_variant) {
  cmd->add_option("--data", o.data, "Dataset root")->envname("SLP_DATA");
  cmd->add_option("--out", o.out, "Output directory")->envname("SLP_OUT");
  if (single_variant)
    cmd->add_option("--variant", o.variant, "sam-only-1 | sam-only-2 | sfm-sam-1 | sfm-sam-2")->envname("SLP_VARIANT");
  cmd->add_option("--g", o.grid, "Prompt grid side")->envname("SLP_G");
  cmd->add_option("--threshold", o.threshold, "Cosine score cutoff")->envname("SLP_THRESHOLD");
  cmd->add_option("--kernel", o.kernel, "Closing kernel side (odd, >= 3)")->envname("SLP_KERNEL");
  cmd->add_option("--iterations", o.iterations, "Closing iterations")->envname("SLP_ITERATIONS");
  cmd->add_option("--seed", o.seed, "RNG seed")->envname("SLP_SEED");
  cmd->add_option("--dedup", o.dedup, "Proposal dedup IoU")->envname("SLP_DEDUP");
  cmd->add_option("--segmenter", o.segmenter, "oracle | stream")->envname("SLP_SEGMENTER");
  cmd->add_option("--server", o.server, "Mask server command (stream segmenter)")->envname("SLP_SERVER");
  cmd->add_option("--sigma", o.sigma, "Oracle feature noise")->envname("SLP_SIGMA");
  cmd->add_option("--dim", o.dim, "Oracle feature dimension")->envname("SLP_DIM");
  cmd->add_option("--manifest", "Run manifest whose [config] supplies defaults")->envname("SLP_MANIFEST");
}

// Segmenter, labels and geometry shared by every run over one dataset.
struct Workspace {
  slp::DatasetLayout dataset;
  std::unique_ptr<slp::Segmenter> segmenter;
  std::optional<slp::GroundTruth> truth;
  std::optional<slp::LoadedGeometry> geometry;
};

Workspace open_workspace(const RunOptions& o, bool need_geometry) {
  if (o.data.empty()) throw slp::ConfigError("--data is required");
  Workspace w;
  w.dataset = slp::DatasetLayout::open(o.data);
  const auto size = slp::read_png_size(w.dataset.frames.begin()->second);
  if (need_geometry) {
    if (!w.dataset.has_geometry()) throw slp::ConfigError("sfm-sam variants need mesh.obj and poses.txt in " + o.data);
    w.geometry = slp::load_geometry(w.dataset, size.width, size.height);
  }
  std::map<slp::FrameId, slp::LabelImage> labels;
  if (!w.dataset.labels.empty()) labels = slp::load_labels(w.dataset.labels);
  if (o.segmenter == "oracle") {
    if (labels.size() != w.dataset.frames.size())
      throw slp::ConfigError("oracle segmenter needs a label image for every frame");
    slp::OracleOptions opts;
    opts.dim = o.dim;
    opts.sigma = o.sigma;
    opts.seed = o.seed;
    w.segmenter = std::make_unique<slp::OracleSegmenter>(labels, opts);
  } else if (o.segmenter == "stream") {
    if (o.server.empty()) throw slp::ConfigError("stream segmenter needs --server");
    w.segmenter = std::make_unique<slp::StreamSegmenter>(w.dataset.frame_ids(), size.width, size.height,
                                                         std::make_unique<slp::ProcessChannel>(o.server),
                                                         w.dataset.embeddings);
  } else {
    throw slp::ConfigError("unknown segmenter '" + o.segmenter + "'");
  }
  if (!labels.empty()) w.truth = slp::ground_truth_from_labels(labels);
  return w;
}

struct RunOutcome {
  slp::RunManifest manifest;
  std::optional<slp::MatchReport> report;
};

RunOutcome execute_run(const Workspace& w, const RunOptions& o, const slp::SlpConfig& config, const fs::path& out) {
  const auto result = slp::run_slp(*w.segmenter, config, w.geometry ? &w.geometry->buffers : nullptr);
  slp::write_masks(out, result);
  RunOutcome outcome;
  auto& m = outcome.manifest;
  m.config = config;
  m.segmenter = o.segmenter;
  m.sigma = o.sigma;
  m.dim = o.dim;
  m.data = fs::absolute(o.data).lexically_normal().string();
  m.frames = w.dataset.frames.size();
  m.objects = result.objects.size();
  m.counters = result.counters;
  m.stages = slp::stage_times(result);
  m.total_ms = result.total_ms;
  if (w.geometry) {
    m.mesh_faces = w.geometry->mesh.face_count();
    m.sfm_ms = w.geometry->load_ms;
    m.pxl_ms = w.geometry->match_ms;
  }
  slp::write_manifest(out / "manifest.txt", m);
  if (w.truth) {
    outcome.report = slp::evaluate(*w.truth, slp::tracks_of(result));
    slp::write_csv(out / "metrics.csv", slp::kRunReportHeader,
                   std::vector{slp::RunReportRow{std::string(slp::to_string(config.variant)), config.k,
                                                 config.skip_frames, m.total_ms / 60000.0, outcome.report->mean_iou,
                                                 outcome.report->tracking_losses}});
  }
  return outcome;
}

int cmd_gen(const slp::SceneSpec& spec, const std::string& out) {
  if (out.empty()) throw slp::ConfigError("--out is required");
  const auto scene = slp::generate(spec, out);
  std::cout << "wrote " << spec.frame_count << " frames, " << scene.mesh.face_count() << " mesh faces, "
            << scene.instance_count() << " instances to " << out << "\n";
  return 0;
}

int cmd_run(const RunOptions& o) {
  if (o.out.empty()) throw slp::ConfigError("--out is required");
  const auto config = o.config();
  config.validate();
  const auto w = open_workspace(o, slp::uses_geometry(config.variant));
  const auto outcome = execute_run(w, o, config, o.out);
  std::cout << slp::to_string(config.variant) << " k=" << config.k << " F=" << config.skip_frames
            << ": objects=" << outcome.manifest.objects << " get_masks=" << outcome.manifest.counters.get_masks_calls
            << " time_ms=" << outcome.manifest.total_ms;
  if (outcome.report)
    std::cout << " mean_iou=" << outcome.report->mean_iou << " losses=" << outcome.report->tracking_losses;
  std::cout << "\n";
  return 0;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::logic_error&) {
      throw slp::ConfigError(std::string("bad ") + what + " list '" + text + "'");
    }
  }
  if (out.empty()) throw slp::ConfigError(std::string("empty ") + what + " list");
  return out;
}

int cmd_sweep(const RunOptions& o, const std::string& variants_text, const std::string& ks, const std::string& fs_text,
              unsigned jobs) {
  if (o.out.empty()) throw slp::ConfigError("--out is required");
  std::vector<slp::Variant> variants;
  std::stringstream ss(variants_text);
  for (std::string v; std::getline(ss, v, ',');) variants.push_back(slp::parse_variant(v));
  const auto k_values = parse_int_list(ks, "k");
  const auto f_values = parse_int_list(fs_text, "F");

  std::vector<slp::SlpConfig> configs;
  for (auto v : variants)
    for (int k : k_values)
      for (int f : f_values) {
        RunOptions each = o;
        each.variant = std::string(slp::to_string(v));
        each.k = k;
        each.skip_frames = f;
        configs.push_back(each.config());
        configs.back().validate();
      }
  const bool need_geometry =
      std::any_of(variants.begin(), variants.end(), [](slp::Variant v) { return slp::uses_geometry(v); });
  const auto w = open_workspace(o, need_geometry);

  fs::create_directories(o.out);
  std::vector<std::optional<RunOutcome>> outcomes(configs.size());
  std::vector<std::string> dirs(configs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      const auto& c = configs[i];
      dirs[i] = std::string(slp::to_string(c.variant)) + "_k" + std::to_string(c.k) + "_F" + std::to_string(c.skip_frames);
      try {
        outcomes[i] = execute_run(w, o, c, fs::path(o.out) / dirs[i]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < std::max(1u, jobs); ++t) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);

  std::ofstream manifest_rows(fs::path(o.out) / "sweep_manifest.csv");
  manifest_rows << "variant,k,F,g,threshold,seed,dir\n";
  std::vector<slp::RunReportRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& c = configs[i];
    manifest_rows << slp::to_string(c.variant) << ',' << c.k << ',' << c.skip_frames << ',' << c.grid_side << ','
                  << c.threshold << ',' << c.seed << ',' << dirs[i] << '\n';
    const auto& out = *outcomes[i];
    if (out.report)
      rows.push_back({std::string(slp::to_string(c.variant)), c.k, c.skip_frames, out.manifest.total_ms / 60000.0,
                      out.report->mean_iou, out.report->tracking_losses});
  }
  if (!manifest_rows) throw slp::IoError("cannot write sweep manifest");
  if (!rows.empty()) slp::write_csv(fs::path(o.out) / "runs.csv", slp::kRunReportHeader, rows);
  std::cout << "sweep: " << configs.size() << " runs written to " << o.out << "\n";
  return 0;
}

slp::GroundTruth load_truth_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw slp::IoError("label directory not found: " + dir.string());
  std::map<slp::FrameId, fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto stem = e.path().stem().string();
    if (e.path().extension() == ".png" && !stem.empty() &&
        std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; }))
      files.emplace(std::stoi(stem), e.path());
  }
  return slp::ground_truth_from_labels(slp::load_labels(files));
}

int cmd_eval(const std::string& data, const std::string& run_dir, const std::string& author, std::string out) {
  if (data.empty() || run_dir.empty()) throw slp::ConfigError("--data and --run are required");
  if (out.empty()) out = run_dir;
  const auto dataset = slp::DatasetLayout::open(data);
  if (dataset.labels.empty()) throw slp::ConfigError("dataset has no labels/ to evaluate against");
  const auto truth = slp::ground_truth_from_labels(slp::load_labels(dataset.labels));
  const auto tracks = slp::load_indexed_masks(fs::path(run_dir) / "masks" / "index.txt");
  const auto report = slp::evaluate(truth, tracks);

  const auto manifest = slp::read_manifest(fs::path(run_dir) / "manifest.txt");
  auto value = [&](const char* section, const char* key, const std::string& fallback) {
    const auto s = manifest.find(section);
    if (s == manifest.end()) return fallback;
    const auto v = s->second.find(key);
    return v == s->second.end() ? fallback : v->second;
  };
  slp::RunReportRow row{value("config", "variant", "?"), std::stoi(value("config", "k", "0")),
                        std::stoi(value("config", "F", "0")), std::stod(value("stats", "total_ms", "0")) / 60000.0,
                        report.mean_iou, report.tracking_losses};

  slp::VideoSummaryRow summary;
  summary.frame_count = dataset.frames.size();
  summary.sfm_min = std::stod(value("stats", "sfm_ms", "0")) / 60000.0;
  summary.mesh_faces = std::stoul(value("stats", "mesh_faces", "0"));
  summary.pixel_match_min = std::stod(value("stats", "pxl_ms", "0")) / 60000.0;
  if (!author.empty()) {
    const auto author_truth = load_truth_dir(author);
    std::vector<slp::FrameId> frames;
    for (const auto& [f, labels] : author_truth.frames) frames.push_back(f);
    summary.spot = slp::spot_check(author_truth, truth, frames);
  }

  fs::create_directories(out);
  slp::write_csv(fs::path(out) / "runs.csv", slp::kRunReportHeader, std::vector{row});
  slp::write_csv(fs::path(out) / "summary.csv", slp::kVideoSummaryHeader, std::vector{summary});
  std::cout << slp::kRunReportHeader << "\n" << slp::format_row(row) << "\n"
            << slp::kVideoSummaryHeader << "\n" << slp::format_row(summary) << "\n";
  return 0;
}

int cmd_spotcheck(const std::string& author, const std::string& volunteer, const std::string& frames_text,
                  const std::string& out) {
  if (author.empty() || volunteer.empty()) throw slp::ConfigError("--author and --volunteer are required");
  const auto a = load_truth_dir(author);
  const auto v = load_truth_dir(volunteer);
  std::vector<slp::FrameId> frames;
  if (!frames_text.empty())
    for (int f : parse_int_list(frames_text, "frame")) frames.push_back(f);
  slp::SpotCheckResult r;
  try {
    r = slp::spot_check(a, v, frames);
  } catch (const slp::ContractViolation& e) {
    throw slp::ConfigError(e.what());
  }
  std::ostringstream line;
  line << r.fn_v << ',' << r.fn_a << ',' << slp::report_detail::fixed(r.mean_iou, 3);
  std::cout << "FN_v,FN_a,mean_iou\n" << line.str() << "\n";
  if (!out.empty()) {
    std::ofstream csv(out);
    csv << "FN_v,FN_a,mean_iou\n" << line.str() << "\n";
    if (!csv) throw slp::IoError("cannot write " + out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic label propagation over video frames"};
  app.require_subcommand(1);

  slp::SceneSpec spec;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic desk-scale dataset");
  gen->add_option("--out", gen_out, "Dataset root to create")->envname("SLP_OUT");
  gen->add_option("--seed", spec.seed)->envname("SLP_SEED");
  gen->add_option("--objects", spec.object_count)->envname("SLP_OBJECTS");
  gen->add_option("--frames", spec.frame_count)->envname("SLP_FRAMES");
  gen->add_option("--width", spec.width)->envname("SLP_WIDTH");
  gen->add_option("--height", spec.height)->envname("SLP_HEIGHT");
  gen->add_option("--orbit-radius", spec.orbit_radius)->envname("SLP_ORBIT_RADIUS");

  RunOptions run_opts;
  RunOptions sweep_opts;
  int exit_code = 0;
  try {
    if (const auto manifest = find_manifest_arg(argc, argv); !manifest.empty()) {
      apply_manifest(manifest, run_opts);
      apply_manifest(manifest, sweep_opts);
    }
  } catch (const slp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  auto* run = app.add_subcommand("run", "Run label propagation on one dataset");
  add_run_options(run, run_opts, true);
  run->add_option("--k", run_opts.k, "Prompt size")->envname("SLP_K");
  run->add_option("--F", run_opts.skip_frames, "Frames skipped between new-object searches")->envname("SLP_F");

  std::string sweep_variants = "sam-only-1,sam-only-2,sfm-sam-1,sfm-sam-2";
  std::string sweep_k = "1,2,5";
  std::string sweep_f = "0,1,4";
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  auto* sweep = app.add_subcommand("sweep", "Run every variant x k x F combination");
  add_run_options(sweep, sweep_opts, false);
  sweep->add_option("--variants", sweep_variants, "Comma-separated variants")->envname("SLP_VARIANTS");
  sweep->add_option("--k", sweep_k, "Comma-separated k values")->envname("SLP_K");
  sweep->add_option("--F", sweep_f, "Comma-separated F values")->envname("SLP_F");
  sweep->add_option("--jobs", jobs, "Worker threads")->envname("SLP_JOBS");

  std::string eval_data, eval_run, eval_author, eval_out;
  auto* eval = app.add_subcommand("eval", "Score a run against ground-truth labels");
  eval->add_option("--data", eval_data, "Dataset root (labels/)")->envname("SLP_DATA");
  eval->add_option("--run", eval_run, "Run output directory")->envname("SLP_RUN");
  eval->add_option("--author", eval_author, "Author spot-check label directory")->envname("SLP_AUTHOR");
  eval->add_option("--out", eval_out, "Report directory (default: the run directory)")->envname("SLP_OUT");

  std::string spot_author, spot_volunteer, spot_frames, spot_out;
  auto* spot = app.add_subcommand("spotcheck", "Compare author and volunteer labels");
  spot->add_option("--author", spot_author)->envname("SLP_AUTHOR");
  spot->add_option("--volunteer", spot_volunteer)->envname("SLP_VOLUNTEER");
  spot->add_option("--frames", spot_frames, "Comma-separated frame ids (default: all author frames)")
      ->envname("SLP_FRAMES");
  spot->add_option("--out", spot_out, "CSV output path")->envname("SLP_OUT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) exit_code = cmd_gen(spec, gen_out);
    else if (*run) exit_code = cmd_run(run_opts);
    else if (*sweep) exit_code = cmd_sweep(sweep_opts, sweep_variants, sweep_k, sweep_f, jobs);
    else if (*eval) exit_code = cmd_eval(eval_data, eval_run, eval_author, eval_out);
    else if (*spot) exit_code = cmd_spotcheck(spot_author, spot_volunteer, spot_frames, spot_out);
  } catch (const slp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const slp::ContractViolation& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const slp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return exit_code;
}
