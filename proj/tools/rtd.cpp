// rtd: command-line front end for reshuffled tensor decomposition.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 solver divergence.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rtd/rtd.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

struct SolverFlags {
  double rho = 1.01;
  std::optional<double> kappa0;
  double tol = 1e-7;
  std::size_t max_iter = 2000;
  std::string schedule = "geometric";
  std::optional<double> kappa_max;

  rtd::SolverConfig config() const {
    rtd::SolverConfig c;
    c.rho = rho;
    c.kappa0 = kappa0;
    c.tol = tol;
    c.max_iter = max_iter;
    c.schedule = schedule == "harmonic" ? rtd::KappaSchedule::Harmonic : rtd::KappaSchedule::Geometric;
    c.kappa_max = kappa_max;
    return c;
  }
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
  cmd->add_option("--rho", f.rho, "kappa growth factor (> 1)")->capture_default_str();
  cmd->add_option("--kappa0", f.kappa0, "initial penalty (default: 1/rms(X))");
  cmd->add_option("--tol", f.tol, "relative primal residual tolerance")->capture_default_str();
  cmd->add_option("--max-iter", f.max_iter, "iteration cap")->capture_default_str();
  cmd->add_option("--schedule", f.schedule, "kappa schedule")
      ->check(CLI::IsMember({"geometric", "harmonic"}))
      ->capture_default_str();
  cmd->add_option("--kappa-max", f.kappa_max, "optional kappa cap");
}

/// Everything a run records in its manifest.
struct RunLog {
  std::vector<std::string> argv;
  std::vector<std::string> artifacts;
  std::optional<std::string> manifest_path;
  std::uint64_t seed = 0;

  void wrote(const std::string& path) { artifacts.push_back(path); }
};

json option_values(const CLI::App* cmd) {
  json params = json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "--manifest") continue;
    const std::string name = opt->get_single_name();
    if (opt->count() > 0) {
      const auto& results = opt->results();
      params[name] = results.size() == 1 ? json(results.front()) : json(results);
    } else if (!opt->get_default_str().empty()) {
      params[name] = opt->get_default_str();
    } else {
      params[name] = nullptr;
    }
  }
  return params;
}

void emit_manifest(const CLI::App* cmd, const RunLog& log, double seconds) {
  const json manifest = {
      {"tool", "rtd"},
      {"version", rtd::kVersion},
      {"subcommand", cmd->get_name()},
      {"argv", log.argv},
      {"parameters", option_values(cmd)},
      {"seed", log.seed},
      {"artifacts", log.artifacts},
      {"wall_clock_seconds", seconds},
  };
  std::optional<std::string> path = log.manifest_path;
  if (!path && !log.artifacts.empty()) path = log.artifacts.front() + ".manifest.json";
  if (path) {
    std::ofstream out(*path, std::ios::trunc);
    rtd::require(out.is_open(), rtd::ErrorKind::Io, "cannot write " + *path);
    out << manifest.dump(2) << '\n';
  } else {
    std::cerr << manifest.dump() << '\n';
  }
}

template <class Fn>
void write_text(const std::string& path, RunLog& log, Fn&& body) {
  std::ofstream out(path, std::ios::trunc);
  rtd::require(out.is_open(), rtd::ErrorKind::Io, "cannot write " + path);
  body(out);
  rtd::require(out.good(), rtd::ErrorKind::Io, "write failed for " + path);
  log.wrote(path);
}

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  rtd::require(!ec, rtd::ErrorKind::Io, "cannot create directory " + dir);
}

rtd::Shape parse_shape(const std::vector<std::size_t>& extents) { return rtd::Shape(extents.begin(), extents.end()); }

int run(std::vector<std::string> args);

int dispatch(std::vector<std::string> args) {
  CLI::App app{"Reshuffled tensor decomposition toolkit", "rtd"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rtd::kVersion));

  RunLog log;
  log.argv = args;
  std::size_t threads = rtd::default_thread_count();
  SolverFlags solver;

  const auto common = [&](CLI::App* cmd, bool with_threads) {
    cmd->add_option("--seed", log.seed, "base random seed")->capture_default_str();
    cmd->add_option("--manifest", log.manifest_path, "manifest output path");
    if (with_threads) cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };

  // decompose ---------------------------------------------------------------
  std::string tensor_path, ops_path, out_dir;
  auto* dec = app.add_subcommand("decompose", "decompose a tensor into reshuffled low-rank components");
  dec->add_option("--tensor", tensor_path, "observation tensor file")->required();
  dec->add_option("--ops", ops_path, "reshuffle ops file")->required();
  dec->add_option("--out-dir", out_dir, "output directory")->required();
  add_solver_flags(dec, solver);
  common(dec, false);

  // generate ----------------------------------------------------------------
  std::size_t gen_n = 20, gen_r = 1, gen_count = 2;
  std::vector<std::size_t> gen_shape;
  auto* gen = app.add_subcommand("generate", "write a synthetic instance (observation, ops, true components)");
  gen->add_option("--n", gen_n, "component size n (components are n x n)")->capture_default_str();
  gen->add_option("--r", gen_r, "component rank")->capture_default_str();
  gen->add_option("--N", gen_count, "number of components")->capture_default_str();
  gen->add_option("--shape", gen_shape, "tensor shape (default n^2)")->delimiter(',');
  gen->add_option("--out-dir", out_dir, "output directory")->required();
  common(gen, false);

  // synth-images ------------------------------------------------------------
  std::size_t img_h = 256, img_w = 256, cover_rank = 5, secret_rank = 2;
  std::string cover_out, secret_out;
  auto* synth = app.add_subcommand("synth-images", "write a synthetic low-rank cover (PGM) and secret (PPM)");
  synth->add_option("--height", img_h)->capture_default_str();
  synth->add_option("--width", img_w)->capture_default_str();
  synth->add_option("--cover-rank", cover_rank)->capture_default_str();
  synth->add_option("--secret-rank", secret_rank)->capture_default_str();
  synth->add_option("--cover", cover_out, "cover output (.pgm)")->required();
  synth->add_option("--secret", secret_out, "secret output (.ppm)")->required();
  common(synth, false);

  // phase -------------------------------------------------------------------
  std::string phase_mode = "size", csv_path, heatmap_path;
  std::size_t fixed_count = 2, fixed_n = 60, trials = 3;
  std::vector<std::size_t> ranks{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<std::size_t> sizes{20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<std::size_t> counts{2, 3, 4, 5, 6};
  double lo_db = 15.0, hi_db = 25.0;
  auto* phase = app.add_subcommand("phase", "phase-transition grid");
  phase->add_option("--mode", phase_mode, "size: rank vs n at fixed N; count: rank vs N at fixed n")
      ->check(CLI::IsMember({"size", "count"}))
      ->capture_default_str();
  phase->add_option("--N", fixed_count, "fixed component count (size mode)")->capture_default_str();
  phase->add_option("--n", fixed_n, "fixed size (count mode)")->capture_default_str();
  phase->add_option("--ranks", ranks, "rank axis")->delimiter(',')->capture_default_str();
  phase->add_option("--sizes", sizes, "size axis (size mode)")->delimiter(',')->capture_default_str();
  phase->add_option("--counts", counts, "component-count axis (count mode)")->delimiter(',')->capture_default_str();
  phase->add_option("--trials", trials)->capture_default_str();
  phase->add_option("--csv", csv_path, "CSV output")->required();
  phase->add_option("--heatmap", heatmap_path, "PGM heatmap output");
  phase->add_option("--lo-db", lo_db, "heatmap black level")->capture_default_str();
  phase->add_option("--hi-db", hi_db, "heatmap white level")->capture_default_str();
  add_solver_flags(phase, solver);
  common(phase, true);

  // noise -------------------------------------------------------------------
  rtd::NoiseSweepSpec noise_spec;
  auto* noise = app.add_subcommand("noise", "Gaussian-noise robustness sweep");
  noise->add_option("--n", noise_spec.n)->capture_default_str();
  noise->add_option("--N", noise_spec.n_components)->capture_default_str();
  noise->add_option("--ranks", noise_spec.ranks)->delimiter(',')->capture_default_str();
  noise->add_option("--snr", noise_spec.snr_db, "SNR values in dB")->delimiter(',')->capture_default_str();
  noise->add_option("--trials", noise_spec.trials)->capture_default_str();
  noise->add_option("--csv", csv_path, "CSV output")->required();
  add_solver_flags(noise, solver);
  common(noise, true);

  // dropout -----------------------------------------------------------------
  rtd::DropoutSpec drop_spec;
  auto* drop = app.add_subcommand("dropout", "component-count estimation under random dropout");
  drop->add_option("--n", drop_spec.n)->capture_default_str();
  drop->add_option("--N", drop_spec.n_components, "declared component count")->capture_default_str();
  drop->add_option("--ranks", drop_spec.ranks)->delimiter(',')->capture_default_str();
  drop->add_option("--snr", drop_spec.snr_db, "SNR values in dB")->delimiter(',')->capture_default_str();
  drop->add_option("--trials", drop_spec.trials)->capture_default_str();
  drop->add_option("--removal", drop_spec.removal_probability, "per-component removal probability")
      ->capture_default_str();
  drop->add_option("--eta", drop_spec.eta, "relative norm threshold")->capture_default_str();
  drop->add_option("--csv", csv_path, "CSV output")->required();
  add_solver_flags(drop, solver);
  common(drop, true);

  // hide --------------------------------------------------------------------
  std::string cover_path, secret_path, container_path, key_path, mode_name = "float";
  double strength = rtd::kDefaultStrength;
  auto* hide = app.add_subcommand("hide", "conceal an RGB secret in a grayscale cover");
  hide->add_option("--cover", cover_path, "cover image (PGM)")->required();
  hide->add_option("--secret", secret_path, "secret image (PPM)")->required();
  hide->add_option("--out", container_path, "container output (PGM)")->required();
  hide->add_option("--key", key_path, "key output")->required();
  hide->add_option("--strength", strength)->capture_default_str();
  hide->add_option("--mode", mode_name)->check(CLI::IsMember({"float", "q8"}))->capture_default_str();
  common(hide, false);

  // reveal ------------------------------------------------------------------
  std::string secret_est_path, cover_est_path, ref_secret, ref_cover;
  auto* rev = app.add_subcommand("reveal", "recover a concealed secret with its key");
  rev->add_option("--container", container_path, "container image (PGM)")->required();
  rev->add_option("--key", key_path, "key file")->required();
  rev->add_option("--out", secret_est_path, "recovered secret (PPM)")->required();
  rev->add_option("--cover-out", cover_est_path, "recovered cover (PGM)");
  rev->add_option("--ref-secret", ref_secret, "reference secret; enables the SIR report on stdout");
  rev->add_option("--ref-cover", ref_cover, "reference cover; adds cover rows to the SIR report");
  add_solver_flags(rev, solver);
  common(rev, false);

  // bound -------------------------------------------------------------------
  std::uint64_t bound_n = 2, bound_r = 1;
  auto* bound = app.add_subcommand("bound", "smallest n covered by the exact-recovery bound");
  bound->add_option("--N", bound_n, "component count")->required()->check(CLI::PositiveNumber);
  bound->add_option("--r", bound_r, "rank")->required()->check(CLI::PositiveNumber);
  common(bound, false);

  // incoherence -------------------------------------------------------------
  std::vector<std::string> component_paths;
  std::size_t restarts = 10, ascent_iters = 100;
  std::vector<std::size_t> op_shape;
  auto* inc = app.add_subcommand("incoherence", "lower-bound the incoherence of each component");
  inc->add_option("--ops", ops_path, "reshuffle ops file")->required();
  inc->add_option("--components", component_paths, "component tensor files, in op order")->required();
  inc->add_option("--shape", op_shape, "target tensor shape (default: flat)")->delimiter(',');
  inc->add_option("--restarts", restarts)->capture_default_str();
  inc->add_option("--iters", ascent_iters)->capture_default_str();
  inc->add_option("--csv", csv_path, "CSV output (default stdout)");
  common(inc, false);

  // replay ------------------------------------------------------------------
  std::string replay_path;
  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("manifest", replay_path, "manifest JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  if (replay->parsed()) {
    std::ifstream in(replay_path);
    rtd::require(in.is_open(), rtd::ErrorKind::Io, "cannot open " + replay_path);
    json manifest;
    try {
      in >> manifest;
    } catch (const json::exception& e) {
      throw rtd::Error(rtd::ErrorKind::MalformedHeader, std::string("bad manifest: ") + e.what());
    }
    rtd::require(manifest.contains("argv") && manifest["argv"].is_array(), rtd::ErrorKind::MalformedHeader,
                 "manifest has no argv array");
    const auto replay_args = manifest["argv"].get<std::vector<std::string>>();
    rtd::require(!replay_args.empty() && replay_args.front() != "replay", rtd::ErrorKind::MalformedHeader,
                 "manifest does not record a replayable command");
    return run(replay_args);
  }

  const auto started = std::chrono::steady_clock::now();
  const CLI::App* cmd = app.get_subcommands().front();
  const rtd::SolverConfig config = solver.config();

  if (dec->parsed()) {
    const rtd::DenseTensor x = rtd::read_tensor(tensor_path);
    std::vector<rtd::ReshuffleOp> ops;
    for (const auto& spec : rtd::read_op_specs(ops_path)) ops.push_back(spec.build(x.shape()));
    const rtd::SolverResult res = rtd::decompose(rtd::Problem{x, ops}, config);
    ensure_dir(out_dir);
    for (std::size_t i = 0; i < res.components.size(); ++i) {
      const std::string path = join_path(out_dir, "component_" + std::to_string(i) + ".rtd");
      rtd::write_tensor(path, rtd::matrix_as_tensor(res.components[i]));
      log.wrote(path);
    }
    write_text(join_path(out_dir, "history.csv"), log, [&](std::ostream& os) { rtd::write_history_csv(os, res); });
    std::cout << "iterations," << res.iterations << "\nconverged," << (res.converged ? 1 : 0) << '\n';
  } else if (gen->parsed()) {
    std::optional<rtd::Shape> shape;
    if (!gen_shape.empty()) shape = parse_shape(gen_shape);
    const rtd::Instance inst = rtd::make_instance(gen_n, gen_r, gen_count, log.seed, shape);
    ensure_dir(out_dir);
    const std::string obs = join_path(out_dir, "observation.rtd");
    rtd::write_tensor(obs, inst.observation);
    log.wrote(obs);
    std::vector<rtd::OpSpec> specs;
    for (std::size_t i = 0; i < gen_count; ++i)
      specs.push_back({gen_n, gen_n, false, rtd::splitmix64_at(log.seed, 2 * i + 1)});
    write_text(join_path(out_dir, "ops.txt"), log, [&](std::ostream& os) { rtd::write_op_specs(os, specs); });
    for (std::size_t i = 0; i < gen_count; ++i) {
      const std::string path = join_path(out_dir, "truth_" + std::to_string(i) + ".rtd");
      rtd::write_tensor(path, rtd::matrix_as_tensor(inst.components[i]));
      log.wrote(path);
    }
  } else if (synth->parsed()) {
    rtd::write_image(rtd::synthetic_cover(img_h, img_w, cover_rank, rtd::splitmix64_at(log.seed, 0)), cover_out,
                     65535);
    log.wrote(cover_out);
    rtd::write_image(rtd::synthetic_secret(img_h, img_w, secret_rank, rtd::splitmix64_at(log.seed, 1)), secret_out,
                     65535);
    log.wrote(secret_out);
  } else if (phase->parsed()) {
    rtd::PhaseGridSpec spec;
    spec.mode = phase_mode == "size" ? rtd::PhaseMode::RankVsSize : rtd::PhaseMode::RankVsCount;
    spec.fixed_value = phase_mode == "size" ? fixed_count : fixed_n;
    spec.rows = ranks;
    spec.cols = phase_mode == "size" ? sizes : counts;
    spec.trials = trials;
    spec.base_seed = log.seed;
    spec.solver = config;
    spec.threads = threads;
    const rtd::PhaseGrid grid = rtd::run_phase_grid(spec);
    write_text(csv_path, log, [&](std::ostream& os) { rtd::write_phase_csv(os, grid); });
    if (!heatmap_path.empty()) {
      rtd::write_netpbm(heatmap_path, rtd::render_heatmap(grid, lo_db, hi_db));
      log.wrote(heatmap_path);
    }
  } else if (noise->parsed()) {
    noise_spec.seed = log.seed;
    noise_spec.solver = config;
    noise_spec.threads = threads;
    const auto rows = rtd::run_noise_sweep(noise_spec);
    write_text(csv_path, log, [&](std::ostream& os) { rtd::write_noise_csv(os, rows); });
  } else if (drop->parsed()) {
    drop_spec.seed = log.seed;
    drop_spec.solver = config;
    drop_spec.threads = threads;
    const auto rows = rtd::run_dropout_experiment(drop_spec);
    write_text(csv_path, log, [&](std::ostream& os) { rtd::write_dropout_csv(os, rows); });
  } else if (hide->parsed()) {
    const rtd::ContainerMode mode = mode_name == "q8" ? rtd::ContainerMode::Quantized8 : rtd::ContainerMode::Float;
    const auto result =
        rtd::conceal(rtd::read_gray_image(cover_path), rtd::read_rgb_image(secret_path), strength, log.seed, mode);
    rtd::write_container(container_path, result.container);
    log.wrote(container_path);
    rtd::write_key(key_path, result.key);
    log.wrote(key_path);
  } else if (rev->parsed()) {
    const rtd::StegoKey key = rtd::read_key(key_path);
    const rtd::Container container = rtd::read_container(container_path, key.mode);
    rtd::RevealReferences refs;
    if (!ref_secret.empty()) refs.secret = rtd::read_rgb_image(ref_secret);
    if (!ref_cover.empty()) refs.cover = rtd::read_gray_image(ref_cover);
    std::optional<rtd::SolverConfig> reveal_config;
    // Solver flags override the reveal defaults only when given explicitly.
    bool any_solver_flag = false;
    for (const char* flag : {"--rho", "--kappa0", "--tol", "--max-iter", "--schedule", "--kappa-max"})
      any_solver_flag = any_solver_flag || rev->count(flag) > 0;
    if (any_solver_flag) {
      rtd::SolverConfig c = rtd::reveal_solver_config(container);
      const rtd::SolverConfig user = config;
      c.rho = user.rho;
      c.tol = user.tol;
      c.max_iter = user.max_iter;
      c.schedule = user.schedule;
      c.kappa_max = user.kappa_max;
      if (user.kappa0) c.kappa0 = user.kappa0;
      reveal_config = c;
    }
    const rtd::RevealResult result = rtd::reveal(container, key, reveal_config, refs);
    rtd::write_image(result.secret, secret_est_path);
    log.wrote(secret_est_path);
    if (!cover_est_path.empty()) {
      rtd::write_image(result.cover, cover_est_path);
      log.wrote(cover_est_path);
    }
    if (result.metrics) rtd::write_reveal_metrics_csv(std::cout, *result.metrics, refs.secret.has_value());
    if (!result.converged)
      std::cerr << "rtd: reveal stopped at max_iter with residual " << result.residual << '\n';
  } else if (bound->parsed()) {
    std::cout << rtd::recovery_bound_min_n(bound_n, bound_r) << '\n';
  } else if (inc->parsed()) {
    const auto specs = rtd::read_op_specs(ops_path);
    rtd::require(component_paths.size() == specs.size(), rtd::ErrorKind::ShapeMismatch,
                 "need one component file per op");
    std::vector<rtd::Matrix> components;
    for (const auto& p : component_paths) components.push_back(rtd::tensor_as_matrix(rtd::read_tensor(p)));
    const rtd::Shape shape = op_shape.empty() ? rtd::Shape{specs.front().rows * specs.front().cols}
                                              : parse_shape(op_shape);
    std::vector<rtd::ReshuffleOp> ops;
    for (const auto& s : specs) ops.push_back(s.build(shape));
    std::vector<double> mu;
    for (std::size_t i = 0; i < ops.size(); ++i)
      mu.push_back(rtd::incoherence_lower_bound(components[i], ops, i, {restarts, ascent_iters, log.seed}).value);
    if (csv_path.empty())
      rtd::write_certificate_csv(std::cout, mu);
    else
      write_text(csv_path, log, [&](std::ostream& os) { rtd::write_certificate_csv(os, mu); });
  }

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  emit_manifest(cmd, log, seconds);
  return kExitOk;
}

int run(std::vector<std::string> args) {
  try {
    return dispatch(std::move(args));
  } catch (const rtd::Error& e) {
    std::cerr << "rtd: " << e.what() << '\n';
    return e.kind() == rtd::ErrorKind::DivergenceDetected ? kExitDivergence : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "rtd: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(std::vector<std::string>(argv + 1, argv + argc)); }
