// invadelab: command-line front end for the experiment runner.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "invadelab/experiments.hpp"
#include "invadelab/invasion.hpp"
#include "invadelab/weights.hpp"

namespace {

using invadelab::ExperimentConfig;

std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invadelab::ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ExperimentConfig::from_json(ss.str());
}

int env_workers() {
  if (const char* v = std::getenv("INVADELAB_WORKERS")) {
    try {
      return std::max(0, std::stoi(v));
    } catch (const std::exception&) {
      return 0;
    }
  }
  return 0;
}

struct Flags {
  std::string seed;
  std::string manifest_seed;
  std::string config;
};

// Options common to every estimator subcommand. CLI11 writes a variable only
// when its flag is present, so values loaded from --config survive.
void add_common(CLI::App* sub, ExperimentConfig& c, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file; explicit flags override its fields");
  sub->add_option("--seed", f.seed, "base seed seed0 (decimal or 0x-hex)");
  sub->add_option("--trials", c.trials, "number of independent trials");
  sub->add_option("--workers", c.workers, "worker threads (0: INVADELAB_WORKERS or all cores)");
  sub->add_option("--out", c.out, "output path (default: stdout)");
  sub->add_option("--format", c.format, "csv, json or svg-plot");
}

void add_scale(CLI::App* sub, ExperimentConfig& c, const std::string& what) {
  sub->add_option("-n,--n", c.n, what);
  sub->add_option("--ns", c.ns, "sweep over several values of n")->delimiter(',');
}

void add_threshold(CLI::App* sub, ExperimentConfig& c) {
  sub->add_option("-p,--p", c.p, "edge-open threshold p");
  sub->add_option("--ps", c.ps, "sweep over several values of p")->delimiter(',');
}

void add_manifest(CLI::App* sub, ExperimentConfig& c, Flags& f) {
  sub->add_option("--manifest", c.manifest, "threshold manifest JSON path");
  sub->add_option("--manifest-trials", c.manifest_trials, "trials key of the manifest entries");
  sub->add_option("--manifest-seed", f.manifest_seed, "seed key of the manifest entries");
}

void add_checkpoint(CLI::App* sub, ExperimentConfig& c) {
  sub->add_option("--checkpoint-dir", c.checkpoint_dir, "directory for per-trial checkpoints");
  sub->add_option("--checkpoint-every", c.checkpoint_every, "steps between checkpoints");
  sub->add_option("--stop-after", c.checkpoint_stop_after, "stop each trial after this many steps (resume later)")
      ->group("");
}

int run_estimator(ExperimentConfig c, const Flags& f) {
  if (!f.seed.empty()) c.seed0 = invadelab::parse_seed(f.seed);
  if (!f.manifest_seed.empty()) c.manifest_seed = invadelab::parse_seed(f.manifest_seed);
  if (c.workers == 0) c.workers = env_workers();
  const auto format = invadelab::parse_format(c.format);
  const auto rows = invadelab::run(c);
  if (c.out.empty()) {
    invadelab::emit(std::cout, rows, format);
  } else {
    invadelab::emit(c.out, rows, format);
  }
  return 0;
}

struct InvadeFlags {
  std::int64_t steps = 1000;
  std::string seed = "1";
  std::string out;
  std::string format = "csv";
  std::string checkpoint;
  std::int64_t every = std::int64_t{1} << 20;
  std::int64_t stop_after = 0;
};

int run_invade(const InvadeFlags& f) {
  const invadelab::WeightField field(invadelab::parse_seed(f.seed));
  const invadelab::CheckpointOptions ck{f.checkpoint, f.every, f.stop_after};
  const auto trace = invadelab::invade_resumable(field, f.steps, ck);
  if (!trace) {
    std::cerr << "stopped after checkpoint " << f.checkpoint << "; rerun to resume\n";
    return 3;
  }
  if (f.format != "csv" && f.format != "binary") throw invadelab::ConfigError("invade --format must be csv or binary");
  const auto mode = f.format == "binary" ? std::ios::binary : std::ios::openmode{};
  std::ofstream file;
  if (!f.out.empty()) {
    file.open(f.out, mode);
    if (!file) throw std::runtime_error("cannot open " + f.out + " for writing");
  }
  std::ostream& out = f.out.empty() ? std::cout : file;
  if (f.format == "binary") {
    trace->write_binary(out);
  } else {
    trace->write_csv(out);
  }
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(trace->hash()));
  std::cerr << "steps=" << trace->size() << " hash=" << hash << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"invadelab: invasion percolation and near-critical percolation experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "invadelab 0.1.0");

  ExperimentConfig config;
  Flags flags;
  InvadeFlags invade;
  try {
    const std::string path = find_config_path(argc, argv);
    if (!path.empty()) config = load_config(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  auto* crossing = app.add_subcommand("crossing", "left-right crossing probability of {n} x [0,m]");
  add_scale(crossing, config, "box width n");
  crossing->add_option("-m,--m", config.m, "box height (default: n)");
  add_threshold(crossing, config);

  auto* corrlen = app.add_subcommand("corrlen", "correlation length L(p, eps)");
  add_threshold(corrlen, config);
  corrlen->add_option("--eps", config.eps, "crossing window eps");

  auto* pnqn = app.add_subcommand("pnqn", "thresholds p_n, q_n; optionally stored in a manifest");
  add_scale(pnqn, config, "scale n");
  pnqn->add_option("--eps", config.eps, "crossing window eps");
  pnqn->add_option("--manifest", config.manifest, "manifest JSON to create or update");

  auto* pi = app.add_subcommand("pi", "one-arm probability pi(p, n)");
  add_scale(pi, config, "radius n");
  add_threshold(pi, config);

  auto* fourarm = app.add_subcommand("fourarm", "four-arm probability at the edge H(0,0)");
  add_scale(fourarm, config, "radius n");
  fourarm->add_option("-p,--p", config.p, "threshold p");

  auto* profile = app.add_subcommand("profile", "acceptance profile a_n(x) per bin");
  add_scale(profile, config, "step horizon n");
  profile->add_option("--bin-width", config.bin_width, "uniform bin width");
  profile->add_option("--bin-edges", config.bin_edges, "explicit bin edges")->delimiter(',');
  add_checkpoint(profile, config);

  auto* step = app.add_subcommand("profile-step", "three-bin step-function table");
  add_scale(step, config, "step horizon n");
  add_checkpoint(step, config);

  auto* identity = app.add_subcommand("identity", "checked-edge identity E[P~_n(x)] = x E[L_n]");
  add_scale(identity, config, "step horizon n");
  identity->add_option("-x,--x", config.x, "level x");
  identity->add_option("--xs", config.ps, "several levels")->delimiter(',');

  auto* xi = app.add_subcommand("xi", "checked but uninvaded edges with weight in (p_c, p_c + eps]");
  add_scale(xi, config, "step horizon n");
  xi->add_option("--eps", config.eps, "window eps");

  auto* radius = app.add_subcommand("radius", "radius R_n of the first n invaded edges");
  add_scale(radius, config, "step horizon n");

  auto* stabilize = app.add_subcommand("stabilize", "stabilization radius r_n with censoring");
  add_scale(stabilize, config, "step n");
  stabilize->add_option("--horizon-factor", config.horizon_factor, "run to horizon_factor * n steps");

  auto* outlets = app.add_subcommand("outlets", "number of outlets among the first n invaded edges");
  add_scale(outlets, config, "step horizon n");

  auto* events = app.add_subcommand("events", "frequency of D_{k,m}, D(n) or L_k(e)");
  add_scale(events, config, "scale n (D(n))");
  events->add_option("--event", config.event, "Dkm, Dn or Lk")->check(CLI::IsMember({"Dkm", "Dn", "Lk"}));
  events->add_option("-k,--k", config.k, "dyadic scale k");
  events->add_option("--dkm-m", config.dkm_m, "D_{k,m} width m");
  events->add_option("--eps", config.eps, "L_k window eps; manifest eps key");
  events->add_option("--truncation", config.truncation, "truncation radius M (0: default)");
  add_manifest(events, config, flags);

  auto* scaling = app.add_subcommand("scaling", "box counts S_n, Y_n and pi(n)");
  add_scale(scaling, config, "box size n");
  scaling->add_option("--eps", config.eps, "window eps of Y_n");

  for (auto* sub : {crossing, corrlen, pnqn, pi, fourarm, profile, step, identity, xi, radius, stabilize, outlets,
                    events, scaling}) {
    add_common(sub, config, flags);
  }

  auto* inv = app.add_subcommand("invade", "single invasion trace as CSV or binary");
  inv->add_option("--steps", invade.steps, "number of invasion steps");
  inv->add_option("--seed", invade.seed, "field seed (decimal or 0x-hex)");
  inv->add_option("--out", invade.out, "output path (default: stdout)");
  inv->add_option("--format", invade.format, "csv or binary");
  inv->add_option("--checkpoint", invade.checkpoint, "checkpoint file; resumes if present");
  inv->add_option("--checkpoint-every", invade.every, "steps between checkpoints");
  inv->add_option("--stop-after", invade.stop_after, "stop after this many steps")->group("");

  if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
    std::string known;
    for (const auto* sub : app.get_subcommands({})) known += (known.empty() ? "" : ", ") + sub->get_name();
    std::cerr << "config error: unknown kind '" << argv[1] << "'; expected one of: " << known << '\n';
    return 2;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (inv->parsed()) return run_invade(invade);
    for (auto* sub : app.get_subcommands()) config.kind = sub->get_name();
    return run_estimator(config, flags);
  } catch (const invadelab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const invadelab::RunInterrupted& e) {
    std::cerr << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
