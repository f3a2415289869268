// dimino: dataset generation, training, evaluation and invariance checks.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unistd.h>

#include <fmt/format.h>

#include "dimino/dataset_io.hpp"
#include "dimino/grad_suite.hpp"
#include "dimino/hash.hpp"
#include "dimino/parallel.hpp"
#include "dimino/sti.hpp"
#include "dimino/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dimino::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
  std::string out;
  bool force = false;
  int threads = 0;
  std::string precision = "f64";
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) fail(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

std::string file_hash(const fs::path& path) { return fmt::format("fnv1a64:{:016x}", fnv1a(read_file(path))); }

json hash_tree(const fs::path& dir) {
  json out = json::object();
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out[fs::relative(f, dir).generic_string()] = file_hash(f);
  return out;
}

fs::path output_root() {
  if (const char* env = std::getenv("DIMINO_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

// Writes into a sibling staging directory and renames it into place once
// the command has finished, so a failed run leaves no partial output.
class StagedOutput {
 public:
  StagedOutput(fs::path target, bool force) : target_(std::move(target)) {
    if (fs::exists(target_) && !force) {
      fail(ErrorCode::kIo, "output '" + target_.string() + "' exists (use --force to replace it)");
    }
    if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
    staging_ = target_;
    staging_ += fmt::format(".partial-{}", ::getpid());
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;
  ~StagedOutput() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  const fs::path& dir() const { return staging_; }
  const fs::path& target() const { return target_; }

  void commit() {
    if (fs::exists(target_)) fs::remove_all(target_);
    fs::rename(staging_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

// Resolved option values of a subcommand (flags, config file and defaults
// merged), in the form replay feeds back to the parser.
json resolved_options(const CLI::App& app) {
  json out = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config" || name == "out" || name == "force") continue;
    if (opt->get_expected_min() == 0) {
      if (opt->count() > 0) out[name] = true;
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (values.empty()) {
      const std::string def = opt->get_default_str();
      if (def.empty()) continue;
      values.push_back(def);
    }
    out[name] = values;
  }
  return out;
}

void write_run_record(const StagedOutput& out, const CLI::App& sub, const CommonArgs& common, json inputs) {
  json run;
  run["tool"] = "dimino";
  run["record_version"] = 1;
  run["command"] = sub.get_name();
  run["options"] = resolved_options(sub);
  run["output"] = out.target().generic_string();
  run["registry_version"] = registry().version;
  json specs = json::object();
  for (const auto& s : registry().systems) specs[s.name] = s.dimless.id;
  run["dimless_specs"] = specs;
  run["threads"] = kernels::max_threads();
  run["precision"] = common.precision;
  run["inputs"] = std::move(inputs);
  run["outputs"] = hash_tree(out.dir());
  write_file(out.dir() / "run.json", run.dump(2) + "\n");
}

json dataset_inputs(const fs::path& dir) {
  json in = json::object();
  const json tree = hash_tree(dir);
  for (const auto& [file, hash] : tree.items()) {
    if (file != "run.json") in[(dir / file).generic_string()] = hash;
  }
  return in;
}

std::vector<std::size_t> parse_size_list(const std::vector<std::string>& items) {
  std::vector<std::size_t> out;
  for (const auto& s : items) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidArgument, "expected a non-negative integer, got '" + s + "'");
    }
  }
  return out;
}

MetricKind parse_metric_short(const std::string& s) {
  if (s == "l2" || s == "rel-l2") return MetricKind::kRelL2;
  if (s == "h1" || s == "rel-h1") return MetricKind::kRelH1;
  if (s == "l1" || s == "rel-l1") return MetricKind::kRelL1;
  fail(ErrorCode::kInvalidArgument, "unknown metric '" + s + "' (expected l2, h1 or l1)");
}

void apply_threads(const CommonArgs& common) {
  if (common.threads < 0) fail(ErrorCode::kInvalidArgument, "--threads must be >= 0");
  if (common.threads > 0) kernels::set_threads(common.threads);
}

void add_common(CLI::App& sub, CommonArgs& common, bool with_out) {
  if (with_out) {
    sub.add_option("--out", common.out, "Output directory (default under $DIMINO_OUTPUT_ROOT or ./runs)");
    sub.add_flag("--force", common.force, "Replace an existing output directory");
  }
  sub.add_option("--threads", common.threads, "Worker threads, 0 = OpenMP default; 1 = deterministic path")
      ->capture_default_str();
  sub.add_option("--precision", common.precision, "Working precision")
      ->check(CLI::IsMember({"f64", "f32"}))
      ->capture_default_str();
}

// ---------------------------------------------------------------- gen-data

struct GenArgs {
  std::string system;
  std::size_t n = 256;
  std::size_t n_test = 64;
  std::uint64_t seed = 0;
  std::size_t grid = 0;
  double horizon = 0;
  std::vector<std::string> ranges;
  int float_bytes = 8;
  int steps = 0;
};

void setup_gen(CLI::App& sub, GenArgs& a, CommonArgs& common) {
  sub.add_option("--system", a.system, "advection1d | burgers1d | diffreact2d | ns-vorticity2d")->required();
  sub.add_option("--n", a.n, "Training samples")->capture_default_str();
  sub.add_option("--n-test", a.n_test, "Test samples")->capture_default_str();
  sub.add_option("--seed", a.seed, "Dataset seed")->capture_default_str();
  sub.add_option("--grid", a.grid, "Points per axis (default 256 in 1D, 64 in 2D)");
  sub.add_option("--horizon", a.horizon, "Prediction interval T (default 10, or 1 for ns-vorticity2d)");
  sub.add_option("--range", a.ranges, "Constant range as name=lo:hi (repeatable)");
  sub.add_option("--float-bytes", a.float_bytes, "Stored float width")
      ->check(CLI::IsMember({4, 8}))
      ->capture_default_str();
  sub.add_option("--steps", a.steps, "Fixed solver step count (0: derived from CFL and dt_max)")->capture_default_str();
  add_common(sub, common, true);
}

int run_gen(const CLI::App& sub, const GenArgs& a, const CommonArgs& common) {
  apply_threads(common);
  GeneratorConfig cfg = default_generator_config(parse_system(a.system));
  if (a.grid > 0) cfg.grid = cfg.grid.rank() == 1 ? Grid::line(a.grid) : Grid::square(a.grid);
  cfg.grid.validate();
  if (a.horizon != 0) {
    if (!(a.horizon > 0)) fail(ErrorCode::kInvalidArgument, "--horizon must be positive");
    cfg.horizon = a.horizon;
  }
  if (a.steps < 0) fail(ErrorCode::kInvalidArgument, "--steps must be >= 0");
  cfg.solver.steps = a.steps;
  for (const auto& r : a.ranges) {
    const auto eq = r.find('=');
    const auto colon = r.find(':', eq == std::string::npos ? 0 : eq);
    if (eq == std::string::npos || colon == std::string::npos) {
      fail(ErrorCode::kInvalidArgument, "range '" + r + "' is not of the form name=lo:hi");
    }
    const std::string name = r.substr(0, eq);
    double lo = 0;
    double hi = 0;
    try {
      lo = std::stod(r.substr(eq + 1, colon - eq - 1));
      hi = std::stod(r.substr(colon + 1));
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidArgument, "range '" + r + "' has a non-numeric bound");
    }
    if (!(lo > 0 && hi >= lo)) fail(ErrorCode::kInvalidArgument, "range '" + r + "' needs 0 < lo <= hi");
    auto it = std::find_if(cfg.ranges.begin(), cfg.ranges.end(), [&](const ParamRange& p) { return p.name == name; });
    if (it == cfg.ranges.end()) fail(ErrorCode::kInvalidArgument, "system has no range named '" + name + "'");
    it->lo = lo;
    it->hi = hi;
  }
  const fs::path target =
      common.out.empty() ? output_root() / fmt::format("data-{}-seed{}", a.system, a.seed) : fs::path(common.out);
  StagedOutput out(target, common.force);
  const Dataset ds = generate_dataset(cfg, a.n, a.n_test, a.seed);
  write_dataset(out.dir(), ds, a.float_bytes);
  write_run_record(out, sub, common, json::object());
  out.commit();

  std::cout << fmt::format("generated {} train / {} test samples of {} on a {} grid, T = {:g}\n", a.n, a.n_test,
                           a.system, fmt::join(cfg.grid.points, "x"), cfg.horizon);
  const auto audit = audit_dimensionless(ds.split("train"));
  for (const auto& [name, e] : audit.numbers) {
    std::cout << fmt::format("  {:<14} [{:.4g}, {:.4g}]  {:.2f} decades\n", name, e.min, e.max, e.decades);
  }
  std::cout << "wrote " << target.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string variant = "dimino";
  bool ablate_gate = false;
  std::string twin = "baseline";
  std::size_t width = 32;
  std::size_t depth = 4;
  std::vector<std::string> modes;
  double gamma = 0.5;
  std::string gate_position = "after-ffw-pre";
  std::string post_order = "ffw-post-last";
  std::string scale_mode = "per-sample";
  bool raw_gate_inputs = false;
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::size_t warmup = 5;
  std::size_t patience = 30;
  double valid_fraction = 0.1;
  std::string loss = "h1";
  std::string metric = "l2";
  std::uint64_t seed = 0;
  bool quiet = false;
};

void setup_train(CLI::App& sub, TrainArgs& a, CommonArgs& common) {
  sub.add_option("--data", a.data, "Dataset directory")->required();
  sub.add_option("--variant", a.variant, "Model variant")
      ->check(CLI::IsMember({"dimino", "gate-free", "baseline"}))
      ->capture_default_str();
  sub.add_flag("--ablate-gate", a.ablate_gate, "Also train the gate-ablated twin and report the gain");
  sub.add_option("--twin", a.twin, "Twin used by --ablate-gate")
      ->check(CLI::IsMember({"baseline", "gate-free"}))
      ->capture_default_str();
  sub.add_option("--width", a.width, "Latent channels")->capture_default_str();
  sub.add_option("--depth", a.depth, "Spectral blocks")->capture_default_str();
  sub.add_option("--modes", a.modes, "Retained modes per axis (one value applies to every axis)")->delimiter(',');
  sub.add_option("--gamma", a.gamma, "Gate skip fraction")->capture_default_str();
  sub.add_option("--gate-position", a.gate_position, "Gate placement")
      ->check(CLI::IsMember({"after-ffw-pre", "after-lift"}))
      ->capture_default_str();
  sub.add_option("--post-order", a.post_order, "Order of the output FFW and the rescaling")
      ->check(CLI::IsMember({"ffw-post-last", "scale-last"}))
      ->capture_default_str();
  sub.add_option("--scale-mode", a.scale_mode, "Field scales per sample or from the training set")
      ->check(CLI::IsMember({"per-sample", "per-dataset"}))
      ->capture_default_str();
  sub.add_flag("--raw-gate-inputs", a.raw_gate_inputs, "Feed dimensionless numbers to the gate without the log");
  sub.add_option("--epochs", a.epochs, "Maximum epochs")->capture_default_str();
  sub.add_option("--batch-size", a.batch_size, "Samples per optimizer step")->capture_default_str();
  sub.add_option("--lr", a.lr, "Peak learning rate")->capture_default_str();
  sub.add_option("--warmup", a.warmup, "Linear warmup epochs")->capture_default_str();
  sub.add_option("--patience", a.patience, "Early-stopping patience in epochs, 0 disables")->capture_default_str();
  sub.add_option("--valid-fraction", a.valid_fraction, "Share of the training split held out")->capture_default_str();
  sub.add_option("--loss", a.loss, "Training loss")->check(CLI::IsMember({"h1", "l2"}))->capture_default_str();
  sub.add_option("--metric", a.metric, "Headline metric in the summary")
      ->check(CLI::IsMember({"l2", "h1", "l1"}))
      ->capture_default_str();
  sub.add_option("--seed", a.seed, "Initialization and shuffling seed")->capture_default_str();
  sub.add_flag("--quiet", a.quiet, "No per-epoch progress");
  add_common(sub, common, true);
}

ModelConfig model_config_from(const TrainArgs& a, SystemId system, ModelVariant variant) {
  ModelConfig cfg = default_model_config(system, variant);
  cfg.width = a.width;
  cfg.depth = a.depth;
  if (!a.modes.empty()) {
    auto m = parse_size_list(a.modes);
    if (m.size() == 1) m.assign(static_cast<std::size_t>(system_info(system).rank), m[0]);
    cfg.modes = m;
  }
  cfg.gamma = a.gamma;
  cfg.gate_position = parse_gate_position(a.gate_position);
  cfg.post_order = parse_post_order(a.post_order);
  cfg.scale_mode = parse_scale_mode(a.scale_mode);
  cfg.log_gate_inputs = !a.raw_gate_inputs;
  cfg.seed = a.seed;
  cfg.validate();
  return cfg;
}

double headline(const MetricTable& t, MetricKind k) {
  switch (k) {
    case MetricKind::kRelL2: return t.rel_l2;
    case MetricKind::kRelH1: return t.rel_h1;
    case MetricKind::kRelL1: return t.rel_l1;
  }
  return t.rel_l2;
}

int run_train(const CLI::App& sub, const TrainArgs& a, const CommonArgs& common) {
  apply_threads(common);
  const Dataset ds = read_dataset(a.data);
  const auto& train_split = ds.split("train");
  const std::string eval_split = ds.splits.count("test") ? "test" : "train";
  const SystemId system = ds.config.system;

  TrainConfig tc;
  tc.loss = parse_metric_short(a.loss);
  tc.epochs = a.epochs;
  tc.batch_size = a.batch_size;
  tc.lr = a.lr;
  tc.warmup_epochs = a.warmup;
  tc.patience = a.patience;
  tc.valid_fraction = a.valid_fraction;
  tc.seed = a.seed;
  tc.precision = parse_precision(common.precision);
  tc.validate();

  struct Job {
    std::string file;
    ModelConfig cfg;
  };
  std::vector<Job> jobs{{"model", model_config_from(a, system, parse_variant(a.variant))}};
  if (a.ablate_gate) jobs.push_back({"twin", model_config_from(a, system, parse_variant(a.twin))});
  // Shape and mode checks before any training.
  for (const auto& j : jobs) Model(j.cfg).predict(train_split.front(), tc.precision);

  const fs::path target = common.out.empty()
                              ? output_root() / fmt::format("train-{}-{}-seed{}", system_name(system), a.variant, a.seed)
                              : fs::path(common.out);
  StagedOutput out(target, common.force);
  std::vector<MetricTable> tables;
  for (const auto& job : jobs) {
    std::ofstream history(out.dir() / (job.file + "-history.jsonl"), std::ios::binary);
    const std::string label(variant_name(job.cfg.variant));
    auto result = train(Model(job.cfg), train_split, tc, [&](const EpochRecord& r) {
      history << epoch_record_json(r) << "\n";
      if (!a.quiet) {
        std::cerr << fmt::format("[{}] epoch {:>4}  lr {:.2e}  train {:.4e}  valid rel-L2 {:.4e}\n", label, r.epoch,
                                 r.lr, r.train_loss, r.valid_rel_l2);
      }
    });
    history.close();
    save_model(result.best, out.dir() / (job.file + ".ckpt"));
    auto table = evaluate(result.best, ds, eval_split, tc.precision);
    table.model = label;
    tables.push_back(table);
  }
  const MetricTable* base = tables.size() > 1 ? &tables[1] : nullptr;
  std::vector<MetricTable> rows = tables;
  if (base) std::swap(rows[0], rows[1]);  // baseline first, like a results table
  const MetricTable* base_row = base ? &rows[0] : nullptr;
  const std::string text = format_metric_tables(rows, base_row);
  write_file(out.dir() / "metrics.txt", "split: " + eval_split + "\n" + text);
  write_file(out.dir() / "metrics.json", metric_tables_json(rows, base_row) + "\n");
  write_run_record(out, sub, common, dataset_inputs(a.data));
  out.commit();

  std::cout << "split: " << eval_split << "\n" << text;
  const MetricKind head = parse_metric_short(a.metric);
  std::cout << fmt::format("{} {}: {:.4e}", tables[0].model, metric_name(head), headline(tables[0], head));
  if (base) {
    std::cout << fmt::format("  (twin {:.4e}, gain {:.1f}%)", headline(*base, head),
                             100 * gain(headline(*base, head), headline(tables[0], head)));
  }
  std::cout << "\nwrote " << target.string() << "\n";
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string baseline_checkpoint;
  double valid_fraction = 0.1;
  std::uint64_t seed = 0;
  bool json_out = false;
};

std::vector<Sample> resolve_split(const Dataset& ds, const std::string& split, double valid_fraction,
                                  std::uint64_t seed) {
  if (split != "valid") return ds.split(split);
  const auto& train = ds.split("train");
  const auto idx = carve_validation(train.size(), valid_fraction, seed).valid;
  std::vector<Sample> out;
  for (auto i : idx) out.push_back(train[i]);
  if (out.empty()) fail(ErrorCode::kMissingSplit, "valid split is empty for this fraction");
  return out;
}

void setup_eval(CLI::App& sub, EvalArgs& a, CommonArgs& common) {
  sub.add_option("--checkpoint", a.checkpoint, "Model checkpoint")->required();
  sub.add_option("--data", a.data, "Dataset directory")->required();
  sub.add_option("--split", a.split, "Split name; 'valid' re-carves the training hold-out")->capture_default_str();
  sub.add_option("--baseline-checkpoint", a.baseline_checkpoint, "Second model for the gain column");
  sub.add_option("--valid-fraction", a.valid_fraction, "Hold-out share used at training time")->capture_default_str();
  sub.add_option("--seed", a.seed, "Training seed (for --split valid)")->capture_default_str();
  sub.add_flag("--json", a.json_out, "Print JSON instead of the text table");
  add_common(sub, common, true);
}

int run_eval(const CLI::App& sub, const EvalArgs& a, const CommonArgs& common) {
  apply_threads(common);
  const Precision precision = parse_precision(common.precision);
  const Dataset ds = read_dataset(a.data);
  const auto samples = resolve_split(ds, a.split, a.valid_fraction, a.seed);
  const Model model = load_model(a.checkpoint);
  if (model.config().system != ds.config.system) {
    fail(ErrorCode::kSpecMismatch, "checkpoint is for " + std::string(system_name(model.config().system)));
  }
  std::vector<MetricTable> rows;
  const MetricTable* base = nullptr;
  if (!a.baseline_checkpoint.empty()) {
    const Model baseline = load_model(a.baseline_checkpoint);
    rows.push_back(evaluate(baseline, samples, precision));
    rows.back().model += " (base)";
  }
  rows.push_back(evaluate(model, samples, precision));
  if (rows.size() > 1) base = &rows[0];
  const std::string text = format_metric_tables(rows, base);
  const std::string js = metric_tables_json(rows, base);
  if (!common.out.empty()) {
    StagedOutput out(common.out, common.force);
    write_file(out.dir() / "metrics.txt", "split: " + a.split + "\n" + text);
    write_file(out.dir() / "metrics.json", js + "\n");
    json inputs = dataset_inputs(a.data);
    inputs[a.checkpoint] = file_hash(a.checkpoint);
    if (!a.baseline_checkpoint.empty()) inputs[a.baseline_checkpoint] = file_hash(a.baseline_checkpoint);
    write_run_record(out, sub, common, inputs);
    out.commit();
  }
  std::cout << (a.json_out ? js + "\n" : "split: " + a.split + "\n" + text);
  return kExitOk;
}

// --------------------------------------------------------------- sti-check

struct StiArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::vector<double> p{1, 2, 4, 8};
  std::size_t samples = 32;
  std::string baseline_checkpoint;
  double max_latent_residual = -1;
  bool json_out = false;
};

void setup_sti(CLI::App& sub, StiArgs& a, CommonArgs& common) {
  sub.add_option("--checkpoint", a.checkpoint, "Model checkpoint")->required();
  sub.add_option("--data", a.data, "Dataset directory")->required();
  sub.add_option("--split", a.split, "Split name")->capture_default_str();
  sub.add_option("--p", a.p, "Transform factors, comma separated, sorted, including 1")
      ->delimiter(',')
      ->capture_default_str();
  sub.add_option("--samples", a.samples, "Samples used, 0 = all")->capture_default_str();
  sub.add_option("--baseline-checkpoint", a.baseline_checkpoint, "Comparison model (single shot and rollout rows)");
  sub.add_option("--max-latent-residual", a.max_latent_residual, "Exit 1 when the latent residual exceeds this");
  sub.add_flag("--json", a.json_out, "Print JSON instead of the text table");
  add_common(sub, common, true);
}

int run_sti(const CLI::App& sub, const StiArgs& a, const CommonArgs& common) {
  apply_threads(common);
  const Dataset ds = read_dataset(a.data);
  const Model model = load_model(a.checkpoint);
  std::optional<Model> baseline;
  if (!a.baseline_checkpoint.empty()) baseline = load_model(a.baseline_checkpoint);
  StiOptions opt;
  opt.p_list = a.p;
  opt.solver = ds.config.solver;
  opt.max_samples = a.samples;
  opt.precision = parse_precision(common.precision);
  opt.baseline = baseline ? &*baseline : nullptr;
  const auto report = sti_check(model, ds.split(a.split), opt);
  const std::string text = format_sti_table(report);
  const std::string js = sti_report_json(report);
  if (!common.out.empty()) {
    StagedOutput out(common.out, common.force);
    write_file(out.dir() / "sti.txt", text);
    write_file(out.dir() / "sti.json", js + "\n");
    json inputs = dataset_inputs(a.data);
    inputs[a.checkpoint] = file_hash(a.checkpoint);
    if (baseline) inputs[a.baseline_checkpoint] = file_hash(a.baseline_checkpoint);
    write_run_record(out, sub, common, inputs);
    out.commit();
  }
  std::cout << (a.json_out ? js + "\n" : text);
  if (a.max_latent_residual >= 0) {
    for (const auto& e : report.entries) {
      if (e.latent_residual > a.max_latent_residual) {
        std::cerr << fmt::format("latent residual {:.3e} at p={:g} exceeds {:.3e}\n", e.latent_residual, e.p,
                                 a.max_latent_residual);
        return kExitFailure;
      }
    }
  }
  return kExitOk;
}

// -------------------------------------------------------------- grad-check

struct GradArgs {
  std::size_t seeds = 100;
  std::size_t model_seeds = 5;
  double step = 1e-4;
  double model_step = 1e-4;
  double threshold = 1e-6;
  std::uint64_t seed = 0;
  bool json_out = false;
};

void setup_grad(CLI::App& sub, GradArgs& a, CommonArgs& common) {
  sub.add_option("--seeds", a.seeds, "Random seeds per primitive")->capture_default_str();
  sub.add_option("--model-seeds", a.model_seeds, "Random seeds per full model")->capture_default_str();
  sub.add_option("--step", a.step, "Difference step for primitives (f32 default 1e-3)")->capture_default_str();
  sub.add_option("--model-step", a.model_step, "Difference step for full models (f32 default 1e-3)")->capture_default_str();
  sub.add_option("--threshold", a.threshold, "Worst relative error allowed")->capture_default_str();
  sub.add_option("--seed", a.seed, "Base seed")->capture_default_str();
  sub.add_flag("--json", a.json_out, "Print JSON instead of the text table");
  add_common(sub, common, false);
}

int run_grad(const CLI::App& sub, const GradArgs& a, const CommonArgs& common) {
  apply_threads(common);
  const bool f32 = parse_precision(common.precision) == Precision::kF32;
  // Single precision needs the largest allowed step to keep rounding below
  // the truncation error.
  const double step = f32 && sub.count("--step") == 0 ? 1e-3 : a.step;
  const double model_step = f32 && sub.count("--model-step") == 0 ? 1e-3 : a.model_step;
  auto prims = f32 ? check_primitives<float>(a.seeds, a.seed, step) : check_primitives<double>(a.seeds, a.seed, step);
  auto models = f32 ? check_models<float>(a.model_seeds, a.seed, model_step)
                    : check_models<double>(a.model_seeds, a.seed, model_step);
  double worst = 0;
  json js;
  js["precision"] = common.precision;
  js["threshold"] = a.threshold;
  std::ostringstream text;
  text << fmt::format("{:<32} {:>16} {:>6}\n", "check", "worst rel error", "seeds");
  for (auto* group : {&prims, &models}) {
    const char* key = group == &prims ? "primitives" : "models";
    js[key] = json::object();
    for (const auto& r : *group) {
      text << fmt::format("{:<32} {:>16.3e} {:>6}\n", std::string(group == &prims ? "" : "model:") + r.name, r.worst,
                          r.seeds);
      js[key][r.name] = r.worst;
      worst = std::max(worst, r.worst);
    }
  }
  const bool pass = worst < a.threshold;
  js["worst"] = worst;
  js["pass"] = pass;
  text << fmt::format("worst {:.3e} (threshold {:.1e}): {}\n", worst, a.threshold, pass ? "PASS" : "FAIL");
  std::cout << (a.json_out ? js.dump(2) + "\n" : text.str());
  return pass ? kExitOk : kExitFailure;
}

// ----------------------------------------------------------- dump-registry

int run_dump_registry(bool as_json) {
  if (!as_json) {
    std::cout << registry_text();
    return kExitOk;
  }
  json js;
  js["version"] = registry().version;
  for (const auto& s : registry().systems) {
    json sys;
    sys["dimless_spec"] = s.dimless.id;
    sys["rank"] = s.rank;
    for (const auto& q : s.quantities) sys["quantities"][q.name] = q.dim.to_string();
    sys["targets"] = s.targets;
    for (const auto& m : s.dimless.numbers) {
      json num;
      num["root"] = m.root;
      for (const auto& [name, e] : m.factors) num["factors"][name] = e;
      sys["numbers"][m.name] = num;
    }
    sys["similar_transform"]["exact"] = s.rule.exact;
    for (const auto& [name, e] : s.rule.exponents) sys["similar_transform"]["exponents"][name] = e;
    js["systems"][s.name] = sys;
  }
  std::cout << js.dump(2) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ driver

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
    if (c == '"') c = '\'';
  }
  return s;
}

int report(std::string_view code, const std::string& message, int exit_code) {
  std::cerr << "error: code=" << code << " message=\"" << one_line(message) << "\"\n";
  return exit_code;
}

int dispatch(std::vector<std::string> args, int depth);

struct ReplayArgs {
  std::string run;
};

int run_replay(const ReplayArgs& a, const CommonArgs& common, int depth) {
  if (depth > 0) fail(ErrorCode::kInvalidArgument, "a replay cannot replay another replay");
  json run;
  try {
    run = json::parse(read_file(a.run));
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("run record is not valid JSON: ") + e.what());
  }
  const std::string command = run.at("command").get<std::string>();
  std::vector<std::string> args{"dimino", command};
  for (const auto& [name, value] : run.at("options").items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + name);
      continue;
    }
    for (const auto& v : value) {
      args.push_back("--" + name);
      args.push_back(v.get<std::string>());
    }
  }
  if (command == "gen-data" || command == "train" || run.contains("output")) {
    const std::string out = common.out.empty() ? run.at("output").get<std::string>() + "-replay" : common.out;
    if (command != "grad-check") {
      args.push_back("--out");
      args.push_back(out);
      if (common.force) args.push_back("--force");
    }
  }
  return dispatch(std::move(args), depth + 1);
}

int dispatch(std::vector<std::string> args, int depth) {
  CLI::App app{"dimino: dimension-aware neural operators"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dimino 1.0");

  CommonArgs common;
  GenArgs gen;
  TrainArgs tr;
  EvalArgs ev;
  StiArgs st;
  GradArgs gr;
  ReplayArgs rp;
  bool registry_json = false;

  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a dataset with the reference solvers");
  setup_gen(*gen_cmd, gen, common);
  auto* train_cmd = app.add_subcommand("train", "Train a model (optionally with its gate-ablated twin)");
  setup_train(*train_cmd, tr, common);
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  setup_eval(*eval_cmd, ev, common);
  auto* sti_cmd = app.add_subcommand("sti-check", "Similar-transformation invariance report");
  setup_sti(*sti_cmd, st, common);
  auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference check of every gradient rule");
  setup_grad(*grad_cmd, gr, common);
  auto* reg_cmd = app.add_subcommand("dump-registry", "Print the dimensionless-number registry");
  reg_cmd->add_flag("--json", registry_json, "JSON instead of the registry table");
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a command from its run.json");
  replay_cmd->add_option("--run", rp.run, "run.json of the original run")->required();
  replay_cmd->add_option("--out", common.out, "Output directory (default: original output + '-replay')");
  replay_cmd->add_flag("--force", common.force, "Replace an existing output directory");
  for (auto* sub : {gen_cmd, train_cmd, eval_cmd, sti_cmd, grad_cmd}) {
    sub->set_config("--config", "", "TOML/INI file with option values (flags override it)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), kExitUsage);
  }

  try {
    if (*gen_cmd) return run_gen(*gen_cmd, gen, common);
    if (*train_cmd) return run_train(*train_cmd, tr, common);
    if (*eval_cmd) return run_eval(*eval_cmd, ev, common);
    if (*sti_cmd) return run_sti(*sti_cmd, st, common);
    if (*grad_cmd) return run_grad(*grad_cmd, gr, common);
    if (*reg_cmd) return run_dump_registry(registry_json);
    if (*replay_cmd) return run_replay(rp, common, depth);
  } catch (const Error& e) {
    const int code = e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitFailure;
    return report(to_string(e.code()), e.what(), code);
  } catch (const fs::filesystem_error& e) {
    return report("Io", e.what(), kExitFailure);
  } catch (const std::exception& e) {
    return report("Internal", e.what(), kExitFailure);
  }
  return kExitUsage;
}

}  // namespace

}  // namespace dimino::cli

int main(int argc, char** argv) {
  return dimino::cli::dispatch(std::vector<std::string>(argv, argv + argc), 0);
}
