#include "ftol/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ftol/attacks.hpp"
#include "ftol/curves.hpp"
#include "ftol/data.hpp"
#include "ftol/image_io.hpp"
#include "ftol/model.hpp"
#include "ftol/trainer.hpp"

#ifndef FTOL_VERSION
#define FTOL_VERSION "0.0.0"
#endif

namespace ftol::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const std::vector<std::string> kSubcommands = {
    "train", "eval", "curve", "fool", "convert-check", "synth"};

struct Common {
  std::uint64_t seed = 0;
  std::string data;
  std::string model;
  std::string out = ".";
  int threads = 1;
  std::string config;

  void to_json(json& j) const {
    j["seed"] = seed;
    if (!data.empty()) j["data"] = data;
    if (!model.empty()) j["model"] = model;
    j["out"] = out;
    j["threads"] = threads;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Run seed; every random stream derives from it")
      ->capture_default_str();
  sub->add_option("--data", c.data,
                  "Dataset container (.ftc); relative paths missing from the "
                  "working directory are looked up under $FTC_DATA_DIR");
  sub->add_option("--model", c.model, "Model file (.ftm)");
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads for inference and attacks")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--config", c.config,
                  "JSON config (or a run.json); command-line flags take precedence");
}

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Flag tokens for one config entry; false and null contribute nothing.
std::vector<std::string> tokens_for(const std::string& key, const json& v) {
  const std::string flag = "--" + key;
  if (v.is_null()) return {};
  if (v.is_boolean()) return v.get<bool>() ? std::vector<std::string>{flag}
                                           : std::vector<std::string>{};
  auto scalar = [](const json& x) {
    if (x.is_string()) return x.get<std::string>();
    if (x.is_array() || x.is_object()) {
      throw ConfigError("nested config values are not supported");
    }
    return x.dump();
  };
  if (v.is_array()) {
    std::string joined;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) joined += ',';
      joined += scalar(v[i]);
    }
    return {flag, joined};
  }
  return {flag, scalar(v)};
}

// Splices the entries of a --config file into the argument list right after
// the subcommand, skipping any flag already given on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (j.contains("tool") && j.contains("config")) j = j["config"];
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");

  std::size_t sub = 0;
  for (std::size_t i = 1; i < args.size() && sub == 0; ++i) {
    if (std::find(kSubcommands.begin(), kSubcommands.end(), args[i]) !=
        kSubcommands.end()) {
      sub = i;
    }
  }
  if (sub == 0) return args;

  std::set<std::string> given;
  for (const auto& a : args) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
  }
  std::vector<std::string> injected;
  for (const auto& [key, value] : j.items()) {
    if (key == "config" || given.count(key)) continue;
    auto t = tokens_for(key, value);
    injected.insert(injected.end(), t.begin(), t.end());
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<long>(sub) + 1);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + static_cast<long>(sub) + 1, args.end());
  return out;
}

fs::path resolve_data(const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !fs::exists(path)) {
    if (const char* root = std::getenv("FTC_DATA_DIR"); root && *root) {
      return fs::path(root) / path;
    }
  }
  return path;
}

fs::path prepare_out(const Common& c) {
  fs::path out(c.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + c.out + ": " + ec.message());
  return out;
}

void print_path(std::ostream& os, const char* what, const fs::path& p) {
  os << what << ": " << fs::absolute(p).lexically_normal().string() << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

void write_provenance(const fs::path& out, const std::string& subcommand,
                      const json& config) {
  json j;
  j["tool"] = "ftol";
  j["version"] = FTOL_VERSION;
  j["subcommand"] = subcommand;
  j["config"] = config;
  write_text(out / "run.json", j.dump(2) + "\n");
}

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
  return value;
}

Standardization parse_standardization(const std::string& s) {
  return s == "per-dataset" ? Standardization::kPerDataset
                            : Standardization::kPerImage;
}

Dataset load_dataset(const Common& c, const std::string& standardize,
                     std::ostream& out) {
  const fs::path data = resolve_data(require(c.data, "--data"));
  print_path(out, "data", data);
  return prepare_dataset(load_container(data), parse_standardization(standardize));
}

Network load_network(const std::string& path, std::ostream& out,
                     const char* what = "model") {
  print_path(out, what, path);
  return load_model(path).network;
}

// Evaluation subset drawn from the run seed; 0 or a size beyond the data
// uses the whole set.
Dataset take_subset(const Dataset& ds, std::size_t n, std::uint64_t seed,
                    std::ostream& err) {
  if (n == 0) return ds;
  if (n > ds.size()) {
    err << "warning: subset of " << n << " exceeds the " << ds.size()
        << " available images; using all of them\n";
    return ds;
  }
  return sample_subset(ds, n, seed);
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::size_t epochs = 50;
  double lr = 1e-2;
  std::size_t batch_size = 128;
  double weight_decay = 0.0;
  double init_sigma = 0.05;
  bool no_bias_decay = false;
  std::string standardize = "per-image";
  std::string class_weighting = "inverse";
  std::size_t limit = 0;
  std::string log = "train-log.csv";

  void to_json(json& j) const {
    j["epochs"] = epochs;
    j["lr"] = lr;
    j["batch-size"] = batch_size;
    j["weight-decay"] = weight_decay;
    j["init-sigma"] = init_sigma;
    j["no-bias-decay"] = no_bias_decay;
    j["standardize"] = standardize;
    j["class-weighting"] = class_weighting;
    j["limit"] = limit;
    j["log"] = log;
  }
};

void add_standardize(CLI::App* sub, std::string& target) {
  sub->add_option("--standardize", target,
                  "per-image: own mean and std; per-dataset: own mean, pooled std")
      ->check(CLI::IsMember({"per-image", "per-dataset"}))
      ->capture_default_str();
}

void register_train(CLI::App* sub, TrainArgs& a) {
  sub->add_option("--epochs", a.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--lr", a.lr, "Constant SGD learning rate")->capture_default_str();
  sub->add_option("--batch-size", a.batch_size)->capture_default_str();
  sub->add_option("--weight-decay", a.weight_decay, "L2 decay constant lambda")
      ->capture_default_str();
  sub->add_option("--init-sigma", a.init_sigma, "Std of the Gaussian kernel init")
      ->capture_default_str();
  sub->add_flag("--no-bias-decay", a.no_bias_decay, "Exclude biases from weight decay");
  add_standardize(sub, a.standardize);
  sub->add_option("--class-weighting", a.class_weighting,
                  "inverse: inverse class frequency; uniform: all ones")
      ->check(CLI::IsMember({"inverse", "uniform"}))
      ->capture_default_str();
  sub->add_option("--limit", a.limit, "Train on a seeded subset of this size (0 = all)")
      ->capture_default_str();
  sub->add_option("--log", a.log, "Per-epoch log file name inside --out")
      ->capture_default_str();
}

int cmd_train(Common c, const TrainArgs& a, std::ostream& out) {
  const fs::path dir = prepare_out(c);
  if (c.model.empty()) c.model = (dir / "model.ftm").string();
  SgdConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.weight_decay = a.weight_decay;
  cfg.batch_size = a.batch_size;
  cfg.epochs = a.epochs;
  cfg.seed = c.seed;
  cfg.decay_biases = !a.no_bias_decay;
  cfg.validate();
  if (!(a.init_sigma > 0.0)) throw ConfigError("--init-sigma must be > 0");

  Dataset ds = load_dataset(c, a.standardize, out);
  print_path(out, "model", c.model);
  print_path(out, "out", dir);
  if (a.limit > 0) {
    if (a.limit > ds.size()) {
      throw ConfigError("--limit " + std::to_string(a.limit) + " exceeds the " +
                        std::to_string(ds.size()) + " training images");
    }
    ds = sample_subset(ds, a.limit, c.seed);
  }
  cfg.class_weights = a.class_weighting == "inverse"
                          ? class_weights(ds.labels, kClassCount)
                          : std::vector<double>(kClassCount, 1.0);

  json config;
  c.to_json(config);
  a.to_json(config);
  write_provenance(dir, "train", config);

  Network net = build_paper_cnn(c.seed, a.init_sigma);
  std::ofstream log(dir / a.log, std::ios::binary);
  if (!log) throw IoError("cannot open " + (dir / a.log).string());
  log << "epoch,loss,accuracy\n";
  out << "training on " << ds.size() << " images, " << net.param_count()
      << " parameters\n";
  train(net, ds, cfg, [&](const EpochStats& s) {
    log << s.epoch << ',' << g6(s.loss) << ',' << g6(s.accuracy) << '\n';
    log.flush();
    out << "epoch " << s.epoch << '/' << cfg.epochs << " loss " << g6(s.loss)
        << " accuracy " << g6(s.accuracy) << '\n';
  });
  save_model(c.model, net, {c.seed, cfg.epochs});
  out << "wrote " << c.model << '\n';
  return kOk;
}

// --- eval ----------------------------------------------------------------

struct EvalArgs {
  std::size_t subset = 0;
  std::string standardize = "per-image";

  void to_json(json& j) const {
    j["subset"] = subset;
    j["standardize"] = standardize;
  }
};

void register_eval(CLI::App* sub, EvalArgs& a) {
  sub->add_option("--subset", a.subset, "Evaluate a seeded subset (0 = all)")
      ->capture_default_str();
  add_standardize(sub, a.standardize);
}

int cmd_eval(const Common& c, const EvalArgs& a, std::ostream& out,
             std::ostream& err) {
  const fs::path dir = prepare_out(c);
  Network net = load_network(require(c.model, "--model"), out);
  Dataset ds = take_subset(load_dataset(c, a.standardize, out), a.subset, c.seed, err);
  print_path(out, "out", dir);
  json config;
  c.to_json(config);
  a.to_json(config);
  write_provenance(dir, "eval", config);

  CurvePoint p = clean_point(net, ds, "clean", "none", c.threads);
  emit_csv({p}, dir / "eval.csv");
  out << "n " << p.n << " accuracy " << g6(p.accuracy) << " mi_bits "
      << g6(p.mi_bits) << " label_entropy_bits " << g6(label_entropy(ds.labels))
      << '\n';
  return kOk;
}

// --- curve ---------------------------------------------------------------

struct CurveArgs {
  std::string attack;
  std::string objective;
  std::vector<double> snr_grid = default_snr_grid();
  std::size_t subset = kDefaultSubsetSize;
  int steps = 40;
  double step_scale = 2.5;
  double stop_mean_margin = 0.0;
  std::vector<std::string> spatial_budgets = {"0:0",   "5:1",   "10:1",
                                              "15:2",  "20:2",  "30:3"};
  std::string model_tag;
  bool embed_joint = false;
  std::string standardize = "per-image";

  void to_json(json& j) const {
    j["attack"] = attack;
    if (!objective.empty()) j["objective"] = objective;
    j["snr-grid"] = snr_grid;
    j["subset"] = subset;
    j["steps"] = steps;
    j["step-scale"] = step_scale;
    j["stop-mean-margin"] = stop_mean_margin;
    j["spatial-budgets"] = spatial_budgets;
    if (!model_tag.empty()) j["model-tag"] = model_tag;
    j["embed-joint"] = embed_joint;
    j["standardize"] = standardize;
  }
};

void register_curve(CLI::App* sub, CurveArgs& a) {
  // Membership is checked by hand so bad names map to the config exit code
  // with a specific message.
  sub->add_option("--attack", a.attack, "awgn, bim-l2, bim-linf or spatial")
      ->required();
  sub->add_option("--objective", a.objective,
                  "miscls, one-tgt or all-tgt (BIM only; default miscls)");
  sub->add_option("--snr-grid", a.snr_grid, "Strictly decreasing SNR values in dB")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--subset", a.subset, "Seeded evaluation subset size (0 = all)")
      ->capture_default_str();
  sub->add_option("--steps", a.steps, "BIM iterations")->capture_default_str();
  sub->add_option("--step-scale", a.step_scale, "BIM step = scale * epsilon / steps")
      ->capture_default_str();
  sub->add_option("--stop-mean-margin", a.stop_mean_margin,
                  "Stop BIM once the mean adversarial margin reaches this (0 = off)")
      ->capture_default_str();
  sub->add_option("--spatial-budgets", a.spatial_budgets,
                  "Nested rotation:translation budgets, e.g. 0:0,5:1,10:2")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--model-tag", a.model_tag, "Output name tag (default: model file stem)");
  sub->add_flag("--embed-joint", a.embed_joint, "Add the joint counts to each CSV row");
  add_standardize(sub, a.standardize);
}

std::vector<SpatialBudget> parse_budgets(const std::vector<std::string>& items) {
  std::vector<SpatialBudget> out;
  for (const auto& item : items) {
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument(item);
      std::size_t used = 0;
      SpatialBudget b;
      const std::string rot = item.substr(0, colon), px = item.substr(colon + 1);
      b.max_rotation_deg = std::stod(rot, &used);
      if (used != rot.size()) throw std::invalid_argument(item);
      b.max_translation_px = std::stoi(px, &used);
      if (used != px.size()) throw std::invalid_argument(item);
      out.push_back(b);
    } catch (const std::logic_error&) {
      throw ConfigError("spatial budget '" + item + "' is not <degrees>:<pixels>");
    }
  }
  return out;
}

int cmd_curve(const Common& c, const CurveArgs& a, std::ostream& out,
              std::ostream& err) {
  AttackSpec spec;
  spec.kind = parse_attack(a.attack);
  const bool is_bim =
      spec.kind == AttackKind::kBimL2 || spec.kind == AttackKind::kBimLinf;
  if (!is_bim && !a.objective.empty() && a.objective != "none") {
    throw ConfigError("--objective applies only to bim-l2 and bim-linf, not " +
                      a.attack);
  }
  spec.objective = is_bim && !a.objective.empty() ? Objective::parse(a.objective)
                                                  : Objective::miscls();
  spec.steps = a.steps;
  spec.step_scale = a.step_scale;
  spec.stop_mean_margin = a.stop_mean_margin;
  spec.seed = c.seed;
  if (is_bim) {
    BimConfig probe;
    probe.steps = a.steps;
    probe.step_scale = a.step_scale;
    probe.stop_mean_margin = a.stop_mean_margin;
    probe.validate();
  }
  std::vector<SpatialBudget> budgets;
  if (spec.kind == AttackKind::kSpatial) budgets = parse_budgets(a.spatial_budgets);

  const fs::path dir = prepare_out(c);
  const std::string model_path = require(c.model, "--model");
  Network net = load_network(model_path, out);
  Dataset ds = take_subset(load_dataset(c, a.standardize, out), a.subset, c.seed, err);
  const std::string tag =
      a.model_tag.empty() ? fs::path(model_path).stem().string() : a.model_tag;
  const std::string stem = output_stem(spec, tag);
  print_path(out, "csv", dir / (stem + ".csv"));
  print_path(out, "svg", dir / (stem + ".svg"));

  json config;
  c.to_json(config);
  a.to_json(config);
  write_provenance(dir, "curve", config);

  Sweep sweep = spec.kind == AttackKind::kSpatial
                    ? sweep_spatial(net, ds, budgets, c.threads)
                    : sweep_snr(net, ds, spec, a.snr_grid, c.threads);
  emit_csv(sweep.points, dir / (stem + ".csv"), a.embed_joint);
  if (!sweep.points.empty()) {
    SvgOptions opt;
    opt.title = stem;
    if (spec.kind == AttackKind::kSpatial) {
      opt.x_label = "max rotation (deg)";
      opt.descending_x = false;
    }
    render_svg({{stem, sweep.points}}, dir / (stem + ".svg"), opt);
  }
  for (const auto& p : sweep.points) {
    out << p.attack << ' ' << p.objective << " strength " << g6(p.strength)
        << " mi_bits " << g6(p.mi_bits) << " accuracy " << g6(p.accuracy)
        << " n " << p.n << '\n';
  }
  if (!sweep.complete()) {
    err << "error: sweep stopped " << *sweep.error
        << "; partial results were written\n";
    std::rethrow_exception(sweep.failure);
  }
  return kOk;
}

// --- fool ----------------------------------------------------------------

struct FoolArgs {
  double sigma = 0.1;
  int max_iters = 2000;
  double step_size = 0.1;
  double stop_margin = kFullConfidenceMargin;
  std::string eval_model;
  std::size_t columns = 5;

  void to_json(json& j) const {
    j["sigma"] = sigma;
    j["max-iters"] = max_iters;
    j["step-size"] = step_size;
    j["stop-margin"] = stop_margin;
    if (!eval_model.empty()) j["eval-model"] = eval_model;
    j["columns"] = columns;
  }
};

void register_fool(CLI::App* sub, FoolArgs& a) {
  sub->add_option("--sigma", a.sigma, "Std of the initial noise (0.1 or 0.01 typical)")
      ->capture_default_str();
  sub->add_option("--max-iters", a.max_iters)->capture_default_str();
  sub->add_option("--step-size", a.step_size, "L2 length of each step")
      ->capture_default_str();
  sub->add_option("--stop-margin", a.stop_margin, "Margin counted as full confidence")
      ->capture_default_str();
  sub->add_option("--eval-model", a.eval_model,
                  "Second model whose predictions and margins are reported");
  sub->add_option("--columns", a.columns, "Images per row in the grid")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

int cmd_fool(const Common& c, const FoolArgs& a, std::ostream& out,
             std::ostream& err) {
  const fs::path dir = prepare_out(c);
  Network net = load_network(require(c.model, "--model"), out);
  std::optional<Network> other;
  if (!a.eval_model.empty()) other = load_network(a.eval_model, out, "eval model");
  print_path(out, "out", dir);
  json config;
  c.to_json(config);
  a.to_json(config);
  write_provenance(dir, "fool", config);

  FoolingConfig cfg;
  cfg.sigma = a.sigma;
  cfg.max_iters = a.max_iters;
  cfg.step_size = a.step_size;
  cfg.stop_margin = a.stop_margin;
  cfg.seed = c.seed;
  FoolingResult r = fooling_images(net, cfg, c.threads);

  std::optional<Prediction> cross;
  if (other) cross = predict(*other, r.images, c.threads);
  std::string report = "target,iterations,margin,pred,converged,initial_snr";
  if (cross) report += ",eval_pred,eval_margin";
  report += '\n';
  const std::size_t side = kImageSide;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < r.targets.size(); ++i) {
    const fs::path img = dir / ("fool-" + std::to_string(r.targets[i]) + ".pgm");
    write_pgm(img, r.images.item(i), side, side);
    report += std::to_string(r.targets[i]) + ',' + std::to_string(r.iterations[i]) +
              ',' + g6(r.margins[i]) + ',' + std::to_string(r.preds[i]) + ',' +
              (r.converged[i] ? "1" : "0") + ',' + g6(r.initial_snr[i]);
    if (cross) {
      auto row = cross->probabilities.item(i);
      report += ',' + std::to_string(cross->labels[i]) + ',' + g6(margin(row));
    }
    report += '\n';
    if (!r.converged[i]) {
      ++failed;
      err << "warning: target " << r.targets[i] << " stopped after "
          << r.iterations[i] << " iterations at margin " << g6(r.margins[i])
          << '\n';
    }
  }
  write_text(dir / "fool-report.csv", report);
  write_pgm_grid(dir / "fool-grid.pgm", r.images, a.columns);
  out << "wrote " << r.targets.size() << " fooling images";
  if (failed) out << " (" << failed << " did not reach margin " << g6(a.stop_margin) << ")";
  out << '\n';
  return kOk;
}

// --- convert-check / synth -------------------------------------------------

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

int cmd_convert_check(const Common& c, std::ostream& out) {
  const fs::path data = resolve_data(require(c.data, "--data"));
  print_path(out, "data", data);
  RawDataset raw = load_container(data);
  Dataset ds = prepare_dataset(raw);
  const fs::path dir = prepare_out(c);
  json config;
  c.to_json(config);
  write_provenance(dir, "convert-check", config);

  std::vector<std::size_t> hist(kClassCount, 0);
  for (int y : raw.labels) ++hist[static_cast<std::size_t>(y)];
  char checksum[20];
  std::snprintf(checksum, sizeof checksum, "%016llx",
                static_cast<unsigned long long>(fnv1a(raw.pixels)));
  out << "n " << raw.count << " channels " << raw.channels << " pixel_fnv1a "
      << checksum << " label_entropy_bits " << g6(label_entropy(ds.labels)) << '\n';
  out << "labels";
  for (std::size_t k = 0; k < hist.size(); ++k) out << ' ' << k << ':' << hist[k];
  out << '\n';
  return kOk;
}

struct SynthArgs {
  std::string output;
  std::size_t count = 1000;
  std::size_t channels = 3;

  void to_json(json& j) const {
    j["output"] = output;
    j["count"] = count;
    j["channels"] = channels;
  }
};

void register_synth(CLI::App* sub, SynthArgs& a) {
  sub->add_option("--output", a.output, "Container to write")->required();
  sub->add_option("--count", a.count, "Number of images")->capture_default_str();
  sub->add_option("--channels", a.channels, "1 or 3")
      ->check(CLI::IsMember({1, 3}))
      ->capture_default_str();
}

int cmd_synth(const Common& c, const SynthArgs& a, std::ostream& out) {
  if (a.count == 0) throw ConfigError("--count must be >= 1");
  const fs::path dir = prepare_out(c);
  print_path(out, "output", a.output);
  json config;
  c.to_json(config);
  a.to_json(config);
  write_provenance(dir, "synth", config);
  save_container(synthetic_digits(a.count, c.seed, a.channels), a.output);
  out << "wrote " << a.count << " synthetic digits\n";
  return kOk;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Fault tolerance curves for a small CNN: train, evaluate, sweep attacks"};
  app.name("ftol");
  app.set_version_flag("--version", FTOL_VERSION);
  app.require_subcommand(1);

  Common common;
  TrainArgs train_args;
  EvalArgs eval_args;
  CurveArgs curve_args;
  FoolArgs fool_args;
  SynthArgs synth_args;

  auto* train = app.add_subcommand("train", "Train the CNN and write a .ftm model");
  auto* eval = app.add_subcommand("eval", "Clean accuracy and I(T;Y) of a model");
  auto* curve = app.add_subcommand("curve", "Sweep an attack and emit CSV and SVG curves");
  auto* fool = app.add_subcommand("fool", "Synthesise fooling images from noise");
  auto* check = app.add_subcommand("convert-check", "Validate a .ftc container");
  auto* synth = app.add_subcommand("synth", "Write a synthetic-digit .ftc container");
  for (auto* sub : {train, eval, curve, fool, check, synth}) add_common(sub, common);
  register_train(train, train_args);
  register_eval(eval, eval_args);
  register_curve(curve, curve_args);
  register_fool(fool, fool_args);
  register_synth(synth, synth_args);

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  if (storage.empty()) storage.push_back("ftol");
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  if (train->parsed()) return cmd_train(common, train_args, out);
  if (eval->parsed()) return cmd_eval(common, eval_args, out, err);
  if (curve->parsed()) return cmd_curve(common, curve_args, out, err);
  if (fool->parsed()) return cmd_fool(common, fool_args, out, err);
  if (check->parsed()) return cmd_convert_check(common, out);
  return cmd_synth(common, synth_args, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  try {
    return dispatch(expand_config(args), out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const LabelRangeError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kDataError;
  } catch (const ShapeError& e) {
    // Reached when a model and a dataset disagree on extents.
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace ftol::cli
