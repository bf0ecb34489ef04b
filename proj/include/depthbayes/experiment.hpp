#ifndef DEPTHBAYES_EXPERIMENT_HPP
#define DEPTHBAYES_EXPERIMENT_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthbayes/config.hpp"
#include "depthbayes/data.hpp"
#include "depthbayes/eval.hpp"
#include "depthbayes/model.hpp"
#include "depthbayes/parallel.hpp"
#include "depthbayes/peft.hpp"
#include "depthbayes/posterior.hpp"
#include "depthbayes/train.hpp"

namespace depthbayes {

namespace fs = std::filesystem;

// Training or inference produced non-finite or degenerate values.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline ExperimentConfig load_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  std::string text;
  try {
    text = read_file(path);
  } catch (const MissingArtifact& e) {
    throw ConfigError(e.what());
  }
  try {
    ExperimentConfig cfg = parse_config(text);
    cfg.validate();
    return cfg;
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Layout
//
//   <out>/base/{<parameter>.tnsr, manifest.txt}
//   <out>/<run>/seed_<k>/checkpoints/{ckpt_#####.tnsr, manifest.txt, losses.csv}
//   <out>/<run>/seed_<k>/<inference>/{nll.csv, retention.csv, posterior/}
//   <out>/<run>/deep-ens/{nll.csv, retention.csv}
//   <out>/report/...

inline std::string run_name(Method method, std::optional<long> rank) {
  std::string name = to_string(method);
  if (rank) name += "_r" + std::to_string(*rank);
  return name;
}

inline fs::path base_dir(const ExperimentConfig& c) { return fs::path(c.out_dir) / "base"; }
inline fs::path run_dir(const ExperimentConfig& c) {
  return fs::path(c.out_dir) / run_name(c.method, c.rank);
}
inline fs::path seed_dir(const ExperimentConfig& c, std::uint64_t seed) {
  return run_dir(c) / ("seed_" + std::to_string(seed));
}
inline fs::path checkpoint_dir(const ExperimentConfig& c, std::uint64_t seed) {
  return seed_dir(c, seed) / "checkpoints";
}
inline fs::path evaluation_dir(const ExperimentConfig& c, std::uint64_t seed) {
  if (c.inference == Inference::deep_ens) return run_dir(c) / "deep-ens";
  return seed_dir(c, seed) / to_string(c.inference);
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("cannot create directory " + dir.string() + ": " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// Data and base model

inline DatasetSplit generate_dataset(const ExperimentConfig& c) {
  return make_split(c.data.seed, c.data.n_train, c.data.n_test, c.model.height, c.model.width);
}

inline DatasetSplit load_dataset(const ExperimentConfig& c) {
  DatasetSplit split = read_dataset(c.data.dir);
  if (split.height != c.model.height || split.width != c.model.width) {
    throw ConfigError("dataset in " + c.data.dir + " has extents " + std::to_string(split.height) +
                      "x" + std::to_string(split.width) + ", model expects " +
                      std::to_string(c.model.height) + "x" + std::to_string(c.model.width));
  }
  if (split.train.size() != c.data.n_train || split.test.size() != c.data.n_test) {
    throw ConfigError("dataset in " + c.data.dir + " does not match the configured counts");
  }
  return split;
}

// Everything the base model depends on, recorded next to it.
inline std::string base_fingerprint(const ExperimentConfig& c) {
  ExperimentConfig key;
  key.model = c.model;
  key.data = c.data;
  key.warmstart = c.warmstart;
  std::string text = emit_config(key);
  return text.substr(0, text.find("[experiment]"));
}

inline void check_finite_loss(double loss, const std::string& what) {
  if (!std::isfinite(loss)) throw NumericalFailure(what + ": non-finite training loss");
}

// Fresh initialization followed by a full-parameter fit on the train split.
inline ToyDepthNet warm_start(const ExperimentConfig& c, const DatasetSplit& split) {
  ToyDepthNet model = build_model(c.model);
  if (c.warmstart.epochs == 0) return model;
  TrainSchedule sched{c.warmstart.epochs, c.warmstart.batch_size, 1, c.warmstart.lr, c.model.seed};
  std::vector<double> losses;
  try {
    finetune(model, attach_full(model), split.train, sched, &losses);
  } catch (const DomainError& e) {
    throw NumericalFailure(std::string("warm start: ") + e.what());
  }
  for (double l : losses) check_finite_loss(l, "warm start");
  return model;
}

// One TNSR file per named parameter plus a manifest of `name file shape`
// lines, preceded by `header`.
inline void save_model(const fs::path& dir, const ToyDepthNet& model, const std::string& header = {}) {
  ensure_directory(dir);
  std::ostringstream manifest;
  manifest << header;
  for_each_parameter(model, [&](const std::string& name, const Tensor& t, ParamKind) {
    const std::string file = name + ".tnsr";
    save_tensor(dir / file, t);
    manifest << "parameter " << name << ' ' << file << ' ' << to_string(t.shape()) << "\n";
  });
  write_file(dir / "manifest.txt", manifest.str());
}

// Fills the parameters of `model` from `dir`; names and shapes must match.
inline void load_model(const fs::path& dir, ToyDepthNet& model, const std::string& header = {}) {
  if (!fs::exists(dir / "manifest.txt")) throw MissingArtifact("model manifest not found in " + dir.string());
  const std::string manifest = read_file(dir / "manifest.txt");
  if (manifest.compare(0, header.size(), header) != 0) {
    throw MissingArtifact("model in " + dir.string() + " was saved for a different configuration");
  }
  std::size_t listed = 0;
  for (std::size_t pos = manifest.find("parameter "); pos != std::string::npos;
       pos = manifest.find("\nparameter ", pos + 1)) {
    ++listed;
  }
  std::size_t expected = 0;
  for_each_parameter(model, [&](const std::string& name, Tensor& t, ParamKind) {
    ++expected;
    const fs::path file = dir / (name + ".tnsr");
    if (!fs::exists(file)) throw MissingArtifact("missing parameter file " + file.string());
    Tensor loaded = load_tensor(file);
    if (loaded.shape() != t.shape()) {
      throw MissingArtifact("parameter " + name + " has shape " + to_string(loaded.shape()) + ", expected " +
                            to_string(t.shape()));
    }
    t = std::move(loaded);
  });
  if (listed != expected) {
    throw MissingArtifact("model in " + dir.string() + " lists " + std::to_string(listed) + " parameters, expected " +
                          std::to_string(expected));
  }
}

inline void save_base(const ExperimentConfig& c, const ToyDepthNet& model) {
  save_model(base_dir(c), model, base_fingerprint(c));
}

inline ToyDepthNet load_base(const ExperimentConfig& c) {
  const fs::path dir = base_dir(c);
  if (!fs::exists(dir / "manifest.txt")) {
    throw MissingArtifact("base model not found in " + dir.string() + " (run finetune with --init)");
  }
  ToyDepthNet model = build_model(c.model);
  load_model(dir, model, base_fingerprint(c));
  return model;
}

// Base model with the configured subspace attached for replicate `seed`.
struct AttachedModel {
  ToyDepthNet model;
  SubspaceDescriptor desc;
  Tensor initial;  // warm-start θ
};

inline AttachedModel attach_to_base(const ExperimentConfig& c, const ToyDepthNet& base, std::uint64_t seed) {
  AttachedModel out{base, {}, {}};
  out.desc = attach(out.model, c.method, c.rank, seed);
  out.initial = flatten(out.model, out.desc);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline std::string checkpoint_file(std::size_t i) { return "ckpt_" + scene_file_stem(i) + ".tnsr"; }

inline std::string checkpoint_header(const ExperimentConfig& c, std::uint64_t seed, std::size_t dim) {
  std::ostringstream os;
  os << "method " << to_string(c.method) << "\nrank " << (c.rank ? *c.rank : 0) << "\nseed " << seed
     << "\ndim " << dim << "\ncount " << c.schedule.checkpoints << "\n";
  return os.str();
}

inline void save_checkpoints(const ExperimentConfig& c, std::uint64_t seed, std::size_t dim,
                             const std::vector<Checkpoint>& ckpts, const std::vector<double>& losses) {
  const fs::path dir = checkpoint_dir(c, seed);
  std::error_code ec;
  fs::remove_all(dir, ec);
  ensure_directory(dir);
  std::ostringstream manifest;
  manifest << checkpoint_header(c, seed, dim);
  for (std::size_t i = 0; i < ckpts.size(); ++i) {
    save_tensor(dir / checkpoint_file(i), ckpts[i].theta);
    manifest << "checkpoint " << checkpoint_file(i) << ' ' << ckpts[i].step << ' '
             << format_double(ckpts[i].loss) << "\n";
  }
  write_file(dir / "manifest.txt", manifest.str());
  std::ostringstream csv;
  csv << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) csv << i + 1 << ',' << format_double(losses[i]) << "\n";
  write_file(dir / "losses.csv", csv.str());
}

inline std::vector<Tensor> load_checkpoints(const ExperimentConfig& c, std::uint64_t seed, std::size_t dim) {
  const fs::path dir = checkpoint_dir(c, seed);
  if (!fs::exists(dir / "manifest.txt")) {
    throw MissingArtifact("no checkpoints for " + run_name(c.method, c.rank) + " seed " +
                          std::to_string(seed) + " in " + dir.string());
  }
  const std::string manifest = read_file(dir / "manifest.txt");
  const std::string header = checkpoint_header(c, seed, dim);
  if (manifest.compare(0, header.size(), header) != 0) {
    throw MissingArtifact("checkpoints in " + dir.string() + " were written for a different configuration");
  }
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < c.schedule.checkpoints; ++i) {
    const fs::path file = dir / checkpoint_file(i);
    if (!fs::exists(file)) throw MissingArtifact("missing checkpoint " + file.string());
    Tensor t = load_tensor(file);
    if (t.rank() != 1 || t.size() != dim) throw MissingArtifact("checkpoint " + file.string() + " has the wrong length");
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Posterior samples and evaluation

// <dir>/{mean.tnsr, variance.tnsr[, deviations.tnsr], manifest.txt}
inline void save_posterior(const fs::path& dir, const DiagGaussian& q) {
  ensure_directory(dir);
  save_tensor(dir / "mean.tnsr", q.mean);
  save_tensor(dir / "variance.tnsr", q.variance);
  write_file(dir / "manifest.txt", "kind swag-diag\ndim " + std::to_string(q.mean.size()) + "\n");
}

inline void save_posterior(const fs::path& dir, const LowRankPlusDiagGaussian& q) {
  ensure_directory(dir);
  save_tensor(dir / "mean.tnsr", q.mean);
  save_tensor(dir / "variance.tnsr", q.variance);
  save_tensor(dir / "deviations.tnsr", q.deviations);
  write_file(dir / "manifest.txt", "kind swag-lowrank\ndim " + std::to_string(q.mean.size()) + "\nmembers " +
                                       std::to_string(q.members()) + "\njitter " + format_double(q.jitter) + "\n");
}

inline Posterior load_posterior(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.txt")) throw MissingArtifact("posterior manifest not found in " + dir.string());
  std::istringstream in(read_file(dir / "manifest.txt"));
  std::string key, value, kind;
  double jitter = 0.0;
  while (in >> key >> value) {
    if (key == "kind") kind = value;
    else if (key == "jitter") jitter = std::stod(value);
  }
  Tensor mean = load_tensor(dir / "mean.tnsr");
  Tensor variance = load_tensor(dir / "variance.tnsr");
  if (kind == "swag-diag") return DiagGaussian{std::move(mean), std::move(variance)};
  if (kind == "swag-lowrank") {
    return LowRankPlusDiagGaussian{std::move(mean), std::move(variance), load_tensor(dir / "deviations.tnsr"), jitter};
  }
  throw MissingArtifact("unknown posterior kind '" + kind + "' in " + dir.string());
}

inline std::uint64_t sampling_seed(std::uint64_t replicate) { return mix64(replicate ^ 0x73616d706c65ull); }

// Fitted Gaussian posteriors are also written to `posterior_dir` when given.
inline SampleSet build_samples(const ExperimentConfig& c, const AttachedModel& am, std::uint64_t seed,
                               const std::optional<fs::path>& posterior_dir = std::nullopt) {
  SampleSet samples;
  try {
    switch (c.inference) {
      case Inference::deterministic:
        samples = SampleSet{{am.initial}, Provenance::checkpoint_ensemble};
        break;
      case Inference::ckpt_ens:
        samples = checkpoint_ensemble(load_checkpoints(c, seed, am.desc.dim), c.samples);
        break;
      case Inference::swag_d: {
        const DiagGaussian q = fit_swag_diag(load_checkpoints(c, seed, am.desc.dim));
        if (posterior_dir) save_posterior(*posterior_dir, q);
        samples = sample(q, c.samples, sampling_seed(seed));
        break;
      }
      case Inference::swag_lr: {
        const LowRankPlusDiagGaussian q = fit_swag_lowrank(load_checkpoints(c, seed, am.desc.dim), c.jitter);
        if (posterior_dir) save_posterior(*posterior_dir, q);
        samples = sample(q, c.samples, sampling_seed(seed));
        break;
      }
      case Inference::deep_ens: {
        std::vector<Tensor> finals;
        for (auto s : c.seeds) finals.push_back(load_checkpoints(c, s, am.desc.dim).back());
        samples = deep_ensemble(finals);
        break;
      }
    }
  } catch (const DomainError& e) {
    throw NumericalFailure(std::string("posterior: ") + e.what());
  }
  if (!all_finite(samples)) {
    throw NumericalFailure(to_string(c.inference) + " produced non-finite parameter samples");
  }
  return samples;
}

struct ImageResult {
  double nll = 0.0;
  Tensor stddev;
  Tensor losses;
};

inline std::vector<ImageResult> evaluate_samples(const AttachedModel& am, const SampleSet& samples,
                                                 std::span<const Scene> test) {
  std::vector<ImageResult> out(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    ToyDepthNet model = am.model;
    PredictiveSummary summary;
    try {
      summary = posterior_predict(model, am.desc, samples, test[i].image);
    } catch (const DomainError& e) {
      throw NumericalFailure("test image " + std::to_string(i) + ": " + e.what());
    }
    out[i].nll = predictive_nll(summary, test[i].disparity);
    if (!std::isfinite(out[i].nll)) throw NumericalFailure("test image " + std::to_string(i) + ": non-finite NLL");
    out[i].stddev = summary.stddev;
    out[i].losses = pixel_losses(summary, test[i].disparity);
  });
  return out;
}

struct EvalTables {
  std::string nll = "method,inference,rank,seed,image_id,nll\n";
  std::string retention = "method,inference,rank,seed,quantile,loss\n";
};

inline void append_rows(EvalTables& tables, const ExperimentConfig& c, Inference inference,
                        const std::string& seed_label, const std::vector<ImageResult>& results) {
  const std::string prefix = to_string(c.method) + "," + to_string(inference) + "," +
                             std::to_string(c.rank ? *c.rank : 0) + "," + seed_label + ",";
  std::vector<Tensor> stds, losses;
  for (std::size_t i = 0; i < results.size(); ++i) {
    tables.nll += prefix + std::to_string(i) + "," + format_double(results[i].nll) + "\n";
    stds.push_back(results[i].stddev);
    losses.push_back(results[i].losses);
  }
  const std::vector<double> grid = default_retention_grid();
  const RetentionCurve curve = retention_curve(stds, losses, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    tables.retention += prefix + format_double(curve.quantiles[k]) + "," + format_double(curve.values[k]) + "\n";
  }
}

// ---------------------------------------------------------------------------
// Commands

struct CommandOptions {
  std::optional<std::uint64_t> seed;
  bool init = false;
};

inline std::vector<std::uint64_t> selected_seeds(const ExperimentConfig& c, const CommandOptions& opt) {
  if (!opt.seed) return c.seeds;
  if (std::find(c.seeds.begin(), c.seeds.end(), *opt.seed) == c.seeds.end()) {
    throw ConfigError("seed " + std::to_string(*opt.seed) + " is not among the configured seeds");
  }
  return {*opt.seed};
}

inline void cmd_generate(const ExperimentConfig& c) {
  ensure_directory(c.data.dir);
  write_dataset(c.data.dir, generate_dataset(c));
}

inline void cmd_finetune(const ExperimentConfig& c, const CommandOptions& opt = {}) {
  const std::vector<std::uint64_t> seeds = selected_seeds(c, opt);
  const DatasetSplit split = load_dataset(c);
  if (opt.init) save_base(c, warm_start(c, split));
  const ToyDepthNet base = load_base(c);
  for (auto seed : seeds) {
    AttachedModel am = attach_to_base(c, base, seed);
    TrainSchedule sched = c.schedule;
    sched.seed = seed;
    std::vector<double> losses;
    std::vector<Checkpoint> ckpts;
    try {
      ckpts = finetune(am.model, am.desc, split.train, sched, &losses);
    } catch (const DomainError& e) {
      throw NumericalFailure(run_name(c.method, c.rank) + " seed " + std::to_string(seed) + ": " + e.what());
    }
    for (double l : losses) check_finite_loss(l, run_name(c.method, c.rank) + " seed " + std::to_string(seed));
    save_checkpoints(c, seed, am.desc.dim, ckpts, losses);
  }
}

inline void cmd_evaluate(const ExperimentConfig& c, const CommandOptions& opt = {}) {
  if (c.inference == Inference::deep_ens && opt.seed) {
    throw ConfigError("deep-ens pools all configured seeds; --seed does not apply");
  }
  const DatasetSplit split = load_dataset(c);
  const ToyDepthNet base = load_base(c);
  const std::vector<std::uint64_t> seeds = selected_seeds(c, opt);

  auto deterministic_rows = [&](EvalTables& t, std::uint64_t seed) {
    const AttachedModel am = attach_to_base(c, base, seed);
    const SampleSet det{{am.initial}, Provenance::checkpoint_ensemble};
    append_rows(t, c, Inference::deterministic, std::to_string(seed), evaluate_samples(am, det, split.test));
  };
  auto write_tables = [&](const fs::path& dir, const EvalTables& t) {
    ensure_directory(dir);
    write_file(dir / "nll.csv", t.nll);
    write_file(dir / "retention.csv", t.retention);
  };

  if (c.inference == Inference::deep_ens) {
    const AttachedModel am = attach_to_base(c, base, c.seeds.front());
    EvalTables t;
    append_rows(t, c, c.inference, "all", evaluate_samples(am, build_samples(c, am, 0), split.test));
    for (auto seed : c.seeds) deterministic_rows(t, seed);
    write_tables(evaluation_dir(c, 0), t);
    return;
  }
  for (auto seed : seeds) {
    const AttachedModel am = attach_to_base(c, base, seed);
    EvalTables t;
    if (c.inference != Inference::deterministic) {
      const SampleSet samples = build_samples(c, am, seed, evaluation_dir(c, seed) / "posterior");
      append_rows(t, c, c.inference, std::to_string(seed), evaluate_samples(am, samples, split.test));
    }
    deterministic_rows(t, seed);
    write_tables(evaluation_dir(c, seed), t);
  }
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_EXPERIMENT_HPP
