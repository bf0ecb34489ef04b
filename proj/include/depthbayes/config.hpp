#ifndef DEPTHBAYES_CONFIG_HPP
#define DEPTHBAYES_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "depthbayes/model.hpp"
#include "depthbayes/peft.hpp"
#include "depthbayes/posterior.hpp"
#include "depthbayes/train.hpp"

namespace depthbayes {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Inference { ckpt_ens, swag_d, swag_lr, deep_ens, deterministic };

inline std::string to_string(Inference i) {
  switch (i) {
    case Inference::ckpt_ens: return "ckpt-ens";
    case Inference::swag_d: return "swag-d";
    case Inference::swag_lr: return "swag-lr";
    case Inference::deep_ens: return "deep-ens";
    case Inference::deterministic: return "deterministic";
  }
  return "?";
}

inline std::optional<Inference> parse_inference(std::string_view s) {
  for (Inference i : {Inference::ckpt_ens, Inference::swag_d, Inference::swag_lr,
                      Inference::deep_ens, Inference::deterministic})
    if (s == to_string(i)) return i;
  return std::nullopt;
}

struct DataConfig {
  std::string dir = "data";
  std::uint64_t seed = 0;
  std::size_t n_train = 32;
  std::size_t n_test = 16;

  bool operator==(const DataConfig&) const = default;
};

// Full-parameter fit producing the base model that fine-tuning starts from;
// zero epochs keeps the fresh initialization.
struct WarmStartConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  double lr = 1e-3;

  bool operator==(const WarmStartConfig&) const = default;
};

struct ExperimentConfig {
  ModelConfig model;
  DataConfig data;
  WarmStartConfig warmstart;
  Method method = Method::lora;
  std::optional<long> rank = 4;
  Inference inference = Inference::ckpt_ens;
  TrainSchedule schedule;
  std::size_t samples = 100;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double jitter = default_jitter;
  std::string out_dir = "runs";

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const {
    try {
      model.validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    if (takes_rank(method) && !rank) throw ConfigError("method " + to_string(method) + " requires a rank");
    if (!takes_rank(method) && rank) throw ConfigError("method " + to_string(method) + " does not take a rank");
    if (rank && *rank < 1) throw ConfigError("rank must be >= 1");
    if (data.n_train < 1 || data.n_test < 1) throw ConfigError("data counts must be >= 1");
    if (model.height < 8 || model.width < 8) throw ConfigError("image extents must be >= 8");
    if (schedule.epochs < 1 || schedule.batch_size < 1 || schedule.checkpoints < 1) {
      throw ConfigError("schedule epochs, batch_size and checkpoints must be >= 1");
    }
    if (total_steps(data.n_train, schedule) < schedule.checkpoints) {
      throw ConfigError("schedule yields " + std::to_string(total_steps(data.n_train, schedule)) +
                        " steps, fewer than " + std::to_string(schedule.checkpoints) + " checkpoints");
    }
    if (warmstart.batch_size < 1) throw ConfigError("warmstart batch_size must be >= 1");
    if (inference == Inference::ckpt_ens && samples > schedule.checkpoints) {
      throw ConfigError("ckpt-ens draws " + std::to_string(samples) + " samples from only " +
                        std::to_string(schedule.checkpoints) + " checkpoints");
    }
    if (!(schedule.lr >= 0.0) || !(warmstart.lr >= 0.0)) throw ConfigError("learning rates must be >= 0");
    if (samples < 1) throw ConfigError("samples must be >= 1");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
      throw ConfigError("seeds must be distinct");
    }
    if (inference == Inference::deep_ens && seeds.size() < 2) {
      throw ConfigError("deep-ens requires at least 2 seeds");
    }
    if ((inference == Inference::swag_d || inference == Inference::swag_lr) && schedule.checkpoints < 2) {
      throw ConfigError("SWAG needs at least 2 checkpoints");
    }
    if (!(jitter >= 0.0)) throw ConfigError("jitter must be >= 0");
    if (data.dir.empty() || out_dir.empty()) throw ConfigError("paths must be non-empty");
  }
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size(); ++i) os << (i ? ", " : "") << values[i];
  return os.str();
}

inline std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[model]\n"
     << "height = " << c.model.height << "\n"
     << "width = " << c.model.width << "\n"
     << "patch = " << c.model.patch << "\n"
     << "embed_dim = " << c.model.embed_dim << "\n"
     << "blocks = " << c.model.blocks << "\n"
     << "mlp_dim = " << c.model.mlp_dim << "\n"
     << "decoder_channels = " << join(c.model.decoder_channels) << "\n"
     << "seed = " << c.model.seed << "\n\n"
     << "[data]\n"
     << "dir = " << c.data.dir << "\n"
     << "seed = " << c.data.seed << "\n"
     << "n_train = " << c.data.n_train << "\n"
     << "n_test = " << c.data.n_test << "\n\n"
     << "[warmstart]\n"
     << "epochs = " << c.warmstart.epochs << "\n"
     << "batch_size = " << c.warmstart.batch_size << "\n"
     << "lr = " << format_double(c.warmstart.lr) << "\n\n"
     << "[experiment]\n"
     << "method = " << to_string(c.method) << "\n";
  if (c.rank) os << "rank = " << *c.rank << "\n";
  os << "inference = " << to_string(c.inference) << "\n"
     << "samples = " << c.samples << "\n"
     << "seeds = " << join(c.seeds) << "\n"
     << "jitter = " << format_double(c.jitter) << "\n"
     << "out_dir = " << c.out_dir << "\n\n"
     << "[schedule]\n"
     << "epochs = " << c.schedule.epochs << "\n"
     << "batch_size = " << c.schedule.batch_size << "\n"
     << "checkpoints = " << c.schedule.checkpoints << "\n"
     << "lr = " << format_double(c.schedule.lr) << "\n";
  return os.str();
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view text, const std::string& where) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end || text.empty()) {
    throw ConfigError(where + ": cannot parse '" + std::string(text) + "' as a number");
  }
  return v;
}

template <typename T>
std::vector<T> parse_list(std::string_view text, const std::string& where) {
  std::vector<T> out;
  while (true) {
    const auto comma = text.find(',');
    out.push_back(parse_number<T>(trim(text.substr(0, comma)), where));
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return out;
}

}  // namespace detail

// `key = value` lines under `[section]` headers; '#' starts a comment line.
// Unknown sections or keys are errors. Keys not given keep their defaults.
inline ExperimentConfig parse_config(const std::string& text) {
  using detail::parse_list;
  using detail::parse_number;
  ExperimentConfig c;
  c.rank.reset();
  bool rank_given = false;
  std::string section;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  for (std::size_t lineno = 1; std::getline(in, raw); ++lineno) {
    const std::string_view line = detail::trim(raw);
    const std::string where = "line " + std::to_string(lineno);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (section != "model" && section != "data" && section != "warmstart" &&
          section != "experiment" && section != "schedule") {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside any section");
    const std::string qualified = section + "." + key;
    if (!seen.insert(qualified).second) throw ConfigError(where + ": duplicate key " + qualified);
    const std::string ctx = where + " (" + qualified + ")";

    if (section == "model") {
      if (key == "height") c.model.height = parse_number<std::size_t>(value, ctx);
      else if (key == "width") c.model.width = parse_number<std::size_t>(value, ctx);
      else if (key == "patch") c.model.patch = parse_number<std::size_t>(value, ctx);
      else if (key == "embed_dim") c.model.embed_dim = parse_number<std::size_t>(value, ctx);
      else if (key == "blocks") c.model.blocks = parse_number<std::size_t>(value, ctx);
      else if (key == "mlp_dim") c.model.mlp_dim = parse_number<std::size_t>(value, ctx);
      else if (key == "decoder_channels") c.model.decoder_channels = parse_list<std::size_t>(value, ctx);
      else if (key == "seed") c.model.seed = parse_number<std::uint64_t>(value, ctx);
      else throw ConfigError(where + ": unknown key " + qualified);
    } else if (section == "data") {
      if (key == "dir") c.data.dir = std::string(value);
      else if (key == "seed") c.data.seed = parse_number<std::uint64_t>(value, ctx);
      else if (key == "n_train") c.data.n_train = parse_number<std::size_t>(value, ctx);
      else if (key == "n_test") c.data.n_test = parse_number<std::size_t>(value, ctx);
      else throw ConfigError(where + ": unknown key " + qualified);
    } else if (section == "warmstart") {
      if (key == "epochs") c.warmstart.epochs = parse_number<std::size_t>(value, ctx);
      else if (key == "batch_size") c.warmstart.batch_size = parse_number<std::size_t>(value, ctx);
      else if (key == "lr") c.warmstart.lr = parse_number<double>(value, ctx);
      else throw ConfigError(where + ": unknown key " + qualified);
    } else if (section == "experiment") {
      if (key == "method") {
        const auto m = parse_method(value);
        if (!m) throw ConfigError(ctx + ": unknown method '" + std::string(value) + "'");
        c.method = *m;
      } else if (key == "rank") {
        c.rank = parse_number<long>(value, ctx);
        rank_given = true;
      } else if (key == "inference") {
        const auto i = parse_inference(value);
        if (!i) throw ConfigError(ctx + ": unknown inference '" + std::string(value) + "'");
        c.inference = *i;
      } else if (key == "samples") c.samples = parse_number<std::size_t>(value, ctx);
      else if (key == "seeds") c.seeds = parse_list<std::uint64_t>(value, ctx);
      else if (key == "jitter") c.jitter = parse_number<double>(value, ctx);
      else if (key == "out_dir") c.out_dir = std::string(value);
      else throw ConfigError(where + ": unknown key " + qualified);
    } else if (section == "schedule") {
      if (key == "epochs") c.schedule.epochs = parse_number<std::size_t>(value, ctx);
      else if (key == "batch_size") c.schedule.batch_size = parse_number<std::size_t>(value, ctx);
      else if (key == "checkpoints") c.schedule.checkpoints = parse_number<std::size_t>(value, ctx);
      else if (key == "lr") c.schedule.lr = parse_number<double>(value, ctx);
      else throw ConfigError(where + ": unknown key " + qualified);
    }
  }
  if (!rank_given) c.rank.reset();
  return c;
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_CONFIG_HPP
