#ifndef DEPTHBAYES_DATA_HPP
#define DEPTHBAYES_DATA_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthbayes/rng.hpp"
#include "depthbayes/tensor.hpp"

namespace depthbayes {

// A file or directory the pipeline needs does not exist or cannot be read.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// TNSR tensor files
//
//   "TNSR" | version 0x01 | dtype 0x02 (binary64) | rank (u8)
//   | rank x u64 LE extents | row-major f64 LE payload

class TensorFormatError : public std::runtime_error {
 public:
  enum class Kind { magic, version, dtype, truncated, dim_overflow, bad_extent, trailing_bytes };

  TensorFormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::array<char, 4> tnsr_magic{'T', 'N', 'S', 'R'};
inline constexpr std::uint8_t tnsr_version = 0x01;
inline constexpr std::uint8_t tnsr_dtype_f64 = 0x02;

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_tensor(const Tensor& t) {
  if (t.rank() > 255) throw ShapeError("TNSR: rank " + std::to_string(t.rank()) + " exceeds 255");
  std::string out(tnsr_magic.begin(), tnsr_magic.end());
  out.push_back(static_cast<char>(tnsr_version));
  out.push_back(static_cast<char>(tnsr_dtype_f64));
  out.push_back(static_cast<char>(t.rank()));
  for (auto e : t.shape()) detail::put_u64_le(out, e);
  out.reserve(out.size() + 8 * t.size());
  for (double v : t.data()) detail::put_u64_le(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline Tensor decode_tensor(const std::string& bytes) {
  using Kind = TensorFormatError::Kind;
  if (bytes.size() < 4 || !std::equal(tnsr_magic.begin(), tnsr_magic.end(), bytes.begin())) {
    throw TensorFormatError(Kind::magic, "TNSR: magic mismatch");
  }
  if (bytes.size() < 7) throw TensorFormatError(Kind::truncated, "TNSR: truncated header");
  if (static_cast<std::uint8_t>(bytes[4]) != tnsr_version) {
    throw TensorFormatError(Kind::version, "TNSR: unsupported version " +
                                               std::to_string(static_cast<unsigned char>(bytes[4])));
  }
  if (static_cast<std::uint8_t>(bytes[5]) != tnsr_dtype_f64) {
    throw TensorFormatError(Kind::dtype, "TNSR: unsupported dtype " +
                                             std::to_string(static_cast<unsigned char>(bytes[5])));
  }
  const std::size_t rank = static_cast<unsigned char>(bytes[6]);
  std::size_t pos = 7;
  if (bytes.size() < pos + 8 * rank) throw TensorFormatError(Kind::truncated, "TNSR: truncated extents");
  Shape shape(rank);
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < rank; ++i, pos += 8) {
    const std::uint64_t e = detail::get_u64_le(bytes.data() + pos);
    if (e == 0) throw TensorFormatError(Kind::bad_extent, "TNSR: zero extent at dim " + std::to_string(i));
    if (count > std::numeric_limits<std::uint64_t>::max() / 8 / e ||
        e > std::numeric_limits<std::size_t>::max()) {
      throw TensorFormatError(Kind::dim_overflow, "TNSR: element count overflows");
    }
    count *= e;
    shape[i] = static_cast<std::size_t>(e);
  }
  const std::size_t payload = bytes.size() - pos;
  if (payload < 8 * count) {
    throw TensorFormatError(Kind::truncated, "TNSR: payload has " + std::to_string(payload) +
                                                 " bytes, expected " + std::to_string(8 * count));
  }
  if (payload > 8 * count) throw TensorFormatError(Kind::trailing_bytes, "TNSR: trailing bytes");
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i, pos += 8)
    data[i] = std::bit_cast<double>(detail::get_u64_le(bytes.data() + pos));
  return Tensor(std::move(shape), std::move(data));
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file(path, encode_tensor(t));
}

inline Tensor load_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

// ---------------------------------------------------------------------------
// Synthetic scenes

struct Scene {
  Tensor image;      // [3, h, w] in [0, 1]
  Tensor disparity;  // [1, h, w], inverse depth, depth in [1, 10]

  bool operator==(const Scene&) const = default;
};

inline constexpr double scene_min_depth = 1.0;
inline constexpr double scene_max_depth = 10.0;
inline constexpr double scene_noise_stddev = 0.02;

// Axis-aligned rectangles at random depths over a tilted background plane,
// painted far to near. Colors are shaded by depth.
inline Scene generate_scene(std::uint64_t seed, std::size_t h, std::size_t w) {
  if (h < 8 || w < 8) {
    throw DomainError("generate_scene: extents " + std::to_string(h) + "x" + std::to_string(w) +
                      " below 8x8");
  }
  Rng rng = make_rng(seed, 0x7363656e65ull);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double depth_top = between(6.0, 10.0);
  const double depth_bottom = between(1.5, 4.0);
  const double tilt = between(-0.5, 0.5);
  const std::array<double, 3> bg_color{between(0.3, 0.8), between(0.3, 0.8), between(0.3, 0.8)};
  auto shade = [](double depth) { return 1.2 / (1.0 + 0.15 * depth); };

  Tensor depth(Shape{h, w});
  Tensor color(Shape{3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double fy = static_cast<double>(y) / static_cast<double>(h - 1);
      const double fx = static_cast<double>(x) / static_cast<double>(w - 1);
      const double d = std::clamp(depth_top + (depth_bottom - depth_top) * fy + tilt * (fx - 0.5),
                                  scene_min_depth, scene_max_depth);
      depth[y * w + x] = d;
      for (std::size_t c = 0; c < 3; ++c) color[(c * h + y) * w + x] = bg_color[c] * shade(d);
    }
  }

  struct Rect {
    std::size_t y0, x0, y1, x1;
    double depth;
    std::array<double, 3> color;
  };
  const int count = std::uniform_int_distribution<int>(3, 6)(rng);
  std::vector<Rect> rects;
  for (int i = 0; i < count; ++i) {
    const auto rh = static_cast<std::size_t>(between(h / 8.0, h / 2.0));
    const auto rw = static_cast<std::size_t>(between(w / 8.0, w / 2.0));
    const auto y0 = static_cast<std::size_t>(between(0.0, static_cast<double>(h - rh)));
    const auto x0 = static_cast<std::size_t>(between(0.0, static_cast<double>(w - rw)));
    const double d = between(scene_min_depth, scene_max_depth);
    rects.push_back(Rect{y0, x0, y0 + rh, x0 + rw, d,
                         {between(0.1, 1.0), between(0.1, 1.0), between(0.1, 1.0)}});
  }
  std::stable_sort(rects.begin(), rects.end(),
                   [](const Rect& a, const Rect& b) { return a.depth > b.depth; });
  for (const auto& r : rects) {
    for (std::size_t y = r.y0; y < r.y1; ++y) {
      for (std::size_t x = r.x0; x < r.x1; ++x) {
        depth[y * w + x] = r.depth;
        for (std::size_t c = 0; c < 3; ++c)
          color[(c * h + y) * w + x] = std::min(1.0, r.color[c] * shade(r.depth));
      }
    }
  }

  Scene scene{Tensor(Shape{3, h, w}), Tensor(Shape{1, h, w})};
  std::normal_distribution<double> noise(0.0, scene_noise_stddev);
  for (std::size_t i = 0; i < 3 * h * w; ++i)
    scene.image[i] = std::clamp(color[i] + noise(rng), 0.0, 1.0);
  for (std::size_t i = 0; i < h * w; ++i) scene.disparity[i] = 1.0 / depth[i];
  return scene;
}

struct DatasetSplit {
  std::uint64_t seed = 0;
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<std::uint64_t> train_seeds;
  std::vector<std::uint64_t> test_seeds;
  std::vector<Scene> train;
  std::vector<Scene> test;

  bool operator==(const DatasetSplit&) const = default;
};

// Scene seed for position `index` of the concatenated train+test list; the
// map index -> seed is injective for a fixed split seed.
inline std::uint64_t scene_seed(std::uint64_t split_seed, std::uint64_t index) {
  return mix64(mix64(split_seed) ^ index);
}

inline DatasetSplit make_split(std::uint64_t seed, std::size_t n_train, std::size_t n_test,
                               std::size_t h = 32, std::size_t w = 32) {
  if (n_train < 1 || n_test < 1) throw DomainError("make_split: counts must be >= 1");
  DatasetSplit s;
  s.seed = seed;
  s.height = h;
  s.width = w;
  for (std::size_t i = 0; i < n_train + n_test; ++i) {
    const std::uint64_t ss = scene_seed(seed, i);
    if (i < n_train) {
      s.train_seeds.push_back(ss);
      s.train.push_back(generate_scene(ss, h, w));
    } else {
      s.test_seeds.push_back(ss);
      s.test.push_back(generate_scene(ss, h, w));
    }
  }
  return s;
}

inline std::string scene_file_stem(std::size_t index) {
  std::ostringstream os;
  os << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

inline void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split) {
  namespace fs = std::filesystem;
  std::ostringstream manifest;
  manifest << "seed " << split.seed << "\nheight " << split.height << "\nwidth " << split.width
           << "\nn_train " << split.train.size() << "\nn_test " << split.test.size() << "\n";
  auto write_part = [&](const std::string& name, const std::vector<Scene>& scenes,
                        const std::vector<std::uint64_t>& seeds) {
    fs::create_directories(dir / name);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      save_tensor(dir / name / (scene_file_stem(i) + "_image.tnsr"), scenes[i].image);
      save_tensor(dir / name / (scene_file_stem(i) + "_disparity.tnsr"), scenes[i].disparity);
      manifest << name << ' ' << scene_file_stem(i) << ' ' << seeds[i] << "\n";
    }
  };
  write_part("train", split.train, split.train_seeds);
  write_part("test", split.test, split.test_seeds);
  write_file(dir / "manifest.txt", manifest.str());
}

inline DatasetSplit read_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.txt")) {
    throw MissingArtifact("dataset manifest not found in " + dir.string());
  }
  std::istringstream in(read_file(dir / "manifest.txt"));
  DatasetSplit s;
  std::size_t n_train = 0, n_test = 0;
  std::string key;
  while (in >> key) {
    if (key == "seed") in >> s.seed;
    else if (key == "height") in >> s.height;
    else if (key == "width") in >> s.width;
    else if (key == "n_train") in >> n_train;
    else if (key == "n_test") in >> n_test;
    else if (key == "train" || key == "test") {
      std::string stem;
      std::uint64_t seed = 0;
      in >> stem >> seed;
      Scene scene{load_tensor(dir / key / (stem + "_image.tnsr")),
                  load_tensor(dir / key / (stem + "_disparity.tnsr"))};
      (key == "train" ? s.train_seeds : s.test_seeds).push_back(seed);
      (key == "train" ? s.train : s.test).push_back(std::move(scene));
    } else {
      throw MissingArtifact("malformed dataset manifest entry '" + key + "'");
    }
  }
  if (s.train.size() != n_train || s.test.size() != n_test) {
    throw MissingArtifact("dataset in " + dir.string() + " is incomplete");
  }
  return s;
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_DATA_HPP
