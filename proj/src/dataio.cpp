#include "cizsl/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cizsl/errors.hpp"
#include "cizsl/random.hpp"

namespace cizsl {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'Z', 'S', 'L', 'D'};
constexpr std::uint16_t kMatrixVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4;
constexpr int kDatasetVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_csv(const fs::path& path) { return path.extension() == ".csv"; }

std::string encode_zsld(const Tensor& m) {
  if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) throw ValidationError("matrix too large for ZSLD");
  std::string out(kMagic, 4);
  put_u16(out, kMatrixVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  out.reserve(out.size() + 4 * m.size());
  for (double v : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

std::string encode_csv(const Tensor& m) {
  std::string out;
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      if (c) out.push_back(',');
      out += buf;
    }
    out.push_back('\n');
  }
  return out;
}

Tensor decode_zsld(const std::string& bytes, const fs::path& path) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kHeaderBytes || std::memcmp(p, kMagic, 4) != 0)
    throw ValidationError("malformed header in " + path.string() + ": missing ZSLD magic");
  const std::uint16_t version = std::uint16_t(p[4] | p[5] << 8);
  if (version != kMatrixVersion)
    throw ValidationError("unsupported ZSLD version " + std::to_string(version) + " in " + path.string());
  const std::size_t rows = get_u32(p + 6);
  const std::size_t cols = get_u32(p + 10);
  const std::size_t expected = kHeaderBytes + 4 * rows * cols;
  if (bytes.size() != expected)
    throw ValidationError("shape-inconsistency in " + path.string() + ": header declares " + std::to_string(rows) +
                          "x" + std::to_string(cols) + " (" + std::to_string(expected) + " bytes) but file has " +
                          std::to_string(bytes.size()) + " bytes");
  Tensor m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = std::bit_cast<float>(get_u32(p + kHeaderBytes + 4 * i));
  return m;
}

Tensor decode_csv(const std::string& text, const fs::path& path) {
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t n = 0;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str())
        throw ValidationError("malformed value '" + cell + "' in " + path.string() + " row " + std::to_string(rows));
      data.push_back(v);
      ++n;
    }
    if (rows == 0) cols = n;
    if (n != cols)
      throw ValidationError("shape-inconsistency in " + path.string() + ": row " + std::to_string(rows) + " has " +
                            std::to_string(n) + " values, expected " + std::to_string(cols));
    ++rows;
  }
  return Tensor({rows, cols}, std::move(data));
}

Tensor labels_to_matrix(const std::vector<std::size_t>& y) {
  Tensor m(y.size(), 1);
  for (std::size_t i = 0; i < y.size(); ++i) m[i] = static_cast<double>(y[i]);
  return m;
}

std::vector<std::size_t> matrix_to_labels(const Tensor& m, const fs::path& path) {
  if (m.size() != 0 && m.cols() != 1)
    throw ValidationError("shape-inconsistency in " + path.string() + ": labels must be a single column");
  std::vector<std::size_t> y(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double v = m[i];
    if (!(v >= 0) || v != std::floor(v))
      throw ValidationError("invalid label " + std::to_string(v) + " in " + path.string() + " row " + std::to_string(i));
    y[i] = static_cast<std::size_t>(v);
  }
  return y;
}

void check_features(const Tensor& x, const std::vector<std::size_t>& y, std::size_t dim, const std::string& what) {
  if (x.rows() != y.size())
    throw DimensionError(what + ": " + std::to_string(x.rows()) + " feature rows but " + std::to_string(y.size()) +
                         " labels");
  if (x.rows() > 0 && x.cols() != dim)
    throw DimensionError(what + ": feature dim " + std::to_string(x.cols()) + ", expected " + std::to_string(dim));
  if (!x.all_finite()) throw ValidationError(what + ": non-finite feature values");
}

// Indices of rows whose label is in `keep`, relabeled to `offset + position in keep`.
void select_classes(const std::vector<std::size_t>& y, const std::vector<std::size_t>& keep,
                    std::size_t offset, std::vector<std::size_t>& rows, std::vector<std::size_t>& labels) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto it = std::find(keep.begin(), keep.end(), y[i]);
    if (it == keep.end()) continue;
    rows.push_back(i);
    labels.push_back(offset + static_cast<std::size_t>(it - keep.begin()));
  }
}

Tensor normal_matrix(Rng& rng, std::size_t r, std::size_t c, double scale) {
  Tensor t(r, c);
  for (auto& v : t.storage()) v = scale * rng.normal();
  return t;
}

// rows of codes -> rows of A c
Tensor apply_map(const Tensor& a, const Tensor& codes) {
  Tensor out(codes.rows(), a.rows());
  for (std::size_t k = 0; k < codes.rows(); ++k)
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * codes(k, j);
      out(k, i) = s;
    }
  return out;
}

void append_samples(Rng& rng, std::span<const double> prototype, std::size_t n, double spread, std::size_t label,
                    std::vector<double>& data, std::vector<std::size_t>& labels) {
  for (std::size_t i = 0; i < n; ++i) {
    for (double p : prototype) data.push_back(p + spread * rng.normal());
    labels.push_back(label);
  }
}

}  // namespace

std::string to_string(SplitMode m) {
  switch (m) {
    case SplitMode::Easy: return "easy";
    case SplitMode::Hard: return "hard";
    case SplitMode::Custom: return "custom";
  }
  return "custom";
}

SplitMode split_mode_from_string(const std::string& s) {
  if (s == "easy") return SplitMode::Easy;
  if (s == "hard") return SplitMode::Hard;
  if (s == "custom") return SplitMode::Custom;
  throw ValidationError("unknown split mode '" + s + "' (expected easy, hard or custom)");
}

void ZslDataset::validate() const {
  const std::size_t ks = k_seen(), ku = k_unseen();
  if (ks == 0) throw ValidationError("dataset has no seen classes");
  if (ku > 0 && unseen_semantics.cols() != seen_semantics.cols())
    throw DimensionError("unseen semantic dim " + std::to_string(unseen_semantics.cols()) + " differs from seen " +
                         std::to_string(seen_semantics.cols()));
  if (!seen_semantics.all_finite() || !unseen_semantics.all_finite())
    throw ValidationError("non-finite semantic descriptors");
  if (seen_features.rows() == 0) throw ValidationError("dataset has no seen training examples");
  const std::size_t dim = visual_dim();
  check_features(seen_features, seen_labels, dim, "seen training set");
  check_features(unseen_test_features, unseen_test_labels, dim, "unseen test set");
  check_features(seen_test_features, seen_test_labels, dim, "seen test set");

  std::vector<std::size_t> count(ks, 0);
  for (std::size_t y : seen_labels) {
    if (y >= ks)
      throw ValidationError("seen label " + std::to_string(y) + " outside [0, " + std::to_string(ks) + ")");
    ++count[y];
  }
  for (std::size_t c = 0; c < ks; ++c)
    if (count[c] == 0) throw ValidationError("seen class " + std::to_string(c) + " has no training examples");
  for (std::size_t y : seen_test_labels)
    if (y >= ks)
      throw ValidationError("seen test label " + std::to_string(y) + " outside [0, " + std::to_string(ks) + ")");
  for (std::size_t y : unseen_test_labels) {
    if (y < ks)
      throw ValidationError("seen and unseen label sets must be disjoint: unseen test label " + std::to_string(y) +
                            " is a seen class");
    if (y >= ks + ku)
      throw ValidationError("unseen test label " + std::to_string(y) + " outside [" + std::to_string(ks) + ", " +
                            std::to_string(ks + ku) + ")");
  }
}

void SyntheticSpec::validate() const {
  if (k_seen < 2) throw ValidationError("k_seen must be at least 2");
  if (k_unseen < 1) throw ValidationError("k_unseen must be positive");
  if (visual_dim == 0 || semantic_dim == 0) throw ValidationError("visual_dim and semantic_dim must be positive");
  if (samples_per_class == 0) throw ValidationError("samples_per_class must be positive");
  if (split_mode == SplitMode::Hard && semantic_dim < 2) throw ValidationError("hard split needs semantic_dim >= 2");
  if (split_mode == SplitMode::Custom) throw ValidationError("synthetic split mode must be easy or hard");
  if (!(cluster_spread >= 0) || !(semantic_noise >= 0) || !std::isfinite(cluster_spread) ||
      !std::isfinite(semantic_noise))
    throw ValidationError("cluster_spread and semantic_noise must be finite and non-negative");
  if (!(seen_test_fraction >= 0 && seen_test_fraction < 1)) throw ValidationError("seen_test_fraction must be in [0, 1)");
  const auto held = static_cast<std::size_t>(std::floor(seen_test_fraction * double(samples_per_class)));
  if (held >= samples_per_class) throw ValidationError("seen_test_fraction leaves no training examples");
}

std::pair<ZslDataset, SyntheticTruth> make_synthetic_with_truth(const SyntheticSpec& spec) {
  spec.validate();
  Rng structure(spec.seed, 0);
  Rng samples(spec.seed, 1);
  const std::size_t ks = spec.k_seen, ku = spec.k_unseen, sem = spec.semantic_dim, vis = spec.visual_dim;

  SyntheticTruth truth;
  truth.map = normal_matrix(structure, vis, sem, 1.0 / std::sqrt(double(sem)));
  truth.seen_codes = normal_matrix(structure, ks, sem, 1.0);
  truth.unseen_codes = Tensor(ku, sem);

  constexpr double kEasyPerturbation = 0.5;
  constexpr double kHardOffset = 0.5;
  if (spec.split_mode == SplitMode::Easy) {
    std::vector<std::size_t> order(ks);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = ks; i > 1; --i) std::swap(order[i - 1], order[structure.uniform_int(i)]);
    for (std::size_t u = 0; u < ku; ++u) {
      const std::size_t parent = order[u % ks];
      truth.unseen_parent.push_back(parent);
      for (std::size_t j = 0; j < sem; ++j)
        truth.unseen_codes(u, j) = truth.seen_codes(parent, j) + kEasyPerturbation * structure.normal();
    }
  } else {
    // seen classes avoid the (-, -) quadrant of the first two code axes,
    // unseen classes live in it
    for (std::size_t k = 0; k < ks; ++k)
      if (truth.seen_codes(k, 0) < 0 && truth.seen_codes(k, 1) < 0) truth.seen_codes(k, 0) = -truth.seen_codes(k, 0);
    for (std::size_t u = 0; u < ku; ++u)
      for (std::size_t j = 0; j < sem; ++j) {
        const double v = structure.normal();
        truth.unseen_codes(u, j) = j < 2 ? -std::abs(v) - kHardOffset : v;
      }
  }
  narrow_to_float(truth.map);
  narrow_to_float(truth.seen_codes);
  narrow_to_float(truth.unseen_codes);
  truth.seen_prototypes = apply_map(truth.map, truth.seen_codes);
  truth.unseen_prototypes = apply_map(truth.map, truth.unseen_codes);

  ZslDataset ds;
  ds.split_mode = spec.split_mode;
  ds.seen_semantics = truth.seen_codes;
  ds.unseen_semantics = truth.unseen_codes;
  for (auto* t : {&ds.seen_semantics, &ds.unseen_semantics})
    for (auto& v : t->storage()) v += spec.semantic_noise * structure.normal();

  const auto held = static_cast<std::size_t>(std::floor(spec.seen_test_fraction * double(spec.samples_per_class)));
  std::vector<double> train, seen_test, unseen_test;
  for (std::size_t k = 0; k < ks; ++k) {
    append_samples(samples, truth.seen_prototypes.row_span(k), spec.samples_per_class - held, spec.cluster_spread, k,
                   train, ds.seen_labels);
    append_samples(samples, truth.seen_prototypes.row_span(k), held, spec.cluster_spread, k, seen_test,
                   ds.seen_test_labels);
  }
  for (std::size_t u = 0; u < ku; ++u)
    append_samples(samples, truth.unseen_prototypes.row_span(u), spec.samples_per_class, spec.cluster_spread, ks + u,
                   unseen_test, ds.unseen_test_labels);
  ds.seen_features = Tensor({ds.seen_labels.size(), vis}, std::move(train));
  ds.seen_test_features = Tensor({ds.seen_test_labels.size(), vis}, std::move(seen_test));
  ds.unseen_test_features = Tensor({ds.unseen_test_labels.size(), vis}, std::move(unseen_test));
  for (auto* t : {&ds.seen_features, &ds.seen_test_features, &ds.unseen_test_features, &ds.seen_semantics,
                  &ds.unseen_semantics, &truth.seen_prototypes, &truth.unseen_prototypes})
    narrow_to_float(*t);
  ds.validate();
  return {std::move(ds), std::move(truth)};
}

ZslDataset make_synthetic(const SyntheticSpec& spec) { return make_synthetic_with_truth(spec).first; }

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_matrix(const fs::path& path, const Tensor& m) {
  write_file_atomic(path, is_csv(path) ? encode_csv(m) : encode_zsld(m));
}

Tensor read_matrix(const fs::path& path) {
  const std::string bytes = read_bytes(path);
  Tensor m = is_csv(path) ? decode_csv(bytes, path) : decode_zsld(bytes, path);
  if (!m.all_finite()) throw ValidationError("NaN or infinite entries in " + path.string());
  return m;
}

namespace {

struct FieldFile {
  const char* key;
  bool label;
};

constexpr FieldFile kFields[] = {
    {"seen_features", false},        {"seen_labels", true},          {"seen_semantics", false},
    {"unseen_semantics", false},     {"unseen_test_features", false}, {"unseen_test_labels", true},
    {"seen_test_features", false},   {"seen_test_labels", true},
};

template <class D>
auto* tensor_field(D& ds, std::string_view key) {
  using Ptr = decltype(&ds.seen_features);
  if (key == "seen_features") return &ds.seen_features;
  if (key == "seen_semantics") return &ds.seen_semantics;
  if (key == "unseen_semantics") return &ds.unseen_semantics;
  if (key == "unseen_test_features") return &ds.unseen_test_features;
  if (key == "seen_test_features") return &ds.seen_test_features;
  return Ptr{};
}

template <class D>
auto* label_field(D& ds, std::string_view key) {
  using Ptr = decltype(&ds.seen_labels);
  if (key == "seen_labels") return &ds.seen_labels;
  if (key == "unseen_test_labels") return &ds.unseen_test_labels;
  if (key == "seen_test_labels") return &ds.seen_test_labels;
  return Ptr{};
}

nlohmann::json read_json(const fs::path& path) {
  const std::string text = read_bytes(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

template <class T>
T json_get(const nlohmann::json& j, const char* key, const fs::path& path) {
  if (!j.contains(key)) throw ValidationError(path.string() + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(path.string() + ": key '" + std::string(key) + "' has the wrong type");
  }
}

}  // namespace

void save_dataset(const ZslDataset& ds, const fs::path& dir, bool csv) {
  ds.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json files = nlohmann::json::object();
  for (const auto& f : kFields) {
    const std::string name = std::string(f.key) + (csv ? ".csv" : ".zsld");
    const Tensor m = f.label ? labels_to_matrix(*label_field(ds, f.key)) : *tensor_field(ds, f.key);
    write_matrix(dir / name, m);
    files[f.key] = name;
  }
  nlohmann::json manifest = {
      {"format", "cizsl-dataset"},
      {"version", kDatasetVersion},
      {"split_mode", to_string(ds.split_mode)},
      {"k_seen", ds.k_seen()},
      {"k_unseen", ds.k_unseen()},
      {"visual_dim", ds.visual_dim()},
      {"semantic_dim", ds.semantic_dim()},
      {"n_seen_train", ds.seen_labels.size()},
      {"n_seen_test", ds.seen_test_labels.size()},
      {"n_unseen_test", ds.unseen_test_labels.size()},
      {"files", files},
  };
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

ZslDataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw IoError("no manifest.json in " + dir.string());
  const nlohmann::json manifest = read_json(manifest_path);
  if (json_get<std::string>(manifest, "format", manifest_path) != "cizsl-dataset")
    throw ValidationError(manifest_path.string() + ": not a dataset manifest");
  const int version = json_get<int>(manifest, "version", manifest_path);
  if (version != kDatasetVersion)
    throw ValidationError(manifest_path.string() + ": unsupported dataset version " + std::to_string(version));

  ZslDataset ds;
  ds.split_mode = split_mode_from_string(json_get<std::string>(manifest, "split_mode", manifest_path));
  const auto files = json_get<nlohmann::json>(manifest, "files", manifest_path);
  for (const auto& f : kFields) {
    const fs::path path = dir / json_get<std::string>(files, f.key, manifest_path);
    const Tensor m = read_matrix(path);
    if (f.label)
      *label_field(ds, f.key) = matrix_to_labels(m, path);
    else
      *tensor_field(ds, f.key) = m;
  }

  auto expect = [&](const char* key, std::size_t actual) {
    if (!manifest.contains(key)) return;
    const auto declared = json_get<std::size_t>(manifest, key, manifest_path);
    if (declared != actual)
      throw ValidationError("shape-inconsistency: manifest declares " + std::string(key) + "=" +
                            std::to_string(declared) + " but the data has " + std::to_string(actual));
  };
  expect("k_seen", ds.k_seen());
  expect("k_unseen", ds.k_unseen());
  expect("visual_dim", ds.visual_dim());
  expect("semantic_dim", ds.semantic_dim());
  expect("n_seen_train", ds.seen_labels.size());
  expect("n_seen_test", ds.seen_test_labels.size());
  expect("n_unseen_test", ds.unseen_test_labels.size());
  ds.validate();
  return ds;
}

ZslDataset class_split(const ZslDataset& ds, const std::vector<std::size_t>& train_classes,
                       const std::vector<std::size_t>& heldout_classes) {
  if (train_classes.size() < 2) throw ValidationError("class_split needs at least 2 training classes");
  if (heldout_classes.empty()) throw ValidationError("class_split needs at least 1 held-out class");
  for (auto c : train_classes)
    if (c >= ds.k_seen() || std::count(heldout_classes.begin(), heldout_classes.end(), c))
      throw ValidationError("class_split: invalid or overlapping class " + std::to_string(c));
  for (auto c : heldout_classes)
    if (c >= ds.k_seen()) throw ValidationError("class_split: invalid class " + std::to_string(c));

  const std::size_t ks = train_classes.size();
  ZslDataset out;
  out.split_mode = SplitMode::Custom;
  out.seen_semantics = gather_rows(ds.seen_semantics, train_classes);
  out.unseen_semantics = gather_rows(ds.seen_semantics, heldout_classes);

  std::vector<std::size_t> rows, labels;
  select_classes(ds.seen_labels, train_classes, 0, rows, labels);
  std::vector<std::size_t> test_rows, test_labels;
  if (!ds.seen_test_labels.empty()) {
    select_classes(ds.seen_test_labels, train_classes, 0, test_rows, test_labels);
  }
  if (test_rows.empty()) {
    // hold out the last fifth of each training class
    std::vector<std::size_t> per(ks, 0), seen_so_far(ks, 0);
    for (auto y : labels) ++per[y];
    std::vector<std::size_t> keep_rows, keep_labels;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t y = labels[i];
      const std::size_t n_test = per[y] / 5;
      if (seen_so_far[y]++ >= per[y] - n_test) {
        test_rows.push_back(rows[i]);
        test_labels.push_back(y);
      } else {
        keep_rows.push_back(rows[i]);
        keep_labels.push_back(y);
      }
    }
    out.seen_test_features = gather_rows(ds.seen_features, test_rows);
    rows = std::move(keep_rows);
    labels = std::move(keep_labels);
  } else {
    out.seen_test_features = gather_rows(ds.seen_test_features, test_rows);
  }
  out.seen_features = gather_rows(ds.seen_features, rows);
  out.seen_labels = std::move(labels);
  out.seen_test_labels = std::move(test_labels);

  std::vector<std::size_t> u_rows, u_labels;
  select_classes(ds.seen_labels, heldout_classes, ks, u_rows, u_labels);
  std::vector<Tensor> blocks{gather_rows(ds.seen_features, u_rows)};
  if (!ds.seen_test_labels.empty()) {
    std::vector<std::size_t> t_rows;
    select_classes(ds.seen_test_labels, heldout_classes, ks, t_rows, u_labels);
    blocks.push_back(gather_rows(ds.seen_test_features, t_rows));
  }
  out.unseen_test_features = vstack(blocks);
  out.unseen_test_labels = std::move(u_labels);
  out.validate();
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "params", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json params = nlohmann::json::array();
  for (const auto& e : ckpt.params) {
    const std::string file = "params/" + e.name + ".zsld";
    write_matrix(dir / file, e.value);
    params.push_back({{"name", e.name}, {"file", file}, {"rows", e.value.rows()}, {"cols", e.value.cols()}});
  }
  const nlohmann::json j = {
      {"format", "cizsl-checkpoint"}, {"version", kCheckpointVersion}, {"arch_tag", ckpt.arch_tag},
      {"config", ckpt.config},        {"params", params},
  };
  write_file_atomic(dir / "checkpoint.json", j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir, const std::string& expected_arch_tag) {
  const fs::path path = dir / "checkpoint.json";
  if (!fs::exists(path)) throw IoError("no checkpoint.json in " + dir.string());
  const nlohmann::json j = read_json(path);
  if (json_get<std::string>(j, "format", path) != "cizsl-checkpoint")
    throw ValidationError(path.string() + ": not a checkpoint");
  const int version = json_get<int>(j, "version", path);
  if (version != kCheckpointVersion)
    throw ValidationError(path.string() + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  Checkpoint ckpt;
  ckpt.arch_tag = json_get<std::string>(j, "arch_tag", path);
  if (!expected_arch_tag.empty() && ckpt.arch_tag != expected_arch_tag)
    throw ValidationError("checkpoint architecture '" + ckpt.arch_tag + "' does not match the requested '" +
                          expected_arch_tag + "'");
  ckpt.config = j.value("config", nlohmann::json::object());
  for (const auto& p : json_get<nlohmann::json>(j, "params", path)) {
    const auto name = json_get<std::string>(p, "name", path);
    const fs::path file = dir / json_get<std::string>(p, "file", path);
    Tensor value = read_matrix(file);
    if (value.rows() != json_get<std::size_t>(p, "rows", path) || value.cols() != json_get<std::size_t>(p, "cols", path))
      throw ValidationError("shape-inconsistency in " + file.string() + ": does not match checkpoint.json");
    ckpt.params.add(name, std::move(value));
  }
  return ckpt;
}

}  // namespace cizsl
