#include "hsva/data.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "json.hpp"

#include "binary_io.hpp"

namespace hsva {
namespace {

constexpr std::uint64_t kFormatVersion = 1;

void check_index_list(const std::vector<std::uint32_t>& list, std::size_t bound, const char* name,
                      const char* bound_name) {
  std::vector<char> seen(bound, 0);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto v = list[i];
    if (v >= bound) {
      throw DataError(std::string(name) + "[" + std::to_string(i) + "] = " + std::to_string(v) + " is >= " +
                      bound_name + " (" + std::to_string(bound) + ")");
    }
    if (seen[v]) throw DataError(std::string(name) + " repeats index " + std::to_string(v));
    seen[v] = 1;
  }
}

std::uint64_t read_count(const nlohmann::json& meta, const char* key) {
  if (!meta.contains(key)) throw DataError("meta.json: missing field '" + std::string(key) + "'");
  const auto& v = meta.at(key);
  if (!v.is_number_unsigned()) throw DataError("meta.json: field '" + std::string(key) + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::vector<std::uint32_t> read_index_list(const nlohmann::json& meta, const char* key) {
  if (!meta.contains(key)) throw DataError("meta.json: missing field '" + std::string(key) + "'");
  const auto& arr = meta.at(key);
  if (!arr.is_array()) throw DataError("meta.json: field '" + std::string(key) + "' must be an array");
  std::vector<std::uint32_t> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& v = arr[i];
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() > std::numeric_limits<std::uint32_t>::max()) {
      throw DataError("meta.json: " + std::string(key) + "[" + std::to_string(i) + "] is not a valid index");
    }
    out.push_back(static_cast<std::uint32_t>(v.get<std::uint64_t>()));
  }
  return out;
}

Matrix read_matrix_file(const std::filesystem::path& path, std::uint64_t rows, std::uint64_t cols) {
  const std::string buf = binary::read_file(path);
  const std::string name = path.filename().string();
  if (rows != 0 && cols > std::numeric_limits<std::uint64_t>::max() / 4 / rows) {
    throw DataError(name + ": declared shape " + std::to_string(rows) + "x" + std::to_string(cols) + " is too large");
  }
  const std::uint64_t expected = rows * cols * 4;
  if (buf.size() != expected) {
    throw DataError(name + ": size " + std::to_string(buf.size()) + " bytes does not match declared shape " +
                    std::to_string(rows) + "x" + std::to_string(cols) + " (" + std::to_string(expected) + " bytes)");
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t offset = 0;
  binary::read_array(buf, offset, m.data(), static_cast<std::size_t>(m.size()), name);
  return m;
}

}  // namespace

std::uint32_t ZslDataset::seen_position(std::uint32_t cls) const {
  const auto it = std::find(seen_classes.begin(), seen_classes.end(), cls);
  if (it == seen_classes.end()) throw DataError("class " + std::to_string(cls) + " is not a seen class");
  return static_cast<std::uint32_t>(it - seen_classes.begin());
}

bool ZslDataset::operator==(const ZslDataset& o) const {
  auto same = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::equal(a.data(), a.data() + a.size(), b.data(), [](float x, float y) {
             return std::memcmp(&x, &y, sizeof(float)) == 0;
           });
  };
  return same(features, o.features) && same(attributes, o.attributes) && labels == o.labels &&
         seen_classes == o.seen_classes && unseen_classes == o.unseen_classes && train_idx == o.train_idx &&
         test_seen_idx == o.test_seen_idx && test_unseen_idx == o.test_unseen_idx;
}

void ZslDataset::validate() const {
  const std::size_t n = n_samples();
  const std::size_t k = n_classes();
  if (n == 0) throw DataError("dataset has no samples");
  if (k == 0) throw DataError("dataset has no classes");
  if (visual_dim() == 0) throw DataError("visual_dim must be >= 1");
  if (attr_dim() == 0) throw DataError("attr_dim must be >= 1");
  if (labels.size() != n) {
    throw DataError("labels: " + std::to_string(labels.size()) + " entries for " + std::to_string(n) + " samples");
  }
  require_finite(features, "features");
  require_finite(attributes, "attributes");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= k) {
      throw DataError("labels: sample " + std::to_string(i) + " has class " + std::to_string(labels[i]) +
                      " >= n_classes (" + std::to_string(k) + ")");
    }
  }
  check_index_list(seen_classes, k, "seen_classes", "n_classes");
  check_index_list(unseen_classes, k, "unseen_classes", "n_classes");
  if (seen_classes.empty()) throw DataError("seen_classes is empty");
  std::vector<char> role(k, 0);  // 1 seen, 2 unseen
  for (auto c : seen_classes) role[c] = 1;
  for (auto c : unseen_classes) {
    if (role[c] == 1) throw DataError("class " + std::to_string(c) + " is both seen and unseen");
    role[c] = 2;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (role[labels[i]] == 0) {
      throw DataError("labels: sample " + std::to_string(i) + " has class " + std::to_string(labels[i]) +
                      " which is neither seen nor unseen");
    }
  }
  check_index_list(train_idx, n, "train_idx", "n_samples");
  check_index_list(test_seen_idx, n, "test_seen_idx", "n_samples");
  check_index_list(test_unseen_idx, n, "test_unseen_idx", "n_samples");
  std::vector<char> used(n, 0);
  for (auto i : train_idx) {
    if (role[labels[i]] != 1) throw DataError("split violation: train sample " + std::to_string(i) + " has unseen class " + std::to_string(labels[i]));
    used[i] = 1;
  }
  for (auto i : test_seen_idx) {
    if (role[labels[i]] != 1) throw DataError("split violation: test_seen sample " + std::to_string(i) + " has unseen class " + std::to_string(labels[i]));
    if (used[i]) throw DataError("split violation: sample " + std::to_string(i) + " is in both train_idx and test_seen_idx");
    used[i] = 2;
  }
  for (auto i : test_unseen_idx) {
    if (role[labels[i]] != 2) throw DataError("split violation: test_unseen sample " + std::to_string(i) + " has seen class " + std::to_string(labels[i]));
    if (used[i] == 1) throw DataError("split violation: sample " + std::to_string(i) + " is in both train_idx and test_unseen_idx");
  }
}

ZslDataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' does not exist");
  for (const char* f : {"meta.json", "features.bin", "attributes.bin", "labels.bin"}) {
    if (!std::filesystem::exists(dir / f)) throw DataError("dataset '" + dir.string() + "': missing file " + f);
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(binary::read_file(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("meta.json: invalid JSON: ") + e.what());
  }
  if (!meta.is_object()) throw DataError("meta.json: top level must be an object");
  const auto version = read_count(meta, "format_version");
  if (version != kFormatVersion) throw DataError("meta.json: unsupported format_version " + std::to_string(version));
  const auto n_samples = read_count(meta, "n_samples");
  const auto visual_dim = read_count(meta, "visual_dim");
  const auto attr_dim = read_count(meta, "attr_dim");
  const auto n_classes = read_count(meta, "n_classes");

  ZslDataset ds;
  ds.seen_classes = read_index_list(meta, "seen_classes");
  ds.unseen_classes = read_index_list(meta, "unseen_classes");
  ds.train_idx = read_index_list(meta, "train_idx");
  ds.test_seen_idx = read_index_list(meta, "test_seen_idx");
  ds.test_unseen_idx = read_index_list(meta, "test_unseen_idx");
  ds.features = read_matrix_file(dir / "features.bin", n_samples, visual_dim);
  ds.attributes = read_matrix_file(dir / "attributes.bin", n_classes, attr_dim);

  const std::string labels_buf = binary::read_file(dir / "labels.bin");
  if (n_samples > std::numeric_limits<std::uint32_t>::max() || labels_buf.size() != n_samples * 4) {
    throw DataError("labels.bin: size " + std::to_string(labels_buf.size()) + " bytes does not match n_samples " +
                    std::to_string(n_samples) + " (" + std::to_string(n_samples * 4) + " bytes)");
  }
  ds.labels.resize(n_samples);
  std::size_t offset = 0;
  binary::read_array(labels_buf, offset, ds.labels.data(), ds.labels.size(), "labels.bin");
  ds.validate();
  return ds;
}

void save_dataset(const ZslDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  nlohmann::ordered_json meta;
  meta["n_samples"] = ds.n_samples();
  meta["visual_dim"] = ds.visual_dim();
  meta["attr_dim"] = ds.attr_dim();
  meta["n_classes"] = ds.n_classes();
  meta["seen_classes"] = ds.seen_classes;
  meta["unseen_classes"] = ds.unseen_classes;
  meta["train_idx"] = ds.train_idx;
  meta["test_seen_idx"] = ds.test_seen_idx;
  meta["test_unseen_idx"] = ds.test_unseen_idx;
  meta["format_version"] = kFormatVersion;
  binary::write_file(dir / "meta.json", meta.dump(2) + "\n");

  std::string buf;
  binary::append_array(buf, ds.features.data(), static_cast<std::size_t>(ds.features.size()));
  binary::write_file(dir / "features.bin", buf);
  buf.clear();
  binary::append_array(buf, ds.attributes.data(), static_cast<std::size_t>(ds.attributes.size()));
  binary::write_file(dir / "attributes.bin", buf);
  buf.clear();
  binary::append_array(buf, ds.labels.data(), ds.labels.size());
  binary::write_file(dir / "labels.bin", buf);
}

void minmax_normalize_features(ZslDataset& ds) {
  if (ds.train_idx.empty()) throw DataError("minmax normalization needs a non-empty train split");
  const Matrix train = gather_rows(ds.features, ds.train_idx);
  const Eigen::RowVectorXf lo = train.colwise().minCoeff();
  const Eigen::RowVectorXf hi = train.colwise().maxCoeff();
  for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
    const float range = hi(j) - lo(j);
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
      ds.features(i, j) = range > 0.0f ? (ds.features(i, j) - lo(j)) / range : 0.0f;
    }
  }
}

Matrix gather_rows(const Matrix& m, const std::vector<std::uint32_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= m.rows()) throw ShapeError("gather_rows: index " + std::to_string(idx[i]) + " out of range");
    out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  }
  return out;
}

std::vector<Batch> batch_iter(const ZslDataset& ds, std::size_t batch_size, Rng& rng, std::size_t max_unseen) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (ds.train_idx.empty()) throw DataError("training split is empty");
  std::vector<std::uint32_t> position(ds.n_classes(), std::numeric_limits<std::uint32_t>::max());
  for (std::size_t i = 0; i < ds.seen_classes.size(); ++i) position[ds.seen_classes[i]] = static_cast<std::uint32_t>(i);

  std::vector<std::uint32_t> order = ds.train_idx;
  rng.shuffle(order);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    b.sample_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
    b.x = gather_rows(ds.features, b.sample_ids);
    std::vector<std::uint32_t> classes;
    for (auto id : b.sample_ids) {
      classes.push_back(ds.labels[id]);
      b.labels.push_back(position[ds.labels[id]]);
    }
    b.a = gather_rows(ds.attributes, classes);
    if (ds.unseen_classes.size() <= max_unseen) {
      b.unseen_ids = ds.unseen_classes;
    } else {
      std::vector<std::uint32_t> pool = ds.unseen_classes;
      for (std::size_t i = 0; i < max_unseen; ++i) {
        std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      }
      b.unseen_ids.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(max_unseen));
    }
    b.unseen_attributes = gather_rows(ds.attributes, b.unseen_ids);
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace hsva
