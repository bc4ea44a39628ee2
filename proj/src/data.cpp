#include "fedat/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fedat/rng.hpp"

namespace fedat {

std::vector<std::vector<int>> Dataset::class_indices() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  return out;
}

Batch Dataset::gather(const std::vector<int>& indices) const {
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(indices.size()), inputs.cols());
  b.labels.resize(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    b.inputs.row(static_cast<Eigen::Index>(r)) = inputs.row(indices[r]);
    b.labels[r] = labels[static_cast<std::size_t>(indices[r])];
  }
  return b;
}

Batch Dataset::all() const { return Batch{inputs, labels}; }

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.class_count < 2) throw Error("synthetic data needs at least 2 classes");
  if (spec.per_class < 1 || spec.input_dim < 1) throw Error("synthetic data needs per_class >= 1 and input_dim >= 1");
  if (!(spec.noise >= 0.0) || !(spec.separation >= 0.0)) throw Error("synthetic noise and separation must be >= 0");

  const int c_count = spec.class_count;
  const int dim = spec.input_dim;
  Matrix dirs = Matrix::Zero(c_count, dim);
  if (c_count <= dim) {
    for (int c = 0; c < c_count; ++c) {
      for (int j = 0; j < c_count; ++j) dirs(c, j) = (c == j ? 1.0 : 0.0) - 1.0 / c_count;
    }
  } else {
    Rng dir_rng(derive_seed(0x5eed, {static_cast<std::uint64_t>(c_count), static_cast<std::uint64_t>(dim)}));
    for (int c = 0; c < c_count; ++c)
      for (int j = 0; j < dim; ++j) dirs(c, j) = standard_normal(dir_rng);
  }
  for (int c = 0; c < c_count; ++c) dirs.row(c).normalize();

  Dataset ds;
  ds.class_count = c_count;
  ds.inputs.resize(static_cast<Eigen::Index>(c_count) * spec.per_class, dim);
  ds.labels.reserve(static_cast<std::size_t>(c_count) * spec.per_class);
  Rng rng(derive_seed(spec.seed, {0xda7a}));
  Eigen::Index row = 0;
  for (int c = 0; c < c_count; ++c) {
    for (int i = 0; i < spec.per_class; ++i, ++row) {
      for (int j = 0; j < dim; ++j) {
        const double v = 0.5 + spec.separation * dirs(c, j) + spec.noise * standard_normal(rng);
        ds.inputs(row, j) = std::clamp(v, 0.0, 1.0);
      }
      ds.labels.push_back(c);
    }
  }
  return ds;
}

void PartitionSpec::validate(int class_count) const {
  if (clients < 1) throw Error("partition needs at least one client");
  if (class_count % clients != 0) throw Error("class count must be divisible by the number of clients");
  if (!(skew >= 0.0)) throw Error("skew must be non-negative");
  if (majority_share(clients, skew) < skew) throw Error("skew leaves the majority share below the minority share");
}

Partition partition_non_iid(const Dataset& dataset, const PartitionSpec& spec) {
  spec.validate(dataset.class_count);
  const int per_client = dataset.class_count / spec.clients;
  Partition part;
  part.shards.resize(static_cast<std::size_t>(spec.clients));
  part.majority_classes.resize(static_cast<std::size_t>(spec.clients));

  auto by_class = dataset.class_indices();
  for (int c = 0; c < dataset.class_count; ++c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    if (idx.empty()) throw Error("class " + std::to_string(c) + " has no samples");
    Rng rng(derive_seed(spec.seed, {0x9a27, static_cast<std::uint64_t>(c)}));
    shuffle(idx, rng);

    const int owner = c / per_client;
    part.majority_classes[static_cast<std::size_t>(owner)].push_back(c);
    const auto minority = static_cast<std::size_t>(std::floor(static_cast<double>(idx.size()) * spec.skew / 100.0));

    std::size_t cursor = 0;
    for (int k = 0; k < spec.clients; ++k) {
      if (k == owner) continue;
      auto& shard = part.shards[static_cast<std::size_t>(k)];
      shard.insert(shard.end(), idx.begin() + static_cast<std::ptrdiff_t>(cursor),
                   idx.begin() + static_cast<std::ptrdiff_t>(cursor + minority));
      cursor += minority;
    }
    auto& owned = part.shards[static_cast<std::size_t>(owner)];
    owned.insert(owned.end(), idx.begin() + static_cast<std::ptrdiff_t>(cursor), idx.end());
  }
  return part;
}

Partition partition_iid(const Dataset& dataset, int clients, std::uint64_t seed) {
  if (clients < 1) throw Error("partition needs at least one client");
  Partition part;
  part.shards.resize(static_cast<std::size_t>(clients));
  part.majority_classes.resize(static_cast<std::size_t>(clients));

  auto by_class = dataset.class_indices();
  std::size_t rotate = 0;  // spreads remainders so shard sizes stay balanced
  for (int c = 0; c < dataset.class_count; ++c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    Rng rng(derive_seed(seed, {0x11d, static_cast<std::uint64_t>(c)}));
    shuffle(idx, rng);
    const std::size_t base = idx.size() / static_cast<std::size_t>(clients);
    const std::size_t extra = idx.size() % static_cast<std::size_t>(clients);
    std::size_t cursor = 0;
    for (int i = 0; i < clients; ++i) {
      const std::size_t k = (rotate + static_cast<std::size_t>(i)) % static_cast<std::size_t>(clients);
      const std::size_t take = base + (static_cast<std::size_t>(i) < extra ? 1 : 0);
      auto& shard = part.shards[k];
      shard.insert(shard.end(), idx.begin() + static_cast<std::ptrdiff_t>(cursor),
                   idx.begin() + static_cast<std::ptrdiff_t>(cursor + take));
      cursor += take;
    }
    rotate = (rotate + extra) % static_cast<std::size_t>(clients);
  }
  return part;
}

Dataset load_csv(const std::filesystem::path& path, bool rescale) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open CSV " + path.string());

  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };

  std::string line;
  if (!std::getline(in, line)) throw Error("CSV " + path.string() + " is empty");
  const auto header = split(line);
  if (header.size() < 2) throw Error("CSV needs at least one feature column and a label column");
  std::size_t label_col = header.size() - 1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == "label") label_col = i;

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw Error("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) + " cells");
    std::vector<double> feats;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      try {
        if (i == label_col)
          labels.push_back(std::stoi(cells[i]));
        else
          feats.push_back(std::stod(cells[i]));
      } catch (const std::exception&) {
        throw Error("CSV line " + std::to_string(line_no) + ": bad value '" + cells[i] + "'");
      }
    }
    rows.push_back(std::move(feats));
  }
  if (rows.empty()) throw Error("CSV " + path.string() + " has no data rows");

  Dataset ds;
  ds.inputs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size() - 1));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < rows[r].size(); ++j)
      ds.inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
  ds.labels = std::move(labels);

  const int max_label = *std::max_element(ds.labels.begin(), ds.labels.end());
  if (*std::min_element(ds.labels.begin(), ds.labels.end()) < 0) throw Error("CSV labels must be non-negative");
  ds.class_count = max_label + 1;

  if (rescale) {
    for (Eigen::Index j = 0; j < ds.inputs.cols(); ++j) {
      const double lo = ds.inputs.col(j).minCoeff();
      const double span = ds.inputs.col(j).maxCoeff() - lo;
      if (span > 0.0)
        ds.inputs.col(j) = ((ds.inputs.col(j).array() - lo) / span).matrix();
      else
        ds.inputs.col(j).setZero();
    }
  } else if ((ds.inputs.array() < 0.0).any() || (ds.inputs.array() > 1.0).any()) {
    throw Error("CSV features fall outside [0, 1]; pass the rescale flag to min-max scale them");
  }
  for (const auto& idx : ds.class_indices())
    if (idx.empty()) throw Error("CSV labels must cover every class from 0 to the maximum label");
  return ds;
}

}  // namespace fedat
