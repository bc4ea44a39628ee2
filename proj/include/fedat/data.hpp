#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fedat/nn.hpp"

namespace fedat {

struct Dataset {
  Matrix inputs;
  std::vector<int> labels;
  int class_count = 0;

  Eigen::Index size() const { return inputs.rows(); }
  /// Sample indices of each class, ascending.
  std::vector<std::vector<int>> class_indices() const;
  /// Gathers the given rows into a Batch.
  Batch gather(const std::vector<int>& indices) const;
  Batch all() const;
};

struct SyntheticSpec {
  int class_count = 10;
  int per_class = 100;
  int input_dim = 10;
  double separation = 0.35;
  double noise = 0.12;  // per-coordinate standard deviation before clipping
  std::uint64_t seed = 0;
};

/// Gaussian blobs around class centers 0.5 + separation * u_c, where u_c are
/// centered simplex vertices when class_count <= input_dim (seeded unit
/// directions otherwise). Clipped to [0, 1]. Rows are grouped by class.
Dataset make_synthetic(const SyntheticSpec& spec);

struct PartitionSpec {
  int clients = 1;
  double skew = 0.0;  // percent of each class held by each non-owning client
  std::uint64_t seed = 0;

  void validate(int class_count) const;
};

struct Partition {
  std::vector<std::vector<int>> shards;            // per client, indices into the dataset
  std::vector<std::vector<int>> majority_classes;  // per client; empty for iid
};

/// Owner of class c is c / (|M| / K). Each non-owner takes floor(n_c * s / 100)
/// samples of c; the owner takes the rest, which absorbs rounding.
Partition partition_non_iid(const Dataset& dataset, const PartitionSpec& spec);

/// Stratified even split: per class, counts differ by at most one across clients.
Partition partition_iid(const Dataset& dataset, int clients, std::uint64_t seed);

/// Majority share in percent for the skew construction, 100 - (K - 1) s.
inline double majority_share(int clients, double skew) { return 100.0 - (clients - 1) * skew; }

/// Loads a CSV with a header row; the column named `label` (or the last
/// column) holds integer class ids. Features must lie in [0, 1] unless
/// `rescale` is set, in which case each column is min-max scaled.
Dataset load_csv(const std::filesystem::path& path, bool rescale);

}  // namespace fedat
