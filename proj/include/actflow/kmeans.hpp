#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "actflow/manifest.hpp"
#include "actflow/npy.hpp"
#include "actflow/rng.hpp"
#include "actflow/store.hpp"

namespace actflow {

struct KMeansParams {
  int restarts = 10;
  int max_iters = 300;
  double rel_tol = 1e-6;       // stop when relative inertia improvement drops below
  std::uint64_t base_seed = 0;
  int threads = 0;             // 0 = one worker per restart up to hardware limit

  void validate() const;
};

/// One layer's clustering solution. The returned solution never has an
/// empty cluster, assignments are distance-optimal against `centroids`,
/// and `inertia` matches the recomputed sum of squared distances.
struct LayerClustering {
  std::string layer_name;
  int k = 0;
  Tensor centroids;                     // k x d
  std::vector<int> assignments;         // per row, in [0, k)
  double inertia = 0.0;
  std::uint64_t seed = 0;               // base seed the fit ran with
  int chosen_restart = 0;
  int iterations_run = 0;
  std::vector<double> restart_inertias; // per restart, index order
  std::vector<double> inertia_trace;    // per iteration of the chosen restart
};

/// Distance-squared-weighted sequential seeding ("k-means++"). Picks k
/// distinct rows; deterministic given the generator state.
Tensor kmeanspp_init(const Tensor& data, int k, SplitMix64& rng);

/// Lloyd iterations from the given initial centroids. Empty clusters are
/// repaired by relocating their centroid to the row farthest from its
/// assigned centroid (farthest first, empty clusters in increasing index
/// order) and pinning that row to the repaired cluster. Inertia is
/// non-increasing across iterations.
LayerClustering lloyd(const Tensor& data, Tensor initial_centroids,
                      const KMeansParams& params);

/// Runs `restarts` independent (init + lloyd) trials, seeding restart r
/// with base_seed XOR (r + 1), and returns the trial with the smallest
/// inertia (ties: lowest restart index). Identical inputs give identical
/// results regardless of thread count.
LayerClustering kmeans_fit(const Tensor& data, int k, const KMeansParams& params);

/// Nearest-centroid assignment; ties break toward the lowest cluster index.
std::vector<int> assign(const Tensor& data, const Tensor& centroids);

/// Feedforward: one fit per included layer with that layer's k.
/// Recurrent: a single fit over all time-step rows.
std::vector<LayerClustering> cluster_layers(const ActivationSet& set,
                                            const Manifest& manifest,
                                            const KMeansParams& params);

nlohmann::json clusterings_to_json(const std::vector<LayerClustering>& layers,
                                   Mode mode);
std::pair<std::vector<LayerClustering>, Mode> clusterings_from_json(
    const nlohmann::json& j);

namespace detail {
/// Deterministic pairwise (tree) reduction; bounds rounding error when
/// accumulating inertia over many rows.
double pairwise_sum(const double* v, std::size_t n);
}  // namespace detail

}  // namespace actflow
