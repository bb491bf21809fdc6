#include "actflow/kmeans.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <stdexcept>
#include <thread>

namespace actflow {
namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

int nearest(const double* row, const Tensor& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.rows; ++j) {
    double d = sq_dist(row, centroids.row_ptr(j), centroids.cols);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace

namespace detail {

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

}  // namespace detail

void KMeansParams::validate() const {
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters must be >= 1");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("kmeans: rel_tol must be >= 0");
}

Tensor kmeanspp_init(const Tensor& data, int k, SplitMix64& rng) {
  const std::size_t rows = data.rows, d = data.cols;
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) > rows)
    throw std::invalid_argument("kmeans: k = " + std::to_string(k) +
                                " exceeds row count " + std::to_string(rows));

  Tensor centroids(static_cast<std::size_t>(k), d);
  std::vector<char> chosen(rows, 0);
  auto take = [&](std::size_t j, std::size_t row) {
    std::copy_n(data.row_ptr(row), d, centroids.data.data() + j * d);
    chosen[row] = 1;
  };

  std::size_t first = rng.index(rows);
  take(0, first);

  std::vector<double> d2(rows);
  for (std::size_t i = 0; i < rows; ++i)
    d2[i] = sq_dist(data.row_ptr(i), data.row_ptr(first), d);

  for (int j = 1; j < k; ++j) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = rows;
    if (total > 0.0) {
      double u = rng.u01() * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < rows; ++i) {
        cum += d2[i];
        if (cum > u) {
          pick = i;
          break;
        }
      }
      if (pick == rows) {
        // fp guard: fall back to the last row with positive weight
        for (std::size_t i = rows; i-- > 0;)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
      }
    }
    if (pick == rows) {
      // all remaining weights are zero (duplicate rows): scan for any
      // unchosen row starting from a uniform position
      std::size_t start = rng.index(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        std::size_t cand = (start + i) % rows;
        if (!chosen[cand]) {
          pick = cand;
          break;
        }
      }
    }
    take(static_cast<std::size_t>(j), pick);
    for (std::size_t i = 0; i < rows; ++i)
      d2[i] = std::min(d2[i], sq_dist(data.row_ptr(i), data.row_ptr(pick), d));
  }
  return centroids;
}

LayerClustering lloyd(const Tensor& data, Tensor centroids,
                      const KMeansParams& params) {
  params.validate();
  const std::size_t rows = data.rows, d = data.cols;
  const int k = static_cast<int>(centroids.rows);
  if (centroids.cols != d)
    throw std::invalid_argument("kmeans: centroid dimension mismatch");
  if (k < 1 || static_cast<std::size_t>(k) > rows)
    throw std::invalid_argument("kmeans: need 1 <= k <= rows");

  std::vector<int> assign(rows, -1), prev;
  std::vector<double> row_d2(rows, 0.0);
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(k), 0);

  LayerClustering out;
  out.k = k;

  double prev_inertia = std::numeric_limits<double>::infinity();
  int iter = 0;
  while (iter < params.max_iters) {
    ++iter;

    // E step: nearest centroid, ties toward the lowest cluster index.
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* x = data.row_ptr(r);
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        double dd = sq_dist(x, centroids.row_ptr(static_cast<std::size_t>(j)), d);
        if (dd < best_d) {
          best_d = dd;
          best = j;
        }
      }
      assign[r] = best;
      row_d2[r] = best_d;
      ++sizes[static_cast<std::size_t>(best)];
    }

    // Repair empty clusters: relocate each empty centroid to the farthest
    // eligible row, pin that row, then let free rows settle. Each round
    // pins at least one row, so at most k rounds run.
    std::vector<char> pinned(rows, 0);
    for (int round = 0; round < k; ++round) {
      bool any_empty = false;
      for (int e = 0; e < k; ++e) {
        if (sizes[static_cast<std::size_t>(e)] != 0) continue;
        any_empty = true;
        std::size_t donor = rows;
        double far_d = -1.0;
        for (std::size_t r = 0; r < rows; ++r) {
          if (pinned[r]) continue;
          if (sizes[static_cast<std::size_t>(assign[r])] < 2) continue;
          if (row_d2[r] > far_d) {
            far_d = row_d2[r];
            donor = r;
          }
        }
        if (donor == rows) break;  // cannot happen while rows >= k
        std::copy_n(data.row_ptr(donor), d,
                    centroids.data.data() + static_cast<std::size_t>(e) * d);
        --sizes[static_cast<std::size_t>(assign[donor])];
        assign[donor] = e;
        sizes[static_cast<std::size_t>(e)] = 1;
        row_d2[donor] = 0.0;
        pinned[donor] = 1;
      }
      if (!any_empty) break;
      // Re-settle free rows against the relocated centroids.
      std::fill(sizes.begin(), sizes.end(), 0);
      for (std::size_t r = 0; r < rows; ++r) {
        if (!pinned[r]) {
          const double* x = data.row_ptr(r);
          int best = 0;
          double best_d = std::numeric_limits<double>::infinity();
          for (int j = 0; j < k; ++j) {
            double dd =
                sq_dist(x, centroids.row_ptr(static_cast<std::size_t>(j)), d);
            if (dd < best_d) {
              best_d = dd;
              best = j;
            }
          }
          assign[r] = best;
          row_d2[r] = best_d;
        }
        ++sizes[static_cast<std::size_t>(assign[r])];
      }
    }

    double inertia = detail::pairwise_sum(row_d2.data(), rows);
    out.inertia_trace.push_back(inertia);
    out.iterations_run = iter;

    bool unchanged = !prev.empty() && prev == assign;
    bool converged = inertia == 0.0 || unchanged ||
                     (iter > 1 && prev_inertia - inertia <= params.rel_tol * prev_inertia);
    prev_inertia = inertia;
    if (converged) break;
    prev = assign;

    // M step: means per cluster, accumulated in row order.
    std::fill(centroids.data.begin(), centroids.data.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double* c = centroids.data.data() +
                  static_cast<std::size_t>(assign[r]) * d;
      const double* x = data.row_ptr(r);
      for (std::size_t i = 0; i < d; ++i) c[i] += x[i];
    }
    for (int j = 0; j < k; ++j) {
      double inv = 1.0 / static_cast<double>(sizes[static_cast<std::size_t>(j)]);
      double* c = centroids.data.data() + static_cast<std::size_t>(j) * d;
      for (std::size_t i = 0; i < d; ++i) c[i] *= inv;
    }
  }

  out.centroids = std::move(centroids);
  out.assignments = std::move(assign);
  out.inertia = out.inertia_trace.back();
  return out;
}

LayerClustering kmeans_fit(const Tensor& data, int k, const KMeansParams& params) {
  params.validate();
  if (k < 1 || static_cast<std::size_t>(k) > data.rows)
    throw std::invalid_argument("kmeans: k = " + std::to_string(k) +
                                " exceeds row count " + std::to_string(data.rows));

  std::vector<LayerClustering> trials(static_cast<std::size_t>(params.restarts));
  auto run_trial = [&](int r) {
    SplitMix64 rng(params.base_seed ^ static_cast<std::uint64_t>(r + 1));
    Tensor init = kmeanspp_init(data, k, rng);
    trials[static_cast<std::size_t>(r)] = lloyd(data, std::move(init), params);
  };

  int workers = params.threads > 0
                    ? params.threads
                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, params.restarts);
  if (workers <= 1) {
    for (int r = 0; r < params.restarts; ++r) run_trial(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < params.restarts;
             r = next.fetch_add(1))
          run_trial(r);
      });
    for (auto& th : pool) th.join();
  }

  int best = 0;
  for (int r = 1; r < params.restarts; ++r)
    if (trials[static_cast<std::size_t>(r)].inertia <
        trials[static_cast<std::size_t>(best)].inertia)
      best = r;

  LayerClustering out = std::move(trials[static_cast<std::size_t>(best)]);
  out.chosen_restart = best;
  out.seed = params.base_seed;
  out.restart_inertias.resize(static_cast<std::size_t>(params.restarts));
  for (int r = 0; r < params.restarts; ++r)
    out.restart_inertias[static_cast<std::size_t>(r)] =
        r == best ? out.inertia : trials[static_cast<std::size_t>(r)].inertia;
  return out;
}

std::vector<int> assign(const Tensor& data, const Tensor& centroids) {
  if (data.cols != centroids.cols)
    throw std::invalid_argument(
        "assign: data dimension " + std::to_string(data.cols) +
        " does not match centroid dimension " + std::to_string(centroids.cols));
  if (centroids.rows == 0)
    throw std::invalid_argument("assign: no centroids");
  std::vector<int> out(data.rows);
  for (std::size_t r = 0; r < data.rows; ++r)
    out[r] = nearest(data.row_ptr(r), centroids);
  return out;
}

std::vector<LayerClustering> cluster_layers(const ActivationSet& set,
                                            const Manifest& manifest,
                                            const KMeansParams& params) {
  if (set.mode != manifest.mode)
    throw std::invalid_argument("cluster_layers: manifest mode does not match set");
  std::vector<LayerClustering> out;
  for (const LayerData& layer : set.layers) {
    LayerClustering c = kmeans_fit(layer.tensor, layer.k, params);
    c.layer_name = layer.name;
    out.push_back(std::move(c));
  }
  return out;
}

nlohmann::json clusterings_to_json(const std::vector<LayerClustering>& layers,
                                   Mode mode) {
  nlohmann::json out;
  out["mode"] = to_string(mode);
  nlohmann::json arr = nlohmann::json::array();
  for (const LayerClustering& c : layers) {
    nlohmann::json lj;
    lj["name"] = c.layer_name;
    lj["k"] = c.k;
    lj["dim"] = c.centroids.cols;
    nlohmann::json cent = nlohmann::json::array();
    for (std::size_t j = 0; j < c.centroids.rows; ++j) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t i = 0; i < c.centroids.cols; ++i)
        row.push_back(c.centroids.at(j, i));
      cent.push_back(std::move(row));
    }
    lj["centroids"] = std::move(cent);
    lj["assignments"] = c.assignments;
    lj["inertia"] = c.inertia;
    lj["seed"] = c.seed;
    lj["chosen_restart"] = c.chosen_restart;
    lj["iterations"] = c.iterations_run;
    lj["restart_inertias"] = c.restart_inertias;
    arr.push_back(std::move(lj));
  }
  out["layers"] = std::move(arr);
  return out;
}

std::pair<std::vector<LayerClustering>, Mode> clusterings_from_json(
    const nlohmann::json& j) {
  Mode mode = mode_from_string(j.at("mode").get<std::string>());
  std::vector<LayerClustering> out;
  for (const auto& lj : j.at("layers")) {
    LayerClustering c;
    c.layer_name = lj.at("name").get<std::string>();
    c.k = lj.at("k").get<int>();
    std::size_t dim = lj.at("dim").get<std::size_t>();
    const auto& cent = lj.at("centroids");
    c.centroids = Tensor(cent.size(), dim);
    for (std::size_t r = 0; r < cent.size(); ++r) {
      if (cent[r].size() != dim)
        throw std::runtime_error("clusters json: centroid row width mismatch");
      for (std::size_t i = 0; i < dim; ++i)
        c.centroids.at(r, i) = cent[r][i].get<double>();
    }
    if (c.centroids.rows != static_cast<std::size_t>(c.k))
      throw std::runtime_error("clusters json: centroid count != k");
    c.assignments = lj.at("assignments").get<std::vector<int>>();
    c.inertia = lj.at("inertia").get<double>();
    c.seed = lj.at("seed").get<std::uint64_t>();
    c.chosen_restart = lj.at("chosen_restart").get<int>();
    c.iterations_run = lj.at("iterations").get<int>();
    c.restart_inertias = lj.at("restart_inertias").get<std::vector<double>>();
    out.push_back(std::move(c));
  }
  return {std::move(out), mode};
}

}  // namespace actflow
